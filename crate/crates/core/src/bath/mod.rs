//! Lorentzian heat bath: memory kernel, quantum noise correlation, its
//! multi-exponential fit and the Ornstein-Uhlenbeck channels that synthesize
//! the c-number noise.

mod fit;
mod nnls;
mod noise;

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::quad::{self, Tolerance};
use crate::{Error, Result};

pub use fit::{
    fit_exponentials, fit_noise_model, fit_noise_model_unchecked, sample_correlation, FitOptions, NoiseComponent,
    NoiseModel,
};
pub use noise::NoiseGenerator;

/// Dissipation strength, bath correlation time, temperature and `hbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    pub gamma: f64,
    pub tau_c: f64,
    pub kt: f64,
    pub hbar: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            tau_c: 3.0,
            kt: 0.01,
            hbar: 0.01,
        }
    }
}

impl BathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter { name: "Gamma", reason: "must be non-negative and finite" });
        }
        if !(self.tau_c > 0.0 && self.tau_c.is_finite()) {
            return Err(Error::InvalidParameter { name: "tau_c", reason: "must be positive and finite" });
        }
        if !(self.kt > 0.0 && self.kt.is_finite()) {
            return Err(Error::InvalidParameter { name: "kT", reason: "must be positive and finite" });
        }
        if !(self.hbar >= 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidParameter { name: "hbar", reason: "must be non-negative and finite" });
        }
        Ok(())
    }

    /// Frequency at which the Lorentzian envelope has fallen to `1e-12` of
    /// its peak; the spectral integrals are truncated there.
    pub fn omega_cutoff(&self) -> f64 {
        libm::sqrt(1e24 - 1.0) / self.tau_c
    }
}

/// Exponential memory kernel `(Gamma / tau_c) exp(-t / tau_c)`.
pub fn memory_kernel(t: f64, b: &BathParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter { name: "t", reason: "memory kernel needs t >= 0" });
    }
    Ok(b.gamma / b.tau_c * libm::exp(-t / b.tau_c))
}

/// `hbar w coth(hbar w / 2kT)`, tending to `2 kT` as `hbar w -> 0`.
#[inline]
pub fn thermal_energy(w: f64, b: &BathParams) -> f64 {
    let x = b.hbar * w / (2.0 * b.kt);
    let x_coth = if x < 1e-4 { 1.0 + x * x / 3.0 } else { x / libm::tanh(x) };
    2.0 * b.kt * x_coth
}

/// Spectral amplitude multiplying `cos(w tau)` in the correlation integral:
/// `(1/2) (2/pi) Gamma / (1 + w^2 tau_c^2) * hbar w coth(hbar w / 2kT)`.
#[inline]
pub fn spectral_amplitude(w: f64, b: &BathParams) -> f64 {
    b.gamma / (PI * (1.0 + w * w * b.tau_c * b.tau_c)) * thermal_energy(w, b)
}

fn correlation_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-16,
        rel: 1e-10,
        max_intervals: 20_000,
    }
}

/// Breakpoints where the amplitude changes scale: multiples of `1/tau_c`
/// and the thermal frequency `2kT/hbar`, capped at `upper`.
fn scale_breakpoints(b: &BathParams, upper: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    pts.push(0.0);
    let mut w = 0.5 / b.tau_c;
    while w < upper {
        pts.push(w);
        w *= 3.0;
    }
    if b.hbar > 0.0 {
        let thermal = 2.0 * b.kt / b.hbar;
        if thermal < upper {
            pts.push(thermal);
        }
    }
    pts.push(upper);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    pts
}

/// Symmetrized noise correlation `c(tau) = <f(t) f(t + tau)>_s` of the
/// Lorentzian bath,
///
/// ```text
/// c(tau) = (1/2) int_0^W dw (2/pi) Gamma / (1 + w^2 tau_c^2) hbar w coth(hbar w / 2kT) cos(w tau)
/// ```
///
/// with `W` the envelope cutoff of [`BathParams::omega_cutoff`].
///
/// For `tau > 0` the integral is split into a directly integrated head whose
/// panels follow the half period `pi / tau`, and an oscillatory tail summed
/// half-period by half-period and accelerated with Wynn's epsilon algorithm.
/// The part of that tail beyond `W` is removed with its asymptotic expansion.
pub fn correlation_function(tau: f64, b: &BathParams) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter { name: "tau", reason: "correlation lag must be >= 0" });
    }
    let cutoff = b.omega_cutoff();
    let tol = correlation_tolerance();
    let mut amp = |w: f64| spectral_amplitude(w, b);

    if tau == 0.0 {
        let pts = scale_breakpoints(b, cutoff);
        return Ok(quad::integrate_panels(&mut amp, &pts, tol)?.value);
    }

    let half = PI / tau;
    let mut head_end = 20.0 / b.tau_c;
    if b.hbar > 0.0 {
        let thermal = 40.0 * b.kt / b.hbar;
        if thermal < 1e4 / b.tau_c {
            head_end = head_end.max(thermal);
        }
    }
    head_end = half * libm::ceil(head_end / half);

    let mut integrand = |w: f64| spectral_amplitude(w, b) * libm::cos(w * tau);
    if head_end >= cutoff {
        let mut pts = scale_breakpoints(b, cutoff);
        let mut w = half;
        while w < cutoff {
            pts.push(w);
            w += half;
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        return Ok(quad::integrate_panels(&mut integrand, &pts, tol)?.value);
    }

    let mut pts = scale_breakpoints(b, head_end);
    let mut w = half;
    while w < head_end {
        pts.push(w);
        w += half;
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let head = quad::integrate_panels(&mut integrand, &pts, tol)?;

    let tail = oscillatory_tail(&mut integrand, head_end, half, cutoff, head.value.abs())?;
    let beyond = if tail.reached_cutoff {
        0.0
    } else {
        asymptotic_tail(|w| spectral_amplitude(w, b), cutoff, tau)
    };
    Ok(head.value + tail.value - beyond)
}

struct Tail {
    value: f64,
    reached_cutoff: bool,
}

fn oscillatory_tail<F: FnMut(f64) -> f64>(
    f: &mut F,
    start: f64,
    half: f64,
    cutoff: f64,
    scale: f64,
) -> Result<Tail> {
    let tol = Tolerance {
        abs: 1e-18,
        rel: 1e-12,
        max_intervals: 200,
    };
    let mut partial: Vec<f64> = Vec::new();
    let mut sum = 0.0;
    let mut prev_estimate = f64::NAN;
    let mut lo = start;
    for n in 0..400 {
        let mut hi = lo + half;
        let last = hi >= cutoff;
        if last {
            hi = cutoff;
        }
        sum += quad::integrate(&mut *f, lo, hi, tol)?.value;
        partial.push(sum);
        if last {
            return Ok(Tail { value: sum, reached_cutoff: true });
        }
        lo = hi;
        if n >= 8 && n % 2 == 0 {
            let estimate = wynn_epsilon(&partial);
            let diff = (estimate - prev_estimate).abs();
            if diff <= 1e-11 * (scale + estimate.abs()) + 1e-18 {
                return Ok(Tail { value: estimate, reached_cutoff: false });
            }
            prev_estimate = estimate;
        }
    }
    Err(Error::Quadrature {
        estimate: prev_estimate,
        achieved: (wynn_epsilon(&partial) - prev_estimate).abs(),
        requested: 1e-11 * scale,
    })
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums; returns
/// the deepest even-column entry.
fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    if n < 3 {
        return s[n - 1];
    }
    // prev = column k-1, cur = column k.
    let mut prev = alloc::vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = s[n - 1];
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d == 0.0 {
                return if k % 2 == 0 { cur[i + 1] } else { best };
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            let candidate = *cur.last().unwrap();
            if candidate.is_finite() {
                best = candidate;
            }
        }
    }
    best
}

/// `int_a^inf g(w) cos(w tau) dw` from two terms of integration by parts;
/// valid when `a tau >> 1` and `g` decays algebraically.
fn asymptotic_tail<G: Fn(f64) -> f64>(g: G, a: f64, tau: f64) -> f64 {
    let h = 1e-3 * a;
    let dg = (g(a + h) - g(a - h)) / (2.0 * h);
    -g(a) * libm::sin(a * tau) / tau - dg * libm::cos(a * tau) / (tau * tau)
}
