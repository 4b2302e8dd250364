//! Fluctuation moments `<dx^j dp^k>` (Weyl-symmetrized, `2 <= j + k <= 4`)
//! and the quantum correction `Q(t)` they feed.
//!
//! Moments evolve under the fluctuation flow linearized about the mean
//! trajectory, `d(dx)/dt = dp / m`, `d(dp)/dt = -V''(X) dx`, which closes every
//! order exactly. Two optional terms sit on top of it:
//!
//! * relaxation toward the ground-state covariance of the local oscillator
//!   `omega = sqrt(V''(X) / m)` at a fixed rate (zero-temperature Lindblad
//!   damping written for Wigner moments), which keeps the hierarchy bounded
//!   under parametric driving by `V''(X(t))`;
//! * the cubic feed `-V'''(X) (dx^2 - <dx^2>) / 2` in the fluctuation force,
//!   the only source of odd moments. Order-5 moments it needs are closed with
//!   pair x triple products (Gaussian closure keeping third cumulants).

use crate::model::{DerivativeTower, SystemParams};

const LEN: usize = 12;

/// Symmetrized central moments of `(dx, dp)` of total order 2 to 4.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentState {
    a: [f64; LEN],
}

#[inline]
const fn slot(j: usize, k: usize) -> usize {
    let n = j + k;
    let offset = match n {
        2 => 0,
        3 => 3,
        _ => 7,
    };
    offset + (n - j)
}

/// All stored `(j, k)` index pairs in storage order.
pub const INDICES: [(usize, usize); LEN] = [
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 4),
];

const BINOM: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

impl MomentState {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `<dx^j dp^k>`; order 0 is 1, order 1 vanishes (central moments).
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        match j + k {
            0 => 1.0,
            1 => 0.0,
            2..=4 => self.a[slot(j, k)],
            _ => panic!("moment order {} not stored", j + k),
        }
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        self.a[slot(j, k)] = v;
    }

    pub fn as_array(&self) -> &[f64; LEN] {
        &self.a
    }

    pub fn from_array(a: [f64; LEN]) -> Self {
        Self { a }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|v| v.is_finite())
    }

    /// `a20 a02 - a11^2`, conserved by the undamped linear flow and bounded
    /// below by `hbar^2 / 4`.
    pub fn uncertainty_product(&self) -> f64 {
        self.get(2, 0) * self.get(0, 2) - self.get(1, 1) * self.get(1, 1)
    }

    /// Order-5 moment from the pair x triple closure.
    fn closed_order5(&self, j: usize, k: usize) -> f64 {
        debug_assert_eq!(j + k, 5);
        // Variables: j copies of x then k copies of p. Each term picks a
        // pair (covariance) and leaves a triple (third moment).
        let var = |i: usize| usize::from(i >= j); // 0 = x, 1 = p
        let mut total = 0.0;
        for i1 in 0..5 {
            for i2 in i1 + 1..5 {
                let pair = match var(i1) + var(i2) {
                    0 => self.get(2, 0),
                    1 => self.get(1, 1),
                    _ => self.get(0, 2),
                };
                let p_in_triple = (0..5).filter(|&i| i != i1 && i != i2).map(var).sum::<usize>();
                total += pair * self.get(3 - p_in_triple, p_in_triple);
            }
        }
        total
    }

    fn map(&self, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut out = Self::zero();
        for &(j, k) in &INDICES {
            out.set(j, k, f(j, k));
        }
        out
    }

    fn axpy(&self, h: f64, d: &MomentState) -> Self {
        let mut out = *self;
        for i in 0..LEN {
            out.a[i] += h * d.a[i];
        }
        out
    }
}

/// Minimum-uncertainty Gaussian for the free-side oscillator, with fourth
/// moments from Wick factorization.
pub fn init_moments(p: &SystemParams) -> MomentState {
    let w0 = p.omega0();
    let a20 = p.hbar / (2.0 * p.mass * w0);
    let a02 = p.hbar * p.mass * w0 / 2.0;
    gaussian_moments(a20, 0.0, a02)
}

/// Zero-mean Gaussian moments for covariance `(a20, a11, a02)`.
pub fn gaussian_moments(a20: f64, a11: f64, a02: f64) -> MomentState {
    let mut m = MomentState::zero();
    m.set(2, 0, a20);
    m.set(1, 1, a11);
    m.set(0, 2, a02);
    m.set(4, 0, 3.0 * a20 * a20);
    m.set(3, 1, 3.0 * a20 * a11);
    m.set(2, 2, a20 * a02 + 2.0 * a11 * a11);
    m.set(1, 3, 3.0 * a02 * a11);
    m.set(0, 4, 3.0 * a02 * a02);
    m
}

/// Linearized-flow generator `d a_jk / dt = (j/m) a_(j-1,k+1) - k V2 a_(j+1,k-1)`.
pub fn moment_rhs(ms: &MomentState, v2: f64, mass: f64) -> MomentState {
    ms.map(|j, k| {
        let mut d = 0.0;
        if j > 0 {
            d += j as f64 / mass * ms.get(j - 1, k + 1);
        }
        if k > 0 {
            d -= k as f64 * v2 * ms.get(j + 1, k - 1);
        }
        d
    })
}

/// How the moment hierarchy couples to the bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentDamping {
    /// Purely Hamiltonian linearized flow.
    Off,
    /// Ground-state relaxation at rate `Gamma / tau_c`.
    BathRate,
    /// Ground-state relaxation at an explicit rate.
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    pub damping: MomentDamping,
    pub nonlinear_feed: bool,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            damping: MomentDamping::BathRate,
            nonlinear_feed: false,
        }
    }
}

impl MomentOptions {
    pub fn damping_rate(&self, gamma: f64, tau_c: f64) -> f64 {
        match self.damping {
            MomentDamping::Off => 0.0,
            MomentDamping::BathRate => gamma / tau_c,
            MomentDamping::Rate(r) => r,
        }
    }
}

/// Relaxation generator (Wigner form of zero-temperature damping toward the
/// ground state of a harmonic well of frequency `omega`).
pub fn relaxation_rhs(ms: &MomentState, rate: f64, omega: f64, hbar: f64, mass: f64) -> MomentState {
    let dx = rate * hbar / (4.0 * mass * omega);
    let dp = rate * hbar * mass * omega / 4.0;
    ms.map(|j, k| {
        let mut d = -0.5 * rate * (j + k) as f64 * ms.get(j, k);
        if j >= 2 {
            d += dx * (j * (j - 1)) as f64 * ms.get(j - 2, k);
        }
        if k >= 2 {
            d += dp * (k * (k - 1)) as f64 * ms.get(j, k - 2);
        }
        d
    })
}

/// Cubic feed generator from `-V'''(X) (dx^2 - <dx^2>) / 2` in the
/// fluctuation force.
pub fn feed_rhs(ms: &MomentState, v3: f64) -> MomentState {
    let a20 = ms.get(2, 0);
    ms.map(|j, k| {
        if k == 0 {
            return 0.0;
        }
        let upper = if j + k + 1 == 5 {
            ms.closed_order5(j + 2, k - 1)
        } else {
            ms.get(j + 2, k - 1)
        };
        -(k as f64) * 0.5 * v3 * (upper - a20 * ms.get(j, k - 1))
    })
}

/// Full moment generator (linear flow plus optional relaxation and feed) at
/// mean position with potential derivatives `tower`.
pub fn full_rhs(
    ms: &MomentState,
    tower: &DerivativeTower,
    opts: &MomentOptions,
    rate: f64,
    hbar: f64,
    mass: f64,
) -> MomentState {
    let mut d = moment_rhs(ms, tower.v2, mass);
    if rate > 0.0 {
        let omega = libm::sqrt(tower.v2 / mass);
        d = d.axpy(1.0, &relaxation_rhs(ms, rate, omega, hbar, mass));
    }
    if opts.nonlinear_feed {
        d = d.axpy(1.0, &feed_rhs(ms, tower.v3));
    }
    d
}

/// Exact propagation of all moments through the linear map
/// `(dx, dp) -> M (dx, dp)`, `M = [[m00, m01], [m10, m11]]`.
pub fn transform_linear(ms: &MomentState, m: [[f64; 2]; 2]) -> MomentState {
    let mut pw = [[1.0f64; 5]; 4];
    let entries = [m[0][0], m[0][1], m[1][0], m[1][1]];
    for (e, row) in entries.iter().zip(pw.iter_mut()) {
        for i in 1..5 {
            row[i] = row[i - 1] * e;
        }
    }
    let [p00, p01, p10, p11] = pw;
    ms.map(|j, k| {
        let n = j + k;
        let mut acc = 0.0;
        for a in 0..=j {
            let xa = BINOM[j][a] * p00[a] * p01[j - a];
            for b in 0..=k {
                let coef = xa * BINOM[k][b] * p10[b] * p11[k - b];
                acc += coef * ms.get(a + b, n - a - b);
            }
        }
        acc
    })
}

/// Transfer matrix of `dx' = dp / m, dp' = -kappa dx` over `h` (exact for
/// constant `kappa` of either sign, unit determinant).
#[inline]
pub fn transfer_matrix(kappa: f64, mass: f64, h: f64) -> [[f64; 2]; 2] {
    let th2 = kappa / mass * h * h;
    if libm::fabs(th2) < 1e-8 {
        // Taylor series of cos and sinc in th2.
        let c = 1.0 - th2 / 2.0 + th2 * th2 / 24.0;
        let sinc = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
        return [[c, h / mass * sinc], [-kappa * h * sinc, c]];
    }
    if kappa > 0.0 {
        let w = libm::sqrt(kappa / mass);
        let (s, c) = (libm::sin(w * h), libm::cos(w * h));
        [[c, s / (mass * w)], [-mass * w * s, c]]
    } else {
        let w = libm::sqrt(-kappa / mass);
        let (s, c) = (libm::sinh(w * h), libm::cosh(w * h));
        [[c, s / (mass * w)], [mass * w * s, c]]
    }
}

/// Exact solution of the relaxation generator over `h` at constant `omega`:
/// contraction by `exp(-rate h / 2)` plus an independent Gaussian.
pub fn relax_exact(ms: &MomentState, rate: f64, omega: f64, hbar: f64, mass: f64, h: f64) -> MomentState {
    let e = libm::exp(-0.5 * rate * h);
    let fill = 1.0 - e * e;
    let sx2 = hbar / (2.0 * mass * omega) * fill;
    let sp2 = hbar * mass * omega / 2.0 * fill;
    let gx = [1.0, 0.0, sx2, 0.0, 3.0 * sx2 * sx2];
    let gp = [1.0, 0.0, sp2, 0.0, 3.0 * sp2 * sp2];
    let mut epw = [1.0f64; 5];
    for i in 1..5 {
        epw[i] = epw[i - 1] * e;
    }
    ms.map(|j, k| {
        let mut acc = 0.0;
        for a in 0..=j {
            if (j - a) % 2 == 1 {
                continue;
            }
            for b in 0..=k {
                if (k - b) % 2 == 1 {
                    continue;
                }
                acc += BINOM[j][a] * BINOM[k][b] * epw[a + b] * ms.get(a, b) * gx[j - a] * gp[k - b];
            }
        }
        acc
    })
}

/// One-step moment propagator used by the integrator: Strang splitting of
/// feed / relaxation / exact linear transfer.
#[derive(Debug, Clone, Copy)]
pub struct MomentPropagator {
    pub mass: f64,
    pub hbar: f64,
    pub rate: f64,
    pub feed: bool,
}

impl MomentPropagator {
    pub fn new(p: &SystemParams, opts: &MomentOptions, gamma: f64, tau_c: f64) -> Self {
        Self {
            mass: p.mass,
            hbar: p.hbar,
            rate: opts.damping_rate(gamma, tau_c),
            feed: opts.nonlinear_feed,
        }
    }

    /// Advances over `h` with midpoint stiffness `kappa` and the cubic
    /// derivative at the start and end of the step.
    #[inline]
    pub fn advance(&self, ms: &MomentState, kappa: f64, v3_start: f64, v3_end: f64, h: f64) -> MomentState {
        let half = 0.5 * h;
        let mut m = *ms;
        if self.feed {
            m = feed_midpoint(&m, v3_start, half);
        }
        let omega = libm::sqrt(kappa / self.mass);
        if self.rate > 0.0 {
            m = relax_exact(&m, self.rate, omega, self.hbar, self.mass, half);
        }
        m = transform_linear(&m, transfer_matrix(kappa, self.mass, h));
        if self.rate > 0.0 {
            m = relax_exact(&m, self.rate, omega, self.hbar, self.mass, half);
        }
        if self.feed {
            m = feed_midpoint(&m, v3_end, half);
        }
        m
    }
}

fn feed_midpoint(ms: &MomentState, v3: f64, h: f64) -> MomentState {
    let k1 = feed_rhs(ms, v3);
    let mid = ms.axpy(0.5 * h, &k1);
    ms.axpy(h, &feed_rhs(&mid, v3))
}

/// Per-order contributions to the quantum correction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QTerms {
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
}

impl QTerms {
    pub fn total(&self) -> f64 {
        self.q2 + self.q3 + self.q4
    }
}

/// `Q = -[V''' a20 / 2! + V'''' a30 / 3! + V''''' a40 / 4!]` split by order.
#[inline]
pub fn q_terms(ms: &MomentState, tower: &DerivativeTower) -> QTerms {
    QTerms {
        q2: -tower.v3 * ms.get(2, 0) / 2.0,
        q3: -tower.v4 * ms.get(3, 0) / 6.0,
        q4: -tower.v5 * ms.get(4, 0) / 24.0,
    }
}

/// Total quantum correction at mean position `x`.
pub fn q_correction(ms: &MomentState, x: f64, p: &SystemParams) -> f64 {
    q_terms(ms, &crate::model::derivative_tower(x, p)).total()
}
