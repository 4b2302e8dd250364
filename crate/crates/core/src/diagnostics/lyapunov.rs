//! Largest Lyapunov exponent of the noisy flow by the two-trajectory
//! (Benettin) method. Fiducial and perturbed copies see the same bath force
//! at every step, so the estimate measures sensitivity to initial conditions
//! rather than divergence between noise realizations.
//!
//! Separation is measured in `(X, P, z, moments)`; OU channel states are
//! shared and therefore never differ.

use crate::bath::{NoiseGenerator, NoiseModel};
use crate::fluctuations::{q_terms, MomentState};
use crate::integrator::{RunSetup, SimState, Stepper};
use crate::model::derivative_tower;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    /// Initial and renormalized separation.
    pub d0: f64,
    /// Time between renormalizations.
    pub renorm_interval: f64,
    /// Halvings of the interval allowed when the separation leaves range.
    pub max_halvings: u32,
    /// `|ln(d / d0)|` above this over one interval counts as out of range.
    pub max_log_ratio: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            d0: 1e-8,
            renorm_interval: 4.0 * core::f64::consts::PI,
            max_halvings: 8,
            max_log_ratio: 16.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    pub exponent: f64,
    pub d0: f64,
    /// Interval actually used after any halvings.
    pub renorm_interval: f64,
    pub halvings: u32,
    /// Accumulation time.
    pub span: f64,
}

fn distance(a: &SimState, b: &SimState) -> f64 {
    let mut s = (a.x - b.x) * (a.x - b.x) + (a.p - b.p) * (a.p - b.p) + (a.z - b.z) * (a.z - b.z);
    for (u, v) in a.moments.as_array().iter().zip(b.moments.as_array()) {
        s += (u - v) * (u - v);
    }
    libm::sqrt(s)
}

/// Pulls `b` toward `a` so that their separation is `scale` times the current one.
fn rescale(a: &SimState, b: &SimState, scale: f64, stepper: &Stepper) -> SimState {
    let lerp = |u: f64, v: f64| u + (v - u) * scale;
    let ma = a.moments.as_array();
    let mb = b.moments.as_array();
    let mut m = [0.0; 12];
    for i in 0..12 {
        m[i] = lerp(ma[i], mb[i]);
    }
    let moments = MomentState::from_array(m);
    let x = lerp(a.x, b.x);
    SimState {
        x,
        p: lerp(a.p, b.p),
        z: lerp(a.z, b.z),
        moments,
        q: q_terms(&moments, &derivative_tower(x, &stepper.system)),
        t: a.t,
    }
}

enum Attempt {
    Done(f64, f64),
    OutOfRange(f64),
}

fn attempt(
    stepper: &Stepper,
    start: &SimState,
    gen: &NoiseGenerator,
    opts: &LyapunovOptions,
    interval_steps: usize,
    total_steps: usize,
) -> Result<Attempt> {
    let mut gen = gen.clone();
    let mut a = *start;
    let mut b = *start;
    b.x += opts.d0;
    b.q = q_terms(&b.moments, &derivative_tower(b.x, &stepper.system));
    let d_init = distance(&a, &b);
    b = rescale(&a, &b, opts.d0 / d_init, stepper);

    let mut sum = 0.0;
    let mut done = 0;
    while done < total_steps {
        let n = interval_steps.min(total_steps - done);
        for _ in 0..n {
            let f = gen.force();
            stepper.step_with_force(&mut a, f)?;
            stepper.step_with_force(&mut b, f)?;
            gen.step_noise();
        }
        done += n;
        let d = distance(&a, &b);
        let lr = libm::log(d / opts.d0);
        if !(d > 0.0 && lr.is_finite() && lr.abs() <= opts.max_log_ratio) {
            return Ok(Attempt::OutOfRange(if lr.is_finite() { lr } else { f64::NAN }));
        }
        sum += lr;
        b = rescale(&a, &b, opts.d0 / d, stepper);
    }
    Ok(Attempt::Done(sum, done as f64 * stepper.dt))
}

/// Exponent of a run described by `setup`: transient cycles are integrated
/// once, then the twin pair is followed for `record_cycles` forcing periods.
pub fn lyapunov_largest(setup: &RunSetup, noise: &NoiseModel, opts: &LyapunovOptions) -> Result<LyapunovEstimate> {
    setup.validate()?;
    if !(opts.d0 > 0.0 && opts.d0.is_finite()) {
        return Err(Error::InvalidParameter { name: "d0", reason: "must be positive" });
    }
    if !(opts.renorm_interval > 0.0 && opts.renorm_interval.is_finite()) {
        return Err(Error::InvalidParameter { name: "renorm_interval", reason: "must be positive" });
    }
    if setup.record_cycles == 0 {
        return Err(Error::InvalidParameter { name: "record_cycles", reason: "Lyapunov span must be nonzero" });
    }
    let stepper = setup.stepper()?;
    let mut gen = NoiseGenerator::new(noise, stepper.dt, setup.seed)?;
    let mut s = SimState::initial(&setup.system);
    for _ in 0..setup.transient_cycles * setup.steps_per_cycle {
        stepper.step(&mut s, &mut gen)?;
    }
    let total_steps = setup.record_cycles * setup.steps_per_cycle;

    let mut interval = opts.renorm_interval;
    let mut last_ratio = f64::NAN;
    for halvings in 0..=opts.max_halvings {
        let steps = (libm::round(interval / stepper.dt) as usize).max(1);
        match attempt(&stepper, &s, &gen, opts, steps, total_steps)? {
            Attempt::Done(sum, span) => {
                return Ok(LyapunovEstimate {
                    exponent: sum / span,
                    d0: opts.d0,
                    renorm_interval: steps as f64 * stepper.dt,
                    halvings,
                    span,
                })
            }
            Attempt::OutOfRange(lr) => {
                last_ratio = lr;
                interval *= 0.5;
            }
        }
    }
    Err(Error::SeparationRange { log_ratio: last_ratio, interval })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathParams;
    use crate::model::SystemParams;
    use nalgebra::Matrix3;

    fn damped_linear() -> RunSetup {
        RunSetup {
            system: SystemParams { a: 0.0, force: 0.0, hbar: 0.0, ..SystemParams::default() },
            bath: BathParams::default(),
            steps_per_cycle: 628,
            transient_cycles: 0,
            record_cycles: 40,
            ..RunSetup::default()
        }
    }

    fn slowest_rate(setup: &RunSetup) -> f64 {
        let (p, b) = (setup.system, setup.bath);
        let a = Matrix3::new(
            0.0, 1.0 / p.mass, 0.0,
            -p.k, 0.0, 1.0,
            0.0, -b.gamma / b.tau_c, -1.0 / b.tau_c,
        );
        a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn damped_linear_matches_eigenvalue() {
        let setup = damped_linear();
        let est = lyapunov_largest(&setup, &NoiseModel::silent(), &LyapunovOptions::default()).unwrap();
        let exact = slowest_rate(&setup);
        assert!(exact < 0.0);
        assert!((est.exponent - exact).abs() < 0.05 * exact.abs(), "{} vs {}", est.exponent, exact);
    }

    #[test]
    fn zero_offset_rejected() {
        let opts = LyapunovOptions { d0: 0.0, ..LyapunovOptions::default() };
        assert!(matches!(
            lyapunov_largest(&damped_linear(), &NoiseModel::silent(), &opts),
            Err(Error::InvalidParameter { name: "d0", .. })
        ));
    }

    #[test]
    fn interval_halves_when_separation_leaves_range() {
        // Strong contraction over a long interval overflows the log-ratio window.
        let opts = LyapunovOptions { renorm_interval: 200.0, max_log_ratio: 5.0, ..LyapunovOptions::default() };
        let est = lyapunov_largest(&damped_linear(), &NoiseModel::silent(), &opts).unwrap();
        assert!(est.halvings > 0);
        assert!(est.renorm_interval < 200.0);
    }
}
