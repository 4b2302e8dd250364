//! Time stepping of the coupled mean / memory / moment system.
//!
//! One step of size `h` is the symmetric splitting
//!
//! ```text
//! kick(h/2):  P += h/2 (-V'(X, t) + Q + f + z)
//! drift(h):   X += h P / m,  z exact with P frozen,  moments over the
//!             transfer map at the average stiffness of both endpoints,  t += h
//! kick(h/2):  P += h/2 (-V'(X, t) + Q + f + z)
//! ```
//!
//! with the bath force `f` held at its current value and the OU channels
//! advanced once afterwards. The scheme is second order, reversible and
//! symplectic in the conservative limit, so energy errors stay bounded over
//! thousands of cycles.

use alloc::vec::Vec;

use crate::bath::{BathParams, NoiseGenerator, NoiseModel};
use crate::fluctuations::{init_moments, q_terms, MomentOptions, MomentPropagator, MomentState, QTerms};
use crate::model::{derivative_tower, v1, SystemParams};
use crate::{Error, Result};

/// States with `|X|` or `|P|` above this abort the run.
pub const BLOW_UP: f64 = 1e6;

/// Default number of steps per forcing period (`dt` close to `1e-2`).
pub const DEFAULT_STEPS_PER_CYCLE: usize = 1257;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub x: f64,
    pub p: f64,
    pub z: f64,
    pub moments: MomentState,
    /// Quantum correction evaluated at the current `(x, moments)`.
    pub q: QTerms,
    pub t: f64,
}

impl SimState {
    /// `X = P = z = 0` at `t = 0` with minimum-uncertainty moments.
    pub fn initial(p: &SystemParams) -> Self {
        Self::at_rest(0.0, 0.0, 0.0, init_moments(p), p)
    }

    pub fn at_rest(x: f64, p_mom: f64, z: f64, moments: MomentState, p: &SystemParams) -> Self {
        let q = q_terms(&moments, &derivative_tower(x, p));
        Self { x, p: p_mom, z, moments, q, t: 0.0 }
    }
}

/// Mean-variable time derivatives `(dX, dP, dz)` for bath force `f`.
pub fn rhs(s: &SimState, f: f64, p: &SystemParams, b: &BathParams) -> Result<[f64; 3]> {
    let d = [
        s.p / p.mass,
        -v1(s.x, s.t, p) + s.q.total() + f + s.z,
        -b.gamma * s.p / b.tau_c - s.z / b.tau_c,
    ];
    if d.iter().all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(Error::BlowUp { t: s.t, x: s.x, p: s.p })
    }
}

/// Deterministic one-step map for fixed parameters and step size.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    pub system: SystemParams,
    pub bath: BathParams,
    pub dt: f64,
    prop: MomentPropagator,
    z_decay: f64,
}

impl Stepper {
    pub fn new(system: &SystemParams, bath: &BathParams, moments: &MomentOptions, dt: f64) -> Result<Self> {
        system.validate()?;
        bath.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: "must be positive and finite" });
        }
        if let crate::fluctuations::MomentDamping::Rate(r) = moments.damping {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter { name: "moment_damping", reason: "rate must be non-negative" });
            }
        }
        Ok(Self {
            system: *system,
            bath: *bath,
            dt,
            prop: MomentPropagator::new(system, moments, bath.gamma, bath.tau_c),
            z_decay: libm::exp(-dt / bath.tau_c),
        })
    }

    #[inline]
    fn kick_force(&self, s: &SimState, f: f64) -> f64 {
        -v1(s.x, s.t, &self.system) + s.q.total() + f + s.z
    }

    /// Advances `s` by one step with bath force `f` held constant.
    pub fn step_with_force(&self, s: &mut SimState, f: f64) -> Result<()> {
        let h = self.dt;
        let sys = &self.system;
        let tower0 = derivative_tower(s.x, sys);

        let p_half = s.p + 0.5 * h * self.kick_force(s, f);
        let x1 = s.x + h * p_half / sys.mass;
        let tower1 = derivative_tower(x1, sys);
        let kappa = 0.5 * (tower0.v2 + tower1.v2);

        s.moments = self.prop.advance(&s.moments, kappa, tower0.v3, tower1.v3, h);
        s.z = s.z * self.z_decay - self.bath.gamma * p_half * (1.0 - self.z_decay);
        s.x = x1;
        s.t += h;
        s.q = q_terms(&s.moments, &tower1);
        s.p = p_half + 0.5 * h * self.kick_force(s, f);

        if !(s.x.abs() < BLOW_UP && s.p.abs() < BLOW_UP && s.z.is_finite() && s.moments.is_finite()) {
            return Err(Error::BlowUp { t: s.t, x: s.x, p: s.p });
        }
        Ok(())
    }

    /// One step using the generator's current force, then one OU update.
    pub fn step(&self, s: &mut SimState, gen: &mut NoiseGenerator) -> Result<()> {
        self.step_with_force(s, gen.force())?;
        gen.step_noise();
        Ok(())
    }
}

/// Optional series stored alongside `t, X, P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordFlags {
    pub z: bool,
    pub f: bool,
    pub q: bool,
}

impl RecordFlags {
    pub fn all() -> Self {
        Self { z: true, f: true, q: true }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSetup {
    pub system: SystemParams,
    pub bath: BathParams,
    pub moments: MomentOptions,
    pub steps_per_cycle: usize,
    pub transient_cycles: usize,
    pub record_cycles: usize,
    /// Record every `sample_stride`-th step of the recording window.
    pub sample_stride: usize,
    pub record: RecordFlags,
    pub seed: u64,
}

impl Default for RunSetup {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            bath: BathParams::default(),
            moments: MomentOptions::default(),
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            transient_cycles: 1000,
            record_cycles: 3000,
            sample_stride: 1,
            record: RecordFlags::default(),
            seed: 0,
        }
    }
}

impl RunSetup {
    pub fn dt(&self) -> f64 {
        self.system.period() / self.steps_per_cycle as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.bath.validate()?;
        if self.steps_per_cycle == 0 {
            return Err(Error::InvalidParameter { name: "steps_per_cycle", reason: "must be at least 1" });
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter { name: "sample_stride", reason: "must be at least 1" });
        }
        Ok(())
    }

    pub fn stepper(&self) -> Result<Stepper> {
        Stepper::new(&self.system, &self.bath, &self.moments, self.dt())
    }
}

/// Uniformly sampled recording window plus one strobe point per forcing period.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub sample_stride: usize,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub f: Option<Vec<f64>>,
    pub q2: Option<Vec<f64>>,
    pub q3: Option<Vec<f64>>,
    pub q4: Option<Vec<f64>>,
    /// `X` at the end of each recorded forcing period.
    pub strobe_x: Vec<f64>,
    /// `P` at the end of each recorded forcing period.
    pub strobe_p: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sampling interval of the stored series.
    pub fn sample_dt(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }

    fn push(&mut self, s: &SimState, f: f64) {
        self.t.push(s.t);
        self.x.push(s.x);
        self.p.push(s.p);
        if let Some(v) = self.z.as_mut() {
            v.push(s.z);
        }
        if let Some(v) = self.f.as_mut() {
            v.push(f);
        }
        if let (Some(a), Some(b), Some(c)) = (self.q2.as_mut(), self.q3.as_mut(), self.q4.as_mut()) {
            a.push(s.q.q2);
            b.push(s.q.q3);
            c.push(s.q.q4);
        }
    }
}

/// Integrates transient plus recording cycles from the standard initial state.
pub fn run(setup: &RunSetup, noise: &NoiseModel) -> Result<Trajectory> {
    let mut progress = |_: usize| {};
    run_with_progress(setup, noise, &mut progress)
}

/// As [`run`], calling `progress(cycle)` after each completed forcing period.
pub fn run_with_progress(setup: &RunSetup, noise: &NoiseModel, progress: &mut dyn FnMut(usize)) -> Result<Trajectory> {
    setup.validate()?;
    let stepper = setup.stepper()?;
    let mut gen = NoiseGenerator::new(noise, stepper.dt, setup.seed)?;
    let mut s = SimState::initial(&setup.system);

    let spc = setup.steps_per_cycle;
    let start = setup.transient_cycles * spc;
    let total = start + setup.record_cycles * spc;
    let n_samples = setup.record_cycles * spc / setup.sample_stride;
    let opt = |on: bool| if on { Some(Vec::with_capacity(n_samples)) } else { None };
    let mut traj = Trajectory {
        dt: stepper.dt,
        sample_stride: setup.sample_stride,
        t: Vec::with_capacity(n_samples),
        x: Vec::with_capacity(n_samples),
        p: Vec::with_capacity(n_samples),
        z: opt(setup.record.z),
        f: opt(setup.record.f),
        q2: opt(setup.record.q),
        q3: opt(setup.record.q),
        q4: opt(setup.record.q),
        strobe_x: Vec::with_capacity(setup.record_cycles),
        strobe_p: Vec::with_capacity(setup.record_cycles),
    };

    for i in 0..total {
        let f = gen.force();
        stepper.step_with_force(&mut s, f)?;
        gen.step_noise();
        // Steps are re-timed from the index so that t carries no round-off drift.
        s.t = (i + 1) as f64 * stepper.dt;
        let done = i + 1;
        if done > start {
            let j = done - start;
            if j.is_multiple_of(setup.sample_stride) {
                traj.push(&s, f);
            }
            if j.is_multiple_of(spc) {
                traj.strobe_x.push(s.x);
                traj.strobe_p.push(s.p);
            }
        }
        if done % spc == 0 {
            progress(done / spc);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluctuations::MomentDamping;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};

    fn harmonic() -> SystemParams {
        SystemParams { a: 0.0, force: 0.0, hbar: 0.0, ..SystemParams::default() }
    }

    fn no_bath() -> BathParams {
        BathParams { gamma: 0.0, ..BathParams::default() }
    }

    #[test]
    fn harmonic_rhs() {
        let p = harmonic();
        let s = SimState::at_rest(0.3, -0.2, 0.0, MomentState::zero(), &p);
        let d = rhs(&s, 0.0, &p, &no_bath()).unwrap();
        assert_eq!(d, [-0.2, -0.3, 0.0]);
    }

    #[test]
    fn constant_force_fixed_point() {
        let p = harmonic();
        let f0 = 0.7;
        let s = SimState::at_rest(f0 / p.k, 0.0, 0.0, MomentState::zero(), &p);
        let d = rhs(&s, f0, &p, &BathParams::default()).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15));
        let st = Stepper::new(&p, &BathParams::default(), &MomentOptions::default(), 0.01).unwrap();
        let mut s2 = s;
        for _ in 0..1000 {
            st.step_with_force(&mut s2, f0).unwrap();
        }
        assert!((s2.x - 0.7).abs() < 1e-14 && s2.p.abs() < 1e-14 && s2.z.abs() < 1e-14);
    }

    #[test]
    fn zero_derivative_step_only_advances_time() {
        let p = SystemParams { k: 1e-300, a: 0.0, force: 0.0, hbar: 0.0, ..SystemParams::default() };
        let st = Stepper::new(&p, &no_bath(), &MomentOptions::default(), 0.25).unwrap();
        let mut s = SimState::at_rest(0.0, 0.0, 0.0, MomentState::zero(), &p);
        st.step_with_force(&mut s, 0.0).unwrap();
        assert_eq!((s.x, s.p, s.z, s.t), (0.0, 0.0, 0.0, 0.25));
    }

    #[test]
    fn z_tracks_exponential_convolution_for_unit_momentum() {
        // Free particle with P held at 1 by an opposing bath force f = -z.
        let p = SystemParams { k: 1e-300, a: 0.0, force: 0.0, hbar: 0.0, ..SystemParams::default() };
        let b = BathParams::default();
        let st = Stepper::new(&p, &b, &MomentOptions::default(), 0.01).unwrap();
        let mut s = SimState::at_rest(0.0, 1.0, 0.0, MomentState::zero(), &p);
        for i in 1..=2000 {
            let f = -s.z;
            st.step_with_force(&mut s, f).unwrap();
            s.p = 1.0;
            let t = i as f64 * 0.01;
            let exact = -b.gamma * (1.0 - (-t / b.tau_c).exp());
            assert!((s.z - exact).abs() < 1e-4 * exact.abs().max(1e-3), "t={t}");
        }
    }

    fn linear_oracle(p: &SystemParams, b: &BathParams, y0: [f64; 3], t: f64) -> Vector3<f64> {
        let a = Matrix3::new(
            0.0, 1.0 / p.mass, 0.0,
            -p.k, 0.0, 1.0,
            0.0, -b.gamma / b.tau_c, -1.0 / b.tau_c,
        );
        (a * t).exp() * Vector3::new(y0[0], y0[1], y0[2])
    }

    fn damped_error(dt: f64, t_end: f64) -> f64 {
        let p = harmonic();
        let b = BathParams::default();
        let st = Stepper::new(&p, &b, &MomentOptions::default(), dt).unwrap();
        let mut s = SimState::at_rest(1.0, 0.0, 0.0, MomentState::zero(), &p);
        let n = (t_end / dt).round() as usize;
        for _ in 0..n {
            st.step_with_force(&mut s, 0.0).unwrap();
        }
        let e = linear_oracle(&p, &b, [1.0, 0.0, 0.0], n as f64 * dt);
        ((s.x - e[0]).powi(2) + (s.p - e[1]).powi(2) + (s.z - e[2]).powi(2)).sqrt()
    }

    #[test]
    fn second_order_convergence() {
        let (e1, e2, e3) = (damped_error(0.04, 20.0), damped_error(0.02, 20.0), damped_error(0.01, 20.0));
        assert!((e1 / e2 - 4.0).abs() < 0.3, "ratio {}", e1 / e2);
        assert!((e2 / e3 - 4.0).abs() < 0.3, "ratio {}", e2 / e3);
    }

    #[test]
    fn harmonic_energy_bounded_over_thousand_cycles() {
        let p = harmonic();
        let st = Stepper::new(&p, &no_bath(), &MomentOptions::default(), 0.01).unwrap();
        let mut s = SimState::at_rest(1.0, 0.0, 0.0, MomentState::zero(), &p);
        let e0 = 0.5;
        let steps = (1000.0 * p.period() / 0.01) as usize;
        let mut worst = 0.0f64;
        for i in 0..steps {
            st.step_with_force(&mut s, 0.0).unwrap();
            if i % 97 == 0 {
                let e = 0.5 * s.p * s.p + 0.5 * s.x * s.x;
                worst = worst.max((e - e0).abs() / e0);
            }
        }
        assert!(worst < 1e-4, "relative energy error {worst}");
        // Phase against the closed form stays small as well.
        let t = s.t;
        assert!((s.x - t.cos()).abs() < 0.1);
    }

    #[test]
    fn augmented_energy_decays() {
        // Mechanical energy plus the memory store tau_c z^2 / (2 Gamma) obeys
        // dE/dt = -z^2 / Gamma; checked once per oscillator period.
        let p = harmonic();
        let b = BathParams::default();
        let st = Stepper::new(&p, &b, &MomentOptions::default(), 0.01).unwrap();
        let mut s = SimState::at_rest(1.0, 0.5, 0.0, MomentState::zero(), &p);
        let energy = |s: &SimState| 0.5 * s.p * s.p + 0.5 * s.x * s.x + b.tau_c * s.z * s.z / (2.0 * b.gamma);
        let e0 = energy(&s);
        let mut prev = e0;
        for _ in 0..150 {
            for _ in 0..628 {
                st.step_with_force(&mut s, 0.0).unwrap();
            }
            let e = energy(&s);
            assert!(e <= prev + 5e-5 * e0, "{e} > {prev}");
            prev = e;
        }
        assert!(prev < 1e-3 * e0);
    }

    #[test]
    fn moment_invariant_without_bath() {
        let sys = SystemParams::default();
        let setup = RunSetup {
            system: sys,
            bath: no_bath(),
            moments: MomentOptions { damping: MomentDamping::BathRate, nonlinear_feed: false },
            steps_per_cycle: (sys.period() / 0.01).round() as usize,
            ..RunSetup::default()
        };
        let st = setup.stepper().unwrap();
        let mut s = SimState::initial(&sys);
        let inv0 = s.moments.uncertainty_product();
        for _ in 0..100 * setup.steps_per_cycle {
            st.step_with_force(&mut s, 0.0).unwrap();
        }
        assert_eq!(s.z, 0.0);
        let drift = (s.moments.uncertainty_product() - inv0).abs() / inv0;
        assert!(drift < 1e-6, "drift {drift}");
    }

    #[test]
    fn blow_up_is_reported() {
        let p = SystemParams { force: 1e9, ..SystemParams::default() };
        let st = Stepper::new(&p, &BathParams::default(), &MomentOptions::default(), 0.5).unwrap();
        let mut s = SimState::initial(&p);
        let mut err = None;
        for _ in 0..100 {
            if let Err(e) = st.step_with_force(&mut s, 0.0) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::BlowUp { .. })));
    }

    fn short_setup() -> RunSetup {
        RunSetup {
            transient_cycles: 2,
            record_cycles: 3,
            steps_per_cycle: 200,
            sample_stride: 4,
            record: RecordFlags::all(),
            seed: 9,
            ..RunSetup::default()
        }
    }

    fn small_noise() -> NoiseModel {
        NoiseModel {
            components: alloc::vec![crate::bath::NoiseComponent { d: 1e-3, tau: 1.0 }],
            fit_residual: 0.0,
        }
    }

    #[test]
    fn run_layout_and_determinism() {
        let setup = short_setup();
        let a = run(&setup, &small_noise()).unwrap();
        let b = run(&setup, &small_noise()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3 * 200 / 4);
        assert_eq!(a.strobe_x.len(), 3);
        assert_relative_eq!(a.t[0], (2 * 200 + 4) as f64 * setup.dt(), max_relative = 1e-15);
        assert_eq!(a.q2.as_ref().unwrap().len(), a.len());
        let c = run(&RunSetup { seed: 10, ..setup }, &small_noise()).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn empty_recording_window() {
        let setup = RunSetup { record_cycles: 0, ..short_setup() };
        let t = run(&setup, &small_noise()).unwrap();
        assert!(t.is_empty() && t.strobe_x.is_empty());
    }
}
