//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! quantities underneath. Exits non-zero if any criterion fails.
//!
//! Release-mode runtime on one core is a few minutes, dominated by the
//! Lyapunov ensembles.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Matrix3;
use softimpact::config::Window;
use softimpact::ensemble::lyapunov_ensemble;
use softimpact::spectrum::power_spectrum;
use softimpact::RunConfig;
use softimpact_core::bath::{correlation_function, fit_exponentials, fit_noise_model_unchecked, FitOptions};
use softimpact_core::diagnostics::{
    analyze_point, lyapunov_largest, test_01, LyapunovOptions, PointOptions, Regime,
};
use softimpact_core::integrator::{run, SimState};
use softimpact_core::model::{derivative_tower, v1};
use softimpact_core::{
    BathParams, MomentDamping, MomentOptions, NoiseGenerator, NoiseModel, RecordFlags, RunSetup, SystemParams,
};

/// A measured quantity against its threshold.
struct Check {
    label: String,
    pass: bool,
}

fn check(pass: bool, label: impl Into<String>) -> Check {
    Check { label: label.into(), pass }
}

fn paper_config() -> RunConfig {
    RunConfig::default()
}

fn fitted_noise(cfg: &RunConfig) -> NoiseModel {
    fit_noise_model_unchecked(&cfg.bath(), &cfg.fit_options()).expect("noise fit")
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Fourth-order central difference.
fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

fn property_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let p = SystemParams::default();

    // Each tower entry against a finite difference of the one below.
    let h = 1e-4;
    let xs: Vec<f64> = (0..=400).map(|i| -1.5 + 0.01 * i as f64).collect();
    let orders: [(&str, Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>); 4] = [
        ("V''", Box::new(move |x| v1(x, 0.0, &p)), Box::new(move |x| derivative_tower(x, &p).v2)),
        ("V'''", Box::new(move |x| derivative_tower(x, &p).v2), Box::new(move |x| derivative_tower(x, &p).v3)),
        ("V''''", Box::new(move |x| derivative_tower(x, &p).v3), Box::new(move |x| derivative_tower(x, &p).v4)),
        ("V'''''", Box::new(move |x| derivative_tower(x, &p).v4), Box::new(move |x| derivative_tower(x, &p).v5)),
    ];
    let mut worst: f64 = 0.0;
    for (_, lower, exact) in &orders {
        let scale = xs.iter().map(|&x| exact(x).abs()).fold(0.0, f64::max);
        for &x in &xs {
            worst = worst.max((central(lower, x, h) - exact(x)).abs() / scale);
        }
    }
    out.push(check(worst < 1e-5, format!("derivative tower vs finite differences: max rel err {worst:.2e} (< 1e-5)")));

    // Memory channel against a trapezoid convolution of the stored momentum.
    let cfg = paper_config();
    let setup = RunSetup {
        transient_cycles: 0,
        record_cycles: 50,
        record: RecordFlags { z: true, f: false, q: false },
        ..cfg.run_setup()
    };
    let traj = run(&setup, &NoiseModel::silent()).expect("deterministic run");
    let b = setup.bath;
    let dt = setup.dt();
    let decay = (-dt / b.tau_c).exp();
    let z = traj.z.as_ref().unwrap();
    let (mut zq, mut p_prev, mut err) = (0.0, 0.0, 0.0f64);
    for (zi, pi) in z.iter().zip(&traj.p) {
        zq = decay * zq - b.gamma / b.tau_c * 0.5 * dt * (decay * p_prev + pi);
        p_prev = *pi;
        err = err.max((zi - zq).abs());
    }
    let rel = err / max_abs(z);
    out.push(check(rel < 1e-3, format!("memory channel vs convolution quadrature over 50 cycles: rel err {rel:.2e} (< 1e-3)")));

    // Uncertainty product with the bath switched off.
    let sys = SystemParams::default();
    let undamped = RunSetup {
        system: sys,
        bath: BathParams { gamma: 0.0, ..BathParams::default() },
        moments: MomentOptions { damping: MomentDamping::BathRate, nonlinear_feed: false },
        steps_per_cycle: (sys.period() / 0.01).round() as usize,
        ..RunSetup::default()
    };
    let stepper = undamped.stepper().unwrap();
    let mut s = SimState::initial(&sys);
    let inv0 = s.moments.uncertainty_product();
    for _ in 0..100 * undamped.steps_per_cycle {
        stepper.step_with_force(&mut s, 0.0).unwrap();
    }
    let drift = (s.moments.uncertainty_product() - inv0).abs() / inv0;
    out.push(check(drift < 1e-6, format!("covariance invariant drift over 100 cycles: {drift:.2e} (< 1e-6)")));

    // Empirical autocovariance of the synthesized noise.
    let noise = fitted_noise(&cfg);
    let sample_dt = 0.05;
    let n = 10_000_000;
    let mut gen = NoiseGenerator::new(&noise, sample_dt, 2024).unwrap();
    let series: Vec<f64> = (0..n).map(|_| gen.step_noise()).collect();
    let lags = [0usize, 1, 5, 20];
    let mut worst: f64 = 0.0;
    for &lag in &lags {
        let m = n - lag;
        let acov = series[..m].iter().zip(&series[lag..]).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        let model = noise.correlation(lag as f64 * sample_dt);
        worst = worst.max((acov - model).abs() / model);
    }
    out.push(check(worst < 0.05, format!("noise autocovariance vs model at lags 0..1 (1e7 samples): max rel dev {worst:.3} (< 0.05)")));

    // Quantum correction vanishes without wall or without hbar.
    let mut zero = true;
    for system in [SystemParams { a: 0.0, ..sys }, SystemParams { hbar: 0.0, ..sys }] {
        let setup = RunSetup {
            system,
            bath: BathParams { hbar: system.hbar, ..BathParams::default() },
            moments: MomentOptions { damping: MomentDamping::BathRate, nonlinear_feed: true },
            transient_cycles: 0,
            record_cycles: 10,
            record: RecordFlags::all(),
            ..RunSetup::default()
        };
        let traj = run(&setup, &noise).unwrap();
        for q in [&traj.q2, &traj.q3, &traj.q4] {
            zero &= q.as_ref().unwrap().iter().all(|&v| v == 0.0);
        }
    }
    out.push(check(zero, "Q identically zero for A = 0 and for hbar = 0"));
    out
}

fn noise_fit() -> Vec<Check> {
    let cfg = paper_config();
    let bath = cfg.bath();
    let model = fit_noise_model_unchecked(&bath, &cfg.fit_options()).unwrap();
    let c0 = correlation_function(0.0, &bath).unwrap();
    let frac = model.fit_residual / c0;
    let mut out = vec![check(frac < 0.02, format!("3-channel residual {:.2e} = {:.4}% of c(0) (< 2%)", model.fit_residual, 100.0 * frac))];

    let opts = FitOptions::default();
    let h = bath.tau_c / opts.points_per_tau_c as f64;
    let lags: Vec<f64> = (0..=500).map(|j| j as f64 * h).collect();
    let amp = bath.gamma * bath.kt / bath.tau_c;
    let target: Vec<f64> = lags.iter().map(|t| amp * (-t / bath.tau_c).exp()).collect();
    let one = fit_exponentials(&lags, &target, 1).unwrap();
    let c = one.components[0];
    let (e_amp, e_tau) = ((c.variance() - amp).abs() / amp, (c.tau - bath.tau_c).abs() / bath.tau_c);
    out.push(check(
        e_amp < 1e-4 && e_tau < 1e-4,
        format!("single-exponential recovery: amplitude rel err {e_amp:.1e}, tau rel err {e_tau:.1e} (< 1e-4)"),
    ));
    out
}

fn q_hierarchy() -> Vec<Check> {
    let maxima = |hbar: f64| {
        let mut cfg = paper_config();
        cfg.system.hbar = hbar;
        cfg.system.x_wall = 0.5;
        cfg.nonlinear_feed = true;
        cfg.transient_cycles = 0;
        cfg.record_cycles = 50;
        cfg.record = RecordFlags { z: false, f: false, q: true };
        let traj = run(&cfg.run_setup(), &fitted_noise(&cfg)).expect("q run");
        [traj.q2, traj.q3, traj.q4].map(|q| max_abs(&q.unwrap()))
    };
    let [q2, q3, q4] = maxima(0.01);
    let decade = |v: f64, centre: f64| v >= 0.1 * centre && v <= 10.0 * centre;
    let small = decade(q2, 1e-1) && decade(q3, 1e-3) && decade(q4, 1e-3);
    let [b2, _, b4] = maxima(1.0);
    vec![
        check(small, format!("hbar = 0.01: max|q2| {q2:.2e} (~1e-1), max|q3| {q3:.2e}, max|q4| {q4:.2e} (~1e-3), within a decade")),
        check(b4 > b2, format!("hbar = 1: max|q4| {b4:.2e} > max|q2| {b2:.2e}")),
    ]
}

fn bifurcation_sequence() -> Vec<Check> {
    let mut cfg = paper_config();
    cfg.desk_scale();
    let noise = fitted_noise(&cfg);
    let opts = PointOptions { lyapunov: None, ..cfg.point_options() };
    let expected = [(1.90, Some(1)), (1.75, Some(2)), (0.50, Some(3)), (0.40, None)];
    expected
        .iter()
        .map(|&(xw, want)| {
            let r = analyze_point(&cfg.run_setup(), &noise, xw, &opts).expect("grid point");
            let ok = match (want, &r.regime) {
                (Some(n), Regime::Periodic(m)) => n == *m,
                (None, Regime::Scattered(_)) => true,
                _ => false,
            };
            let want_s = want.map_or("scattered".to_string(), |n| format!("{n} cluster(s)"));
            check(
                ok,
                format!(
                    "x_wall = {xw:.2}: expected {want_s}, got {:?} ({} crossings; strobe {:?})",
                    r.regime,
                    r.section_x.len(),
                    r.strobe_regime
                ),
            )
        })
        .collect()
}

fn chaos_window() -> Vec<Check> {
    let mut cfg = paper_config();
    cfg.desk_scale();
    cfg.realizations = 50;
    let noise = fitted_noise(&cfg);
    let mut out = Vec::new();
    for (xw, chaotic) in [(0.30, true), (0.40, true), (1.90, false), (1.35, false)] {
        let mut c = cfg.clone();
        c.system.x_wall = xw;
        let s = lyapunov_ensemble(&c, &noise, false);
        let ok = !s.degenerate && if chaotic { s.mean > 0.0 && s.mean > s.std } else { s.mean <= 0.0 };
        let rule = if chaotic { "> 0 and > std" } else { "<= 0" };
        out.push(check(
            ok,
            format!("x_wall = {xw:.2}: lambda = {:.4e} +/- {:.2e} over {} realizations ({rule})", s.mean, s.std, s.succeeded),
        ));
    }
    for (xw, chaotic) in [(0.40, true), (1.35, false)] {
        let mut c = cfg.clone();
        c.system.x_wall = xw;
        c.record_cycles = 2000;
        let traj = run(&c.run_setup(), &noise).expect("strobe run");
        let k = test_01(&traj.strobe_x, c.test01_c_draws, c.seed).expect("0-1 test").k;
        let (ok, rule) = if chaotic { (k > 0.8, "> 0.8") } else { (k < 0.2, "< 0.2") };
        out.push(check(ok, format!("x_wall = {xw:.2}: K = {k:.4} from {} strobe points ({rule})", traj.strobe_x.len())));
    }
    out
}

fn oracles() -> Vec<Check> {
    let mut x = 0.3;
    let logistic: Vec<f64> = (0..2000)
        .map(|_| {
            x = 4.0 * x * (1.0 - x);
            x
        })
        .collect();
    let k_log = test_01(&logistic, 100, 1).unwrap().k;
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let sinus: Vec<f64> = (0..2000).map(|n| (2.0 * PI * n as f64 / phi).sin()).collect();
    let k_sin = test_01(&sinus, 100, 1).unwrap().k;

    let setup = RunSetup {
        system: SystemParams { a: 0.0, force: 0.0, hbar: 0.0, ..SystemParams::default() },
        bath: BathParams::default(),
        steps_per_cycle: 628,
        transient_cycles: 0,
        record_cycles: 40,
        ..RunSetup::default()
    };
    let (p, b) = (setup.system, setup.bath);
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0, 1.0 / p.mass, 0.0,
        -p.k, 0.0, 1.0,
        0.0, -b.gamma / b.tau_c, -1.0 / b.tau_c,
    );
    let exact = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let est = lyapunov_largest(&setup, &NoiseModel::silent(), &LyapunovOptions::default()).unwrap().exponent;
    let rel = (est - exact).abs() / exact.abs();
    vec![
        check(k_log > 0.9, format!("logistic map r = 4: K = {k_log:.4} (> 0.9)")),
        check(k_sin < 0.1, format!("quasiperiodic sinusoid: K = {k_sin:.4} (< 0.1)")),
        check(rel < 0.05, format!("damped linear system: lambda {est:.5} vs eigenvalue {exact:.5}, rel err {rel:.2e} (< 5%)")),
    ]
}

fn fft_discrimination() -> Vec<Check> {
    let mut cfg = paper_config();
    cfg.desk_scale();
    cfg.sample_stride = 10;
    let noise = fitted_noise(&cfg);
    let spectrum = |xw: f64| {
        let mut c = cfg.clone();
        c.system.x_wall = xw;
        let traj = run(&c.run_setup(), &noise).expect("spectrum run");
        power_spectrum(&traj.x, traj.sample_dt(), c.system.omega, Window::Hann).expect("spectrum")
    };
    let chaotic = spectrum(0.40);
    let regular = spectrum(1.35);
    let (f_c, f_r) = (chaotic.floor(0.1, 10.0), regular.floor(0.1, 10.0));
    let peaks = regular.peaks(0.1, 10.0, 10.0).len();
    vec![
        check(f_c >= 100.0 * f_r, format!("floor(0.40) {f_c:.3e} / floor(1.35) {f_r:.3e} = {:.3} (>= 100)", f_c / f_r)),
        check(peaks >= 5, format!("x_wall = 1.35: {peaks} peaks above 10x floor (>= 5)")),
    ]
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Vec<Check>); 7] = [
        ("property suite", property_suite),
        ("noise fit", noise_fit),
        ("correction-order hierarchy", q_hierarchy),
        ("bifurcation sequence", bifurcation_sequence),
        ("chaos-window concordance", chaos_window),
        ("diagnostic oracles", oracles),
        ("FFT discrimination", fft_discrimination),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let checks = f();
        let pass = checks.iter().all(|c| c.pass);
        failed += usize::from(!pass);
        println!("{} criterion {}: {name} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, i + 1, start.elapsed().as_secs_f64());
        for c in &checks {
            println!("    [{}] {}", if c.pass { "ok" } else { "no" }, c.label);
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
