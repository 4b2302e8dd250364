//! Flat `key = value` run configuration.
//!
//! Every setting has a default; files and `--set` overrides are merged in
//! order and unknown keys are rejected. [`RunConfig::render`] writes the full
//! effective configuration back in the same syntax, which is what output files
//! embed as `# key=value` metadata.

use std::fmt::Write as _;
use std::path::Path;

use softimpact_core::bath::FitOptions;
use softimpact_core::diagnostics::{Direction, LyapunovOptions, PointOptions};
use softimpact_core::fluctuations::{MomentDamping, MomentOptions};
use softimpact_core::integrator::{RecordFlags, RunSetup, DEFAULT_STEPS_PER_CYCLE};
use softimpact_core::{BathParams, SystemParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("malformed line {line}: `{text}` (expected key = value)")]
    Syntax { line: usize, text: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid parameter `{0}`")]
    Invalid(String),
}

/// Window applied to spectrum segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

/// Noise seeds across bifurcation grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Same noise realization at every `x_wall`.
    Fixed,
    /// Seed derived from the master seed and the grid index.
    Fresh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemParams,
    pub gamma: f64,
    pub tau_c: f64,
    pub kt: f64,
    pub noise_components: usize,
    pub fit_tolerance: f64,
    /// Bath noise on or off; off keeps dissipation and drops the fluctuating force.
    pub noise: bool,
    pub moment_damping: MomentDamping,
    pub nonlinear_feed: bool,
    pub steps_per_cycle: usize,
    pub transient_cycles: usize,
    pub record_cycles: usize,
    pub sample_stride: usize,
    pub record: RecordFlags,
    pub seed: u64,
    pub direction: Direction,
    pub cluster_tol: f64,
    pub lyap_d0: f64,
    /// Renormalization interval in forcing periods.
    pub lyap_interval: f64,
    pub lyap_max_halvings: u32,
    pub realizations: usize,
    pub test01_c_draws: usize,
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    pub seed_policy: SeedPolicy,
    pub scan_lyapunov: bool,
    pub window: Window,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BathParams::default();
        Self {
            system: SystemParams::default(),
            gamma: b.gamma,
            tau_c: b.tau_c,
            kt: b.kt,
            noise_components: 3,
            fit_tolerance: 0.02,
            noise: true,
            moment_damping: MomentDamping::BathRate,
            nonlinear_feed: false,
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            transient_cycles: 1000,
            record_cycles: 3000,
            sample_stride: 1,
            record: RecordFlags::default(),
            seed: 1,
            direction: Direction::Down,
            cluster_tol: 0.02,
            lyap_d0: 1e-8,
            lyap_interval: 1.0,
            lyap_max_halvings: 8,
            realizations: 50,
            test01_c_draws: 100,
            grid_start: 0.2,
            grid_stop: 2.0,
            grid_step: 0.01,
            seed_policy: SeedPolicy::Fixed,
            scan_lyapunov: true,
            window: Window::Hann,
        }
    }
}

/// All accepted keys, in render order.
pub const KEYS: &[&str] = &[
    "k",
    "A",
    "m",
    "x_wall",
    "F",
    "Omega",
    "hbar",
    "c",
    "Gamma",
    "tau_c",
    "kT",
    "noise_components",
    "fit_tolerance",
    "noise",
    "moment_damping",
    "nonlinear_feed",
    "steps_per_cycle",
    "transient_cycles",
    "record_cycles",
    "sample_stride",
    "record_z",
    "record_f",
    "record_q",
    "seed",
    "poincare_direction",
    "cluster_tol",
    "lyap_d0",
    "lyap_interval",
    "lyap_max_halvings",
    "realizations",
    "test01_c_draws",
    "grid_start",
    "grid_stop",
    "grid_step",
    "seed_policy",
    "scan_lyapunov",
    "window",
];

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.into() }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| bad(key, v, "not a number"))?;
    if !x.is_finite() {
        return Err(bad(key, v, "must be finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| bad(key, v, "not a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "expected true/false")),
    }
}

impl RunConfig {
    /// Applies one `key`, `value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let s = &mut self.system;
        match key.trim() {
            "k" => s.k = parse_f64(key, v)?,
            "A" => s.a = parse_f64(key, v)?,
            "m" => s.mass = parse_f64(key, v)?,
            "x_wall" => s.x_wall = parse_f64(key, v)?,
            "F" => s.force = parse_f64(key, v)?,
            "Omega" => s.omega = parse_f64(key, v)?,
            "hbar" => s.hbar = parse_f64(key, v)?,
            "c" => s.c_slope = parse_f64(key, v)?,
            "Gamma" => self.gamma = parse_f64(key, v)?,
            "tau_c" => self.tau_c = parse_f64(key, v)?,
            "kT" => self.kt = parse_f64(key, v)?,
            "noise_components" => self.noise_components = parse_usize(key, v)?,
            "fit_tolerance" => self.fit_tolerance = parse_f64(key, v)?,
            "noise" => self.noise = parse_bool(key, v)?,
            "moment_damping" => {
                self.moment_damping = match v {
                    "off" => MomentDamping::Off,
                    "bath" => MomentDamping::BathRate,
                    other => MomentDamping::Rate(parse_f64(key, other).map_err(|_| bad(key, v, "expected off, bath or a rate"))?),
                }
            }
            "nonlinear_feed" => self.nonlinear_feed = parse_bool(key, v)?,
            "steps_per_cycle" => self.steps_per_cycle = parse_usize(key, v)?,
            "transient_cycles" => self.transient_cycles = parse_usize(key, v)?,
            "record_cycles" => self.record_cycles = parse_usize(key, v)?,
            "sample_stride" => self.sample_stride = parse_usize(key, v)?,
            "record_z" => self.record.z = parse_bool(key, v)?,
            "record_f" => self.record.f = parse_bool(key, v)?,
            "record_q" => self.record.q = parse_bool(key, v)?,
            "seed" => self.seed = v.parse().map_err(|_| bad(key, v, "not an unsigned 64-bit integer"))?,
            "poincare_direction" => {
                self.direction = match v {
                    "down" => Direction::Down,
                    "up" => Direction::Up,
                    "both" => Direction::Both,
                    _ => return Err(bad(key, v, "expected down, up or both")),
                }
            }
            "cluster_tol" => self.cluster_tol = parse_f64(key, v)?,
            "lyap_d0" => self.lyap_d0 = parse_f64(key, v)?,
            "lyap_interval" => self.lyap_interval = parse_f64(key, v)?,
            "lyap_max_halvings" => {
                self.lyap_max_halvings = v.parse().map_err(|_| bad(key, v, "not a non-negative integer"))?
            }
            "realizations" => self.realizations = parse_usize(key, v)?,
            "test01_c_draws" => self.test01_c_draws = parse_usize(key, v)?,
            "grid_start" => self.grid_start = parse_f64(key, v)?,
            "grid_stop" => self.grid_stop = parse_f64(key, v)?,
            "grid_step" => self.grid_step = parse_f64(key, v)?,
            "seed_policy" => {
                self.seed_policy = match v {
                    "fixed" => SeedPolicy::Fixed,
                    "fresh" => SeedPolicy::Fresh,
                    _ => return Err(bad(key, v, "expected fixed or fresh")),
                }
            }
            "scan_lyapunov" => self.scan_lyapunov = parse_bool(key, v)?,
            "window" => {
                self.window = match v {
                    "hann" => Window::Hann,
                    "none" => Window::Rectangular,
                    _ => return Err(bad(key, v, "expected hann or none")),
                }
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        self.merge_text(&text)
    }

    /// Applies a single `key=value` override.
    pub fn merge_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: 0, text: kv.to_string() })?;
        self.set(k.trim(), v)
    }

    /// Desk scale: 200 transient and 500 recorded cycles.
    pub fn desk_scale(&mut self) {
        self.transient_cycles = 200;
        self.record_cycles = 500;
    }

    /// Full scale: 1000 realizations per ensemble.
    pub fn full_scale(&mut self) {
        self.realizations = 1000;
    }

    pub fn bath(&self) -> BathParams {
        BathParams { gamma: self.gamma, tau_c: self.tau_c, kt: self.kt, hbar: self.system.hbar }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { n: self.noise_components, tolerance: self.fit_tolerance, ..FitOptions::default() }
    }

    pub fn moment_options(&self) -> MomentOptions {
        MomentOptions { damping: self.moment_damping, nonlinear_feed: self.nonlinear_feed }
    }

    pub fn run_setup(&self) -> RunSetup {
        RunSetup {
            system: self.system,
            bath: self.bath(),
            moments: self.moment_options(),
            steps_per_cycle: self.steps_per_cycle,
            transient_cycles: self.transient_cycles,
            record_cycles: self.record_cycles,
            sample_stride: self.sample_stride,
            record: self.record,
            seed: self.seed,
        }
    }

    pub fn lyapunov_options(&self) -> LyapunovOptions {
        LyapunovOptions {
            d0: self.lyap_d0,
            renorm_interval: self.lyap_interval * self.system.period(),
            max_halvings: self.lyap_max_halvings,
            ..LyapunovOptions::default()
        }
    }

    pub fn point_options(&self) -> PointOptions {
        PointOptions {
            direction: self.direction,
            cluster_tol: self.cluster_tol,
            lyapunov: self.scan_lyapunov.then(|| self.lyapunov_options()),
        }
    }

    /// Checks every physical and numerical setting.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: softimpact_core::Error| ConfigError::Invalid(e.to_string());
        self.system.validate().map_err(inv)?;
        self.bath().validate().map_err(inv)?;
        self.fit_options().validate().map_err(inv)?;
        self.run_setup().validate().map_err(inv)?;
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(ConfigError::Invalid(what.to_string())) };
        need(self.cluster_tol > 0.0, "cluster_tol must be positive")?;
        need(self.lyap_d0 > 0.0, "lyap_d0 must be positive")?;
        need(self.lyap_interval > 0.0, "lyap_interval must be positive")?;
        need(self.realizations >= 1, "realizations must be at least 1")?;
        need(self.grid_step > 0.0, "grid_step must be positive")?;
        need(self.grid_stop >= self.grid_start, "grid_stop must not be below grid_start")?;
        if let MomentDamping::Rate(r) = self.moment_damping {
            need(r >= 0.0, "moment_damping rate must be non-negative")?;
        }
        Ok(())
    }

    /// Full effective configuration, one `key=value` per line in [`KEYS`] order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.value_of(key));
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        let s = &self.system;
        match key {
            "k" => s.k.to_string(),
            "A" => s.a.to_string(),
            "m" => s.mass.to_string(),
            "x_wall" => s.x_wall.to_string(),
            "F" => s.force.to_string(),
            "Omega" => s.omega.to_string(),
            "hbar" => s.hbar.to_string(),
            "c" => s.c_slope.to_string(),
            "Gamma" => self.gamma.to_string(),
            "tau_c" => self.tau_c.to_string(),
            "kT" => self.kt.to_string(),
            "noise_components" => self.noise_components.to_string(),
            "fit_tolerance" => self.fit_tolerance.to_string(),
            "noise" => self.noise.to_string(),
            "moment_damping" => match self.moment_damping {
                MomentDamping::Off => "off".into(),
                MomentDamping::BathRate => "bath".into(),
                MomentDamping::Rate(r) => r.to_string(),
            },
            "nonlinear_feed" => self.nonlinear_feed.to_string(),
            "steps_per_cycle" => self.steps_per_cycle.to_string(),
            "transient_cycles" => self.transient_cycles.to_string(),
            "record_cycles" => self.record_cycles.to_string(),
            "sample_stride" => self.sample_stride.to_string(),
            "record_z" => self.record.z.to_string(),
            "record_f" => self.record.f.to_string(),
            "record_q" => self.record.q.to_string(),
            "seed" => self.seed.to_string(),
            "poincare_direction" => match self.direction {
                Direction::Down => "down",
                Direction::Up => "up",
                Direction::Both => "both",
            }
            .into(),
            "cluster_tol" => self.cluster_tol.to_string(),
            "lyap_d0" => self.lyap_d0.to_string(),
            "lyap_interval" => self.lyap_interval.to_string(),
            "lyap_max_halvings" => self.lyap_max_halvings.to_string(),
            "realizations" => self.realizations.to_string(),
            "test01_c_draws" => self.test01_c_draws.to_string(),
            "grid_start" => self.grid_start.to_string(),
            "grid_stop" => self.grid_stop.to_string(),
            "grid_step" => self.grid_step.to_string(),
            "seed_policy" => match self.seed_policy {
                SeedPolicy::Fixed => "fixed",
                SeedPolicy::Fresh => "fresh",
            }
            .into(),
            "scan_lyapunov" => self.scan_lyapunov.to_string(),
            "window" => match self.window {
                Window::Hann => "hann",
                Window::Rectangular => "none",
            }
            .into(),
            _ => unreachable!("key list and renderer disagree"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_parameters() {
        let c = RunConfig::default();
        let s = c.system;
        assert_eq!((s.k, s.a, s.mass, s.omega, s.force, s.hbar, s.c_slope), (1.0, 10.0, 1.0, 0.5, 10.0, 0.01, 10.0));
        assert_eq!((c.kt, c.gamma, c.tau_c), (0.01, 1.0, 3.0));
        assert_eq!((c.transient_cycles, c.record_cycles, c.realizations), (1000, 3000, 50));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.merge_text("x_wall = 0.4\nmoment_damping = 0.25 # comment\nwindow=none\nseed=18446744073709551615\nhbar=0.1")
            .unwrap();
        let mut d = RunConfig::default();
        d.merge_text(&c.render()).unwrap();
        assert_eq!(c, d);
        assert_eq!(d.bath().hbar, 0.1);
        assert_eq!(c.render().lines().count(), KEYS.len());
    }

    #[test]
    fn every_key_renders_and_parses() {
        let c = RunConfig::default();
        for key in KEYS {
            let mut d = RunConfig::default();
            d.set(key, &c.value_of(key)).unwrap();
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = RunConfig::default();
        assert_eq!(c.merge_text("x_wal = 1"), Err(ConfigError::UnknownKey("x_wal".into())));
        assert!(matches!(c.merge_text("just words"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(c.set("A", "ten"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(c.set("A", "inf"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn validation_catches_bad_physics() {
        let mut c = RunConfig::default();
        c.set("m", "-1").unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        let mut c = RunConfig::default();
        c.set("grid_stop", "0.1").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn scale_presets() {
        let mut c = RunConfig::default();
        c.desk_scale();
        c.full_scale();
        assert_eq!((c.transient_cycles, c.record_cycles, c.realizations), (200, 500, 1000));
    }
}
