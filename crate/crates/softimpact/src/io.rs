//! CSV tables with `# key=value` metadata headers, trajectory files and the
//! noise-fit cache.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so reading a
//! file back yields bit-identical `f64` values.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use softimpact_core::bath::{correlation_function, fit_noise_model, FitOptions};
use softimpact_core::{BathParams, NoiseComponent, NoiseModel, Trajectory};

use crate::config::{RunConfig, KEYS};

pub const CACHE_DIR: &str = ".noise-cache";

/// Column-oriented numeric table plus its metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            columns: vec![Vec::new(); header.len()],
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    /// Embeds the full effective configuration.
    pub fn config(&mut self, cfg: &RunConfig) -> &mut Self {
        for line in cfg.render().lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.meta(k, v);
            }
        }
        self
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
        }
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "{}", self.header.join(","))?;
        let mut line = String::new();
        for r in 0..self.rows() {
            line.clear();
            for (i, c) in self.columns.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                let _ = write!(line, "{}", c[r]);
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Table::default();
        let mut have_header = false;
        for (n, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    t.meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !have_header {
                t.header = line.split(',').map(|s| s.trim().to_string()).collect();
                t.columns = vec![Vec::new(); t.header.len()];
                have_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != t.header.len() {
                bail!("line {}: expected {} fields, found {}", n + 1, t.header.len(), fields.len());
            }
            for (c, f) in t.columns.iter_mut().zip(fields) {
                c.push(f.trim().parse().map_err(|_| anyhow!("line {}: bad number `{f}`", n + 1))?);
            }
        }
        if !have_header {
            bail!("no header row");
        }
        Ok(t)
    }

    /// Configuration embedded in the metadata (non-configuration keys ignored).
    pub fn embedded_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut found = 0;
        for (k, v) in &self.meta {
            if KEYS.contains(&k.as_str()) {
                cfg.set(k, v)?;
                found += 1;
            }
        }
        if found == 0 {
            bail!("file carries no embedded configuration");
        }
        Ok(cfg)
    }
}

pub fn build_id() -> String {
    format!("softimpact-{}", env!("CARGO_PKG_VERSION"))
}

/// Metadata shared by every simulation output.
pub fn run_metadata(t: &mut Table, cfg: &RunConfig, noise: &NoiseModel) {
    t.config(cfg);
    t.meta("build", build_id());
    t.meta("dt", cfg.run_setup().dt());
    t.meta("integrator", "strang kick-drift-kick, exact z and OU updates, f held per step");
    t.meta("initial_state", "X=0 P=0 z=0, stationary eta, minimum-uncertainty Gaussian moments");
    t.meta("moment_closure", "linearized fluctuation flow; order-5 pair-triple closure when nonlinear_feed");
    t.meta("lyapunov_metric", "separation over X, P, z and moments; shared noise");
    noise_metadata(t, noise);
}

pub fn noise_metadata(t: &mut Table, noise: &NoiseModel) {
    t.meta("noise_channels", noise.components.len());
    for (i, c) in noise.components.iter().enumerate() {
        t.meta(&format!("noise_D{}", i + 1), c.d);
        t.meta(&format!("noise_tau{}", i + 1), c.tau);
    }
    t.meta("noise_fit_residual", noise.fit_residual);
}

/// `t,X,P[,z,f,q2,q3,q4]` table of a recorded trajectory.
pub fn trajectory_table(traj: &Trajectory, cfg: &RunConfig, noise: &NoiseModel) -> Table {
    let mut header = vec!["t", "X", "P"];
    let mut cols: Vec<&[f64]> = vec![&traj.t, &traj.x, &traj.p];
    if let Some(z) = &traj.z {
        header.push("z");
        cols.push(z);
    }
    if let Some(f) = &traj.f {
        header.push("f");
        cols.push(f);
    }
    if let (Some(a), Some(b), Some(c)) = (&traj.q2, &traj.q3, &traj.q4) {
        header.extend(["q2", "q3", "q4"]);
        cols.extend([a.as_slice(), b.as_slice(), c.as_slice()]);
    }
    let mut t = Table::new(&header);
    run_metadata(&mut t, cfg, noise);
    t.columns = cols.into_iter().map(<[f64]>::to_vec).collect();
    t
}

/// `cycle,t,X,P` at the end of each recorded forcing period.
pub fn strobe_table(traj: &Trajectory, cfg: &RunConfig, noise: &NoiseModel) -> Table {
    let mut t = Table::new(&["cycle", "t", "X", "P"]);
    run_metadata(&mut t, cfg, noise);
    let period = cfg.system.period();
    for (i, (x, p)) in traj.strobe_x.iter().zip(&traj.strobe_p).enumerate() {
        let cycle = (cfg.transient_cycles + i + 1) as f64;
        t.push_row(&[cycle, cycle * period, *x, *p]);
    }
    t
}

/// Strobe `X` series from either a strobe file or a trajectory file whose
/// sample stride divides the steps per cycle.
pub fn strobe_series(table: &Table) -> Result<Vec<f64>> {
    if table.column("cycle").is_some() {
        return Ok(table.column("X").ok_or_else(|| anyhow!("strobe file lacks X"))?.to_vec());
    }
    let x = table.column("X").ok_or_else(|| anyhow!("trajectory lacks X column"))?;
    let cfg = table.embedded_config()?;
    if cfg.steps_per_cycle % cfg.sample_stride != 0 {
        bail!(
            "sample_stride {} does not divide steps_per_cycle {}; strobe points are not in the file",
            cfg.sample_stride,
            cfg.steps_per_cycle
        );
    }
    let per_cycle = cfg.steps_per_cycle / cfg.sample_stride;
    Ok(x.iter().skip(per_cycle - 1).step_by(per_cycle).copied().collect())
}

fn bits(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

/// Cache file for the fit keyed by `(Gamma, tau_c, kT, hbar, n)`.
pub fn cache_path(dir: &Path, bath: &BathParams, n: usize) -> PathBuf {
    dir.join(CACHE_DIR).join(format!(
        "noise_G{}_tc{}_kT{}_h{}_n{}.csv",
        bits(bath.gamma),
        bits(bath.tau_c),
        bits(bath.kt),
        bits(bath.hbar),
        n
    ))
}

pub fn noise_table(model: &NoiseModel) -> Table {
    let mut t = Table::new(&["channel", "D", "tau", "variance"]);
    t.meta("fit_residual", model.fit_residual);
    for (i, c) in model.components.iter().enumerate() {
        t.push_row(&[(i + 1) as f64, c.d, c.tau, c.variance()]);
    }
    t
}

pub fn noise_from_table(t: &Table) -> Result<NoiseModel> {
    let d = t.column("D").ok_or_else(|| anyhow!("noise table lacks D"))?;
    let tau = t.column("tau").ok_or_else(|| anyhow!("noise table lacks tau"))?;
    let fit_residual = t
        .meta_value("fit_residual")
        .ok_or_else(|| anyhow!("noise table lacks fit_residual"))?
        .parse()?;
    Ok(NoiseModel {
        components: d.iter().zip(tau).map(|(&d, &tau)| NoiseComponent { d, tau }).collect(),
        fit_residual,
    })
}

/// Where fitted noise comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSource {
    Disabled,
    Cache,
    Fitted,
}

/// Noise model for `cfg`: silent when noise is off or `Gamma = 0`, otherwise
/// loaded from the cache under `dir` or fitted and stored there.
pub fn obtain_noise(cfg: &RunConfig, dir: &Path) -> Result<(NoiseModel, NoiseSource)> {
    let bath = cfg.bath();
    if !cfg.noise || bath.gamma == 0.0 {
        return Ok((NoiseModel::silent(), NoiseSource::Disabled));
    }
    let opts = cfg.fit_options();
    let path = cache_path(dir, &bath, opts.n);
    if let Ok(table) = Table::read(&path) {
        if let Ok(model) = noise_from_table(&table) {
            if residual_ok(&model, &bath, &opts)? && model.components.len() == opts.n {
                return Ok((model, NoiseSource::Cache));
            }
        }
    }
    let model = fit_noise_model(&bath, &opts)?;
    let mut t = noise_table(&model);
    t.meta("Gamma", bath.gamma).meta("tau_c", bath.tau_c).meta("kT", bath.kt).meta("hbar", bath.hbar);
    // A failed cache write only costs a refit next time.
    let _ = t.write(&path);
    Ok((model, NoiseSource::Fitted))
}

fn residual_ok(model: &NoiseModel, bath: &BathParams, opts: &FitOptions) -> Result<bool> {
    let c0 = correlation_function(0.0, bath)?;
    Ok(model.fit_residual <= opts.tolerance * c0)
}
