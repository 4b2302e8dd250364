//! Command-line front end.
//!
//! Configuration is merged in this order: defaults, `--from-output`,
//! `--config`, `--desk-scale` / `--full-scale`, `--set`, `--seed`. Exit codes:
//! 0 on success, 1 on runtime or integration failure, 2 on configuration
//! errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use softimpact_core::bath::{correlation_function, fit_noise_model_unchecked, sample_correlation};
use softimpact_core::diagnostics::{poincare, test_01, validate_grid, Regime};
use softimpact_core::integrator::run_with_progress;
use softimpact_core::{NoiseModel, Trajectory};

use crate::config::{ConfigError, RunConfig};
use crate::ensemble::lyapunov_ensemble;
use crate::io::{self, obtain_noise, NoiseSource, Table};
use crate::scan::{bifurcation_scan, config_grid, scan_tables};
use crate::spectrum::power_spectrum;
use crate::plot;

// Report lines; a closed stdout (e.g. `| head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const DEFAULT_OUT: &str = "softimpact-out";

#[derive(Debug, Parser)]
#[command(name = "softimpact", version, about = "Dissipative driven quantum soft-impact oscillator: simulation and chaos diagnostics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for ensembles and scans.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// 200 transient + 500 recorded cycles.
    #[arg(long, global = true)]
    pub desk_scale: bool,
    /// 1000 realizations per ensemble.
    #[arg(long, global = true)]
    pub full_scale: bool,
    /// Output directory.
    #[arg(long, global = true, env = "SOFTIMPACT_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Start from the configuration embedded in a previous output file.
    #[arg(long, global = true, value_name = "FILE")]
    pub from_output: Option<PathBuf>,
    /// No progress on standard error.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the exponential noise model and cache it.
    NoiseFit,
    /// Integrate one trajectory and write it as CSV.
    Simulate,
    /// Scan x_wall and record Poincaré points and Lyapunov exponents.
    Bifurcation {
        /// Explicit comma-separated x_wall values (must increase).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        grid: Option<Vec<f64>>,
    },
    /// Largest Lyapunov exponent over noise realizations.
    Lyapunov,
    /// 0-1 test on the stroboscopic X series.
    Test01 {
        /// Trajectory or strobe CSV to analyze instead of simulating.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
    /// Power spectrum of X.
    Fft {
        /// Trajectory CSV to analyze instead of simulating.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.into())
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

/// Effective configuration from the global flags.
pub fn build_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &g.from_output {
        cfg = Table::read(path).and_then(|t| t.embedded_config()).map_err(CliError::Config)?;
    }
    if let Some(path) = &g.config {
        cfg.merge_file(path)?;
    }
    if g.desk_scale {
        cfg.desk_scale();
    }
    if g.full_scale {
        cfg.full_scale();
    }
    for kv in &g.set {
        cfg.merge_override(kv)?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    progress: bool,
}

impl Ctx {
    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    fn noise(&self) -> Result<NoiseModel, CliError> {
        let (model, source) = obtain_noise(&self.cfg, &self.out).map_err(runtime)?;
        if self.progress && source == NoiseSource::Fitted {
            eprintln!("[noise] fitted {} channels, residual {:.3e}", model.components.len(), model.fit_residual);
        }
        Ok(model)
    }

    fn simulate(&self, noise: &NoiseModel) -> Result<Trajectory, CliError> {
        let total = self.cfg.transient_cycles + self.cfg.record_cycles;
        let step = (total / 10).max(1);
        let progress = self.progress;
        let mut report = |c: usize| {
            if progress && c.is_multiple_of(step) {
                eprintln!("[simulate] cycle {c}/{total}");
            }
        };
        run_with_progress(&self.cfg.run_setup(), noise, &mut report).map_err(runtime)
    }
}

fn write(table: &Table, path: &Path, script: Option<String>) -> Result<(), CliError> {
    table.write(path).map_err(runtime)?;
    if let Some(s) = script {
        plot::write_sidecar(path, &s).map_err(runtime)?;
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli.global)?;
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Config(anyhow!("--threads must be at least 1")));
        }
        // Already-initialized pools (repeated in-process calls) keep their size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.global.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display())).map_err(runtime)?;
    let ctx = Ctx { cfg, out, progress: !cli.global.quiet };
    match &cli.command {
        Command::NoiseFit => noise_fit(&ctx),
        Command::Simulate => simulate(&ctx),
        Command::Bifurcation { grid } => bifurcation(&ctx, grid.as_deref()),
        Command::Lyapunov => lyapunov(&ctx),
        Command::Test01 { input } => test01(&ctx, input.as_deref()),
        Command::Fft { input } => fft(&ctx, input.as_deref()),
    }
}

fn noise_fit(ctx: &Ctx) -> Result<(), CliError> {
    let bath = ctx.cfg.bath();
    let opts = ctx.cfg.fit_options();
    let model = fit_noise_model_unchecked(&bath, &opts).map_err(runtime)?;
    let c0 = correlation_function(0.0, &bath).map_err(runtime)?;
    let limit = opts.tolerance * c0;

    let mut table = io::noise_table(&model);
    table.config(&ctx.cfg).meta("c0", c0).meta("residual_limit", limit).meta("build", io::build_id());
    let path = ctx.path("noise_fit.csv");
    write(&table, &path, None)?;

    let (lags, target) = sample_correlation(&bath, &opts).map_err(runtime)?;
    let mut curve = Table::new(&["tau", "c_exact", "c_fit"]);
    curve.config(&ctx.cfg);
    for (l, c) in lags.iter().zip(&target) {
        curve.push_row(&[*l, *c, model.correlation(*l)]);
    }
    let curve_path = ctx.path("noise_fit_curve.csv");
    write(&curve, &curve_path, Some(plot::noise_fit(&curve_path)))?;

    for (i, c) in model.components.iter().enumerate() {
        say!("channel {}: D = {:.6e}, tau = {:.6e}", i + 1, c.d, c.tau);
    }
    say!("residual = {:.4e} ({:.3}% of c(0) = {:.6e})", model.fit_residual, 100.0 * model.fit_residual / c0, c0);
    if model.fit_residual > limit {
        return Err(runtime(anyhow!(
            "fit residual {:.4e} exceeds {:.4e} ({}% of c(0))",
            model.fit_residual,
            limit,
            100.0 * opts.tolerance
        )));
    }
    // Refresh the cache with this fit.
    obtain_noise(&ctx.cfg, &ctx.out).map_err(runtime)?;
    say!("wrote {}", path.display());
    Ok(())
}

fn simulate(ctx: &Ctx) -> Result<(), CliError> {
    let noise = ctx.noise()?;
    let traj = ctx.simulate(&noise)?;
    let path = ctx.path("trajectory.csv");
    let table = io::trajectory_table(&traj, &ctx.cfg, &noise);
    write(&table, &path, Some(plot::trajectory(&path, traj.q2.is_some())))?;
    write(&io::strobe_table(&traj, &ctx.cfg, &noise), &ctx.path("strobe.csv"), None)?;
    let section = poincare(&traj.t, &traj.x, &traj.p, ctx.cfg.direction);
    say!(
        "{} samples, {} section crossings, regime {:?}, strobe regime {:?}",
        traj.len(),
        section.len(),
        Regime::classify(&section.x, ctx.cfg.cluster_tol),
        Regime::classify(&traj.strobe_x, ctx.cfg.cluster_tol)
    );
    say!("wrote {}", path.display());
    Ok(())
}

fn bifurcation(ctx: &Ctx, grid: Option<&[f64]>) -> Result<(), CliError> {
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => config_grid(&ctx.cfg).map_err(CliError::Config)?,
    };
    validate_grid(&grid).map_err(|e| CliError::Config(anyhow!("{e}: x_wall grid must be nonempty and strictly increasing")))?;
    let noise = ctx.noise()?;
    let points = bifurcation_scan(&ctx.cfg, &noise, &grid, ctx.progress).map_err(runtime)?;
    let (long, summary) = scan_tables(&ctx.cfg, &noise, &points);
    let path = ctx.path("bifurcation.csv");
    write(&long, &path, Some(plot::bifurcation(&path)))?;
    write(&summary, &ctx.path("bifurcation_summary.csv"), None)?;
    let failed = points.iter().filter(|p| p.result.is_err()).count();
    say!("{} grid points, {} failed", points.len(), failed);
    say!("wrote {}", path.display());
    Ok(())
}

fn lyapunov(ctx: &Ctx) -> Result<(), CliError> {
    let noise = ctx.noise()?;
    let stats = lyapunov_ensemble(&ctx.cfg, &noise, ctx.progress);
    let mut t = Table::new(&["realization", "lambda", "ok"]);
    io::run_metadata(&mut t, &ctx.cfg, &noise);
    t.meta("seed_scheme", "splitmix64 finalizer of master + (index + 1) * 0x9E3779B97F4A7C15");
    t.meta("renorm_interval", ctx.cfg.lyapunov_options().renorm_interval);
    t.meta("mean", stats.mean).meta("std", stats.std);
    t.meta("succeeded", stats.succeeded).meta("failed", stats.failed).meta("degenerate", stats.degenerate);
    for r in &stats.realizations {
        match &r.value {
            Ok(v) => t.push_row(&[r.index as f64, *v, 1.0]),
            Err(e) => {
                t.meta(&format!("failure_{}", r.index), e);
                t.push_row(&[r.index as f64, f64::NAN, 0.0]);
            }
        }
    }
    let path = ctx.path("lyapunov.csv");
    write(&t, &path, Some(plot::lyapunov(&path)))?;
    let mut s = Table::new(&["x_wall", "mean", "std", "succeeded", "failed", "degenerate"]);
    s.config(&ctx.cfg);
    s.push_row(&[
        ctx.cfg.system.x_wall,
        stats.mean,
        stats.std,
        stats.succeeded as f64,
        stats.failed as f64,
        f64::from(u8::from(stats.degenerate)),
    ]);
    write(&s, &ctx.path("lyapunov_summary.csv"), None)?;
    say!(
        "lambda = {:.6e} +/- {:.6e} over {} realizations ({} failed){}",
        stats.mean,
        stats.std,
        stats.succeeded,
        stats.failed,
        if stats.degenerate { " [degenerate count]" } else { "" }
    );
    if stats.succeeded == 0 {
        return Err(runtime(anyhow!("every realization failed")));
    }
    say!("wrote {}", path.display());
    Ok(())
}

fn test01(ctx: &Ctx, input: Option<&Path>) -> Result<(), CliError> {
    let (series, cfg) = match input {
        Some(p) => {
            let table = Table::read(p).map_err(CliError::Config)?;
            let series = io::strobe_series(&table).map_err(CliError::Config)?;
            (series, table.embedded_config().unwrap_or_else(|_| ctx.cfg.clone()))
        }
        None => {
            let noise = ctx.noise()?;
            (ctx.simulate(&noise)?.strobe_x, ctx.cfg.clone())
        }
    };
    let r = test_01(&series, ctx.cfg.test01_c_draws, ctx.cfg.seed).map_err(runtime)?;
    let mut t = Table::new(&["c", "K_c"]);
    t.config(&cfg).meta("K", r.k).meta("strobe_points", series.len()).meta("build", io::build_id());
    for (c, k) in r.c.iter().zip(&r.k_c) {
        t.push_row(&[*c, *k]);
    }
    let path = ctx.path("test01.csv");
    write(&t, &path, Some(plot::test01(&path)))?;
    say!("K = {:.4} from {} strobe points", r.k, series.len());
    Ok(())
}

fn fft(ctx: &Ctx, input: Option<&Path>) -> Result<(), CliError> {
    let (x, sample_dt, cfg) = match input {
        Some(p) => {
            let table = Table::read(p).map_err(CliError::Config)?;
            let cfg = table.embedded_config().map_err(CliError::Config)?;
            let x = table.column("X").ok_or_else(|| CliError::Config(anyhow!("input lacks an X column")))?.to_vec();
            (x, cfg.run_setup().dt() * cfg.sample_stride as f64, cfg)
        }
        None => {
            let noise = ctx.noise()?;
            let traj = ctx.simulate(&noise)?;
            (traj.x.clone(), traj.sample_dt(), ctx.cfg.clone())
        }
    };
    let s = power_spectrum(&x, sample_dt, cfg.system.omega, ctx.cfg.window).map_err(runtime)?;
    let floor = s.floor(0.1, 10.0);
    let peaks = s.peaks(0.1, 10.0, 10.0);
    let mut t = Table::new(&["omega_over_Omega", "power"]);
    t.config(&cfg)
        .meta("segment_len", s.segment_len)
        .meta("segments", s.segments)
        .meta("floor_0.1_10", floor)
        .meta("peaks_above_10x_floor", peaks.len())
        .meta("build", io::build_id());
    for (f, p) in s.freq.iter().zip(&s.power) {
        t.push_row(&[*f, *p]);
    }
    let path = ctx.path("spectrum.csv");
    write(&t, &path, Some(plot::spectrum(&path)))?;
    say!("floor = {:.4e}, {} peaks above 10x floor in [0.1, 10] Omega", floor, peaks.len());
    say!("wrote {}", path.display());
    Ok(())
}
