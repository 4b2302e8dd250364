//! Independent noise realizations run in parallel and reduced in index order,
//! so aggregates do not depend on thread count or scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use softimpact_core::diagnostics::lyapunov_largest;
use softimpact_core::integrator::run;
use softimpact_core::seed::derive_seed;
use softimpact_core::NoiseModel;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub count: usize,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.count as u64).map(|i| derive_seed(self.master_seed, i)).collect()
    }
}

/// One realization's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub index: usize,
    pub seed: u64,
    pub value: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub realizations: Vec<Realization>,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` normalization); 0 for a single value.
    pub std: f64,
    pub succeeded: usize,
    pub failed: usize,
    /// Fewer than two successful realizations.
    pub degenerate: bool,
}

/// Mean and `n - 1` standard deviation, summed in slice order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Runs `task(seed)` for every derived seed; failures are kept per
/// realization and excluded from the aggregates.
pub fn run_ensemble<F>(spec: &EnsembleSpec, label: &str, progress: bool, task: F) -> EnsembleStats
where
    F: Fn(u64) -> anyhow::Result<f64> + Sync,
{
    let done = AtomicUsize::new(0);
    let total = spec.count;
    let step = (total / 20).max(1);
    let realizations: Vec<Realization> = spec
        .seeds()
        .into_par_iter()
        .enumerate()
        .map(|(index, seed)| {
            let value = task(seed).map_err(|e| format!("{e:#}"));
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if progress && (n.is_multiple_of(step) || n == total) {
                eprintln!("[{label}] {n}/{total} realizations");
            }
            Realization { index, seed, value }
        })
        .collect();
    let ok: Vec<f64> = realizations.iter().filter_map(|r| r.value.as_ref().ok().copied()).collect();
    let (mean, std) = mean_std(&ok);
    EnsembleStats {
        succeeded: ok.len(),
        failed: realizations.len() - ok.len(),
        degenerate: ok.len() < 2,
        realizations,
        mean,
        std,
    }
}

/// Largest Lyapunov exponent over realizations at the configured point.
pub fn lyapunov_ensemble(cfg: &RunConfig, noise: &NoiseModel, progress: bool) -> EnsembleStats {
    let spec = EnsembleSpec { count: cfg.realizations, master_seed: cfg.seed };
    let base = cfg.run_setup();
    let opts = cfg.lyapunov_options();
    let label = format!("lyapunov x_wall={}", cfg.system.x_wall);
    run_ensemble(&spec, &label, progress, |seed| {
        let setup = softimpact_core::RunSetup { seed, ..base };
        Ok(lyapunov_largest(&setup, noise, &opts)?.exponent)
    })
}

/// Per-realization trajectory statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryStat {
    MeanX,
    VarianceX,
    MaxAbsX,
}

pub fn trajectory_ensemble(cfg: &RunConfig, noise: &NoiseModel, stat: TrajectoryStat, progress: bool) -> EnsembleStats {
    let spec = EnsembleSpec { count: cfg.realizations, master_seed: cfg.seed };
    let base = cfg.run_setup();
    run_ensemble(&spec, "trajectory", progress, |seed| {
        let traj = run(&softimpact_core::RunSetup { seed, ..base }, noise)?;
        if traj.x.is_empty() {
            anyhow::bail!("empty recording window");
        }
        let (m, _) = mean_std(&traj.x);
        Ok(match stat {
            TrajectoryStat::MeanX => m,
            TrajectoryStat::VarianceX => traj.x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / traj.x.len() as f64,
            TrajectoryStat::MaxAbsX => traj.x.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_realization_is_degenerate() {
        let s = run_ensemble(&EnsembleSpec { count: 1, master_seed: 4 }, "t", false, |_| Ok(2.5));
        assert_eq!((s.mean, s.std, s.degenerate), (2.5, 0.0, true));
    }

    #[test]
    fn failures_are_excluded_and_counted() {
        let s = run_ensemble(&EnsembleSpec { count: 10, master_seed: 4 }, "t", false, |seed| {
            if seed % 2 == 0 {
                anyhow::bail!("boom")
            }
            Ok(1.0)
        });
        assert_eq!(s.succeeded + s.failed, 10);
        assert!(s.realizations.iter().filter(|r| r.value.is_err()).all(|r| r.seed % 2 == 0));
        if s.succeeded > 0 {
            assert_eq!(s.mean, 1.0);
        }
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn independent_of_thread_count() {
        let spec = EnsembleSpec { count: 64, master_seed: 11 };
        let f = |seed: u64| Ok((seed % 1000) as f64 / 7.0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ensemble(&spec, "t", false, f));
        let b = four.install(|| run_ensemble(&spec, "t", false, f));
        assert_eq!(a, b);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }
}
