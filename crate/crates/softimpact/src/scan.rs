//! Parallel bifurcation scan over `x_wall`.

use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Result;
use rayon::prelude::*;
use softimpact_core::diagnostics::{analyze_point, validate_grid, wall_grid, PointResult};
use softimpact_core::seed::derive_seed;
use softimpact_core::NoiseModel;

use crate::config::{RunConfig, SeedPolicy};
use crate::io::{run_metadata, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub x_wall: f64,
    pub seed: u64,
    pub result: Result<PointResult, String>,
}

pub fn config_grid(cfg: &RunConfig) -> Result<Vec<f64>> {
    Ok(wall_grid(cfg.grid_start, cfg.grid_stop, cfg.grid_step)?)
}

/// Analyzes every grid point; a failing point is recorded and the scan goes on.
pub fn bifurcation_scan(cfg: &RunConfig, noise: &NoiseModel, grid: &[f64], progress: bool) -> Result<Vec<ScanPoint>> {
    validate_grid(grid)?;
    let base = cfg.run_setup();
    let opts = cfg.point_options();
    let done = AtomicUsize::new(0);
    let step = (grid.len() / 20).max(1);
    Ok(grid
        .par_iter()
        .enumerate()
        .map(|(i, &x_wall)| {
            let seed = match cfg.seed_policy {
                SeedPolicy::Fixed => cfg.seed,
                SeedPolicy::Fresh => derive_seed(cfg.seed, i as u64),
            };
            let setup = softimpact_core::RunSetup { seed, ..base };
            let result = analyze_point(&setup, noise, x_wall, &opts).map_err(|e| e.to_string());
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if progress && (n.is_multiple_of(step) || n == grid.len()) {
                eprintln!("[bifurcation] {n}/{} grid points", grid.len());
            }
            ScanPoint { x_wall, seed, result }
        })
        .collect())
}

/// Long format: one row per Poincaré point, `lambda` repeated per `x_wall`
/// (NaN when skipped or failed), plus a per-point summary table.
pub fn scan_tables(cfg: &RunConfig, noise: &NoiseModel, points: &[ScanPoint]) -> (Table, Table) {
    let mut long = Table::new(&["x_wall", "X_poincare", "lambda"]);
    run_metadata(&mut long, cfg, noise);
    let mut summary = Table::new(&["x_wall", "crossings", "clusters", "strobe_clusters", "lambda", "failed"]);
    run_metadata(&mut summary, cfg, noise);
    for p in points {
        match &p.result {
            Ok(r) => {
                let lambda = r.lambda.unwrap_or(f64::NAN);
                for &x in &r.section_x {
                    long.push_row(&[p.x_wall, x, lambda]);
                }
                summary.push_row(&[
                    p.x_wall,
                    r.section_x.len() as f64,
                    r.regime.clusters() as f64,
                    r.strobe_regime.clusters() as f64,
                    lambda,
                    0.0,
                ]);
            }
            Err(e) => {
                summary.meta(&format!("failure_x_wall_{}", p.x_wall), e);
                summary.push_row(&[p.x_wall, 0.0, 0.0, 0.0, f64::NAN, 1.0]);
            }
        }
    }
    (long, summary)
}
