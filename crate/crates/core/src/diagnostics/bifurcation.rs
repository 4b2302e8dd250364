//! Per-`x_wall` analysis for bifurcation scans. The scan driver (parallel
//! over grid points) lives in the `softimpact` crate.

use alloc::vec::Vec;

use super::lyapunov::{lyapunov_largest, LyapunovOptions};
use super::poincare::{poincare, Direction, Regime};
use crate::bath::NoiseModel;
use crate::integrator::{run, RunSetup};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOptions {
    pub direction: Direction,
    pub cluster_tol: f64,
    /// `None` skips the Lyapunov exponent.
    pub lyapunov: Option<LyapunovOptions>,
}

impl Default for PointOptions {
    fn default() -> Self {
        Self {
            direction: Direction::Down,
            cluster_tol: 0.02,
            lyapunov: Some(LyapunovOptions::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub x_wall: f64,
    pub section_x: Vec<f64>,
    pub regime: Regime,
    /// Cluster structure of the once-per-period strobe of `X`.
    pub strobe_regime: Regime,
    pub lambda: Option<f64>,
}

/// Builds `start, start + step, ...` up to `stop` (inclusive within half a step).
pub fn wall_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(Error::BadGrid);
    }
    let n = libm::floor((stop - start) / step + 0.5) as usize;
    // Rounded to 12 decimals so printed grid values stay short.
    Ok((0..=n).map(|i| libm::round((start + i as f64 * step) * 1e12) / 1e12).collect())
}

/// Grids must be nonempty, finite and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// Runs one grid point: trajectory, Poincaré section, clusters and optionally
/// the largest Lyapunov exponent with the same noise seed.
pub fn analyze_point(base: &RunSetup, noise: &NoiseModel, x_wall: f64, opts: &PointOptions) -> Result<PointResult> {
    let mut setup = *base;
    setup.system.x_wall = x_wall;
    let traj = run(&setup, noise)?;
    let section = poincare(&traj.t, &traj.x, &traj.p, opts.direction);
    let regime = Regime::classify(&section.x, opts.cluster_tol);
    let strobe_regime = Regime::classify(&traj.strobe_x, opts.cluster_tol);
    let lambda = match &opts.lyapunov {
        Some(lo) => Some(lyapunov_largest(&setup, noise, lo)?.exponent),
        None => None,
    };
    Ok(PointResult { x_wall, section_x: section.x, regime, strobe_regime, lambda })
}
