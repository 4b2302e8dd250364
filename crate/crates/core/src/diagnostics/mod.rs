//! Chaos diagnostics over recorded trajectories: Poincaré sections and their
//! cluster structure, shared-noise Lyapunov exponents, the 0-1 test and
//! bifurcation-point analysis.
//!
//! Power spectra need an FFT and live in the `softimpact` crate.

pub mod bifurcation;
pub mod lyapunov;
pub mod poincare;
pub mod test01;

pub use bifurcation::{analyze_point, validate_grid, wall_grid, PointResult, PointOptions};
pub use lyapunov::{lyapunov_largest, LyapunovEstimate, LyapunovOptions};
pub use poincare::{count_clusters, poincare, Direction, PoincareSection, Regime};
pub use test01::{test_01, K01Result};
