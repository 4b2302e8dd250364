//! Numerical core for the periodically forced, dissipative quantum soft-impact
//! oscillator.
//!
//! The crate integrates the c-number quantum Langevin equations
//!
//! ```text
//! dX/dt = P / m
//! dP/dt = -V'(X, t) + Q(t) + sum_i eta_i + z
//! dz/dt = -Gamma P / tau_c - z / tau_c
//! ```
//!
//! where `V` is a sigmoid-smoothed soft-impact potential, `z` carries the
//! exponential memory kernel, `eta_i` are Ornstein-Uhlenbeck channels fitted to
//! the Lorentzian quantum noise correlation, and `Q` is the quantum correction
//! assembled from propagated fluctuation moments up to fourth order.
//!
//! Everything here is `no_std` (with `alloc`). Transcendental functions go
//! through `libm` so that a given seed produces bit-identical trajectories on
//! every platform. File formats, parallel ensembles, spectra and the CLI live
//! in the `softimpact` companion crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bath;
pub mod diagnostics;
mod error;
pub mod fluctuations;
pub mod integrator;
pub mod model;
pub mod quad;
pub mod seed;

pub use bath::{BathParams, NoiseComponent, NoiseGenerator, NoiseModel};
pub use error::{Error, Result};
pub use fluctuations::{MomentDamping, MomentOptions, MomentState, QTerms};
pub use integrator::{RecordFlags, RunSetup, SimState, Trajectory};
pub use model::SystemParams;
