use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::fit::{NoiseComponent, NoiseModel};
use crate::{Error, Result};

/// Colored c-number noise `f(t) = sum_i eta_i(t)`, each `eta_i` an
/// Ornstein-Uhlenbeck process with variance `D_i / tau_i` and correlation time
/// `tau_i`.
///
/// Channels advance with the exact OU transition over a fixed step, so the
/// sampled process has the target statistics for any `dt`. One generator
/// belongs to one realization; clone-free, never shared.
#[derive(Debug, Clone)]
pub struct NoiseGenerator {
    components: Vec<NoiseComponent>,
    decay: Vec<f64>,
    kick: Vec<f64>,
    eta: Vec<f64>,
    rng: ChaCha8Rng,
    dt: f64,
}

impl NoiseGenerator {
    /// Creates the generator and draws each `eta_i` from its stationary law.
    pub fn new(model: &NoiseModel, dt: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: "must be positive and finite" });
        }
        for c in &model.components {
            if !(c.d >= 0.0 && c.tau > 0.0 && c.d.is_finite() && c.tau.is_finite()) {
                return Err(Error::InvalidParameter { name: "noise component", reason: "need D >= 0 and tau > 0" });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let components = model.components.clone();
        let decay: Vec<f64> = components.iter().map(|c| libm::exp(-dt / c.tau)).collect();
        let kick: Vec<f64> = components
            .iter()
            .zip(&decay)
            .map(|(c, e)| libm::sqrt(c.variance() * (1.0 - e * e)))
            .collect();
        let eta = components
            .iter()
            .map(|c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                libm::sqrt(c.variance()) * z
            })
            .collect();
        Ok(Self {
            components,
            decay,
            kick,
            eta,
            rng,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn components(&self) -> &[NoiseComponent] {
        &self.components
    }

    /// Current channel values `eta_i`.
    pub fn channels(&self) -> &[f64] {
        &self.eta
    }

    /// Current total force `f = sum_i eta_i`.
    pub fn force(&self) -> f64 {
        self.eta.iter().sum()
    }

    /// Advances every channel by one exact OU step of size `dt` and returns
    /// the new total force.
    pub fn step_noise(&mut self) -> f64 {
        for i in 0..self.eta.len() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.eta[i] = self.eta[i] * self.decay[i] + self.kick[i] * z;
        }
        self.force()
    }
}
