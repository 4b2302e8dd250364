//! Gottwald-Melbourne 0-1 test for chaos (correlation method).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Uniform};

use crate::{Error, Result};

pub const MIN_POINTS: usize = 2000;
pub const MIN_C_DRAWS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct K01Result {
    /// Median of the per-`c` statistics.
    pub k: f64,
    pub c: Vec<f64>,
    pub k_c: Vec<f64>,
}

/// Runs the test on `series` with `n_c` random frequencies `c` in
/// `(pi/5, 4pi/5)` drawn from `seed`. The series is standardized first, so the
/// result is invariant under affine rescaling; a constant series gives `K = 0`.
pub fn test_01(series: &[f64], n_c: usize, seed: u64) -> Result<K01Result> {
    if series.len() < MIN_POINTS {
        return Err(Error::SeriesTooShort { len: series.len(), min: MIN_POINTS });
    }
    if n_c < MIN_C_DRAWS {
        return Err(Error::InvalidParameter { name: "n_c", reason: "need at least 50 draws of c" });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter { name: "series", reason: "contains non-finite values" });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(PI / 5.0, 4.0 * PI / 5.0).expect("valid range");
    let c: Vec<f64> = (0..n_c).map(|_| dist.sample(&mut rng)).collect();
    if !(var > 1e-28 * (1.0 + mean * mean)) {
        return Ok(K01Result { k: 0.0, k_c: vec![0.0; n_c], c });
    }
    let sd = libm::sqrt(var);
    let phi: Vec<f64> = series.iter().map(|v| (v - mean) / sd).collect();
    let k_c: Vec<f64> = c.iter().map(|&c| k_for_c(&phi, c)).collect();
    Ok(K01Result { k: median(&k_c), c, k_c })
}

fn k_for_c(phi: &[f64], c: f64) -> f64 {
    let n = phi.len();
    let ncut = n / 10;
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let (mut ps, mut qs) = (0.0, 0.0);
    for (j, &v) in phi.iter().enumerate() {
        let a = (j + 1) as f64 * c;
        ps += v * libm::cos(a);
        qs += v * libm::sin(a);
        p.push(ps);
        q.push(qs);
    }
    let mean_phi = phi.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = (1..=ncut)
        .map(|lag| {
            let mut m = 0.0;
            for j in 0..n - lag {
                let dp = p[j + lag] - p[j];
                let dq = q[j + lag] - q[j];
                m += dp * dp + dq * dq;
            }
            let m = m / (n - lag) as f64;
            let osc = mean_phi * mean_phi * (1.0 - libm::cos(lag as f64 * c)) / (1.0 - libm::cos(c));
            m - osc
        })
        .collect();
    let lags: Vec<f64> = (1..=ncut).map(|v| v as f64).collect();
    correlation(&lags, &d)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / libm::sqrt(saa * sbb)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}
