//! Multi-exponential approximation of the noise correlation.
//!
//! The model `sum_i (D_i / tau_i) exp(-tau / tau_i)` is linear in the weights
//! `w_i = D_i / tau_i` once the correlation times are fixed, so the fit is
//! separable: weights come from non-negative least squares, and only the
//! `tau_i` are searched (in log space) by a coarse enumeration followed by
//! Nelder-Mead refinement of the best few candidates.

use alloc::vec;
use alloc::vec::Vec;

use super::nnls::nnls_normal;
use super::{correlation_function, BathParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseComponent {
    /// Noise strength `D_i`.
    pub d: f64,
    /// Correlation time `tau_i`.
    pub tau: f64,
}

impl NoiseComponent {
    /// Stationary variance `D_i / tau_i` of the channel.
    pub fn variance(&self) -> f64 {
        self.d / self.tau
    }
}

/// Sum of exponentially correlated channels approximating the bath noise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    pub components: Vec<NoiseComponent>,
    /// Root-mean-square error of the fit over its lag grid.
    pub fit_residual: f64,
}

impl NoiseModel {
    /// Noise-free model (no channels).
    pub fn silent() -> Self {
        Self::default()
    }

    pub fn correlation(&self, lag: f64) -> f64 {
        let lag = libm::fabs(lag);
        self.components
            .iter()
            .map(|c| c.variance() * libm::exp(-lag / c.tau))
            .sum()
    }

    /// Variance of the total force `f = sum_i eta_i`.
    pub fn variance(&self) -> f64 {
        self.components.iter().map(NoiseComponent::variance).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Number of exponential channels.
    pub n: usize,
    /// Lag grid extends to `tau_max_factor * tau_c`.
    pub tau_max_factor: f64,
    /// Lag grid spacing is `tau_c / points_per_tau_c`.
    pub points_per_tau_c: usize,
    /// Accepted RMS residual as a fraction of `c(0)`.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n: 3,
            tau_max_factor: 10.0,
            points_per_tau_c: 50,
            tolerance: 0.02,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 6 {
            return Err(Error::InvalidParameter { name: "n_noise", reason: "must be between 1 and 6" });
        }
        if !(self.tau_max_factor >= 10.0) {
            return Err(Error::InvalidParameter { name: "tau_max_factor", reason: "lag grid must reach 10 tau_c" });
        }
        if self.points_per_tau_c < 2 {
            return Err(Error::InvalidParameter { name: "points_per_tau_c", reason: "need at least 2" });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter { name: "fit_tolerance", reason: "must be positive" });
        }
        Ok(())
    }
}

/// Lag grid and sampled correlation `c(tau)` used as fit target.
pub fn sample_correlation(b: &BathParams, opts: &FitOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let count = libm::round(opts.tau_max_factor * opts.points_per_tau_c as f64) as usize;
    let h = b.tau_c / opts.points_per_tau_c as f64;
    let lags: Vec<f64> = (0..=count).map(|j| j as f64 * h).collect();
    let target = lags
        .iter()
        .map(|&t| correlation_function(t, b))
        .collect::<Result<Vec<f64>>>()?;
    Ok((lags, target))
}

/// Fits the bath correlation and enforces the residual tolerance relative to
/// `c(0)`.
pub fn fit_noise_model(b: &BathParams, opts: &FitOptions) -> Result<NoiseModel> {
    let model = fit_noise_model_unchecked(b, opts)?;
    let c0 = correlation_function(0.0, b)?;
    let tolerance = opts.tolerance * c0;
    if model.fit_residual > tolerance {
        return Err(Error::FitTolerance {
            residual: model.fit_residual,
            tolerance,
        });
    }
    Ok(model)
}

/// Fits the bath correlation without checking the residual.
pub fn fit_noise_model_unchecked(b: &BathParams, opts: &FitOptions) -> Result<NoiseModel> {
    b.validate()?;
    opts.validate()?;
    let (lags, target) = sample_correlation(b, opts)?;
    fit_exponentials(&lags, &target, opts.n)
}

struct Problem<'a> {
    lags: &'a [f64],
    target: &'a [f64],
    log_lo: f64,
    log_hi: f64,
}

impl Problem<'_> {
    /// Returns the NNLS weights and the residual sum of squares for the
    /// given log correlation times.
    fn solve(&self, log_taus: &[f64]) -> (Vec<f64>, f64) {
        let n = log_taus.len();
        let rates: Vec<f64> = log_taus
            .iter()
            .map(|&l| 1.0 / libm::exp(l.clamp(self.log_lo, self.log_hi)))
            .collect();
        let basis = |lag: f64, i: usize| libm::exp(-lag * rates[i]);
        let mut ata = vec![0.0; n * n];
        let mut aty = vec![0.0; n];
        let mut row = vec![0.0; n];
        for (&lag, &y) in self.lags.iter().zip(self.target) {
            for (i, r) in row.iter_mut().enumerate() {
                *r = basis(lag, i);
            }
            for i in 0..n {
                aty[i] += row[i] * y;
                for j in 0..n {
                    ata[i * n + j] += row[i] * row[j];
                }
            }
        }
        let w = nnls_normal(&ata, &aty, n);
        let rss = self
            .lags
            .iter()
            .zip(self.target)
            .map(|(&lag, &y)| {
                let model: f64 = (0..n).map(|i| w[i] * basis(lag, i)).sum();
                (model - y) * (model - y)
            })
            .sum();
        (w, rss)
    }

    fn objective(&self, log_taus: &[f64]) -> f64 {
        self.solve(log_taus).1
    }
}

/// Fits `n` decaying exponentials with non-negative weights to `target`
/// sampled at `lags`.
pub fn fit_exponentials(lags: &[f64], target: &[f64], n: usize) -> Result<NoiseModel> {
    if lags.len() != target.len() || lags.len() < 2 * n + 1 {
        return Err(Error::InvalidParameter { name: "lags", reason: "need matching lag/target arrays with more than 2n points" });
    }
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n_noise", reason: "must be at least 1" });
    }
    let spacing = lags
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let span = lags[lags.len() - 1] - lags[0];
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter { name: "lags", reason: "must be strictly increasing" });
    }
    let problem = Problem {
        lags,
        target,
        log_lo: libm::log(spacing / 100.0),
        log_hi: libm::log(span * 100.0),
    };

    // Coarse candidate correlation times, log-spaced over the resolvable range.
    let cand_count = 24;
    let lo = libm::log(spacing / 5.0);
    let hi = libm::log(span * 2.0);
    let candidates: Vec<f64> = (0..cand_count)
        .map(|i| lo + (hi - lo) * i as f64 / (cand_count - 1) as f64)
        .collect();

    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    let consider = |taus: Vec<f64>, starts: &mut Vec<(f64, Vec<f64>)>| {
        let f = problem.objective(&taus);
        starts.push((f, taus));
        if starts.len() > 64 {
            starts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            starts.truncate(16);
        }
    };
    if n <= 4 {
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            consider(idx.iter().map(|&i| candidates[i]).collect(), &mut starts);
            // Next combination in lexicographic order.
            let mut k = n;
            while k > 0 && idx[k - 1] == cand_count - n + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for j in k..n {
                idx[j] = idx[j - 1] + 1;
            }
        }
    } else {
        for shift in 0..cand_count {
            for stride in 1..=(cand_count / n) {
                let taus: Vec<f64> = (0..n)
                    .map(|i| candidates[(shift + i * stride).min(cand_count - 1)])
                    .collect();
                consider(taus, &mut starts);
            }
        }
    }
    starts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    starts.truncate(6);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, start) in starts {
        let refined = nelder_mead(|x| problem.objective(x), &start, 0.3, 4000);
        let f = problem.objective(&refined);
        if best.as_ref().is_none_or(|b| f < b.0) {
            best = Some((f, refined));
        }
    }
    let (rss, log_taus) = best.expect("at least one start");
    let (w, _) = problem.solve(&log_taus);
    let mut components: Vec<NoiseComponent> = log_taus
        .iter()
        .zip(&w)
        .map(|(&l, &wi)| {
            let tau = libm::exp(l.clamp(problem.log_lo, problem.log_hi));
            NoiseComponent { d: wi * tau, tau }
        })
        .collect();
    components.sort_by(|a, b| a.tau.partial_cmp(&b.tau).unwrap());
    Ok(NoiseModel {
        components,
        fit_residual: libm::sqrt(rss / lags.len() as f64),
    })
}

/// Nelder-Mead simplex minimization.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], step: f64, max_iter: usize) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-10 || spread <= 1e-15 * values[0].abs() + f64::MIN_POSITIVE {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let reflected = along(1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { along(0.5) } else { along(-0.5) };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = simplex[i]
                        .iter()
                        .zip(&best)
                        .map(|(p, b)| b + 0.5 * (p - b))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
        .unwrap();
    simplex[best].clone()
}
