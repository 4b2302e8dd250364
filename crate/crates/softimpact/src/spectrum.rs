//! Welch power spectrum of a uniformly sampled series.
//!
//! Segments are the largest power of two that still yields at least eight
//! half-overlapping segments; each is mean-removed, windowed and transformed.
//! The one-sided density is normalized so that summing `power * d(omega/Omega)`
//! over all bins reproduces the series variance.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::config::Window;

pub const MIN_SAMPLES: usize = 1 << 14;
const MIN_SEGMENTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Bin frequencies `omega / Omega`.
    pub freq: Vec<f64>,
    /// Density per unit of `omega / Omega`.
    pub power: Vec<f64>,
    pub window: Window,
    pub segment_len: usize,
    pub segments: usize,
}

impl SpectrumResult {
    /// Bin width in units of `Omega`.
    pub fn bin_width(&self) -> f64 {
        if self.freq.len() > 1 {
            self.freq[1] - self.freq[0]
        } else {
            0.0
        }
    }

    /// Integral of the density over all bins (the windowed variance estimate).
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.bin_width()
    }

    fn band(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.freq.len()).filter(move |&i| self.freq[i] >= lo && self.freq[i] <= hi)
    }

    /// Median density over `lo <= omega/Omega <= hi`.
    pub fn floor(&self, lo: f64, hi: f64) -> f64 {
        let mut v: Vec<f64> = self.band(lo, hi).map(|i| self.power[i]).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    /// Local maxima inside the band exceeding `factor` times the band floor.
    pub fn peaks(&self, lo: f64, hi: f64, factor: f64) -> Vec<(f64, f64)> {
        let floor = self.floor(lo, hi);
        self.band(lo, hi)
            .filter(|&i| i > 0 && i + 1 < self.power.len())
            .filter(|&i| self.power[i] > self.power[i - 1] && self.power[i] >= self.power[i + 1])
            .filter(|&i| self.power[i] > factor * floor)
            .map(|i| (self.freq[i], self.power[i]))
            .collect()
    }
}

/// Largest power-of-two segment giving at least eight 50%-overlap segments.
pub fn segment_length(n: usize) -> usize {
    let mut len = 1usize;
    // Doubling to 2 len halves the hop to len.
    while 2 * len <= n && (n - 2 * len) / len + 1 >= MIN_SEGMENTS {
        len *= 2;
    }
    len
}

/// Welch estimate for samples spaced `sample_dt` apart under forcing
/// frequency `omega`.
pub fn power_spectrum(x: &[f64], sample_dt: f64, omega: f64, window: Window) -> Result<SpectrumResult> {
    if x.len() < MIN_SAMPLES {
        bail!("series has {} samples; the spectrum needs at least {MIN_SAMPLES}", x.len());
    }
    if !(sample_dt > 0.0 && omega > 0.0) {
        bail!("sample spacing and forcing frequency must be positive");
    }
    if x.iter().any(|v| !v.is_finite()) {
        bail!("series contains non-finite values");
    }
    let len = segment_length(x.len());
    let hop = len / 2;
    let segments = (x.len() - len) / hop + 1;
    let w: Vec<f64> = match window {
        Window::Hann => (0..len).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos()).collect(),
        Window::Rectangular => vec![1.0; len],
    };
    let u: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let bins = len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for s in 0..segments {
        let seg = &x[s * hop..s * hop + len];
        let mean = seg.iter().sum::<f64>() / len as f64;
        for ((b, v), wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex::new((v - mean) * wi, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    // Bin width in units of Omega.
    let df = 2.0 * PI / (len as f64 * sample_dt * omega);
    let power: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (len.is_multiple_of(2) && k == len / 2) { 1.0 } else { 2.0 };
            one_sided * a / (segments as f64 * u * len as f64 * df)
        })
        .collect();
    let freq = (0..bins).map(|k| k as f64 * df).collect();
    Ok(SpectrumResult { freq, power, window, segment_len: len, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn segment_choice() {
        assert_eq!(segment_length(1 << 14), 2048);
        assert_eq!(segment_length(9 * 1024), 2048);
        assert_eq!(segment_length(9 * 1024 - 1), 1024);
    }

    #[test]
    fn sinusoid_peaks_at_forcing_frequency() {
        let omega = 0.5;
        let dt = 2.0 * PI / omega / 64.0;
        let x: Vec<f64> = (0..1 << 16).map(|i| (omega * i as f64 * dt).sin()).collect();
        let s = power_spectrum(&x, dt, omega, Window::Hann).unwrap();
        let (imax, _) = s.power.iter().enumerate().fold((0, 0.0), |m, (i, &p)| if p > m.1 { (i, p) } else { m });
        assert!((s.freq[imax] - 1.0).abs() <= s.bin_width());
        assert!((s.total_power() - 0.5).abs() < 0.005 * 0.5);
    }

    #[test]
    fn parseval_on_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut y = 0.0;
        let x: Vec<f64> = (0..100_000)
            .map(|_| {
                y = 0.9 * y + rng.random::<f64>() - 0.5;
                y
            })
            .collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        for window in [Window::Hann, Window::Rectangular] {
            let s = power_spectrum(&x, 0.1, 1.3, window).unwrap();
            assert!((s.total_power() - var).abs() < 0.01 * var, "{window:?}: {} vs {var}", s.total_power());
        }
    }

    #[test]
    fn comb_has_peaks_and_floor() {
        let omega = 1.0;
        let dt = 2.0 * PI / 100.0;
        let x: Vec<f64> = (0..1 << 16)
            .map(|i| {
                let t = i as f64 * dt;
                (t / 3.0).sin() + 0.5 * (2.0 * t / 3.0).sin() + 0.3 * t.sin()
            })
            .collect();
        let s = power_spectrum(&x, dt, omega, Window::Hann).unwrap();
        assert!(s.peaks(0.1, 10.0, 10.0).len() >= 3);
    }

    #[test]
    fn short_series_rejected() {
        assert!(power_spectrum(&vec![0.0; MIN_SAMPLES - 1], 1.0, 1.0, Window::Hann).is_err());
    }
}
