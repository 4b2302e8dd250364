//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use alloc::vec::Vec;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature: value and estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of subintervals kept on the work list.
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

/// One 15-point Kronrod rule on `[a, b]` with the embedded 7-point Gauss error.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Estimate {
        value: kronrod * half,
        abs_err: libm::fabs((kronrod - gauss) * half),
    }
}

/// Globally adaptive integration of `f` over `[a, b]`, bisecting the panel
/// with the largest error estimate until the total error meets `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_panels(&mut f, &[a, b], tol)
}

/// Like [`integrate`], but starting from the given breakpoints. Useful when
/// the integrand oscillates with a known period or changes scale at known
/// points.
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    f: &mut F,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let mut work: Vec<(f64, f64, Estimate)> = breakpoints
        .windows(2)
        .map(|w| (w[0], w[1], gk15(f, w[0], w[1])))
        .collect();
    loop {
        let value: f64 = work.iter().map(|p| p.2.value).sum();
        let err: f64 = work.iter().map(|p| p.2.abs_err).sum();
        let target = tol.abs.max(tol.rel * libm::fabs(value));
        if err <= target {
            return Ok(Estimate { value, abs_err: err });
        }
        if work.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                estimate: value,
                achieved: err,
                requested: target,
            });
        }
        let (idx, _) = work
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| {
                if p.2.abs_err > best.1 {
                    (i, p.2.abs_err)
                } else {
                    best
                }
            });
        let (a, b, _) = work.swap_remove(idx);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            // Panel can no longer be split in floating point.
            return Err(Error::Quadrature {
                estimate: value,
                achieved: err,
                requested: target,
            });
        }
        work.push((a, m, gk15(f, a, m)));
        work.push((m, b, gk15(f, m, b)));
    }
}
