//! Sigmoid-smoothed soft-impact potential.
//!
//! The piecewise stiffness `k` (free side) / `k (1 + A)` (beyond the wall) is
//! replaced by
//!
//! ```text
//! V''(x) = k A sigma(c (x - x_wall)) + k
//! ```
//!
//! and the force and potential are reconstructed from it, so every derivative
//! needed by the quantum correction is smooth and bounded.

use crate::quad::{self, Tolerance};
use crate::{Error, Result};

/// Oscillator, wall, forcing and smoothing constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Spring constant of the free side.
    pub k: f64,
    /// Stiffness multiplier of the wall spring.
    pub a: f64,
    pub mass: f64,
    pub x_wall: f64,
    /// Forcing amplitude.
    pub force: f64,
    /// Forcing angular frequency.
    pub omega: f64,
    pub hbar: f64,
    /// Sigmoid slope.
    pub c_slope: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            k: 1.0,
            a: 10.0,
            mass: 1.0,
            x_wall: 0.5,
            force: 10.0,
            omega: 0.5,
            hbar: 0.01,
            c_slope: 10.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, name: &'static str, reason: &'static str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason })
            }
        }
        check(self.k > 0.0 && self.k.is_finite(), "k", "must be positive and finite")?;
        check(self.a >= 0.0 && self.a.is_finite(), "A", "must be non-negative and finite")?;
        check(self.mass > 0.0 && self.mass.is_finite(), "m", "must be positive and finite")?;
        check(self.x_wall.is_finite(), "x_wall", "must be finite")?;
        check(self.force.is_finite(), "F", "must be finite")?;
        check(self.omega > 0.0 && self.omega.is_finite(), "Omega", "must be positive and finite")?;
        check(self.hbar >= 0.0 && self.hbar.is_finite(), "hbar", "must be non-negative and finite")?;
        check(self.c_slope > 0.0 && self.c_slope.is_finite(), "c", "must be positive and finite")?;
        Ok(())
    }

    /// Natural frequency of the free side, `sqrt(k / m)`.
    pub fn omega0(&self) -> f64 {
        libm::sqrt(self.k / self.mass)
    }

    /// Forcing period `2 pi / Omega`.
    pub fn period(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.omega
    }
}

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + libm::exp(-u))
    } else {
        let e = libm::exp(u);
        e / (1.0 + e)
    }
}

/// `sigma(u) (1 - sigma(u))` without cancellation in the tails.
#[inline]
fn sigmoid_slope(u: f64) -> f64 {
    let e = libm::exp(-libm::fabs(u));
    e / ((1.0 + e) * (1.0 + e))
}

/// `ln(1 + e^u)`.
#[inline]
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + libm::log1p(libm::exp(-u))
    } else {
        libm::log1p(libm::exp(u))
    }
}

/// Second derivative of the potential (local stiffness).
#[inline]
pub fn v2(x: f64, p: &SystemParams) -> f64 {
    p.k * p.a * sigmoid(p.c_slope * (x - p.x_wall)) + p.k
}

/// First derivative of the time-dependent potential, i.e. minus the force.
///
/// The forcing enters as `+ F cos(Omega t)` because the potential carries the
/// term `x F cos(Omega t)`.
#[inline]
pub fn v1(x: f64, t: f64, p: &SystemParams) -> f64 {
    p.k * x
        + p.k * p.a / p.c_slope * softplus(p.c_slope * (x - p.x_wall))
        + p.force * libm::cos(p.omega * t)
}

/// `V''`, `V'''`, `V''''` and `V'''''` at `x` (the forcing is linear in `x`
/// and does not contribute).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeTower {
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub v5: f64,
}

#[inline]
pub fn derivative_tower(x: f64, p: &SystemParams) -> DerivativeTower {
    let c = p.c_slope;
    let u = c * (x - p.x_wall);
    let s = sigmoid(u);
    let s1 = sigmoid_slope(u);
    let ka = p.k * p.a;
    DerivativeTower {
        v2: ka * s + p.k,
        v3: ka * c * s1,
        v4: ka * c * c * s1 * (1.0 - 2.0 * s),
        v5: ka * c * c * c * s1 * (1.0 - 6.0 * s + 6.0 * s * s),
    }
}

/// Potential derivatives of orders `2..=max_order + 1`.
pub fn v_derivs(x: f64, p: &SystemParams, max_order: usize) -> Result<alloc::vec::Vec<f64>> {
    if !(2..=4).contains(&max_order) {
        return Err(Error::UnsupportedOrder(max_order));
    }
    let d = derivative_tower(x, p);
    Ok([d.v2, d.v3, d.v4, d.v5][..max_order].to_vec())
}

/// Offset of the quadrature anchor to the left of the wall.
const ANCHOR_OFFSET: f64 = 10.0;

/// Time-dependent potential `V(x, t)`.
///
/// Only needed for energy diagnostics. Integrates [`v1`] from the anchor
/// `x_wall - 10`, where the wall spring contributes less than `e^{-10 c}`
/// and the potential is `k x^2 / 2 + x F cos(Omega t)`.
pub fn potential(x: f64, t: f64, p: &SystemParams) -> Result<f64> {
    let anchor = p.x_wall - ANCHOR_OFFSET;
    let base = 0.5 * p.k * anchor * anchor + anchor * p.force * libm::cos(p.omega * t);
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-11,
        max_intervals: 500,
    };
    let panels = [anchor, p.x_wall - 2.0, p.x_wall + 2.0];
    let mut f = |y: f64| v1(y, t, p);
    let mut total = base;
    if x <= panels[1] {
        total += quad::integrate_panels(&mut f, &[anchor, x], tol)?.value;
    } else if x <= panels[2] {
        total += quad::integrate_panels(&mut f, &[anchor, panels[1], x], tol)?.value;
    } else {
        total += quad::integrate_panels(&mut f, &[anchor, panels[1], panels[2], x], tol)?.value;
    }
    Ok(total)
}
