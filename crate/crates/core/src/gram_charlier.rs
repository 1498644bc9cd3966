//! Positivity-corrected Gram-Charlier density.
//!
//! The fourth-order Gram-Charlier polynomial
//! `g(x) = 1 + (s/6)·He3(x) + ((k−3)/24)·He4(x)` is squared and renormalized,
//! `f(x) = φ(x)·g(x)²/h` with `h = 1 + s²/6 + (k−3)²/24`, which is a proper
//! density for every `(s, k)` and reduces to the standard normal at `(0, 3)`.

use serde::{Deserialize, Serialize};

use crate::dist::{normal_log_pdf, normal_pdf, LN_2PI};
use crate::error::{Error, Result};

/// Below this magnitude `log|g|` is clamped so the likelihood stays finite at
/// the isolated zeros of the squared polynomial.
pub const POLYNOMIAL_FLOOR: f64 = 1e-150;

/// Skewness and (raw) kurtosis parameters of the density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapePair {
    skew: f64,
    kurt: f64,
}

impl ShapePair {
    pub const GAUSSIAN: ShapePair = ShapePair {
        skew: 0.0,
        kurt: 3.0,
    };

    pub fn new(skew: f64, kurt: f64) -> Result<Self> {
        if !skew.is_finite() {
            return Err(Error::param("skew", skew, "the finite reals"));
        }
        if !(kurt > 0.0) || !kurt.is_finite() {
            return Err(Error::param("kurt", kurt, "(0, inf)"));
        }
        Ok(Self { skew, kurt })
    }

    /// Skips validation; the EWMA-SK likelihood evaluates shapes whose fourth
    /// moment can underflow to zero on long quiet stretches.
    pub(crate) fn from_state(skew: f64, kurt: f64) -> Self {
        Self { skew, kurt }
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    pub fn kurt(&self) -> f64 {
        self.kurt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcDensityValue {
    pub density: f64,
    pub log_density: f64,
}

#[inline]
pub fn hermite_he3(x: f64) -> f64 {
    x * x * x - 3.0 * x
}

#[inline]
pub fn hermite_he4(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 - 6.0 * x2 + 3.0
}

#[inline]
pub fn gc_polynomial(x: f64, shape: ShapePair) -> f64 {
    1.0 + shape.skew / 6.0 * hermite_he3(x) + (shape.kurt - 3.0) / 24.0 * hermite_he4(x)
}

/// Integral of `φ·g²`; always at least 1.
#[inline]
pub fn gc_normalizer(shape: ShapePair) -> f64 {
    let excess = shape.kurt - 3.0;
    1.0 + shape.skew * shape.skew / 6.0 + excess * excess / 24.0
}

#[inline]
fn clamped_log_abs(g: f64) -> f64 {
    g.abs().max(POLYNOMIAL_FLOOR).ln()
}

pub fn gc_density(x: f64, shape: ShapePair) -> GcDensityValue {
    let g = gc_polynomial(x, shape);
    let h = gc_normalizer(shape);
    GcDensityValue {
        density: normal_pdf(x) * g * g / h,
        log_density: normal_log_pdf(x) + 2.0 * clamped_log_abs(g) - h.ln(),
    }
}

/// Log-density of one residual `ε` with conditional variance `σ²`:
/// `−½log 2π − ½log σ² − ½η² + log g(η)² − log h`, with `η = ε/σ`.
pub fn gc_loglik_term(residual: f64, variance: f64, shape: ShapePair) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::param("variance", variance, "(0, inf)"));
    }
    Ok(loglik_term_unchecked(residual, variance, shape))
}

#[inline]
pub(crate) fn loglik_term_unchecked(residual: f64, variance: f64, shape: ShapePair) -> f64 {
    let eta = residual / variance.sqrt();
    let g = gc_polynomial(eta, shape);
    -0.5 * LN_2PI - 0.5 * variance.ln() - 0.5 * eta * eta + 2.0 * clamped_log_abs(g)
        - gc_normalizer(shape).ln()
}
