//! Normal and chi-square helpers shared by the density, VaR and backtest code.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - 0.5 * LN_2PI).exp()
}

#[inline]
pub fn normal_log_pdf(x: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * x * x
}

/// Standard normal quantile `Φ⁻¹(p)` for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper-tail probability of a chi-square variate with `df` degrees of freedom.
///
/// Evaluated through the regularized upper incomplete gamma function.
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("degrees of freedom are positive");
    dist.sf(x).clamp(0.0, 1.0)
}
