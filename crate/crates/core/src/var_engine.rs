//! Value-at-Risk forecasts.
//!
//! VaR is reported as a positive loss in percent: a return `r` breaches the
//! forecast when `r < −VaR`. Parametric forecasts use the Cornish-Fisher
//! quantile of the model's standardized distribution; the empirical methods
//! use the lower order statistic `k = ⌈αN⌉` without interpolation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::ewma::fmt_num;
use crate::gram_charlier::ShapePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "HS")]
    Hs,
    #[serde(rename = "FHS")]
    Fhs,
    #[serde(rename = "RiskMetrics")]
    RiskMetrics,
    #[serde(rename = "EWMA-SK")]
    EwmaSk,
    #[serde(rename = "GARCH-N")]
    GarchN,
}

impl ModelTag {
    pub const ALL: [ModelTag; 5] = [
        ModelTag::Hs,
        ModelTag::Fhs,
        ModelTag::RiskMetrics,
        ModelTag::EwmaSk,
        ModelTag::GarchN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Hs => "HS",
            ModelTag::Fhs => "FHS",
            ModelTag::RiskMetrics => "RiskMetrics",
            ModelTag::EwmaSk => "EWMA-SK",
            ModelTag::GarchN => "GARCH-N",
        }
    }

    /// Lower-case label safe for file names.
    pub fn slug(self) -> &'static str {
        match self {
            ModelTag::Hs => "hs",
            ModelTag::Fhs => "fhs",
            ModelTag::RiskMetrics => "riskmetrics",
            ModelTag::EwmaSk => "ewma_sk",
            ModelTag::GarchN => "garch_n",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownModel(pub String);

impl fmt::Display for UnknownModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown model `{}` (expected HS, FHS, RiskMetrics, EWMA-SK or GARCH-N)",
            self.0
        )
    }
}

impl std::error::Error for UnknownModel {}

impl FromStr for ModelTag {
    type Err = UnknownModel;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "hs" => Ok(ModelTag::Hs),
            "fhs" => Ok(ModelTag::Fhs),
            "riskmetrics" | "rm" => Ok(ModelTag::RiskMetrics),
            "ewmask" => Ok(ModelTag::EwmaSk),
            "garchn" | "garch" => Ok(ModelTag::GarchN),
            _ => Err(UnknownModel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaRQuery {
    /// Tail probability, e.g. 0.01 for a 99% VaR.
    pub confidence_alpha: f64,
    pub horizon_days: u32,
    pub model_tag: ModelTag,
}

impl VaRQuery {
    pub fn new(confidence_alpha: f64, horizon_days: u32, model_tag: ModelTag) -> Result<Self> {
        check_alpha(confidence_alpha)?;
        if horizon_days < 1 {
            return Err(Error::param(
                "horizon_days",
                horizon_days as f64,
                "[1, inf)",
            ));
        }
        Ok(Self {
            confidence_alpha,
            horizon_days,
            model_tag,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::param("alpha", alpha, "(0, 0.5]"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaRPoint {
    pub date: NaiveDate,
    pub var_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaRSeries {
    pub query: VaRQuery,
    pub entries: Vec<VaRPoint>,
}

impl VaRSeries {
    pub fn new(query: VaRQuery) -> Self {
        Self {
            query,
            entries: Vec::new(),
        }
    }

    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.var_loss).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `date,model,alpha,horizon,var_loss` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["date", "model", "alpha", "horizon", "var_loss"])?;
        for e in &self.entries {
            out.write_record([
                e.date.to_string(),
                self.query.model_tag.to_string(),
                fmt_num(self.query.confidence_alpha),
                self.query.horizon_days.to_string(),
                fmt_num(e.var_loss),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Variants of the Cornish-Fisher quantile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfVariant {
    /// Weight the kurtosis term by `k/24` instead of the excess `(k−3)/24`.
    pub raw_kurtosis: bool,
    /// Subtract the second-order skewness term `(2z³−5z)s²/36`.
    pub full: bool,
}

/// `z·{1 + (s/6)(z²−1) + ((k−3)/24)(z³−3z)}` with `z = Φ⁻¹(1−α)`.
pub fn cornish_fisher_quantile(alpha: f64, shape: ShapePair) -> Result<f64> {
    cornish_fisher_quantile_with(alpha, shape, CfVariant::default())
}

pub fn cornish_fisher_quantile_with(
    alpha: f64,
    shape: ShapePair,
    variant: CfVariant,
) -> Result<f64> {
    check_alpha(alpha)?;
    let z = normal_quantile(1.0 - alpha);
    let s = shape.skew();
    let k = if variant.raw_kurtosis {
        shape.kurt()
    } else {
        shape.kurt() - 3.0
    };
    let mut q = z * (1.0 + s / 6.0 * (z * z - 1.0) + k / 24.0 * (z * z * z - 3.0 * z));
    if variant.full {
        q -= (2.0 * z * z * z - 5.0 * z) * s * s / 36.0;
    }
    Ok(q)
}

/// Loss magnitude `quantile·σ − μ`.
pub fn parametric_var(mu: f64, sigma: f64, quantile: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", sigma, "(0, inf)"));
    }
    Ok(quantile * sigma - mu)
}

/// Order-statistic rank `⌈αN⌉` (1-based), guarded against `αN` landing a
/// hair above an integer through rounding.
fn quantile_rank(alpha: f64, n: usize) -> usize {
    ((alpha * n as f64 - 1e-9).ceil() as usize).max(1)
}

/// Smallest window the empirical methods accept, `⌈1/α⌉`.
pub fn min_window(alpha: f64) -> usize {
    (1.0 / alpha - 1e-9).ceil() as usize
}

fn empirical_quantile(window: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let needed = min_window(alpha);
    if window.len() < needed {
        return Err(Error::TooFewObservations {
            needed,
            got: window.len(),
        });
    }
    if let Some(index) = window.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let k = quantile_rank(alpha, window.len());
    let mut sorted = window.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    Ok(*kth)
}

/// Historical-simulation VaR: minus the `⌈αN⌉`-th smallest return.
pub fn historical_simulation(window: &[f64], alpha: f64) -> Result<f64> {
    Ok(-empirical_quantile(window, alpha)?)
}

/// Filtered historical simulation: the empirical quantile of standardized
/// residuals, rescaled by the volatility forecast.
///
/// A window with no negative residuals yields a nonpositive VaR; it is
/// returned as is, with a warning.
pub fn filtered_historical_simulation(
    std_residuals: &[f64],
    sigma_forecast: f64,
    alpha: f64,
) -> Result<f64> {
    if !(sigma_forecast > 0.0) || !sigma_forecast.is_finite() {
        return Err(Error::param("sigma_forecast", sigma_forecast, "(0, inf)"));
    }
    let var = -empirical_quantile(std_residuals, alpha)? * sigma_forecast;
    if var <= 0.0 {
        log::warn!("degenerate FHS window: empirical {alpha} quantile is nonnegative, VaR {var}");
    }
    Ok(var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mu: f64,
    pub sigma: f64,
    pub skew: f64,
    pub kurt: f64,
}

/// Moments of the sum of `x` i.i.d. one-period increments.
pub fn rescale_moments(mu: f64, sigma: f64, skew: f64, kurt: f64, x: u32) -> Result<Moments> {
    if x < 1 {
        return Err(Error::param("x", x as f64, "[1, inf)"));
    }
    let xf = x as f64;
    Ok(Moments {
        mu: xf * mu,
        sigma: xf.sqrt() * sigma,
        skew: skew / xf.sqrt(),
        kurt: (kurt + 3.0 * (xf - 1.0)) / xf,
    })
}

/// What a model knows on the forecast date.
#[derive(Debug, Clone, Copy)]
pub enum ForecastState<'a> {
    /// One-step mean, volatility and shape. The shape is ignored for
    /// RiskMetrics and GARCH-N, whose innovations are Gaussian.
    Parametric {
        mu: f64,
        sigma: f64,
        shape: ShapePair,
    },
    /// Past returns available on the forecast date.
    Historical { window: &'a [f64] },
    /// Past standardized residuals and the one-step volatility forecast.
    Filtered {
        std_residuals: &'a [f64],
        sigma: f64,
    },
}

/// VaR for `query` from the model state on the forecast date.
///
/// Parametric models at horizon `x > 1` rescale their one-step moments; the
/// empirical methods scale their one-day VaR by `√x`.
pub fn forecast_var(state: ForecastState<'_>, query: &VaRQuery, variant: CfVariant) -> Result<f64> {
    let alpha = query.confidence_alpha;
    let x = query.horizon_days;
    let mismatch = || Error::StateMismatch {
        model: query.model_tag.to_string(),
    };
    match (query.model_tag, state) {
        (ModelTag::Hs, ForecastState::Historical { window }) => {
            Ok(historical_simulation(window, alpha)? * (x as f64).sqrt())
        }
        (
            ModelTag::Fhs,
            ForecastState::Filtered {
                std_residuals,
                sigma,
            },
        ) => Ok(filtered_historical_simulation(std_residuals, sigma, alpha)? * (x as f64).sqrt()),
        (
            tag @ (ModelTag::RiskMetrics | ModelTag::EwmaSk | ModelTag::GarchN),
            ForecastState::Parametric { mu, sigma, shape },
        ) => {
            let shape = if tag == ModelTag::EwmaSk {
                shape
            } else {
                ShapePair::GAUSSIAN
            };
            let m = rescale_moments(mu, sigma, shape.skew(), shape.kurt(), x)?;
            let q = cornish_fisher_quantile_with(
                alpha,
                ShapePair::from_state(m.skew, m.kurt),
                variant,
            )?;
            parametric_var(m.mu, m.sigma, q)
        }
        _ => Err(mismatch()),
    }
}
