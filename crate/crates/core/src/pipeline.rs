//! End-to-end workflow: fit on the in-sample period, forecast VaR over the
//! out-of-sample period, backtest.
//!
//! Forecasts are one step ahead: the VaR for date `t` uses only returns up to
//! `t − 1`, and model parameters stay at their in-sample estimates. Ten-day
//! (or any `h > 1`) forecasts are evaluated on non-overlapping blocks of `h`
//! out-of-sample days, each block's realized return being the sum of its
//! daily log returns.

use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest_with_addon, BacktestReport};
use crate::error::{Error, Result};
use crate::ewma::{
    estimate_ewma_sk_with, ewma_sk_filter_points, riskmetrics_filter_points, DecayParams,
    EwmaSkOptions, MomentPath, MomentState, RISKMETRICS_LAMBDA,
};
use crate::garch::{estimate_garch, garch_filter_points, GarchParams};
use crate::ingest::{mean_variance, ReturnPoint, ReturnSeries};
use crate::var_engine::{
    forecast_var, CfVariant, ForecastState, ModelTag, VaRPoint, VaRQuery, VaRSeries,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub out_of_sample_count: usize,
    pub alpha: f64,
    pub horizons: Vec<u32>,
    pub models: Vec<ModelTag>,
    pub riskmetrics_lambda: f64,
    pub cf_raw_kurtosis: bool,
    pub cf_full: bool,
    /// Fixed HS/FHS window length; `None` uses every past observation.
    pub rolling_window: Option<usize>,
    /// Hold the EWMA-SK mean at the in-sample average.
    pub pin_mu: bool,
    pub credit_addon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            out_of_sample_count: 500,
            alpha: 0.01,
            horizons: vec![1, 10],
            models: ModelTag::ALL.to_vec(),
            riskmetrics_lambda: RISKMETRICS_LAMBDA,
            cf_raw_kurtosis: false,
            cf_full: false,
            rolling_window: None,
            pin_mu: false,
            credit_addon: 0.0,
        }
    }
}

impl PipelineConfig {
    pub fn cf_variant(&self) -> CfVariant {
        CfVariant {
            raw_kurtosis: self.cf_raw_kurtosis,
            full: self.cf_full,
        }
    }

    fn wants(&self, tag: ModelTag) -> bool {
        self.models.contains(&tag)
    }

    pub fn needs_ewma_sk(&self) -> bool {
        self.wants(ModelTag::EwmaSk)
    }

    /// FHS standardizes with the GARCH-N filter, so it needs the fit too.
    pub fn needs_garch(&self) -> bool {
        self.wants(ModelTag::GarchN) || self.wants(ModelTag::Fhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMetricsSetup {
    pub lambda: f64,
    pub mu: f64,
    pub init_variance: f64,
}

/// In-sample estimates and filtered paths. Paths cover the in-sample
/// period only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub init_variance: f64,
    pub sample_mean: f64,
    pub ewma_sk: Option<DecayParams>,
    pub ewma_sk_path: Option<MomentPath>,
    pub garch: Option<GarchParams>,
    pub garch_path: Option<MomentPath>,
    pub riskmetrics: RiskMetricsSetup,
    pub riskmetrics_path: MomentPath,
}

pub fn fit_models(returns: &ReturnSeries, config: &PipelineConfig) -> Result<Fits> {
    let in_sample = returns.in_sample();
    let (mean, var) = mean_variance(&returns.in_sample_values())?;
    let init = MomentState::gaussian(var)?;

    let (ewma_sk, ewma_sk_path) = if config.needs_ewma_sk() {
        let options = EwmaSkOptions {
            init: Some(init),
            pin_mu: config.pin_mu.then_some(mean),
            ..EwmaSkOptions::default()
        };
        let (params, path) = estimate_ewma_sk_with(returns, &options)?;
        (Some(params), Some(path))
    } else {
        (None, None)
    };

    let (garch, garch_path) = if config.needs_garch() {
        let params = estimate_garch(returns)?;
        let path = garch_filter_points(in_sample, &params, var)?;
        (Some(params), Some(path))
    } else {
        (None, None)
    };

    let riskmetrics = RiskMetricsSetup {
        lambda: config.riskmetrics_lambda,
        mu: mean,
        init_variance: var,
    };
    let riskmetrics_path =
        riskmetrics_filter_points(in_sample, riskmetrics.lambda, riskmetrics.mu, var)?;

    Ok(Fits {
        init_variance: var,
        sample_mean: mean,
        ewma_sk,
        ewma_sk_path,
        garch,
        garch_path,
        riskmetrics,
        riskmetrics_path,
    })
}

/// Realized returns for horizon `h` over the out-of-sample period: the
/// daily returns for `h = 1`, otherwise sums over consecutive blocks of `h`
/// days dated at the block's last day. A trailing partial block is dropped.
pub fn realized_returns(returns: &ReturnSeries, horizon: u32) -> Vec<ReturnPoint> {
    let out = returns.out_of_sample();
    let h = horizon.max(1) as usize;
    out.chunks_exact(h)
        .map(|block| ReturnPoint {
            date: block[h - 1].date,
            value: block.iter().map(|p| p.value).sum(),
        })
        .collect()
}

/// Positions (into the full series) at which forecasts for `horizon` are
/// made, paired with the date the forecast is stamped with.
fn forecast_origins(returns: &ReturnSeries, horizon: u32) -> Vec<(usize, chrono::NaiveDate)> {
    let split = returns.split_index();
    let h = horizon.max(1) as usize;
    let n_blocks = returns.out_of_sample().len() / h;
    (0..n_blocks)
        .map(|b| {
            let start = split + b * h;
            (start, returns.observations()[start + h - 1].date)
        })
        .collect()
}

/// Filter paths over the whole series with parameters fixed at the fits.
struct FullPaths {
    ewma_sk: Option<(DecayParams, MomentPath)>,
    garch: Option<(GarchParams, MomentPath)>,
    riskmetrics: MomentPath,
}

fn full_paths(returns: &ReturnSeries, fits: &Fits) -> Result<FullPaths> {
    let all = returns.observations();
    let init = MomentState::gaussian(fits.init_variance)?;
    let ewma_sk = match &fits.ewma_sk {
        Some(p) => Some((*p, ewma_sk_filter_points(all, p, init)?)),
        None => None,
    };
    let garch = match &fits.garch {
        Some(p) => Some((*p, garch_filter_points(all, p, fits.init_variance)?)),
        None => None,
    };
    let rm = &fits.riskmetrics;
    let riskmetrics = riskmetrics_filter_points(all, rm.lambda, rm.mu, rm.init_variance)?;
    Ok(FullPaths {
        ewma_sk,
        garch,
        riskmetrics,
    })
}

/// The state on row `t` of a full path is the forecast for date `t`.
fn state_at(path: &MomentPath, t: usize) -> MomentState {
    path.entries()[t].state
}

fn window(values: &[f64], end: usize, rolling: Option<usize>) -> &[f64] {
    let start = rolling.map_or(0, |w| end.saturating_sub(w));
    &values[start..end]
}

/// VaR series for every requested model and horizon, in model order then
/// horizon order.
pub fn forecast_all(
    returns: &ReturnSeries,
    fits: &Fits,
    config: &PipelineConfig,
) -> Result<Vec<VaRSeries>> {
    if returns.out_of_sample().is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let paths = full_paths(returns, fits)?;
    let values = returns.values();
    let garch_residuals = paths.garch.as_ref().map(|(_, p)| p.std_residuals());
    let variant = config.cf_variant();

    let mut out = Vec::new();
    for &tag in ModelTag::ALL.iter().filter(|t| config.wants(**t)) {
        for &h in &config.horizons {
            let query = VaRQuery::new(config.alpha, h, tag)?;
            let mut series = VaRSeries::new(query);
            for (t, date) in forecast_origins(returns, h) {
                let state = match tag {
                    ModelTag::Hs => ForecastState::Historical {
                        window: window(&values, t, config.rolling_window),
                    },
                    ModelTag::Fhs => {
                        let (_, path) = paths.garch.as_ref().expect("GARCH fit present for FHS");
                        let residuals = garch_residuals.as_deref().expect("GARCH residuals");
                        ForecastState::Filtered {
                            std_residuals: window(residuals, t, config.rolling_window),
                            sigma: state_at(path, t).variance.sqrt(),
                        }
                    }
                    ModelTag::RiskMetrics => ForecastState::Parametric {
                        mu: fits.riskmetrics.mu,
                        sigma: state_at(&paths.riskmetrics, t).variance.sqrt(),
                        shape: crate::gram_charlier::ShapePair::GAUSSIAN,
                    },
                    ModelTag::EwmaSk => {
                        let (p, path) = paths.ewma_sk.as_ref().expect("EWMA-SK fit present");
                        let s = state_at(path, t);
                        ForecastState::Parametric {
                            mu: p.mu,
                            sigma: s.variance.sqrt(),
                            shape: s.shape(),
                        }
                    }
                    ModelTag::GarchN => {
                        let (p, path) = paths.garch.as_ref().expect("GARCH fit present");
                        ForecastState::Parametric {
                            mu: p.mu,
                            sigma: state_at(path, t).variance.sqrt(),
                            shape: crate::gram_charlier::ShapePair::GAUSSIAN,
                        }
                    }
                };
                let var_loss = forecast_var(state, &query, variant)?;
                series.entries.push(VaRPoint { date, var_loss });
            }
            out.push(series);
        }
    }
    Ok(out)
}

/// Backtests every VaR series against the realized returns of its horizon.
pub fn backtest_all(
    returns: &ReturnSeries,
    series: &[VaRSeries],
    credit_addon: f64,
) -> Result<Vec<BacktestReport>> {
    series
        .iter()
        .map(|s| {
            let realized = realized_returns(returns, s.query.horizon_days);
            run_backtest_with_addon(&realized, s, credit_addon)
        })
        .collect()
}
