//! Value-at-Risk forecasting with time-varying volatility, skewness and
//! kurtosis.
//!
//! The crate covers the full workflow for a daily index series:
//!
//! * [`ingest`]: price files, log returns, descriptive statistics.
//! * [`gram_charlier`]: the positivity-corrected Gram-Charlier density.
//! * [`ewma`]: RiskMetrics and the EWMA filter for variance, skewness and
//!   kurtosis (EWMA-SK), with maximum-likelihood estimation.
//! * [`garch`]: the GARCH(1,1)-Normal benchmark.
//! * [`mle`]: the BFGS driver used by both estimators.
//! * [`var_engine`]: Cornish-Fisher, historical and filtered historical VaR.
//! * [`backtest`]: hit sequences, Kupiec/Christoffersen tests, Basel zones.
//! * [`pipeline`] and [`cli`]: reproducible end-to-end runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod cli;
pub mod dist;
pub mod error;
pub mod ewma;
pub mod garch;
pub mod gram_charlier;
pub mod ingest;
pub mod mle;
pub mod pipeline;
pub mod var_engine;

pub use error::{Error, Result};
