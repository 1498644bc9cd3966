//! VaR backtests: hit sequences, likelihood-ratio coverage tests, the Basel
//! traffic light and market risk capital.
//!
//! Likelihoods use the convention `0·ln 0 = 0`, so configurations with no
//! hits or no transitions of some kind need no special cases.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dist::chi_square_sf;
use crate::error::{Error, Result};
use crate::ingest::ReturnPoint;
use crate::var_engine::{ModelTag, VaRSeries};

pub const MIN_BACKTEST_LENGTH: usize = 50;
pub const BASEL_WINDOW: usize = 250;
pub const MRC_WINDOW: usize = 60;

/// `x·ln y`, zero when `x` is zero.
#[inline]
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub n0: u64,
    pub n1: u64,
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl TransitionCounts {
    pub fn from_hits(hits: &[u8]) -> Self {
        let mut c = TransitionCounts::default();
        for &h in hits {
            if h == 0 {
                c.n0 += 1;
            } else {
                c.n1 += 1;
            }
        }
        for w in hits.windows(2) {
            match (w[0], w[1]) {
                (0, 0) => c.n00 += 1,
                (0, _) => c.n01 += 1,
                (_, 0) => c.n10 += 1,
                _ => c.n11 += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitSequence {
    hits: Vec<u8>,
    alpha: f64,
    counts: TransitionCounts,
}

impl HitSequence {
    pub fn new(hits: Vec<u8>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", alpha, "(0, 1)"));
        }
        let hits: Vec<u8> = hits.into_iter().map(|h| u8::from(h != 0)).collect();
        let counts = TransitionCounts::from_hits(&hits);
        Ok(Self {
            hits,
            alpha,
            counts,
        })
    }

    pub fn hits(&self) -> &[u8] {
        &self.hits
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counts(&self) -> TransitionCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// 1-based position of the first hit.
    pub fn first_failure(&self) -> Option<usize> {
        self.hits.iter().position(|&h| h == 1).map(|i| i + 1)
    }
}

/// Hit `t` is 1 when `r_t < −VaR_t`; a return exactly at the threshold is
/// not a hit.
pub fn hit_sequence(returns: &[ReturnPoint], var: &VaRSeries) -> Result<HitSequence> {
    if returns.len() != var.entries.len() {
        return Err(Error::LengthMismatch {
            left: returns.len(),
            right: var.entries.len(),
        });
    }
    for (index, (r, v)) in returns.iter().zip(&var.entries).enumerate() {
        if r.date != v.date {
            return Err(Error::MisalignedDates {
                index,
                return_date: r.date,
                forecast_date: v.date,
            });
        }
    }
    let hits = returns
        .iter()
        .zip(&var.entries)
        .map(|(r, v)| u8::from(r.value < -v.var_loss))
        .collect();
    HitSequence::new(hits, var.query.confidence_alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub p_value: f64,
}

impl LrTest {
    fn chi_square(statistic: f64, df: u32) -> Self {
        // tiny negative values only arise from cancellation
        let statistic = statistic.max(0.0);
        Self {
            statistic,
            p_value: chi_square_sf(statistic, df),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TuffOutcome {
    Failure {
        /// 1-based index of the first hit.
        index: usize,
        #[serde(flatten)]
        test: LrTest,
    },
    NoExceptions,
}

/// Bernoulli log-likelihood of `n − 1` successes followed by one failure at
/// failure probability `p`.
fn first_failure_loglik(p: f64, n: usize) -> f64 {
    p.ln() + xlogy((n - 1) as f64, 1.0 - p)
}

/// Time-until-first-failure statistic for a first hit at 1-based index `n`.
pub fn lr_tuff(first_failure_index: usize, alpha: f64) -> Result<LrTest> {
    if first_failure_index < 1 {
        return Err(Error::param(
            "first_failure_index",
            first_failure_index as f64,
            "[1, inf)",
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", alpha, "(0, 1)"));
    }
    let n = first_failure_index;
    let stat =
        -2.0 * first_failure_loglik(alpha, n) + 2.0 * first_failure_loglik(1.0 / n as f64, n);
    Ok(LrTest::chi_square(stat, 1))
}

pub fn tuff(hits: &HitSequence) -> Result<TuffOutcome> {
    match hits.first_failure() {
        Some(index) => Ok(TuffOutcome::Failure {
            index,
            test: lr_tuff(index, hits.alpha())?,
        }),
        None => Ok(TuffOutcome::NoExceptions),
    }
}

/// Kupiec unconditional coverage test.
pub fn lr_uc(n0: u64, n1: u64, p: f64) -> Result<LrTest> {
    let total = n0 + n1;
    if total == 0 {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", p, "(0, 1)"));
    }
    let (n0, n1) = (n0 as f64, n1 as f64);
    let pi = n1 / total as f64;
    let null = xlogy(n1, p) + xlogy(n0, 1.0 - p);
    let alt = xlogy(n1, pi) + xlogy(n0, 1.0 - pi);
    Ok(LrTest::chi_square(-2.0 * (null - alt), 1))
}

/// Christoffersen independence test against a first-order Markov chain.
pub fn lr_ind(n00: u64, n01: u64, n10: u64, n11: u64) -> Result<LrTest> {
    let total = n00 + n01 + n10 + n11;
    if total == 0 {
        return Err(Error::TooFewObservations { needed: 2, got: 0 });
    }
    let [n00, n01, n10, n11] = [n00, n01, n10, n11].map(|v| v as f64);
    let pi2 = (n01 + n11) / total as f64;
    let null = xlogy(n00 + n10, 1.0 - pi2) + xlogy(n01 + n11, pi2);
    // a state never visited contributes nothing to the alternative
    let from0 = n00 + n01;
    let from1 = n10 + n11;
    let mut alt = 0.0;
    if from0 > 0.0 {
        let pi01 = n01 / from0;
        alt += xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01);
    }
    if from1 > 0.0 {
        let pi11 = n11 / from1;
        alt += xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
    }
    Ok(LrTest::chi_square(-2.0 * (null - alt), 1))
}

/// Conditional coverage, `LR_UC + LR_IND` against chi-square(2).
pub fn lr_cc(uc: f64, ind: f64) -> Result<LrTest> {
    if !uc.is_finite() {
        return Err(Error::param("uc", uc, "the finite reals"));
    }
    if !ind.is_finite() {
        return Err(Error::param("ind", ind, "the finite reals"));
    }
    Ok(LrTest::chi_square(uc + ind, 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Green,
    Yellow,
    Red,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Green => "green",
            Zone::Yellow => "yellow",
            Zone::Red => "red",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselZone {
    pub zone: Zone,
    pub violations: u64,
    pub multiplier: f64,
}

/// Traffic-light classification of a 250-day violation count. Ten
/// violations are red.
pub fn basel_zone(violations: i64) -> Result<BaselZone> {
    if violations < 0 {
        return Err(Error::param("violations", violations as f64, "[0, inf)"));
    }
    let (zone, multiplier) = match violations {
        0..=4 => (Zone::Green, 3.0),
        // (15 + x − 4)/5 is 3 + 0.2(x − 4) without accumulated rounding
        5..=9 => (Zone::Yellow, (11 + violations) as f64 / 5.0),
        _ => (Zone::Red, 4.0),
    };
    Ok(BaselZone {
        zone,
        violations: violations as u64,
        multiplier,
    })
}

/// `max(VaR_t, S·mean(history)) + c`.
pub fn market_risk_capital(
    var_history: &[f64],
    current_var: f64,
    multiplier: f64,
    credit_addon: f64,
) -> Result<f64> {
    if var_history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if var_history.len() < MRC_WINDOW {
        log::debug!(
            "market risk capital from {} VaR values (fewer than {MRC_WINDOW})",
            var_history.len()
        );
    }
    let mean = var_history.iter().sum::<f64>() / var_history.len() as f64;
    Ok(current_var.max(multiplier * mean) + credit_addon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrcPoint {
    pub date: NaiveDate,
    pub capital: f64,
    pub multiplier: f64,
    /// False while fewer than 60 VaR values are available.
    pub full_history: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub model: ModelTag,
    pub alpha: f64,
    pub horizon: u32,
    pub observations: usize,
    pub violations: u64,
    pub failure_pct: f64,
    pub counts: TransitionCounts,
    pub lr_tuff: TuffOutcome,
    pub lr_uc: LrTest,
    pub lr_ind: LrTest,
    pub lr_cc: LrTest,
    pub basel_zone: BaselZone,
    pub mrc_series: Option<Vec<MrcPoint>>,
}

/// Full battery for one model and horizon. The Basel zone counts violations
/// over the last 250 observations (all of them when fewer). The capital
/// multiplier on each date comes from the violations in the 250 days before
/// it, and the VaR average covers the last 60 forecasts up to that date.
pub fn run_backtest(returns: &[ReturnPoint], var: &VaRSeries) -> Result<BacktestReport> {
    run_backtest_with_addon(returns, var, 0.0)
}

pub fn run_backtest_with_addon(
    returns: &[ReturnPoint],
    var: &VaRSeries,
    credit_addon: f64,
) -> Result<BacktestReport> {
    if returns.len() < MIN_BACKTEST_LENGTH {
        return Err(Error::TooFewObservations {
            needed: MIN_BACKTEST_LENGTH,
            got: returns.len(),
        });
    }
    let hits = hit_sequence(returns, var)?;
    let c = hits.counts();
    let alpha = hits.alpha();
    let uc = lr_uc(c.n0, c.n1, alpha)?;
    let ind = lr_ind(c.n00, c.n01, c.n10, c.n11)?;
    let cc = lr_cc(uc.statistic, ind.statistic)?;

    let h = hits.hits();
    let recent = &h[h.len().saturating_sub(BASEL_WINDOW)..];
    let zone = basel_zone(recent.iter().filter(|&&x| x == 1).count() as i64)?;

    let losses = var.losses();
    let mut mrc = Vec::with_capacity(losses.len());
    for t in 0..losses.len() {
        let past = &h[t.saturating_sub(BASEL_WINDOW)..t];
        let s = basel_zone(past.iter().filter(|&&x| x == 1).count() as i64)?.multiplier;
        let history = &losses[(t + 1).saturating_sub(MRC_WINDOW)..=t];
        mrc.push(MrcPoint {
            date: var.entries[t].date,
            capital: market_risk_capital(history, losses[t], s, credit_addon)?,
            multiplier: s,
            full_history: history.len() == MRC_WINDOW,
        });
    }

    Ok(BacktestReport {
        model: var.query.model_tag,
        alpha,
        horizon: var.query.horizon_days,
        observations: hits.len(),
        violations: c.n1,
        failure_pct: 100.0 * c.n1 as f64 / hits.len() as f64,
        counts: c,
        lr_tuff: tuff(&hits)?,
        lr_uc: uc,
        lr_ind: ind,
        lr_cc: cc,
        basel_zone: zone,
        mrc_series: if mrc.is_empty() { None } else { Some(mrc) },
    })
}

/// Plain-text table with one row per report: PF%, the four LR statistics
/// with p-values in parentheses, and the Basel zone.
pub fn render_table(reports: &[BacktestReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>3} {:>5} {:>5} {:>7} {:>17} {:>17} {:>17} {:>17}  {:<6}",
        "Model", "h", "N", "Hits", "PF%", "TUFF", "UC", "IND", "CC", "Basel"
    );
    let cell = |t: &LrTest| format!("{:.3} ({:.3})", t.statistic, t.p_value);
    for r in reports {
        let tuff = match &r.lr_tuff {
            TuffOutcome::Failure { test, .. } => cell(test),
            TuffOutcome::NoExceptions => "no exceptions".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<12} {:>3} {:>5} {:>5} {:>6.2}% {:>17} {:>17} {:>17} {:>17}  {:<6}",
            r.model.as_str(),
            r.horizon,
            r.observations,
            r.violations,
            r.failure_pct,
            tuff,
            cell(&r.lr_uc),
            cell(&r.lr_ind),
            cell(&r.lr_cc),
            r.basel_zone.zone.as_str(),
        );
    }
    out.push_str("TUFF uses the first exception only; later exceptions do not enter it.\n");
    out
}
