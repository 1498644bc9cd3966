//! RiskMetrics and EWMA-SK filters.
//!
//! The EWMA-SK filter carries the conditional variance of returns together
//! with exponentially weighted estimates of the third and fourth moments of
//! the standardized residual `η = ε/σ`. The moment states are used as the
//! Gram-Charlier shape directly, so a state of `(third, fourth) = (0, 3)` is
//! the Gaussian case.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram_charlier::{loglik_term_unchecked, ShapePair};
use crate::ingest::{mean_variance, ReturnPoint, ReturnSeries};
use crate::mle::{maximize, penalty, OptimizationProblem};

/// Candidate parameters that push the conditional variance below this floor
/// receive a penalty value instead of a likelihood.
pub const VARIANCE_FLOOR: f64 = 1e-12;

pub const RISKMETRICS_LAMBDA: f64 = 0.94;

const MIN_ESTIMATION_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub variance: f64,
    pub third: f64,
    pub fourth: f64,
}

impl MomentState {
    pub fn new(variance: f64, third: f64, fourth: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::param("variance", variance, "(0, inf)"));
        }
        if !third.is_finite() {
            return Err(Error::param("third", third, "the finite reals"));
        }
        if !(fourth > 0.0) || !fourth.is_finite() {
            return Err(Error::param("fourth", fourth, "(0, inf)"));
        }
        Ok(Self {
            variance,
            third,
            fourth,
        })
    }

    /// Gaussian-neutral state with the given variance.
    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new(variance, 0.0, 3.0)
    }

    pub fn shape(&self) -> ShapePair {
        ShapePair::from_state(self.third, self.fourth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub date: NaiveDate,
    #[serde(flatten)]
    pub state: MomentState,
    /// `(r_t − μ)/σ_t` with `σ_t` the filtered (pre-observation) volatility.
    pub std_residual: f64,
}

/// Filtered states, one per observation, plus the state implied for the day
/// after the last observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPath {
    entries: Vec<MomentEntry>,
    terminal: MomentState,
}

impl MomentPath {
    pub(crate) fn from_parts(entries: Vec<MomentEntry>, terminal: MomentState) -> Self {
        Self { entries, terminal }
    }

    pub fn entries(&self) -> &[MomentEntry] {
        &self.entries
    }

    /// One-step-ahead state after the final observation.
    pub fn terminal(&self) -> MomentState {
        self.terminal
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.state.variance).collect()
    }

    pub fn std_residuals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.std_residual).collect()
    }

    /// Writes `date,variance,skew_state,kurt_state,std_residual` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "date",
            "variance",
            "skew_state",
            "kurt_state",
            "std_residual",
        ])?;
        for e in &self.entries {
            out.write_record([
                e.date.to_string(),
                fmt_num(e.state.variance),
                fmt_num(e.state.third),
                fmt_num(e.state.fourth),
                fmt_num(e.std_residual),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `date,variance` rows.
    pub fn write_variance_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["date", "variance"])?;
        for e in &self.entries {
            out.write_record([e.date.to_string(), fmt_num(e.state.variance)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Fixed 15-significant-digit rendering used by every CSV export.
pub(crate) fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{:.14e}", v)
        .parse::<f64>()
        .map(|r| format!("{r}"))
        .unwrap_or_else(|_| format!("{v}"))
}

/// Estimated EWMA-SK parameters. `t_stats` follow `lambda1..3`; an entry is
/// `None` when the Hessian at the optimum could not be inverted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mu: f64,
    pub log_likelihood: f64,
    pub t_stats: [Option<f64>; 3],
}

impl DecayParams {
    /// Parameters with no estimation attached, e.g. for filtering at known
    /// values.
    pub fn fixed(lambdas: [f64; 3], mu: f64) -> Result<Self> {
        check_lambdas(&lambdas)?;
        Ok(Self {
            lambda1: lambdas[0],
            lambda2: lambdas[1],
            lambda3: lambdas[2],
            mu,
            log_likelihood: f64::NAN,
            t_stats: [None; 3],
        })
    }

    pub fn lambdas(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }
}

fn check_lambda(name: &'static str, lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, lambda, "(0, 1)"))
    }
}

fn check_lambdas(lambdas: &[f64; 3]) -> Result<()> {
    check_lambda("lambda1", lambdas[0])?;
    check_lambda("lambda2", lambdas[1])?;
    check_lambda("lambda3", lambdas[2])
}

/// `σ_t² = λσ_{t−1}² + (1−λ)ε_{t−1}²`.
pub fn riskmetrics_step(prev_variance: f64, prev_residual: f64, lambda: f64) -> Result<f64> {
    check_lambda("lambda", lambda)?;
    if !(prev_variance > 0.0) {
        return Err(Error::param("variance", prev_variance, "(0, inf)"));
    }
    Ok(lambda * prev_variance + (1.0 - lambda) * prev_residual * prev_residual)
}

/// RiskMetrics filter over the in-sample part of `returns`.
pub fn riskmetrics_filter(
    returns: &ReturnSeries,
    lambda: f64,
    mu: f64,
    init_variance: f64,
) -> Result<MomentPath> {
    riskmetrics_filter_points(returns.in_sample(), lambda, mu, init_variance)
}

/// RiskMetrics filter over arbitrary points; the shape states stay at the
/// Gaussian `(0, 3)`.
pub fn riskmetrics_filter_points(
    points: &[ReturnPoint],
    lambda: f64,
    mu: f64,
    init_variance: f64,
) -> Result<MomentPath> {
    if points.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: points.len(),
        });
    }
    check_lambda("lambda", lambda)?;
    let mut state = MomentState::gaussian(init_variance)?;
    let mut entries = Vec::with_capacity(points.len());
    for p in points {
        let residual = p.value - mu;
        entries.push(MomentEntry {
            date: p.date,
            state,
            std_residual: residual / state.variance.sqrt(),
        });
        state.variance = lambda * state.variance + (1.0 - lambda) * residual * residual;
    }
    Ok(MomentPath {
        entries,
        terminal: state,
    })
}

#[inline]
fn sk_step_unchecked(state: MomentState, residual: f64, lambdas: [f64; 3]) -> MomentState {
    let [l1, l2, l3] = lambdas;
    let eta = residual / state.variance.sqrt();
    let eta2 = eta * eta;
    MomentState {
        variance: l1 * state.variance + (1.0 - l1) * residual * residual,
        third: l2 * state.third + (1.0 - l2) * eta2 * eta,
        fourth: l3 * state.fourth + (1.0 - l3) * eta2 * eta2,
    }
}

/// One EWMA-SK update. `η` is standardized with the incoming variance.
pub fn ewma_sk_step(state: MomentState, residual: f64, lambdas: [f64; 3]) -> Result<MomentState> {
    check_lambdas(&lambdas)?;
    if !(state.variance > 0.0) {
        return Err(Error::param("variance", state.variance, "(0, inf)"));
    }
    Ok(sk_step_unchecked(state, residual, lambdas))
}

/// EWMA-SK filter over the in-sample part of `returns`.
pub fn ewma_sk_filter(
    returns: &ReturnSeries,
    params: &DecayParams,
    init: MomentState,
) -> Result<MomentPath> {
    ewma_sk_filter_points(returns.in_sample(), params, init)
}

pub fn ewma_sk_filter_points(
    points: &[ReturnPoint],
    params: &DecayParams,
    init: MomentState,
) -> Result<MomentPath> {
    if points.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: points.len(),
        });
    }
    let lambdas = params.lambdas();
    check_lambdas(&lambdas)?;
    let mut state = MomentState::new(init.variance, init.third, init.fourth)?;
    let mut entries = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let residual = p.value - params.mu;
        entries.push(MomentEntry {
            date: p.date,
            state,
            std_residual: residual / state.variance.sqrt(),
        });
        state = ewma_sk_step(state, residual, lambdas)?;
        if !state.variance.is_finite() || !state.fourth.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
    }
    Ok(MomentPath {
        entries,
        terminal: state,
    })
}

/// Gram-Charlier log-likelihood of `values` under the EWMA-SK filter.
///
/// Returns a [`penalty`] value when the variance leaves `[VARIANCE_FLOOR, ∞)`
/// or the likelihood stops being finite; the distance term is the number of
/// observations left unprocessed.
pub fn ewma_sk_loglik(values: &[f64], lambdas: [f64; 3], mu: f64, init: MomentState) -> f64 {
    let mut state = init;
    let mut total = 0.0;
    for (t, &r) in values.iter().enumerate() {
        if !(state.variance >= VARIANCE_FLOOR) || !state.variance.is_finite() {
            return penalty((values.len() - t) as f64);
        }
        let residual = r - mu;
        total += loglik_term_unchecked(residual, state.variance, state.shape());
        state = sk_step_unchecked(state, residual, lambdas);
    }
    if total.is_finite() {
        total
    } else {
        penalty(1.0)
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Overrides for [`estimate_ewma_sk_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaSkOptions {
    /// Filter start; the default is the in-sample variance with a Gaussian
    /// shape.
    pub init: Option<MomentState>,
    /// Holds `μ` fixed instead of estimating it.
    pub pin_mu: Option<f64>,
    pub start_lambdas: [f64; 3],
    /// Gradient tolerance per observation.
    pub tolerance_per_obs: f64,
    pub max_iterations: usize,
}

impl Default for EwmaSkOptions {
    fn default() -> Self {
        Self {
            init: None,
            pin_mu: None,
            start_lambdas: [0.95, 0.95, 0.95],
            tolerance_per_obs: 1e-6,
            max_iterations: 500,
        }
    }
}

/// Maximum-likelihood EWMA-SK fit on the in-sample part of `returns`.
pub fn estimate_ewma_sk(returns: &ReturnSeries) -> Result<(DecayParams, MomentPath)> {
    estimate_ewma_sk_with(returns, &EwmaSkOptions::default())
}

pub fn estimate_ewma_sk_with(
    returns: &ReturnSeries,
    options: &EwmaSkOptions,
) -> Result<(DecayParams, MomentPath)> {
    let values = returns.in_sample_values();
    let n = values.len();
    if n < MIN_ESTIMATION_LENGTH {
        return Err(Error::TooFewObservations {
            needed: MIN_ESTIMATION_LENGTH,
            got: n,
        });
    }
    let (mean, var) = mean_variance(&values)?;
    let init = match options.init {
        Some(s) => MomentState::new(s.variance, s.third, s.fourth)?,
        None => MomentState::gaussian(var)?,
    };
    check_lambdas(&options.start_lambdas)?;

    let pinned = options.pin_mu;
    let objective = |theta: &[f64]| {
        let lambdas = [logistic(theta[0]), logistic(theta[1]), logistic(theta[2])];
        let mu = pinned.unwrap_or_else(|| theta[3]);
        ewma_sk_loglik(&values, lambdas, mu, init)
    };
    let mut start: Vec<f64> = options.start_lambdas.iter().map(|&l| logit(l)).collect();
    let mut names = vec!["logit_lambda1", "logit_lambda2", "logit_lambda3"];
    if pinned.is_none() {
        start.push(mean);
        names.push("mu");
    }
    let problem = OptimizationProblem::new(objective, start).with_names(names);
    let result = maximize(
        &problem,
        options.tolerance_per_obs * n as f64,
        options.max_iterations,
    )?;

    let lambdas = [
        logistic(result.point[0]),
        logistic(result.point[1]),
        logistic(result.point[2]),
    ];
    let mu = pinned.unwrap_or(result.point.get(3).copied().unwrap_or(mean));
    if !result.converged {
        let mut best_point = lambdas.to_vec();
        best_point.push(mu);
        return Err(Error::NonConvergence {
            model: "EWMA-SK",
            best_point,
            value: result.value,
            gradient_norm: result.gradient_norm,
            iterations: result.iterations,
        });
    }

    // delta method: dλ/dθ = λ(1−λ)
    let mut t_stats = [None; 3];
    if let Some(se) = &result.standard_errors {
        for i in 0..3 {
            let se_lambda = lambdas[i] * (1.0 - lambdas[i]) * se[i];
            if se_lambda > 0.0 {
                t_stats[i] = Some(lambdas[i] / se_lambda);
            }
        }
    }
    let params = DecayParams {
        lambda1: lambdas[0],
        lambda2: lambdas[1],
        lambda3: lambdas[2],
        mu,
        log_likelihood: result.value,
        t_stats,
    };
    let path = ewma_sk_filter_points(returns.in_sample(), &params, init)?;
    Ok((params, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2000, 1, 3).unwrap()
    }

    fn series(values: &[f64]) -> ReturnSeries {
        ReturnSeries::from_values(day0(), values).unwrap()
    }

    #[test]
    fn riskmetrics_step_examples() {
        assert_eq!(riskmetrics_step(1.0, 1.0, 0.94).unwrap(), 1.0);
        assert!((riskmetrics_step(2.0, 0.0, 0.94).unwrap() - 1.88).abs() < 1e-15);
        assert!((riskmetrics_step(1.0, 2.0, 0.94).unwrap() - 1.18).abs() < 1e-15);
        assert!(riskmetrics_step(1.0, 1.0, 1.0).is_err());
        assert!(riskmetrics_step(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn riskmetrics_decays_geometrically_without_shocks() {
        let path = riskmetrics_filter(&series(&[0.3; 50]), 0.94, 0.3, 1.0).unwrap();
        for (t, e) in path.entries().iter().enumerate() {
            assert!((e.state.variance - 0.94f64.powi(t as i32)).abs() < 1e-14);
            assert_eq!((e.state.third, e.state.fourth), (0.0, 3.0));
        }
    }

    #[test]
    fn riskmetrics_single_shock() {
        let mut values = vec![0.0; 20];
        values[3] = 5.0;
        let path = riskmetrics_filter(&series(&values), 0.94, 0.0, 1.0).unwrap();
        let v = path.variances();
        let before = v[3];
        assert!((v[4] - (0.94 * before + 0.06 * 25.0)).abs() < 1e-14);
        for t in 5..20 {
            assert!((v[t] / v[t - 1] - 0.94).abs() < 1e-14);
        }
    }

    #[test]
    fn ewma_sk_step_examples() {
        let l = [0.97, 0.96, 0.93];
        let s = ewma_sk_step(MomentState::gaussian(1.0).unwrap(), 0.0, l).unwrap();
        assert!((s.variance - 0.97).abs() < 1e-15);
        assert_eq!(s.third, 0.0);
        assert!((s.fourth - 2.79).abs() < 1e-14);

        let one = MomentState::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(ewma_sk_step(one, 1.0, l).unwrap(), one);

        let s = ewma_sk_step(MomentState::gaussian(1.0).unwrap(), 2.0, l).unwrap();
        assert!((s.variance - 1.09).abs() < 1e-14);
        assert!((s.third - 0.32).abs() < 1e-14);
        assert!((s.fourth - 3.91).abs() < 1e-14);

        assert!(ewma_sk_step(one, 1.0, [0.9, 1.0, 0.9]).is_err());
    }

    #[test]
    fn ewma_sk_decays_without_shocks() {
        let params = DecayParams::fixed([0.9, 0.8, 0.7], 0.1).unwrap();
        let path = ewma_sk_filter(
            &series(&[0.1; 30]),
            &params,
            MomentState::gaussian(2.0).unwrap(),
        )
        .unwrap();
        for (t, e) in path.entries().iter().enumerate() {
            assert!((e.state.variance - 2.0 * 0.9f64.powi(t as i32)).abs() < 1e-13);
            assert!((e.state.fourth - 3.0 * 0.7f64.powi(t as i32)).abs() < 1e-13);
            assert_eq!(e.std_residual, 0.0);
        }
    }

    #[test]
    fn negative_shock_produces_negative_third_moment_spike() {
        let mut values = [0.5, -0.5].repeat(50);
        values[60] = -8.0;
        let params = DecayParams::fixed([0.94, 0.94, 0.94], 0.0).unwrap();
        let path = ewma_sk_filter(
            &series(&values),
            &params,
            MomentState::gaussian(0.25).unwrap(),
        )
        .unwrap();
        let thirds: Vec<f64> = path.entries().iter().map(|e| e.state.third).collect();
        let (argmin, min) =
            thirds.iter().enumerate().fold(
                (0, f64::INFINITY),
                |a, (i, &v)| if v < a.1 { (i, v) } else { a },
            );
        assert_eq!(argmin, 61);
        assert!(min < -10.0);
    }

    #[test]
    fn standardized_residual_uses_filtered_variance() {
        let params = DecayParams::fixed([0.9, 0.9, 0.9], 0.0).unwrap();
        let path = ewma_sk_filter(
            &series(&[1.0, 2.0, -1.0]),
            &params,
            MomentState::gaussian(4.0).unwrap(),
        )
        .unwrap();
        let e = path.entries();
        assert_eq!(e[0].std_residual, 0.5);
        let v1 = 0.9 * 4.0 + 0.1;
        assert!((e[1].state.variance - v1).abs() < 1e-15);
        assert!((e[1].std_residual - 2.0 / v1.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn loglik_matches_term_sum() {
        let values = [0.3, -1.2, 0.8, 2.1, -0.4];
        let lambdas = [0.9, 0.85, 0.8];
        let init = MomentState::new(1.5, -0.2, 3.5).unwrap();
        let mut state = init;
        let mut expected = 0.0;
        for &r in &values {
            let e = r - 0.1;
            expected +=
                crate::gram_charlier::gc_loglik_term(e, state.variance, state.shape()).unwrap();
            state = ewma_sk_step(state, e, lambdas).unwrap();
        }
        let got = ewma_sk_loglik(&values, lambdas, 0.1, init);
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn loglik_penalizes_variance_floor() {
        let init = MomentState::gaussian(1.0).unwrap();
        let values = vec![0.0; 2000];
        let v = ewma_sk_loglik(&values, [0.5, 0.5, 0.5], 0.0, init);
        assert!(v <= crate::mle::PENALTY_BASE);
    }

    #[test]
    fn loglik_is_invariant_to_parameter_packing() {
        let values: Vec<f64> = (0..300)
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 30.0)
            .collect();
        let init = MomentState::gaussian(1.0).unwrap();
        let natural = |theta: &[f64]| {
            ewma_sk_loglik(
                &values,
                [logistic(theta[0]), logistic(theta[1]), logistic(theta[2])],
                theta[3],
                init,
            )
        };
        let permuted = |phi: &[f64]| {
            ewma_sk_loglik(
                &values,
                [logistic(phi[2]), logistic(phi[0]), logistic(phi[3])],
                phi[1],
                init,
            )
        };
        let theta = [2.5, 1.8, 3.0, 0.05];
        let phi = [theta[1], theta[3], theta[0], theta[2]];
        assert_eq!(natural(&theta), permuted(&phi));
    }

    #[test]
    fn estimation_rejects_short_and_constant_input() {
        assert!(matches!(
            estimate_ewma_sk(&series(&[0.1; 50])),
            Err(Error::TooFewObservations { .. })
        ));
        assert!(matches!(
            estimate_ewma_sk(&series(&[0.1; 200])),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn csv_export_header_and_rows() {
        let params = DecayParams::fixed([0.9, 0.9, 0.9], 0.0).unwrap();
        let path = ewma_sk_filter(
            &series(&[1.0, -1.0]),
            &params,
            MomentState::gaussian(1.0).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "date,variance,skew_state,kurt_state,std_residual");
        assert_eq!(lines[1], "2000-01-03,1,0,3,1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn number_formatting_rounds_to_fifteen_digits() {
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333333");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-2.5e-20), "-0.000000000000000000025");
    }

    /// Direct weighted sum `(1−λ)Σ λ^{i−1} ε²_{t−i} + λ^{t−1}σ₁²`, 1-based t.
    fn brute_force_riskmetrics(residuals: &[f64], lambda: f64, init: f64) -> Vec<f64> {
        (0..residuals.len())
            .map(|t| {
                let mut acc = lambda.powi(t as i32) * init;
                for i in 1..=t {
                    acc += (1.0 - lambda) * lambda.powi(i as i32 - 1) * residuals[t - i].powi(2);
                }
                acc
            })
            .collect()
    }

    proptest! {
        #[test]
        fn riskmetrics_matches_weighted_sum(
            values in prop::collection::vec(-8.0f64..8.0, 2..300),
            lambda in 0.5f64..0.999,
            init in 0.01f64..10.0,
        ) {
            let path = riskmetrics_filter(&series(&values), lambda, 0.0, init).unwrap();
            let direct = brute_force_riskmetrics(&values, lambda, init);
            for (a, b) in path.variances().iter().zip(&direct) {
                prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
            }
        }

        #[test]
        fn step_preserves_positivity(
            v in 1e-6f64..1e3, third in -50.0f64..50.0, fourth in 1e-3f64..200.0,
            residual in -1e3f64..1e3,
            l1 in 0.01f64..0.999, l2 in 0.01f64..0.999, l3 in 0.01f64..0.999,
        ) {
            let s = MomentState::new(v, third, fourth).unwrap();
            let next = ewma_sk_step(s, residual, [l1, l2, l3]).unwrap();
            prop_assert!(next.variance > 0.0);
            prop_assert!(next.fourth > 0.0);
        }

        #[test]
        fn shape_states_stay_in_convex_hull(
            values in prop::collection::vec(-3.0f64..3.0, 2..200),
            l2 in 0.01f64..0.999, l3 in 0.01f64..0.999,
        ) {
            let params = DecayParams::fixed([0.9, l2, l3], 0.0).unwrap();
            let init = MomentState::gaussian(1.0).unwrap();
            let path = ewma_sk_filter(&series(&values), &params, init).unwrap();
            let max_abs_eta = path.std_residuals().iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let bound3 = max_abs_eta.powi(3).max(init.third.abs());
            let bound4 = max_abs_eta.powi(4).max(init.fourth);
            for e in path.entries() {
                prop_assert!(e.state.third.abs() <= bound3 * (1.0 + 1e-12));
                prop_assert!(e.state.fourth <= bound4 * (1.0 + 1e-12));
            }
        }
    }
}
