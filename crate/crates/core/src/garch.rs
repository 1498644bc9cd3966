//! GARCH(1,1) with Gaussian innovations.
//!
//! `r_t = μ + ε_t`, `σ_t² = ω + α ε_{t−1}² + β σ_{t−1}²`. Estimation runs in
//! an unconstrained parameterization `[μ, ln ω, logit(α+β), logit(α/(α+β))]`,
//! so every candidate the optimizer proposes is covariance stationary.

use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};

use crate::dist::LN_2PI;
use crate::error::{Error, Result};
use crate::ewma::{MomentEntry, MomentPath, MomentState, VARIANCE_FLOOR};
use crate::ingest::{mean_variance, ReturnPoint, ReturnSeries};
use crate::mle::{maximize, penalty, OptimizationProblem};

const MIN_ESTIMATION_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub log_likelihood: f64,
    /// In the order `mu, omega, alpha, beta`.
    pub t_stats: [Option<f64>; 4],
}

impl GarchParams {
    pub fn new(mu: f64, omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self {
            mu,
            omega,
            alpha,
            beta,
            log_likelihood: f64::NAN,
            t_stats: [None; 4],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::param("mu", self.mu, "the finite reals"));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::param("omega", self.omega, "(0, inf)"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::param("alpha", self.alpha, "[0, inf)"));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::param("beta", self.beta, "[0, inf)"));
        }
        let persistence = self.alpha + self.beta;
        if !(persistence < 1.0) {
            return Err(Error::param("alpha + beta", persistence, "[0, 1)"));
        }
        Ok(())
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }
}

/// `ω + α·ε² + β·σ²`.
pub fn garch_step(prev_variance: f64, prev_residual: f64, params: &GarchParams) -> Result<f64> {
    params.validate()?;
    if !(prev_variance > 0.0) {
        return Err(Error::param("variance", prev_variance, "(0, inf)"));
    }
    Ok(params.omega + params.alpha * prev_residual * prev_residual + params.beta * prev_variance)
}

/// Gaussian log-likelihood of the in-sample part of `returns`.
pub fn garch_loglik(returns: &ReturnSeries, params: &GarchParams, init_variance: f64) -> f64 {
    garch_loglik_values(
        &returns.in_sample_values(),
        params.mu,
        params.omega,
        params.alpha,
        params.beta,
        init_variance,
    )
}

/// Sum of `−½ln 2π − ½ln σ_t² − ε_t²/(2σ_t²)` with `σ_1² = init_variance`.
/// Infeasible variance paths return a [`penalty`] value.
pub fn garch_loglik_values(
    values: &[f64],
    mu: f64,
    omega: f64,
    alpha: f64,
    beta: f64,
    init_variance: f64,
) -> f64 {
    let mut variance = init_variance;
    let mut total = 0.0;
    for (t, &r) in values.iter().enumerate() {
        if !(variance >= VARIANCE_FLOOR) || !variance.is_finite() {
            return penalty((values.len() - t) as f64);
        }
        let e = r - mu;
        total += -0.5 * LN_2PI - 0.5 * variance.ln() - 0.5 * e * e / variance;
        variance = omega + alpha * e * e + beta * variance;
    }
    if total.is_finite() {
        total
    } else {
        penalty(1.0)
    }
}

/// Filtered variances and standardized residuals; shape states are Gaussian.
pub fn garch_filter_points(
    points: &[ReturnPoint],
    params: &GarchParams,
    init_variance: f64,
) -> Result<MomentPath> {
    params.validate()?;
    if points.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: points.len(),
        });
    }
    let mut state = MomentState::gaussian(init_variance)?;
    let mut entries = Vec::with_capacity(points.len());
    for p in points {
        let e = p.value - params.mu;
        entries.push(MomentEntry {
            date: p.date,
            state,
            std_residual: e / state.variance.sqrt(),
        });
        state.variance = params.omega + params.alpha * e * e + params.beta * state.variance;
    }
    Ok(MomentPath::from_parts(entries, state))
}

pub fn garch_filter(
    returns: &ReturnSeries,
    params: &GarchParams,
    init_variance: f64,
) -> Result<MomentPath> {
    garch_filter_points(returns.in_sample(), params, init_variance)
}

/// Variance forecasts for horizons `1..=steps`, starting from the one-step
/// variance `next_variance`: `σ²_{t+k} = ω + (α+β)σ²_{t+k−1}`.
pub fn variance_forecast(params: &GarchParams, next_variance: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps);
    let mut v = next_variance;
    for _ in 0..steps {
        out.push(v);
        v = params.omega + params.persistence() * v;
    }
    out
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn unpack(theta: &[f64]) -> (f64, f64, f64, f64) {
    let omega = theta[1].exp();
    let p = logistic(theta[2]);
    let q = logistic(theta[3]);
    (theta[0], omega, p * q, p * (1.0 - q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchOptions {
    /// Gradient tolerance per observation.
    pub tolerance_per_obs: f64,
    pub max_iterations: usize,
}

impl Default for GarchOptions {
    fn default() -> Self {
        Self {
            tolerance_per_obs: 1e-6,
            max_iterations: 500,
        }
    }
}

/// Maximum-likelihood fit on the in-sample part of `returns`, with the
/// filter started at the in-sample variance.
pub fn estimate_garch(returns: &ReturnSeries) -> Result<GarchParams> {
    estimate_garch_with(returns, &GarchOptions::default())
}

pub fn estimate_garch_with(returns: &ReturnSeries, options: &GarchOptions) -> Result<GarchParams> {
    let values = returns.in_sample_values();
    let n = values.len();
    if n < MIN_ESTIMATION_LENGTH {
        return Err(Error::TooFewObservations {
            needed: MIN_ESTIMATION_LENGTH,
            got: n,
        });
    }
    let (mean, var) = mean_variance(&values)?;

    let objective = |theta: &[f64]| {
        let (mu, omega, alpha, beta) = unpack(theta);
        garch_loglik_values(&values, mu, omega, alpha, beta, var)
    };
    let (p0, q0): (f64, f64) = (0.95, 0.05 / 0.95);
    let start = vec![
        mean,
        (0.05 * var).ln(),
        (p0 / (1.0 - p0)).ln(),
        (q0 / (1.0 - q0)).ln(),
    ];
    let problem = OptimizationProblem::new(objective, start).with_names([
        "mu",
        "log_omega",
        "logit_persistence",
        "logit_arch_share",
    ]);
    let result = maximize(
        &problem,
        options.tolerance_per_obs * n as f64,
        options.max_iterations,
    )?;
    let (mu, omega, alpha, beta) = unpack(&result.point);
    if !result.converged {
        return Err(Error::NonConvergence {
            model: "GARCH-N",
            best_point: vec![mu, omega, alpha, beta],
            value: result.value,
            gradient_norm: result.gradient_norm,
            iterations: result.iterations,
        });
    }
    let t_stats = match &result.covariance {
        Some(cov) => natural_t_stats(&result.point, cov),
        None => [None; 4],
    };
    let params = GarchParams {
        mu,
        omega,
        alpha,
        beta,
        log_likelihood: result.value,
        t_stats,
    };
    params.validate()?;
    Ok(params)
}

/// Delta-method t-statistics of `(μ, ω, α, β)` from the covariance of the
/// unconstrained parameters.
fn natural_t_stats(theta: &[f64], cov: &DMatrix<f64>) -> [Option<f64>; 4] {
    let (mu, omega, alpha, beta) = unpack(theta);
    let p = logistic(theta[2]);
    let q = logistic(theta[3]);
    let dp = p * (1.0 - p);
    let dq = q * (1.0 - q);
    #[rustfmt::skip]
    let jac = Matrix4::new(
        1.0, 0.0,   0.0,             0.0,
        0.0, omega, 0.0,             0.0,
        0.0, 0.0,   q * dp,          p * dq,
        0.0, 0.0,   (1.0 - q) * dp, -p * dq,
    );
    let c = Matrix4::from_iterator(cov.iter().copied());
    let natural = jac * c * jac.transpose();
    let values = [mu, omega, alpha, beta];
    let mut out = [None; 4];
    for i in 0..4 {
        let var = natural[(i, i)];
        if var > 0.0 {
            out[i] = Some(values[i] / var.sqrt());
        }
    }
    out
}
