//! Quasi-Newton maximum-likelihood driver.
//!
//! BFGS ascent with central-difference gradients, a backtracking line search
//! with quadratic interpolation, and standard errors from a central-difference
//! Hessian. Objectives must be pure: the driver evaluates them many times and
//! assumes identical inputs give identical outputs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Base value objectives return in infeasible regions. Callers add a
/// nonnegative distance so the search is pointed back to feasibility; see
/// [`penalty`].
pub const PENALTY_BASE: f64 = -1e10;

/// Convergence is also declared stalled once a step shrinks below this size.
pub const STALL_STEP: f64 = 1e-12;

const ARMIJO_C1: f64 = 1e-4;

/// Penalty value for a point at `distance` (≥ 0) from the feasible region.
pub fn penalty(distance: f64) -> f64 {
    PENALTY_BASE - distance.abs()
}

pub struct OptimizationProblem<F> {
    pub objective: F,
    pub initial_point: Vec<f64>,
    pub parameter_names: Vec<String>,
}

impl<F: Fn(&[f64]) -> f64> OptimizationProblem<F> {
    pub fn new(objective: F, initial_point: Vec<f64>) -> Self {
        let parameter_names = (0..initial_point.len()).map(|i| format!("x{i}")).collect();
        Self {
            objective,
            initial_point,
            parameter_names,
        }
    }

    pub fn with_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.parameter_names = names.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `None` when the Hessian at the optimum is not invertible.
    pub standard_errors: Option<Vec<f64>>,
    /// `−H⁻¹` at the optimum, present exactly when `standard_errors` is.
    pub covariance: Option<DMatrix<f64>>,
    /// Set when the result comes from the perturbed fallback start.
    pub restarted: bool,
}

struct Run {
    point: Vec<f64>,
    value: f64,
    /// Objective value after each accepted step, starting at the initial point.
    #[cfg_attr(not(test), allow(dead_code))]
    trajectory: Vec<f64>,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
}

/// Finite-difference step for coordinate `x`.
#[inline]
pub fn gradient_step(x: f64) -> f64 {
    (1e-7 * x.abs()).max(1e-6)
}

/// Central-difference gradient.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(objective: &F, point: &[f64]) -> Vec<f64> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            let h = gradient_step(point[i]);
            probe[i] = point[i] + h;
            let up = objective(&probe);
            probe[i] = point[i] - h;
            let down = objective(&probe);
            probe[i] = point[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Default Hessian steps, `1e-4·max(1, |x_i|)`.
pub fn hessian_steps(point: &[f64]) -> Vec<f64> {
    point.iter().map(|x| 1e-4 * x.abs().max(1.0)).collect()
}

/// Symmetric central-difference Hessian with per-coordinate `step`.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(
    objective: &F,
    point: &[f64],
    step: &[f64],
) -> DMatrix<f64> {
    let n = point.len();
    let f0 = objective(point);
    let mut probe = point.to_vec();
    let eval = |probe: &mut Vec<f64>, di: (usize, f64), dj: Option<(usize, f64)>| {
        probe[di.0] += di.1;
        if let Some((j, hj)) = dj {
            probe[j] += hj;
        }
        let v = objective(probe);
        probe[di.0] = point[di.0];
        if let Some((j, _)) = dj {
            probe[j] = point[j];
        }
        v
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = step[i];
        let up = eval(&mut probe, (i, hi), None);
        let down = eval(&mut probe, (i, -hi), None);
        hess[(i, i)] = (up - 2.0 * f0 + down) / (hi * hi);
        for j in 0..i {
            let hj = step[j];
            let pp = eval(&mut probe, (i, hi), Some((j, hj)));
            let pm = eval(&mut probe, (i, hi), Some((j, -hj)));
            let mp = eval(&mut probe, (i, -hi), Some((j, hj)));
            let mm = eval(&mut probe, (i, -hi), Some((j, -hj)));
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Asymptotic covariance `−H⁻¹` of a maximum, or `None` when `H` is singular
/// or not negative definite along the diagonal of its inverse.
pub fn covariance_from_hessian(hessian: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if hessian.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let sv = hessian.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= 1e-10 * max {
        return None;
    }
    let inv = hessian.clone().try_inverse()?;
    let cov = -inv;
    if (0..cov.nrows()).any(|i| !(cov[(i, i)] > 0.0)) {
        return None;
    }
    Some(cov)
}

pub fn standard_errors(hessian: &DMatrix<f64>) -> Option<Vec<f64>> {
    let cov = covariance_from_hessian(hessian)?;
    Some((0..cov.nrows()).map(|i| cov[(i, i)].sqrt()).collect())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One interpolation refinement of an accepted step: jump to the maximum of
/// the quadratic through `f(0)`, `f'(0)` and `f(t)` when that improves on
/// `f(t)`. Exact on quadratic objectives.
#[allow(clippy::too_many_arguments)]
fn refine_step<F: Fn(&[f64]) -> f64>(
    objective: &F,
    x: &[f64],
    d: &[f64],
    fx: f64,
    slope: f64,
    t: f64,
    trial: Vec<f64>,
    ft: f64,
) -> (Vec<f64>, f64) {
    let curvature = (ft - fx - slope * t) / (t * t);
    if !(curvature < 0.0) {
        return (trial, ft);
    }
    let t_star = (-slope / (2.0 * curvature)).min(10.0 * t);
    if !(t_star > 0.0) || (t_star / t - 1.0).abs() < 1e-3 {
        return (trial, ft);
    }
    let refined: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t_star * di).collect();
    let fr = objective(&refined);
    if fr.is_finite() && fr > ft {
        (refined, fr)
    } else {
        (trial, ft)
    }
}

fn bfgs_ascent<F: Fn(&[f64]) -> f64>(
    objective: &F,
    start: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<Run> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = objective(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let mut g = numerical_gradient(objective, &x);
    // inverse of the negated Hessian, kept positive definite
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut iterations = 0;
    let mut trajectory = vec![fx];

    loop {
        let gradient_norm = inf_norm(&g);
        if gradient_norm <= tolerance || iterations >= max_iterations {
            return Ok(Run {
                point: x,
                value: fx,
                trajectory,
                gradient_norm,
                iterations,
                converged: gradient_norm <= tolerance,
            });
        }
        iterations += 1;

        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (&h_inv * &gv).iter().copied().collect();
        let mut slope = dot(&g, &d);
        if !(slope > 0.0) {
            h_inv = DMatrix::identity(n, n);
            scaled = false;
            d = g.clone();
            slope = dot(&g, &d);
        }

        let d_norm = inf_norm(&d);
        let mut t = 1.0;
        let mut accepted = None;
        while t * d_norm >= STALL_STEP {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let ft = objective(&trial);
            if ft.is_finite() && ft >= fx + ARMIJO_C1 * t * slope && ft >= fx {
                accepted = Some(refine_step(objective, &x, &d, fx, slope, t, trial, ft));
                break;
            }
            // maximize the quadratic through f(0), f'(0) and f(t)
            let next = if ft.is_finite() {
                let curvature = (ft - fx - slope * t) / (t * t);
                if curvature < 0.0 {
                    -slope / (2.0 * curvature)
                } else {
                    0.5 * t
                }
            } else {
                0.1 * t
            };
            t = next.clamp(1e-3 * t, 0.5 * t);
        }

        let Some((x_new, f_new)) = accepted else {
            return Ok(Run {
                point: x,
                value: fx,
                trajectory,
                gradient_norm,
                iterations,
                converged: false,
            });
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let g_new = numerical_gradient(objective, &x_new);
        // curvature pair for the negated objective
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * (dot(&s, &s) * yy).sqrt() {
            if !scaled {
                h_inv = DMatrix::identity(n, n) * (sy / yy);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let sv = nalgebra::DVector::from_column_slice(&s);
            let yv = nalgebra::DVector::from_column_slice(&y);
            let left = DMatrix::identity(n, n) - &sv * yv.transpose() * rho;
            h_inv = &left * &h_inv * left.transpose() + &sv * sv.transpose() * rho;
        } else {
            h_inv = DMatrix::identity(n, n);
            scaled = false;
        }

        let stalled = inf_norm(&s) < STALL_STEP;
        x = x_new;
        fx = f_new;
        g = g_new;
        trajectory.push(fx);
        if stalled {
            let gradient_norm = inf_norm(&g);
            return Ok(Run {
                point: x,
                value: fx,
                trajectory,
                gradient_norm,
                iterations,
                converged: gradient_norm <= tolerance,
            });
        }
    }
}

/// Maximizes `problem.objective` from `problem.initial_point`.
///
/// If the first run ends unconverged, one fallback run starts from the
/// initial point scaled by 1.1 elementwise; the converged (or else the
/// higher-valued) run is returned. `converged` is set only when the gradient
/// infinity-norm is within `tolerance`.
pub fn maximize<F: Fn(&[f64]) -> f64>(
    problem: &OptimizationProblem<F>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<OptimizationResult> {
    let start = &problem.initial_point;
    if start.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteStart);
    }
    let f = &problem.objective;
    let first = bfgs_ascent(f, start, tolerance, max_iterations)?;
    let (run, restarted) = if first.converged {
        (first, false)
    } else {
        let perturbed: Vec<f64> = start.iter().map(|v| v * 1.1).collect();
        match bfgs_ascent(f, &perturbed, tolerance, max_iterations) {
            Ok(second) if second.converged || second.value > first.value => (second, true),
            _ => (first, false),
        }
    };
    let hessian = numerical_hessian(f, &run.point, &hessian_steps(&run.point));
    let covariance = covariance_from_hessian(&hessian);
    Ok(OptimizationResult {
        standard_errors: covariance
            .as_ref()
            .map(|c| (0..c.nrows()).map(|i| c[(i, i)].sqrt()).collect()),
        covariance,
        point: run.point,
        value: run.value,
        gradient_norm: run.gradient_norm,
        iterations: run.iterations,
        converged: run.converged,
        restarted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        let p = OptimizationProblem::new(|x: &[f64]| -(x[0] - 2.0).powi(2), vec![0.0]);
        let r = maximize(&p, 1e-8, 100).unwrap();
        assert!(r.converged);
        assert!((r.point[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn anisotropic_quadratic() {
        let p = OptimizationProblem::new(
            |x: &[f64]| -(x[0] * x[0] + 10.0 * x[1] * x[1]),
            vec![3.0, 3.0],
        );
        let r = maximize(&p, 1e-8, 100).unwrap();
        assert!(r.converged);
        assert!(r.point.iter().all(|v| v.abs() < 1e-6), "{:?}", r.point);
        assert!(r.iterations <= 2 + 5, "{} iterations", r.iterations);
    }

    #[test]
    fn quadratics_converge_within_dimension_plus_five() {
        // a coupled 4-d concave quadratic with spread-out curvature
        let a = [
            [4.0, 1.0, 0.5, 0.0],
            [1.0, 3.0, 0.2, 0.1],
            [0.5, 0.2, 50.0, 2.0],
            [0.0, 0.1, 2.0, 0.5],
        ];
        let b = [1.0, -2.0, 0.5, 3.0];
        let f = move |x: &[f64]| {
            let mut q = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    q += x[i] * a[i][j] * x[j];
                }
            }
            -0.5 * q + b.iter().zip(x).map(|(bi, xi)| bi * xi).sum::<f64>()
        };
        let p = OptimizationProblem::new(f, vec![1.0, 1.0, 1.0, 1.0]);
        let r = maximize(&p, 1e-7, 200).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 4 + 5, "{} iterations", r.iterations);
    }

    #[test]
    fn gaussian_likelihood_matches_closed_form() {
        // fixed pseudo-data; closed-form MLE is the sample mean and the
        // population variance
        let data: Vec<f64> = (0..400)
            .map(|i| {
                let u = ((i * 7919) % 1000) as f64 / 1000.0;
                1.5 + 2.0 * (u - 0.5) + 0.3 * ((i as f64) * 0.37).sin()
            })
            .collect();
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;

        // (mean, log variance) plus two nuisance parameters with their own
        // concave terms so the problem is 4-dimensional
        let objective = |p: &[f64]| {
            let v = p[1].exp();
            let ll: f64 = data
                .iter()
                .map(|x| -0.5 * (v.ln() + (x - p[0]).powi(2) / v))
                .sum();
            ll - (p[2] - 1.0).powi(2) - 0.5 * (p[3] + 2.0).powi(2)
        };
        let p = OptimizationProblem::new(objective, vec![0.0, 0.0, 0.0, 0.0])
            .with_names(["mu", "log_var", "a", "b"]);
        let r = maximize(&p, 1e-6, 500).unwrap();
        assert!(r.converged);
        assert!((r.point[0] - mean).abs() < 1e-4);
        assert!((r.point[1].exp() - var).abs() < 1e-4);
        assert!((r.point[2] - 1.0).abs() < 1e-4);
        assert!((r.point[3] + 2.0).abs() < 1e-4);
        let se = r.standard_errors.unwrap();
        assert!((se[0] - (var / n).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn line_search_never_decreases_objective() {
        let rosenbrock = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let run = bfgs_ascent(&rosenbrock, &[-1.2, 1.0], 1e-8, 500).unwrap();
        assert!((run.point[0] - 1.0).abs() < 1e-4 && (run.point[1] - 1.0).abs() < 1e-4);
        assert!(run.trajectory.len() > 5);
        assert!(run.trajectory.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| -((x[0] - 0.3).powi(4) + (x[1] + x[0]).powi(2) + x[2].cosh());
        let p = OptimizationProblem::new(f, vec![2.0, -1.0, 0.5]);
        let a = maximize(&p, 1e-8, 300).unwrap();
        let b = maximize(&p, 1e-8, 300).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_finite_start() {
        let p = OptimizationProblem::new(|x: &[f64]| x[0].ln(), vec![-1.0]);
        assert!(matches!(maximize(&p, 1e-6, 10), Err(Error::NonFiniteStart)));
        let p = OptimizationProblem::new(|x: &[f64]| -x[0] * x[0], vec![f64::NAN]);
        assert!(matches!(maximize(&p, 1e-6, 10), Err(Error::NonFiniteStart)));
    }

    #[test]
    fn exhausted_iterations_report_unconverged() {
        let rosenbrock = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let p = OptimizationProblem::new(rosenbrock, vec![-1.2, 1.0]);
        let r = maximize(&p, 1e-10, 3).unwrap();
        assert!(!r.converged);
        assert!(r.gradient_norm > 1e-10);
    }

    #[test]
    fn hessian_examples() {
        let h = numerical_hessian(&|x: &[f64]| -x[0] * x[0] / 2.0, &[0.0], &[1e-4]);
        assert!((h[(0, 0)] + 1.0).abs() < 1e-6);
        let se = standard_errors(&h).unwrap();
        assert!((se[0] - 1.0).abs() < 1e-6);

        let f = |x: &[f64]| -(x[0] * x[0] + x[0] * x[1] + x[1] * x[1]);
        let h = numerical_hessian(&f, &[0.3, -0.7], &hessian_steps(&[0.3, -0.7]));
        let expected = [[-2.0, -1.0], [-1.0, -2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - expected[i][j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn singular_hessian_flags_unavailable() {
        let f = |x: &[f64]| -x[0] * x[0];
        let h = numerical_hessian(&f, &[0.0, 0.0], &[1e-4, 1e-4]);
        assert!(standard_errors(&h).is_none());
        let p = OptimizationProblem::new(f, vec![1.0, 5.0]);
        let r = maximize(&p, 1e-8, 50).unwrap();
        assert!(r.converged);
        assert!(r.standard_errors.is_none());
    }

    #[test]
    fn penalty_is_directed() {
        assert!(penalty(0.0) > penalty(1.0));
        assert!(penalty(5.0) <= PENALTY_BASE);
    }
}
