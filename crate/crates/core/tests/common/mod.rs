//! Seeded simulators shared by the integration tests.

#![allow(dead_code)]

use chrono::NaiveDate;
use ewmask::ewma::{ewma_sk_step, MomentState};
use ewmask::gram_charlier::{gc_density, gc_normalizer, ShapePair};
use ewmask::ingest::ReturnSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1990, 1, 1).unwrap()
}

pub fn series(values: &[f64]) -> ReturnSeries {
    ReturnSeries::from_values(start_date(), values).unwrap()
}

/// GARCH(1,1)-N path of length `n` after a burn-in of 1000 draws, started at
/// the unconditional variance.
pub fn simulate_garch(
    rng: &mut impl Rng,
    n: usize,
    mu: f64,
    omega: f64,
    alpha: f64,
    beta: f64,
) -> Vec<f64> {
    let burn = 1000;
    let mut variance = omega / (1.0 - alpha - beta);
    let mut out = Vec::with_capacity(n);
    for t in 0..burn + n {
        let z: f64 = StandardNormal.sample(rng);
        let e = variance.sqrt() * z;
        if t >= burn {
            out.push(mu + e);
        }
        variance = omega + alpha * e * e + beta * variance;
    }
    out
}

/// Rejection sampler for the squared Gram-Charlier density with a
/// N(0, 2²) proposal. The envelope constant is a grid maximum of an upper
/// bound on the density ratio, padded by 25%.
pub fn sample_gc(rng: &mut impl Rng, shape: ShapePair) -> f64 {
    let s = shape.skew().abs() / 6.0;
    let e = (shape.kurt() - 3.0).abs() / 24.0;
    let h = gc_normalizer(shape);
    let bound = |x: f64| {
        let a = (x * x * x - 3.0 * x).abs();
        let b = (x * x * x * x - 6.0 * x * x + 3.0).abs();
        let g = 1.0 + s * a + e * b;
        2.0 * g * g * (-0.375 * x * x).exp() / h
    };
    let m = (0..=400)
        .map(|i| bound(i as f64 * 0.025))
        .fold(0.0, f64::max)
        * 1.25;
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let x = 2.0 * z;
        let proposal = (-0.125 * x * x).exp() / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        let u: f64 = rng.random();
        if u * m * proposal <= gc_density(x, shape).density {
            return x;
        }
    }
}

/// Path of the EWMA-SK model itself: `η_t` is drawn from the Gram-Charlier
/// density at the current shape state, `ε_t = σ_t η_t`, and all three states
/// are updated. Fails with the 1-based step at which a state left the
/// finite range.
pub fn simulate_ewma_sk(
    rng: &mut impl Rng,
    n: usize,
    lambdas: [f64; 3],
    mu: f64,
    init: MomentState,
) -> Result<Vec<f64>, usize> {
    let mut state = init;
    let mut out = Vec::with_capacity(n);
    for t in 1..=n {
        let eta = sample_gc(rng, state.shape());
        let e = state.variance.sqrt() * eta;
        out.push(mu + e);
        state = ewma_sk_step(state, e, lambdas).map_err(|_| t)?;
        if !state.variance.is_finite() || state.variance <= 0.0 || !state.fourth.is_finite() {
            return Err(t);
        }
    }
    Ok(out)
}
