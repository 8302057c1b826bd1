use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::query::LinearQuery;

/// Draws from the zero-centred Laplace law by inverse CDF.
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

/// Noise scale `1 / (n * epsilon)` for a sensitivity-`1/n` query.
pub fn laplace_scale(n: usize, epsilon: f64) -> f64 {
    1.0 / (n as f64 * epsilon)
}

/// Classic Gaussian-mechanism sigma for sensitivity `1/n`.
pub fn gaussian_sigma(n: usize, epsilon: f64, delta: f64) -> f64 {
    (2.0 * (1.25 / delta).ln()).sqrt() / (n as f64 * epsilon)
}

/// Probability that Laplace noise exceeds `alpha` in magnitude:
/// `exp(-alpha * n * epsilon)`.
pub fn laplace_tail(alpha: f64, n: usize, epsilon: f64) -> f64 {
    (-alpha * n as f64 * epsilon).exp()
}

/// Non-private baseline: the exact sample mean.
pub fn answer_exact(q: &LinearQuery, sample: &Dataset) -> Result<f64> {
    q.evaluate_on_sample(sample)
}

/// `clamp(q(S) + Lap(1 / (n * epsilon)), 0, 1)`.
pub fn answer_laplace<R: Rng + ?Sized>(
    q: &LinearQuery,
    sample: &Dataset,
    epsilon: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "Laplace answerer needs epsilon > 0, got {epsilon}"
        )));
    }
    let truth = q.evaluate_on_sample(sample)?;
    Ok((truth + laplace_noise(laplace_scale(sample.n(), epsilon), rng)).clamp(0.0, 1.0))
}

pub fn answer_gaussian<R: Rng + ?Sized>(
    q: &LinearQuery,
    sample: &Dataset,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!(
            "Gaussian answerer needs epsilon > 0 and delta in (0, 1), got ({epsilon}, {delta})"
        )));
    }
    let truth = q.evaluate_on_sample(sample)?;
    let sigma = gaussian_sigma(sample.n(), epsilon, delta);
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| Error::Config(e.to_string()))?
        .sample(rng);
    Ok((truth + noise).clamp(0.0, 1.0))
}

/// A resolved per-query answering rule and its privacy cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Answerer {
    Exact,
    Laplace { epsilon: f64 },
    Gaussian { epsilon: f64, delta: f64 },
}

impl Answerer {
    /// `(epsilon, delta)` charged per answered query. The exact answerer is
    /// charged nothing; it is not private and exists to show overfitting.
    pub fn cost(&self) -> (f64, f64) {
        match *self {
            Answerer::Exact => (0.0, 0.0),
            Answerer::Laplace { epsilon } => (epsilon, 0.0),
            Answerer::Gaussian { epsilon, delta } => (epsilon, delta),
        }
    }

    pub fn answer<R: Rng + ?Sized>(
        &self,
        q: &LinearQuery,
        sample: &Dataset,
        rng: &mut R,
    ) -> Result<f64> {
        match *self {
            Answerer::Exact => answer_exact(q, sample),
            Answerer::Laplace { epsilon } => answer_laplace(q, sample, epsilon, rng),
            Answerer::Gaussian { epsilon, delta } => {
                answer_gaussian(q, sample, epsilon, delta, rng)
            }
        }
    }
}
