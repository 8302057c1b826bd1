//! Closed-form distributional accuracy bounds.
//!
//! Every theorem turns per-unit privacy parameters `(epsilon, delta)` and
//! sample accuracy `(alpha, beta)` into distributional accuracy
//! `(alpha', beta')`. The free positive constants `slack_c` and `slack_f`
//! trade `alpha'` against `beta'`; [`optimize_slack`] picks them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Single mechanism.
    Transfer,
    /// Independent blocks, cross-block queries refused.
    Full,
    /// One-dependent blocks visited in order.
    Partial,
    /// Decaying correlation, width-limited access.
    Decay,
    /// Decaying correlation, sliding-window access.
    Sliding,
    /// Label-splitting combiner.
    Label,
    /// Advanced composition over all units, for comparison.
    Naive,
}

impl Theorem {
    pub const ALL: [Theorem; 7] = [
        Theorem::Transfer,
        Theorem::Full,
        Theorem::Partial,
        Theorem::Decay,
        Theorem::Sliding,
        Theorem::Label,
        Theorem::Naive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Theorem::Transfer => "transfer",
            Theorem::Full => "full",
            Theorem::Partial => "partial",
            Theorem::Decay => "decay",
            Theorem::Sliding => "sliding",
            Theorem::Label => "label",
            Theorem::Naive => "naive",
        }
    }

    /// Theorems of the form `alpha' = alpha + priv + c + 2f`,
    /// `beta' = A/c + B/f + E` that [`optimize_slack`] handles.
    pub fn has_slack(&self) -> bool {
        matches!(
            self,
            Theorem::Transfer
                | Theorem::Full
                | Theorem::Partial
                | Theorem::Decay
                | Theorem::Sliding
        )
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown theorem '{s}'")))
    }
}

/// Inputs shared by the slack-parameterized bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Number of blocks (or attributes).
    pub m: usize,
    /// Number of individuals.
    pub n: usize,
    /// Probability that a link between adjacent attributes is independent.
    #[serde(default = "one")]
    pub p: f64,
    /// Query width.
    #[serde(default)]
    pub d: usize,
    pub slack_c: f64,
    pub slack_f: f64,
}

fn one() -> f64 {
    1.0
}

impl AccuracyParams {
    pub fn new(epsilon: f64, delta: f64, alpha: f64, beta: f64, m: usize, n: usize) -> Self {
        AccuracyParams {
            epsilon,
            delta,
            alpha,
            beta,
            m,
            n,
            p: 1.0,
            d: 0,
            slack_c: 1.0,
            slack_f: 1.0,
        }
    }

    pub fn with_slack(mut self, slack_c: f64, slack_f: f64) -> Self {
        self.slack_c = slack_c;
        self.slack_f = slack_f;
        self
    }

    pub fn with_decay(mut self, p: f64, d: usize) -> Self {
        self.p = p;
        self.d = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_core(self.epsilon, self.delta, self.alpha, self.beta)?;
        check_slack(self.slack_c, self.slack_f)?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Domain(format!(
                "p must lie in [0, 1], got {}",
                self.p
            )));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::Domain("m and n must be positive".into()));
        }
        Ok(())
    }
}

fn check_core(epsilon: f64, delta: f64, alpha: f64, beta: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    if !(0.0..=1.0).contains(&delta) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!(
            "delta and beta must lie in [0, 1], got {delta}, {beta}"
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    Ok(())
}

fn check_slack(slack_c: f64, slack_f: f64) -> Result<()> {
    if !(slack_c > 0.0 && slack_c.is_finite() && slack_f > 0.0 && slack_f.is_finite()) {
        return Err(Error::Domain(format!(
            "slack parameters must be positive and finite, got c={slack_c}, f={slack_f}"
        )));
    }
    Ok(())
}

/// `(alpha', beta')`, or `(alpha, beta)` for the label-split combiner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub alpha_prime: f64,
    pub beta_prime: f64,
}

pub fn transfer_bound(
    epsilon: f64,
    delta: f64,
    alpha: f64,
    beta: f64,
    slack_c: f64,
    slack_f: f64,
) -> Result<Bound> {
    check_core(epsilon, delta, alpha, beta)?;
    check_slack(slack_c, slack_f)?;
    Ok(Bound {
        alpha_prime: alpha + epsilon.exp_m1() + slack_c + 2.0 * slack_f,
        beta_prime: beta / slack_c + delta / slack_f,
    })
}

pub fn full_independence_bound(params: &AccuracyParams) -> Result<Bound> {
    params.validate()?;
    let AccuracyParams {
        epsilon,
        delta,
        alpha,
        beta,
        m,
        slack_c,
        slack_f,
        ..
    } = *params;
    Ok(Bound {
        alpha_prime: alpha + epsilon.exp_m1() + slack_c + 2.0 * slack_f,
        beta_prime: m as f64 * (beta / slack_c + delta / slack_f),
    })
}

pub fn partial_independence_bound(params: &AccuracyParams) -> Result<Bound> {
    params.validate()?;
    let AccuracyParams {
        epsilon,
        delta,
        alpha,
        beta,
        m,
        slack_c,
        slack_f,
        ..
    } = *params;
    Ok(Bound {
        alpha_prime: alpha + (2.0 * epsilon).exp_m1() + slack_c + 2.0 * slack_f,
        beta_prime: m as f64 * (beta / slack_c + 2.0 * delta / slack_f),
    })
}

/// `(1 - p)^(d + 1)`: probability that an individual has an unbroken chain of
/// dependent links across `d + 1` adjacent pairs.
pub fn decay_tail(p: f64, d: usize) -> f64 {
    (1.0 - p).powf(d as f64 + 1.0)
}

pub fn decaying_general_bound(params: &AccuracyParams) -> Result<Bound> {
    let full = full_independence_bound(params)?;
    Ok(Bound {
        alpha_prime: full.alpha_prime,
        beta_prime: full.beta_prime + 2.0 * params.n as f64 * decay_tail(params.p, params.d),
    })
}

pub fn decaying_sliding_bound(params: &AccuracyParams) -> Result<Bound> {
    let full = full_independence_bound(params)?;
    Ok(Bound {
        alpha_prime: full.alpha_prime,
        beta_prime: full.beta_prime + params.n as f64 * decay_tail(params.p, params.d),
    })
}

/// Sample accuracy of the label-splitting combiner given the accuracy of its
/// two sub-mechanisms:
///
/// ```text
/// alpha = p a0 + (1 - p) a1 + delta_cher p / sqrt(n)
/// beta  = b0 + b1 + 2 exp(-2 delta_cher^2)
/// ```
pub fn label_split_bound(
    alpha0: f64,
    beta0: f64,
    alpha1: f64,
    beta1: f64,
    p_label: f64,
    n: usize,
    delta_cher: f64,
) -> Result<Bound> {
    if !(delta_cher > 0.0 && delta_cher.is_finite()) {
        return Err(Error::Domain(format!(
            "delta_cher must be positive, got {delta_cher}"
        )));
    }
    if !(0.0..=1.0).contains(&p_label) {
        return Err(Error::Domain(format!(
            "p_label must lie in [0, 1], got {p_label}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    check_core(0.0, 0.0, alpha0, beta0)?;
    check_core(0.0, 0.0, alpha1, beta1)?;
    Ok(Bound {
        alpha_prime: p_label * alpha0
            + (1.0 - p_label) * alpha1
            + delta_cher * p_label / (n as f64).sqrt(),
        beta_prime: beta0 + beta1 + 2.0 * (-2.0 * delta_cher * delta_cher).exp(),
    })
}

/// Two-sided Hoeffding tail `Pr[|p_hat - p| >= t] <= 2 exp(-2 n t^2)` for the
/// mean of `n` bounded variables.
pub fn hoeffding_tail(t: f64, n: usize) -> Result<f64> {
    if !(t >= 0.0) || n == 0 {
        return Err(Error::Domain(format!(
            "need t >= 0 and n >= 1, got t={t}, n={n}"
        )));
    }
    Ok((2.0 * (-2.0 * n as f64 * t * t).exp()).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub epsilon_total: f64,
    pub delta_total: f64,
}

/// Advanced composition of `m` `(epsilon, delta)` mechanisms.
pub fn naive_composition_bound(
    epsilon: f64,
    delta: f64,
    m: usize,
    delta_prime: f64,
) -> Result<Composition> {
    check_core(epsilon, delta, 0.0, 0.0)?;
    if !(delta_prime > 0.0 && delta_prime <= 1.0) {
        return Err(Error::Domain(format!(
            "delta' must lie in (0, 1], got {delta_prime}"
        )));
    }
    let mf = m as f64;
    Ok(Composition {
        epsilon_total: epsilon * (2.0 * mf * (1.0 / delta_prime).ln()).sqrt()
            + mf * epsilon * epsilon.exp_m1(),
        delta_total: mf * delta + delta_prime,
    })
}

/// Evaluates one of the slack-parameterized theorems.
pub fn evaluate(theorem: Theorem, params: &AccuracyParams) -> Result<Bound> {
    match theorem {
        Theorem::Transfer => {
            params.validate()?;
            transfer_bound(
                params.epsilon,
                params.delta,
                params.alpha,
                params.beta,
                params.slack_c,
                params.slack_f,
            )
        }
        Theorem::Full => full_independence_bound(params),
        Theorem::Partial => partial_independence_bound(params),
        Theorem::Decay => decaying_general_bound(params),
        Theorem::Sliding => decaying_sliding_bound(params),
        Theorem::Label | Theorem::Naive => Err(Error::Config(format!(
            "theorem '{theorem}' is not parameterized by slack constants"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub beta_target: f64,
    pub grid_points: usize,
    pub grid_slack_c: f64,
    pub grid_slack_f: f64,
    pub grid_alpha_prime: f64,
    pub refine_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub alpha_prime: f64,
    pub beta_prime: f64,
    pub inputs: AccuracyParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerTrace>,
}

impl BoundReport {
    pub fn new(theorem: Theorem, params: &AccuracyParams) -> Result<Self> {
        let b = evaluate(theorem, params)?;
        Ok(BoundReport {
            theorem,
            alpha_prime: b.alpha_prime,
            beta_prime: b.beta_prime,
            inputs: *params,
            optimizer: None,
        })
    }
}

/// Search range for each slack axis.
pub const SLACK_RANGE: (f64, f64) = (1e-6, 1e2);
/// Grid resolution of the first search stage.
pub const POINTS_PER_DECADE: usize = 60;
/// Slack used on an axis whose `beta'` term vanishes (`beta = 0` for
/// `slack_c`, `delta = 0` for `slack_f`). Small enough that its
/// contribution to `alpha'` stays below `1e-9`.
pub const VANISHING_TERM_SLACK: f64 = 1e-12;

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|k| lo * 10f64.powf(decades * k as f64 / steps as f64))
        .collect()
}

/// Minimizes `alpha'` over `(slack_c, slack_f)` subject to
/// `beta' <= beta_target`.
///
/// Stage 1 walks a log grid over [`SLACK_RANGE`] with
/// [`POINTS_PER_DECADE`] points per decade on the `slack_c` axis; for each
/// `slack_c` the smallest feasible grid `slack_f` is found by binary search,
/// since `beta'` decreases and `alpha'` increases in `slack_f`. Stage 2
/// refines: bisection on `slack_f` for the exact feasibility boundary and
/// bisection on the slope of the resulting `alpha'(slack_c)`, which is
/// unimodal, over the feasible `slack_c` range. The refined point is kept
/// only if it improves on the grid optimum.
pub fn optimize_slack(
    theorem: Theorem,
    params: &AccuracyParams,
    beta_target: f64,
) -> Result<BoundReport> {
    if !theorem.has_slack() {
        return Err(Error::Config(format!(
            "theorem '{theorem}' has no slack parameters"
        )));
    }
    if !(beta_target > 0.0 && beta_target.is_finite()) {
        return Err(Error::Domain(format!(
            "beta target must be positive, got {beta_target}"
        )));
    }
    let (lo, hi) = SLACK_RANGE;
    let eval = |c: f64, f: f64| evaluate(theorem, &params.with_slack(c, f));
    let best_beta = eval(hi, hi)?.beta_prime;
    if best_beta > beta_target {
        return Err(Error::Infeasible {
            target: beta_target,
            min_achievable: best_beta,
        });
    }

    let c_free = eval(lo, hi)?.beta_prime == best_beta;
    let f_free = eval(hi, lo)?.beta_prime == best_beta;
    let c_grid = if c_free {
        vec![VANISHING_TERM_SLACK]
    } else {
        log_grid(lo, hi, POINTS_PER_DECADE)
    };
    let f_grid = if f_free {
        vec![VANISHING_TERM_SLACK]
    } else {
        log_grid(lo, hi, POINTS_PER_DECADE)
    };
    let feasible = |c: f64, f: f64| -> Result<bool> { Ok(eval(c, f)?.beta_prime <= beta_target) };

    // stage 1
    let mut grid_best: Option<(usize, usize, f64)> = None;
    let mut first_feasible = hi;
    for (i, &c) in c_grid.iter().enumerate() {
        if !feasible(c, *f_grid.last().expect("non-empty"))? {
            continue;
        }
        if grid_best.is_none() {
            first_feasible = c_grid[i.saturating_sub(1)];
        }
        let (mut a, mut b) = (0usize, f_grid.len() - 1);
        while a < b {
            let mid = (a + b) / 2;
            if feasible(c, f_grid[mid])? {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        let alpha = eval(c, f_grid[a])?.alpha_prime;
        if grid_best.is_none_or(|(_, _, best)| alpha < best) {
            grid_best = Some((i, a, alpha));
        }
    }
    let (ci, fi, grid_alpha) = grid_best.ok_or(Error::Infeasible {
        target: beta_target,
        min_achievable: best_beta,
    })?;
    let (grid_c, grid_f) = (c_grid[ci], f_grid[fi]);

    // stage 2
    let mut iterations = 0usize;
    let boundary_f = |c: f64, iterations: &mut usize| -> Result<Option<f64>> {
        if f_free {
            return Ok(feasible(c, VANISHING_TERM_SLACK)?.then_some(VANISHING_TERM_SLACK));
        }
        if !feasible(c, hi)? {
            return Ok(None);
        }
        if feasible(c, lo)? {
            return Ok(Some(lo));
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            *iterations += 1;
            let mid = (a * b).sqrt();
            if feasible(c, mid)? {
                b = mid;
            } else {
                a = mid;
            }
            if b / a - 1.0 < 1e-15 {
                break;
            }
        }
        Ok(Some(b))
    };
    let alpha_at = |c: f64, iterations: &mut usize| -> Result<Option<(f64, f64)>> {
        Ok(match boundary_f(c, iterations)? {
            Some(f) => Some((f, eval(c, f)?.alpha_prime)),
            None => None,
        })
    };

    let mut best = (grid_c, grid_f, grid_alpha);
    if !c_free {
        let (mut a, mut b) = (first_feasible, hi);
        for _ in 0..100 {
            iterations += 1;
            let mid = (a * b).sqrt();
            let h = mid * 1e-9;
            let left = alpha_at(mid - h, &mut iterations)?.map_or(f64::INFINITY, |x| x.1);
            let right = alpha_at(mid + h, &mut iterations)?.map_or(f64::INFINITY, |x| x.1);
            if right.is_finite() && left <= right {
                b = mid;
            } else {
                a = mid;
            }
            if b / a - 1.0 < 1e-12 {
                break;
            }
        }
        if let Some((f, alpha)) = alpha_at(b, &mut iterations)? {
            if alpha < best.2 {
                best = (b, f, alpha);
            }
        }
    } else if let Some((f, alpha)) = alpha_at(grid_c, &mut iterations)? {
        if alpha < best.2 {
            best = (grid_c, f, alpha);
        }
    }

    let chosen = params.with_slack(best.0, best.1);
    let mut report = BoundReport::new(theorem, &chosen)?;
    report.optimizer = Some(OptimizerTrace {
        beta_target,
        grid_points: c_grid.len() * f_grid.len(),
        grid_slack_c: grid_c,
        grid_slack_f: grid_f,
        grid_alpha_prime: grid_alpha,
        refine_iterations: iterations,
    });
    Ok(report)
}
