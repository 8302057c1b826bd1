use serde::{Deserialize, Serialize};

use crate::adversaries::AnalystConfig;
use crate::bounds::{optimize_slack, AccuracyParams, BoundReport, Theorem};
use crate::datagen::{OracleMode, PopulationSpec, DEFAULT_MC_SAMPLES};
use crate::error::{Error, Result};
use crate::mechanisms::{laplace_tail, Answerer, MechanismConfig, PolicyKind};

/// Theorem and sample-accuracy premises the experiment is compared against.
///
/// Omitted privacy parameters are taken from the mechanism's per-unit caps,
/// `m` from the number of budget units, and `n` from the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub theorem: Theorem,
    pub alpha: f64,
    /// When omitted with a Laplace answerer, the per-unit union bound
    /// `quota * exp(-alpha n epsilon_q)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_f: Option<f64>,
    /// Optimize the slacks for this `beta'` instead of using fixed ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_target: Option<f64>,
}

fn default_trials() -> usize {
    200
}

fn default_max_steps() -> usize {
    100_000
}

fn default_oracle() -> OracleMode {
    OracleMode::Auto {
        samples: DEFAULT_MC_SAMPLES,
        seed: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub population: PopulationSpec,
    pub n: usize,
    pub mechanism: MechanismConfig,
    pub analyst: AnalystConfig,
    pub bound: BoundConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_oracle")]
    pub oracle: OracleMode,
    /// Also emit `transcripts.csv` with one row per answered query.
    #[serde(default)]
    pub write_transcripts: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Number of budget units the policy charges against.
    pub fn units(&self) -> usize {
        match self.mechanism.policy {
            PolicyKind::Unrestricted => 1,
            PolicyKind::CrossBlockRefusal | PolicyKind::StreamingBlocks => self
                .population
                .blocks
                .as_ref()
                .map_or(1, |b| b.num_blocks()),
            PolicyKind::WidthLimited { .. } | PolicyKind::SlidingWindow { .. } => self.population.m,
        }
    }

    /// Validates every component; nothing here touches random state.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        self.population.validate()?;
        self.mechanism.resolve()?;
        let needs_layout = matches!(
            self.mechanism.policy,
            PolicyKind::CrossBlockRefusal | PolicyKind::StreamingBlocks
        );
        if needs_layout && self.population.blocks.is_none() {
            return Err(Error::Config(format!(
                "policy {} needs a block layout",
                self.mechanism.policy
            )));
        }
        if self.mechanism.label_split && self.population.label_rule.is_none() {
            return Err(Error::Config(
                "label_split needs a labeled population".into(),
            ));
        }
        self.analyst
            .build(self.population.m, self.population.blocks.as_ref(), 0)?;
        self.resolve_bound()?;
        Ok(())
    }

    /// Sample-accuracy premise `beta`, derived from the Laplace tail when not
    /// given.
    pub fn resolve_beta(&self) -> Result<f64> {
        if let Some(b) = self.bound.beta {
            return Ok(b);
        }
        match (self.mechanism.resolve()?, self.mechanism.per_unit_quota) {
            (Answerer::Laplace { epsilon }, Some(quota)) => {
                Ok((quota as f64 * laplace_tail(self.bound.alpha, self.n, epsilon)).min(1.0))
            }
            _ => Err(Error::Config(
                "bound.beta is required unless the answerer is Laplace with a quota".into(),
            )),
        }
    }

    pub fn accuracy_params(&self) -> Result<AccuracyParams> {
        let b = &self.bound;
        let params = AccuracyParams {
            epsilon: b.epsilon.unwrap_or(self.mechanism.epsilon_cap),
            delta: b.delta.unwrap_or(self.mechanism.delta_cap),
            alpha: b.alpha,
            beta: self.resolve_beta()?,
            m: b.m.unwrap_or_else(|| self.units()),
            n: self.n,
            p: b.p.or(self.population.p).unwrap_or(1.0),
            d: b.d.unwrap_or(match self.mechanism.policy {
                PolicyKind::WidthLimited { d } | PolicyKind::SlidingWindow { d } => d,
                _ => 0,
            }),
            slack_c: b.slack_c.unwrap_or(1.0),
            slack_f: b.slack_f.unwrap_or(1.0),
        };
        Ok(params)
    }

    pub fn resolve_bound(&self) -> Result<BoundReport> {
        let b = &self.bound;
        if !b.theorem.has_slack() {
            return Err(Error::Config(format!(
                "theorem '{}' cannot be compared against an experiment",
                b.theorem
            )));
        }
        let params = self.accuracy_params()?;
        match (b.beta_target, b.slack_c, b.slack_f) {
            (Some(target), _, _) => optimize_slack(b.theorem, &params, target),
            (None, Some(_), Some(_)) => BoundReport::new(b.theorem, &params),
            _ => Err(Error::Config(
                "bound needs either beta_target or both slack_c and slack_f".into(),
            )),
        }
    }
}
