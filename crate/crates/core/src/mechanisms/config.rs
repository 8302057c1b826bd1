use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::answerer::Answerer;
use crate::mechanisms::policy::PolicyKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswererConfig {
    Exact,
    /// `epsilon` per query; when omitted, the unit cap split evenly over
    /// `per_unit_quota`.
    Laplace {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub answerer: AnswererConfig,
    pub epsilon_cap: f64,
    #[serde(default)]
    pub delta_cap: f64,
    pub policy: PolicyKind,
    /// Queries each unit is expected to answer; used to split the caps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_unit_quota: Option<usize>,
    /// Route answers through the label-splitting combiner.
    #[serde(default)]
    pub label_split: bool,
    #[serde(default)]
    pub seed: u64,
}

impl MechanismConfig {
    pub fn exact(policy: PolicyKind) -> Self {
        MechanismConfig {
            answerer: AnswererConfig::Exact,
            epsilon_cap: 0.0,
            delta_cap: 0.0,
            policy,
            per_unit_quota: None,
            label_split: false,
            seed: 0,
        }
    }

    /// Laplace answerer whose per-query epsilon is `epsilon_cap / quota`.
    pub fn laplace_with_quota(policy: PolicyKind, epsilon_cap: f64, quota: usize) -> Self {
        MechanismConfig {
            answerer: AnswererConfig::Laplace { epsilon: None },
            epsilon_cap,
            delta_cap: 0.0,
            policy,
            per_unit_quota: Some(quota),
            label_split: false,
            seed: 0,
        }
    }

    fn split(&self, cap: f64, what: &str) -> Result<f64> {
        match self.per_unit_quota {
            Some(q) if q > 0 => Ok(cap / q as f64),
            _ => Err(Error::Config(format!(
                "{what} not given and per_unit_quota is missing or zero"
            ))),
        }
    }

    /// Fills per-query parameters and validates them.
    pub fn resolve(&self) -> Result<Answerer> {
        if !(self.epsilon_cap >= 0.0) || !(0.0..=1.0).contains(&self.delta_cap) {
            return Err(Error::Config(
                "caps must satisfy epsilon_cap >= 0 and delta_cap in [0, 1]".into(),
            ));
        }
        let answerer = match self.answerer {
            AnswererConfig::Exact => Answerer::Exact,
            AnswererConfig::Laplace { epsilon } => Answerer::Laplace {
                epsilon: epsilon
                    .map_or_else(|| self.split(self.epsilon_cap, "laplace epsilon"), Ok)?,
            },
            AnswererConfig::Gaussian { epsilon, delta } => Answerer::Gaussian {
                epsilon: epsilon
                    .map_or_else(|| self.split(self.epsilon_cap, "gaussian epsilon"), Ok)?,
                delta: delta.map_or_else(|| self.split(self.delta_cap, "gaussian delta"), Ok)?,
            },
        };
        match answerer {
            Answerer::Laplace { epsilon } | Answerer::Gaussian { epsilon, .. }
                if !(epsilon > 0.0 && epsilon.is_finite()) =>
            {
                return Err(Error::Config(format!(
                    "per-query epsilon must be positive and finite, got {epsilon}"
                )));
            }
            Answerer::Gaussian { delta, .. } if !(delta > 0.0 && delta < 1.0) => {
                return Err(Error::Config(format!(
                    "per-query delta must lie in (0, 1), got {delta}"
                )));
            }
            _ => {}
        }
        Ok(answerer)
    }
}
