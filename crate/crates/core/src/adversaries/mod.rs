//! Adaptive analysts.
//!
//! An analyst only ever sees the history of its own proposals and what the
//! mechanism said about them; it has no handle on the sample or the
//! population. That is enforced by the [`Analyst`] signature.

mod chaser;
mod freedman;
mod random;

use serde::{Deserialize, Serialize};

pub use chaser::CorrelationChaser;
pub use freedman::{FreedmanAnalyst, FreedmanScope};
pub use random::{RandomAnalyst, RandomFamily};

use crate::data::BlockLayout;
use crate::error::{Error, Result};
use crate::mechanisms::Exchange;
use crate::query::LinearQuery;

pub trait Analyst {
    /// Next query given everything observed so far, or `None` to stop.
    fn next_query(&mut self, history: &[Exchange]) -> Option<LinearQuery>;

    /// Strategy-specific summary reported alongside trial results.
    fn statistic(&self) -> Option<f64> {
        None
    }
}

/// Stops immediately.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdleAnalyst;

impl Analyst for IdleAnalyst {
    fn next_query(&mut self, _history: &[Exchange]) -> Option<LinearQuery> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AnalystConfig {
    Idle,
    Freedman {
        k_sel: usize,
        /// Run the attack separately inside each block of the layout.
        #[serde(default)]
        per_block: bool,
    },
    CorrelationChaser {
        d: usize,
        steps: usize,
    },
    Random {
        k: usize,
        family: RandomFamily,
        #[serde(default)]
        max_width: usize,
    },
}

impl AnalystConfig {
    /// Builds an analyst from public metadata only: the attribute count and
    /// block layout.
    pub fn build(
        &self,
        m: usize,
        layout: Option<&BlockLayout>,
        seed: u64,
    ) -> Result<Box<dyn Analyst>> {
        Ok(match *self {
            AnalystConfig::Idle => Box::new(IdleAnalyst),
            AnalystConfig::Freedman { k_sel, per_block } => {
                let scope = if per_block {
                    let layout = layout.ok_or_else(|| {
                        Error::Config("per-block Freedman analyst needs a block layout".into())
                    })?;
                    FreedmanScope::PerBlock(layout.clone())
                } else {
                    FreedmanScope::Global
                };
                Box::new(FreedmanAnalyst::new(m, k_sel, scope)?)
            }
            AnalystConfig::CorrelationChaser { d, steps } => {
                Box::new(CorrelationChaser::new(m, d, steps, seed)?)
            }
            AnalystConfig::Random {
                k,
                family,
                max_width,
            } => Box::new(RandomAnalyst::new(m, k, family, max_width, seed)?),
        })
    }
}
