use serde::{Deserialize, Serialize};

use crate::data::BlockLayout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    IndependentBlocks,
    OneDependentBlocks,
    DecayingCorrelation,
    /// Mutually independent attributes plus a label column.
    Labeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Bernoulli { p: f64 },
    Uniform,
}

impl Marginal {
    /// Inverse CDF applied to a uniform draw.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Marginal::Bernoulli { p } => f64::from(u8::from(u < p)),
            Marginal::Uniform => u,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Bernoulli { p } => p,
            Marginal::Uniform => 0.5,
        }
    }

    /// `Pr[x >= t]`.
    pub fn at_least(&self, t: f64) -> f64 {
        match *self {
            Marginal::Bernoulli { p } => {
                if t <= 0.0 {
                    1.0
                } else if t <= 1.0 {
                    p
                } else {
                    0.0
                }
            }
            Marginal::Uniform => (1.0 - t).clamp(0.0, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Bernoulli { p } if !(0.0..=1.0).contains(&p) => Err(Error::Spec(format!(
                "Bernoulli parameter {p} outside [0, 1]"
            ))),
            _ => Ok(()),
        }
    }
}

/// How a dependent attribute is derived from its predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Copy,
    /// `1 - x`
    Negate,
    /// Copy, replaced by `1 - x` with probability `flip`.
    NoisyCopy { flip: f64 },
}

impl Coupling {
    /// Image of a marginal under the coupling, when it stays in the family.
    pub fn push_marginal(&self, m: Marginal) -> Marginal {
        match (self, m) {
            (_, Marginal::Uniform) => Marginal::Uniform,
            (Coupling::Copy, b) => b,
            (Coupling::Negate, Marginal::Bernoulli { p }) => Marginal::Bernoulli { p: 1.0 - p },
            (Coupling::NoisyCopy { flip }, Marginal::Bernoulli { p }) => Marginal::Bernoulli {
                p: p * (1.0 - flip) + (1.0 - p) * flip,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Coupling::NoisyCopy { flip } if !(0.0..=1.0).contains(&flip) => Err(Error::Spec(
                format!("flip probability {flip} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelRule {
    /// `y ~ Bernoulli(p)`, independent of every attribute.
    Independent { p: f64 },
    /// `y = 1[x_attr >= threshold]`, flipped with probability `flip`.
    Threshold {
        attr: usize,
        threshold: f64,
        #[serde(default)]
        flip: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub model: Model,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockLayout>,
    /// Link-independence probability of the decaying model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// One marginal per attribute, or a single marginal shared by all.
    pub marginals: Vec<Marginal>,
    /// Within-block chain coupling (independent blocks) or the dependence
    /// construction for related links (decaying model, default copy).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    /// Probability that a non-anchor attribute of a one-dependent block reads
    /// its neighbour's latent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_rule: Option<LabelRule>,
}

impl PopulationSpec {
    pub fn independent_blocks(m: usize, blocks: Option<BlockLayout>, marginal: Marginal) -> Self {
        PopulationSpec {
            model: Model::IndependentBlocks,
            m,
            blocks,
            p: None,
            marginals: vec![marginal],
            coupling: None,
            coupling_strength: None,
            label_rule: None,
        }
    }

    pub fn one_dependent(blocks: BlockLayout, marginal: Marginal, strength: f64) -> Self {
        PopulationSpec {
            model: Model::OneDependentBlocks,
            m: blocks.m(),
            blocks: Some(blocks),
            p: None,
            marginals: vec![marginal],
            coupling: None,
            coupling_strength: Some(strength),
            label_rule: None,
        }
    }

    pub fn decaying(m: usize, p: f64, marginal: Marginal, coupling: Coupling) -> Self {
        PopulationSpec {
            model: Model::DecayingCorrelation,
            m,
            blocks: None,
            p: Some(p),
            marginals: vec![marginal],
            coupling: Some(coupling),
            coupling_strength: None,
            label_rule: None,
        }
    }

    pub fn labeled(
        m: usize,
        blocks: Option<BlockLayout>,
        marginal: Marginal,
        rule: LabelRule,
    ) -> Self {
        PopulationSpec {
            model: Model::Labeled,
            label_rule: Some(rule),
            ..PopulationSpec::independent_blocks(m, blocks, marginal)
        }
    }

    pub fn with_label_rule(mut self, rule: LabelRule) -> Self {
        self.label_rule = Some(rule);
        self
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = Some(coupling);
        self
    }

    /// Base marginal of attribute `attr` (1-based).
    pub fn marginal(&self, attr: usize) -> Marginal {
        if self.marginals.len() == 1 {
            self.marginals[0]
        } else {
            self.marginals[attr - 1]
        }
    }

    pub fn decay_p(&self) -> f64 {
        self.p.unwrap_or(1.0)
    }

    pub fn strength(&self) -> f64 {
        self.coupling_strength.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Spec("m must be positive".into()));
        }
        if self.marginals.len() != 1 && self.marginals.len() != self.m {
            return Err(Error::Spec(format!(
                "expected 1 or {} marginals, got {}",
                self.m,
                self.marginals.len()
            )));
        }
        self.marginals.iter().try_for_each(Marginal::validate)?;
        if let Some(layout) = &self.blocks {
            if layout.m() != self.m {
                return Err(Error::Spec(format!(
                    "block layout covers {} attributes, spec declares m = {}",
                    layout.m(),
                    self.m
                )));
            }
        }
        if let Some(c) = &self.coupling {
            c.validate()?;
        }
        if let Some(p) = self.p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Spec(format!(
                    "link-independence probability p = {p} outside [0, 1]"
                )));
            }
        }
        if let Some(w) = self.coupling_strength {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Spec(format!("coupling strength {w} outside [0, 1]")));
            }
        }
        match self.model {
            Model::OneDependentBlocks if self.blocks.is_none() => {
                return Err(Error::Spec(
                    "one_dependent_blocks requires a block layout".into(),
                ));
            }
            Model::DecayingCorrelation if self.p.is_none() => {
                return Err(Error::Spec("decaying_correlation requires p".into()));
            }
            Model::Labeled if self.label_rule.is_none() => {
                return Err(Error::Spec("labeled model requires a label_rule".into()));
            }
            _ => {}
        }
        match self.label_rule {
            Some(LabelRule::Independent { p }) if !(0.0..=1.0).contains(&p) => {
                return Err(Error::Spec(format!("label probability {p} outside [0, 1]")));
            }
            Some(LabelRule::Threshold {
                attr,
                threshold,
                flip,
            }) => {
                if attr == 0 || attr > self.m {
                    return Err(Error::Spec(format!(
                        "label rule reads attribute {attr} outside 1..={}",
                        self.m
                    )));
                }
                if !threshold.is_finite() || !(0.0..=1.0).contains(&flip) {
                    return Err(Error::Spec(
                        "label rule threshold must be finite and flip in [0, 1]".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Marginal law of attribute `attr` after the model's dependence
    /// construction is applied, when it is Bernoulli or uniform.
    pub fn effective_marginal(&self, attr: usize) -> Option<Marginal> {
        match self.model {
            Model::OneDependentBlocks => Some(self.marginal(attr)),
            Model::IndependentBlocks | Model::Labeled => match self.coupling {
                None => Some(self.marginal(attr)),
                Some(c) => {
                    let start = self
                        .blocks
                        .as_ref()
                        .and_then(|l| l.block_of(attr))
                        .and_then(|b| self.blocks.as_ref().and_then(|l| l.block(b)))
                        .map(|w| w.lo)
                        .unwrap_or(1);
                    let mut m = self.marginal(start);
                    for _ in start..attr {
                        m = c.push_marginal(m);
                    }
                    Some(m)
                }
            },
            Model::DecayingCorrelation => {
                let p = self.decay_p();
                let c = self.coupling.unwrap_or_default();
                let mut m = self.marginal(1);
                for next in 2..=attr {
                    let fresh = self.marginal(next);
                    let pushed = c.push_marginal(m);
                    m = match (fresh, pushed) {
                        (Marginal::Uniform, Marginal::Uniform) => Marginal::Uniform,
                        (Marginal::Bernoulli { p: a }, Marginal::Bernoulli { p: b }) => {
                            Marginal::Bernoulli {
                                p: p * a + (1.0 - p) * b,
                            }
                        }
                        _ if p == 1.0 => fresh,
                        _ if p == 0.0 => pushed,
                        _ => return None,
                    };
                }
                Some(m)
            }
        }
    }

    /// Whether attributes `a` and `b` (distinct, 1-based) are independent by
    /// construction.
    pub fn attributes_independent(&self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let block = |x| self.blocks.as_ref().and_then(|l| l.block_of(x));
        match self.model {
            Model::IndependentBlocks | Model::Labeled => {
                self.coupling.is_none() || (block(a).is_some() && block(a) != block(b))
            }
            Model::OneDependentBlocks => {
                if self.strength() == 0.0 {
                    return true;
                }
                match (block(a), block(b)) {
                    (Some(x), Some(y)) => x.abs_diff(y) > 1,
                    _ => false,
                }
            }
            Model::DecayingCorrelation => self.decay_p() == 1.0,
        }
    }

    /// `Pr[y = 1]` when the label is independent of all attributes.
    pub fn independent_label_mean(&self) -> Option<f64> {
        match self.label_rule {
            Some(LabelRule::Independent { p }) => Some(p),
            _ => None,
        }
    }

    /// `Pr[y = 0]` under the population.
    pub fn label_zero_probability(&self) -> Result<f64> {
        match self.label_rule {
            None => Err(Error::Spec("spec has no label rule".into())),
            Some(LabelRule::Independent { p }) => Ok(1.0 - p),
            Some(LabelRule::Threshold {
                attr,
                threshold,
                flip,
            }) => {
                let m = self.effective_marginal(attr).ok_or_else(|| {
                    Error::Unsupported(format!("marginal of attribute {attr} has no closed form"))
                })?;
                let one = m.at_least(threshold);
                Ok(1.0 - (one * (1.0 - flip) + (1.0 - one) * flip))
            }
        }
    }
}
