use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::datagen::sampler::Sampler;
use crate::datagen::spec::{Marginal, PopulationSpec};
use crate::error::{Error, Result};
use crate::query::{Factor, LinearQuery, QueryKind, Var};
use crate::seed::rng_from_seed;
use crate::transcript::PopulationOracle;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleMode {
    ClosedForm,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    /// Closed form where supported, Monte Carlo otherwise.
    Auto {
        samples: usize,
        seed: u64,
    },
}

/// `q(P)` for a population spec.
pub fn population_value(q: &LinearQuery, spec: &PopulationSpec, mode: OracleMode) -> Result<f64> {
    spec.validate()?;
    q.window().check_in_range(spec.m)?;
    match mode {
        OracleMode::ClosedForm => closed_form(q, spec),
        OracleMode::MonteCarlo { samples, seed } => monte_carlo(q, spec, samples, seed),
        OracleMode::Auto { samples, seed } => match closed_form(q, spec) {
            Err(Error::Unsupported(_)) => monte_carlo(q, spec, samples, seed),
            other => other,
        },
    }
}

fn unsupported(q: &LinearQuery, why: &str) -> Error {
    Error::Unsupported(format!("no closed form for {}: {why}", q.descriptor()))
}

fn closed_form(q: &LinearQuery, spec: &PopulationSpec) -> Result<f64> {
    let marginal = |attr: usize| {
        spec.effective_marginal(attr).ok_or_else(|| {
            unsupported(
                q,
                &format!("marginal of attribute {attr} is not Bernoulli or uniform"),
            )
        })
    };
    let label_mean = || {
        spec.independent_label_mean()
            .ok_or_else(|| unsupported(q, "label is not independent of the attributes"))
    };
    let independent = |vars: &[Var]| -> bool {
        vars.iter().enumerate().all(|(i, a)| {
            vars[i + 1..].iter().all(|b| match (a, b) {
                (Var::Attr(x), Var::Attr(y)) => spec.attributes_independent(*x, *y),
                (Var::Label, Var::Label) => false,
                _ => spec.independent_label_mean().is_some(),
            })
        })
    };
    match q.kind() {
        QueryKind::Weighted { weights, bias } => {
            let w = q.window();
            let pos: f64 = weights.iter().filter(|x| **x > 0.0).sum();
            let neg: f64 = weights.iter().filter(|x| **x < 0.0).sum();
            if bias + pos <= 1.0 && bias + neg >= 0.0 {
                // the clamp is inactive on [0,1]^k, so linearity applies
                let mut total = *bias;
                for (k, wk) in weights.iter().enumerate() {
                    if *wk != 0.0 {
                        total += wk * marginal(w.lo + k)?.mean();
                    }
                }
                return Ok(total.clamp(0.0, 1.0));
            }
            let attrs: Vec<usize> = (w.lo..=w.hi).filter(|a| weights[a - w.lo] != 0.0).collect();
            let vars: Vec<Var> = attrs.iter().map(|a| Var::Attr(*a)).collect();
            let margs = attrs
                .iter()
                .map(|a| marginal(*a))
                .collect::<Result<Vec<_>>>()?;
            if attrs.len() > 20 || !independent(&vars) || margs.contains(&Marginal::Uniform) {
                return Err(unsupported(
                    q,
                    "clamped weighted query needs independent Bernoulli attributes",
                ));
            }
            // enumerate the joint support of the Bernoulli attributes
            let mut total = 0.0;
            for mask in 0u32..(1 << attrs.len()) {
                let mut prob = 1.0;
                let mut s = *bias;
                for (k, (a, m)) in attrs.iter().zip(&margs).enumerate() {
                    let on = mask >> k & 1 == 1;
                    prob *= if on { m.mean() } else { 1.0 - m.mean() };
                    if on {
                        s += weights[a - w.lo];
                    }
                }
                total += prob * s.clamp(0.0, 1.0);
            }
            Ok(total)
        }
        QueryKind::Threshold { attr, threshold } => Ok(marginal(*attr)?.at_least(*threshold)),
        QueryKind::Product { factors } => {
            let vars: Vec<Var> = factors
                .iter()
                .map(|f| f.attr().map(Var::Attr).unwrap_or(Var::Label))
                .collect();
            if !independent(&vars) {
                return Err(unsupported(q, "product factors are not independent"));
            }
            let mut acc = 1.0;
            for f in factors {
                acc *= match *f {
                    Factor::Value { attr } => marginal(attr)?.mean(),
                    Factor::Complement { attr } => 1.0 - marginal(attr)?.mean(),
                    Factor::AtLeast { attr, threshold } => marginal(attr)?.at_least(threshold),
                    Factor::Below { attr, threshold } => 1.0 - marginal(attr)?.at_least(threshold),
                    Factor::Label => label_mean()?,
                    Factor::NotLabel => 1.0 - label_mean()?,
                };
            }
            Ok(acc)
        }
        QueryKind::Concordance { pairs } => {
            let bit_mean = |v: Var| -> Result<f64> {
                match v {
                    Var::Attr(a) => Ok(marginal(a)?.at_least(0.5)),
                    Var::Label => label_mean(),
                }
            };
            let mut total = 0.0;
            for p in pairs {
                let agree = if p.a == p.b {
                    1.0
                } else {
                    if !independent(&[p.a, p.b]) {
                        return Err(unsupported(q, "concordance pair is not independent"));
                    }
                    let (x, y) = (bit_mean(p.a)?, bit_mean(p.b)?);
                    x * y + (1.0 - x) * (1.0 - y)
                };
                total += if p.flip { 1.0 - agree } else { agree };
            }
            Ok(total / pairs.len() as f64)
        }
    }
}

fn monte_carlo(q: &LinearQuery, spec: &PopulationSpec, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Precondition(
            "Monte Carlo oracle needs at least one sample".into(),
        ));
    }
    if q.uses_label() && spec.label_rule.is_none() {
        return Err(Error::Unsupported(format!(
            "{} reads a label the population does not have",
            q.descriptor()
        )));
    }
    let mut sampler = Sampler::new(spec)?;
    let mut rng = rng_from_seed(seed);
    let mut attrs = vec![0.0; spec.m];
    let w = q.window();
    let mut total = 0.0;
    for _ in 0..samples {
        let label = sampler.draw(&mut rng, &mut attrs, None);
        total += q.eval_window(&attrs[w.lo - 1..w.hi], label)?;
    }
    Ok(total / samples as f64)
}

/// A [`PopulationOracle`] bound to one spec and mode. Values are memoized by
/// query descriptor, so repeated Monte Carlo lookups are free.
pub struct Population {
    spec: PopulationSpec,
    mode: OracleMode,
    cache: RefCell<HashMap<String, f64>>,
}

impl Population {
    pub fn new(spec: PopulationSpec, mode: OracleMode) -> Result<Self> {
        spec.validate()?;
        Ok(Population {
            spec,
            mode,
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &PopulationSpec {
        &self.spec
    }
}

impl PopulationOracle for Population {
    fn population_value(&self, q: &LinearQuery) -> Result<f64> {
        let key = q.descriptor();
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(*v);
        }
        let v = population_value(q, &self.spec, self.mode)?;
        self.cache.borrow_mut().insert(key, v);
        Ok(v)
    }
}
