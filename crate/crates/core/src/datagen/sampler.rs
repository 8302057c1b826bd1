use rand::Rng;

use crate::data::{Dataset, Individual};
use crate::datagen::spec::{Coupling, LabelRule, Model, PopulationSpec};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

/// Realized link draws of one individual in the decaying model.
/// `links[i - 1]` is true when attributes `i` and `i + 1` were drawn
/// dependent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkTrace {
    pub links: Vec<bool>,
}

impl LinkTrace {
    /// Attributes `i` and `j` are related iff every link between them is.
    pub fn related(&self, i: usize, j: usize) -> bool {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.links[lo - 1..hi - 1].iter().all(|&l| l)
    }
}

fn apply_coupling(c: Coupling, x: f64, rng: &mut SimRng) -> f64 {
    match c {
        Coupling::Copy => x,
        Coupling::Negate => 1.0 - x,
        Coupling::NoisyCopy { flip } => {
            if rng.random::<f64>() < flip {
                1.0 - x
            } else {
                x
            }
        }
    }
}

/// Draws individuals one at a time from a validated spec.
pub(crate) struct Sampler<'a> {
    spec: &'a PopulationSpec,
    latents: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(spec: &'a PopulationSpec) -> Result<Self> {
        spec.validate()?;
        let k = spec.blocks.as_ref().map(|l| l.num_blocks()).unwrap_or(0);
        Ok(Sampler {
            spec,
            latents: vec![0.0; k + 1],
        })
    }

    /// Fills `attrs` (length m) and, for the decaying model, `links`
    /// (length m - 1). Returns the label when the spec has a label rule.
    pub(crate) fn draw(
        &mut self,
        rng: &mut SimRng,
        attrs: &mut [f64],
        links: Option<&mut [bool]>,
    ) -> Option<bool> {
        let spec = self.spec;
        match spec.model {
            Model::IndependentBlocks | Model::Labeled => {
                for a in 1..=spec.m {
                    let starts_block = match &spec.blocks {
                        Some(layout) => {
                            layout.block(layout.block_of(a).unwrap_or(1)).map(|w| w.lo) == Some(a)
                        }
                        None => a == 1,
                    };
                    let u: f64 = rng.random();
                    attrs[a - 1] = match spec.coupling {
                        Some(c) if !starts_block => apply_coupling(c, attrs[a - 2], rng),
                        _ => spec.marginal(a).quantile(u),
                    };
                }
            }
            Model::OneDependentBlocks => {
                let layout = spec.blocks.as_ref().expect("validated");
                let strength = spec.strength();
                for z in self.latents.iter_mut() {
                    *z = rng.random();
                }
                for (b, w) in layout.blocks().iter().enumerate() {
                    // block b+1 reads its private latent (index b+1) at its last
                    // attribute and the shared latent (index b) elsewhere
                    for a in w.lo..=w.hi {
                        let marginal = spec.marginal(a);
                        let u = if a == w.hi {
                            self.latents[b + 1]
                        } else {
                            let fresh: f64 = rng.random();
                            if rng.random::<f64>() < strength {
                                self.latents[b]
                            } else {
                                fresh
                            }
                        };
                        attrs[a - 1] = marginal.quantile(u);
                    }
                }
            }
            Model::DecayingCorrelation => {
                let p = spec.decay_p();
                let coupling = spec.coupling.unwrap_or_default();
                attrs[0] = spec.marginal(1).quantile(rng.random());
                let mut links = links;
                for a in 2..=spec.m {
                    let independent = rng.random::<f64>() < p;
                    let u: f64 = rng.random();
                    attrs[a - 1] = if independent {
                        spec.marginal(a).quantile(u)
                    } else {
                        apply_coupling(coupling, attrs[a - 2], rng)
                    };
                    if let Some(l) = links.as_deref_mut() {
                        l[a - 2] = !independent;
                    }
                }
            }
        }
        spec.label_rule.map(|rule| match rule {
            LabelRule::Independent { p } => rng.random::<f64>() < p,
            LabelRule::Threshold {
                attr,
                threshold,
                flip,
            } => {
                let y = attrs[attr - 1] >= threshold;
                y != (rng.random::<f64>() < flip)
            }
        })
    }
}

/// A drawn sample, with link traces for the decaying model.
#[derive(Debug, Clone)]
pub struct Sample {
    pub dataset: Dataset,
    pub links: Option<Vec<LinkTrace>>,
}

/// Draws `n` individuals from any spec.
pub fn sample(spec: &PopulationSpec, n: usize, seed: u64) -> Result<Sample> {
    let mut sampler = Sampler::new(spec)?;
    let mut rng = rng_from_seed(seed);
    let decaying = spec.model == Model::DecayingCorrelation;
    let mut individuals = Vec::with_capacity(n);
    let mut traces = decaying.then(|| Vec::with_capacity(n));
    let mut attrs = vec![0.0; spec.m];
    let mut links = vec![false; spec.m.saturating_sub(1)];
    for _ in 0..n {
        let label = sampler.draw(&mut rng, &mut attrs, decaying.then_some(&mut links[..]));
        individuals.push(Individual {
            attributes: attrs.clone(),
            label,
        });
        if let Some(t) = traces.as_mut() {
            t.push(LinkTrace {
                links: links.clone(),
            });
        }
    }
    let dataset = Dataset::new(individuals, spec.m, spec.blocks.clone())?;
    Ok(Sample {
        dataset,
        links: traces,
    })
}

fn require_model(spec: &PopulationSpec, model: Model) -> Result<()> {
    if spec.model != model {
        return Err(Error::Spec(format!(
            "expected model {model:?}, spec declares {:?}",
            spec.model
        )));
    }
    Ok(())
}

pub fn sample_independent_blocks(spec: &PopulationSpec, n: usize, seed: u64) -> Result<Dataset> {
    require_model(spec, Model::IndependentBlocks)?;
    Ok(sample(spec, n, seed)?.dataset)
}

pub fn sample_one_dependent(spec: &PopulationSpec, n: usize, seed: u64) -> Result<Dataset> {
    require_model(spec, Model::OneDependentBlocks)?;
    Ok(sample(spec, n, seed)?.dataset)
}

pub fn sample_decaying(
    spec: &PopulationSpec,
    n: usize,
    seed: u64,
) -> Result<(Dataset, Vec<LinkTrace>)> {
    require_model(spec, Model::DecayingCorrelation)?;
    let s = sample(spec, n, seed)?;
    Ok((s.dataset, s.links.unwrap_or_default()))
}

pub fn sample_labeled(spec: &PopulationSpec, n: usize, seed: u64) -> Result<Dataset> {
    if spec.label_rule.is_none() {
        return Err(Error::Spec("sample_labeled requires a label_rule".into()));
    }
    Ok(sample(spec, n, seed)?.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BlockLayout;
    use crate::datagen::spec::Marginal;

    fn column(ds: &Dataset, attr: usize) -> Vec<f64> {
        ds.individuals()
            .iter()
            .map(|x| x.attributes[attr - 1])
            .collect()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn singleton_blocks_are_uncorrelated() {
        let spec = PopulationSpec::independent_blocks(
            2,
            Some(BlockLayout::singletons(2).unwrap()),
            Marginal::Bernoulli { p: 0.5 },
        );
        let ds = sample_independent_blocks(&spec, 100_000, 7).unwrap();
        let r = correlation(&column(&ds, 1), &column(&ds, 2));
        assert!(r.abs() < 0.02, "r = {r}");
    }

    #[test]
    fn single_block_allows_coupling() {
        let spec = PopulationSpec::independent_blocks(
            3,
            Some(BlockLayout::uniform(1, 3).unwrap()),
            Marginal::Bernoulli { p: 0.5 },
        )
        .with_coupling(Coupling::Copy);
        let ds = sample_independent_blocks(&spec, 200, 3).unwrap();
        for x in ds.individuals() {
            assert_eq!(x.attributes[0], x.attributes[1]);
            assert_eq!(x.attributes[1], x.attributes[2]);
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let spec =
            PopulationSpec::decaying(6, 0.4, Marginal::Uniform, Coupling::NoisyCopy { flip: 0.2 });
        let a = sample(&spec, 50, 11).unwrap();
        let b = sample(&spec, 50, 11).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.links, b.links);
        let c = sample(&spec, 50, 12).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn decaying_limits() {
        let indep =
            PopulationSpec::decaying(5, 1.0, Marginal::Bernoulli { p: 0.5 }, Coupling::Copy);
        let (_, links) = sample_decaying(&indep, 100, 1).unwrap();
        assert!(links.iter().all(|t| t.links.iter().all(|l| !l)));

        let copy = PopulationSpec::decaying(5, 0.0, Marginal::Uniform, Coupling::Copy);
        let (ds, links) = sample_decaying(&copy, 100, 1).unwrap();
        assert!(links.iter().all(|t| t.links.iter().all(|&l| l)));
        for x in ds.individuals() {
            assert!(x.attributes.iter().all(|&v| v == x.attributes[0]));
        }
    }

    #[test]
    fn zero_coupling_one_dependent_is_independent_blocks() {
        let spec = PopulationSpec::one_dependent(
            BlockLayout::uniform(3, 2).unwrap(),
            Marginal::Bernoulli { p: 0.5 },
            0.0,
        );
        assert!(spec.attributes_independent(1, 3));
        assert!(spec.attributes_independent(2, 3));
        let ds = sample_one_dependent(&spec, 50_000, 5).unwrap();
        let r = correlation(&column(&ds, 2), &column(&ds, 3));
        assert!(r.abs() < 0.03, "r = {r}");
    }

    #[test]
    fn full_coupling_links_adjacent_blocks() {
        let spec = PopulationSpec::one_dependent(
            BlockLayout::uniform(3, 2).unwrap(),
            Marginal::Bernoulli { p: 0.5 },
            1.0,
        );
        let ds = sample_one_dependent(&spec, 1000, 5).unwrap();
        // block 2's first attribute reads block 1's anchor latent
        for x in ds.individuals() {
            assert_eq!(x.attributes[1], x.attributes[2]);
        }
    }

    #[test]
    fn labels() {
        let spec = PopulationSpec::labeled(
            3,
            None,
            Marginal::Uniform,
            LabelRule::Independent { p: 0.5 },
        );
        let ds = sample_labeled(&spec, 10_000, 9).unwrap();
        let mean = ds
            .individuals()
            .iter()
            .filter(|x| x.label == Some(true))
            .count() as f64
            / 1e4;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");

        let det = PopulationSpec::labeled(
            3,
            None,
            Marginal::Uniform,
            LabelRule::Threshold {
                attr: 1,
                threshold: 0.5,
                flip: 0.0,
            },
        );
        let ds = sample_labeled(&det, 1000, 9).unwrap();
        assert!(ds
            .individuals()
            .iter()
            .all(|x| x.label == Some(x.attributes[0] >= 0.5)));

        let none = PopulationSpec::independent_blocks(3, None, Marginal::Uniform);
        assert!(matches!(sample_labeled(&none, 10, 1), Err(Error::Spec(_))));
    }

    #[test]
    fn wrong_model_is_a_spec_error() {
        let spec = PopulationSpec::independent_blocks(3, None, Marginal::Uniform);
        assert!(sample_decaying(&spec, 10, 1).is_err());
        let bad = PopulationSpec::decaying(3, 2.0, Marginal::Uniform, Coupling::Copy);
        assert!(matches!(sample_decaying(&bad, 10, 1), Err(Error::Spec(_))));
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let specs = [
            PopulationSpec::decaying(8, 0.3, Marginal::Uniform, Coupling::Negate),
            PopulationSpec::one_dependent(
                BlockLayout::uniform(4, 2).unwrap(),
                Marginal::Uniform,
                0.7,
            ),
            PopulationSpec::independent_blocks(
                8,
                Some(BlockLayout::uniform(2, 4).unwrap()),
                Marginal::Bernoulli { p: 0.2 },
            )
            .with_coupling(Coupling::NoisyCopy { flip: 0.1 }),
        ];
        for spec in &specs {
            let ds = sample(spec, 500, 2).unwrap().dataset;
            assert!(ds
                .individuals()
                .iter()
                .flat_map(|x| &x.attributes)
                .all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
