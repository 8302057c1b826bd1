//! Synthetic populations for each data model, and an oracle for `q(P)`.
//!
//! Every sampler is a pure function of `(spec, n, seed)`. Attributes are
//! drawn by pushing uniform variates through the configured marginal's
//! inverse CDF, so dependence constructions that share a latent variate keep
//! every attribute's marginal law intact.

mod oracle;
mod sampler;
mod spec;

pub use oracle::{population_value, OracleMode, Population, DEFAULT_MC_SAMPLES};
pub use sampler::{
    sample, sample_decaying, sample_independent_blocks, sample_labeled, sample_one_dependent,
    LinkTrace, Sample,
};
pub use spec::{Coupling, LabelRule, Marginal, Model, PopulationSpec};
