//! Simulation framework for adaptive data analysis with per-block
//! privacy-budget re-use.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`], [`query`] and [`transcript`] hold samples, linear queries and
//!   the accuracy metrics measured on interaction transcripts.
//! * [`datagen`] draws synthetic samples from block-structured populations and
//!   values queries under the population.
//! * [`mechanisms`] answers queries under access policies and per-unit budget
//!   ledgers.
//! * [`bounds`] evaluates the distributional accuracy guarantees.
//! * [`adversaries`] provides adaptive analysts.
//! * [`harness`] runs seeded trial batches and compares them to the bounds.

pub mod adversaries;
pub mod bounds;
pub mod data;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod query;
pub mod seed;
pub mod stats;
pub mod transcript;

pub use data::{BlockLayout, Dataset, Individual, Window};
pub use error::{Error, Result};
pub use query::{evaluate_on_sample, query_width, Concord, Factor, LinearQuery, QueryKind, Var};
pub use transcript::{
    max_distributional_error, max_sample_error, restrict_transcript, PopulationOracle, Transcript,
};
