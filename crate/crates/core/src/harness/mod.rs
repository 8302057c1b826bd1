//! Seeded trial batches compared against the bounds.

mod config;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{BoundConfig, ExperimentConfig};
pub use report::{
    estimate_failure_rate, write_outputs, ErrorKind, FailureRate, Summary, TOOL_VERSION,
};

use crate::data::BlockLayout;
use crate::datagen::{sample, Population};
use crate::error::{Error, Result};
use crate::mechanisms::{
    run_interaction, AccessPolicy, Interaction, RejectReason, Rejection, CAP_TOLERANCE,
};
use crate::seed::{mix, tag};
use crate::transcript::{PopulationOracle, TranscriptRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: u64,
    pub max_sample_error: f64,
    pub max_distributional_error: f64,
    /// Distributional error of the last answered query.
    pub final_distributional_error: f64,
    pub transcript_len: usize,
    pub rejections: BTreeMap<RejectReason, usize>,
    /// `(epsilon, delta)` spent per budget unit.
    pub spend: BTreeMap<usize, (f64, f64)>,
    pub budget_ok: bool,
    pub statistic: Option<f64>,
}

impl TrialResult {
    pub fn error(&self, kind: ErrorKind) -> f64 {
        match kind {
            ErrorKind::Sample => self.max_sample_error,
            ErrorKind::Distributional => self.max_distributional_error,
        }
    }

    pub fn max_unit_epsilon(&self) -> f64 {
        self.spend.values().map(|s| s.0).fold(0.0, f64::max)
    }
}

/// Everything one trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub result: TrialResult,
    pub rejections: Vec<Rejection>,
    pub transcript_rows: Vec<TranscriptRow>,
}

/// Recomputes per-unit spend from the answered queries and checks it against
/// the ledger and the caps.
fn audit_budget(
    config: &ExperimentConfig,
    dataset_layout: Option<&BlockLayout>,
    run: &Interaction,
) -> Result<bool> {
    let answerer = config.mechanism.resolve()?;
    let (eps, delta) = answerer.cost();
    let policy = AccessPolicy::new(
        config.mechanism.policy,
        config.population.m,
        dataset_layout.cloned(),
    )?;
    let mut spend: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for e in run.transcript.entries() {
        for u in policy.units(&e.query) {
            let s = spend.entry(u).or_default();
            s.0 += eps;
            s.1 += delta;
            s.2 += 1;
        }
    }
    let caps = (config.mechanism.epsilon_cap, config.mechanism.delta_cap);
    let tolerance = |cap: f64| cap * (1.0 + CAP_TOLERANCE) + f64::MIN_POSITIVE;
    let matches_ledger = spend.iter().all(|(u, s)| {
        let l = run.ledger.spent(*u);
        l.charges == s.2 && (l.epsilon - s.0).abs() <= 1e-9 && (l.delta - s.1).abs() <= 1e-12
    }) && run.ledger.units().len() == spend.len();
    let within = spend
        .values()
        .all(|s| s.0 <= tolerance(caps.0) && s.1 <= tolerance(caps.1));
    Ok(matches_ledger && within && run.ledger.within_caps())
}

/// Runs a single trial.
pub fn run_trial(config: &ExperimentConfig, trial_id: u64) -> Result<TrialOutput> {
    let data_seed = mix(config.base_seed, trial_id, tag::DATA);
    let drawn = sample(&config.population, config.n, data_seed)?;
    let dataset = drawn.dataset;
    let population = Population::new(config.population.clone(), config.oracle)?;
    let mut analyst = config.analyst.build(
        config.population.m,
        config.population.blocks.as_ref(),
        mix(config.base_seed, trial_id, tag::ANALYST),
    )?;
    let run = run_interaction(
        &config.mechanism,
        analyst.as_mut(),
        &dataset,
        config.max_steps,
        mix(config.base_seed, trial_id, tag::MECHANISM),
    )?;
    let max_sample_error = run.transcript.max_sample_error(&dataset)?;
    let max_distributional_error = run.transcript.max_distributional_error(&population)?;
    let final_distributional_error = match run.transcript.last() {
        Some(e) => (e.answer - population.population_value(&e.query)?).abs(),
        None => 0.0,
    };
    let mut rejections: BTreeMap<RejectReason, usize> =
        RejectReason::ALL.iter().map(|r| (*r, 0)).collect();
    for r in &run.rejections {
        *rejections.entry(r.reason).or_default() += 1;
    }
    let spend = run
        .ledger
        .units()
        .iter()
        .map(|(u, s)| (*u, (s.epsilon, s.delta)))
        .collect();
    let budget_ok = audit_budget(config, dataset.layout(), &run)?;
    let transcript_rows = if config.write_transcripts {
        run.transcript.rows(trial_id, &dataset, &population)?
    } else {
        Vec::new()
    };
    Ok(TrialOutput {
        result: TrialResult {
            trial_id,
            max_sample_error,
            max_distributional_error,
            final_distributional_error,
            transcript_len: run.transcript.len(),
            rejections,
            spend,
            budget_ok,
            statistic: analyst.statistic(),
        },
        rejections: run.rejections,
        transcript_rows,
    })
}

/// Runs every trial, using up to `jobs` threads (0 means all cores).
/// Outputs are ordered by trial id whatever the completion order.
pub fn run_trials(config: &ExperimentConfig, jobs: usize) -> Result<Vec<TrialOutput>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect()
    })
}

/// Runs the experiment and summarizes it.
pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<(Vec<TrialOutput>, Summary)> {
    let outputs = run_trials(config, jobs)?;
    let results: Vec<TrialResult> = outputs.iter().map(|o| o.result.clone()).collect();
    let summary = Summary::new(config, &results)?;
    Ok((outputs, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::AnalystConfig;
    use crate::bounds::Theorem;
    use crate::datagen::{LabelRule, Marginal, OracleMode, PopulationSpec};
    use crate::mechanisms::{MechanismConfig, PolicyKind};

    pub(crate) fn small_config() -> ExperimentConfig {
        let layout = BlockLayout::uniform(3, 2).unwrap();
        ExperimentConfig {
            population: PopulationSpec::labeled(
                6,
                Some(layout),
                Marginal::Bernoulli { p: 0.5 },
                LabelRule::Independent { p: 0.5 },
            ),
            n: 200,
            mechanism: MechanismConfig::laplace_with_quota(PolicyKind::CrossBlockRefusal, 1.0, 6),
            analyst: AnalystConfig::Freedman {
                k_sel: 1,
                per_block: true,
            },
            bound: BoundConfig {
                theorem: Theorem::Full,
                alpha: 0.2,
                beta: None,
                epsilon: None,
                delta: None,
                m: None,
                p: None,
                d: None,
                slack_c: None,
                slack_f: None,
                beta_target: Some(0.5),
            },
            trials: 8,
            base_seed: 42,
            max_steps: 1000,
            oracle: OracleMode::ClosedForm,
            write_transcripts: true,
        }
    }

    #[test]
    fn idle_analyst_gives_zero_errors() {
        let mut c = small_config();
        c.trials = 1;
        c.analyst = AnalystConfig::Idle;
        let (out, summary) = run_experiment(&c, 1).unwrap();
        let r = &out[0].result;
        assert_eq!(r.transcript_len, 0);
        assert_eq!(r.max_sample_error, 0.0);
        assert_eq!(r.max_distributional_error, 0.0);
        assert_eq!(summary.distributional.failures, 0);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let c = small_config();
        let (a, sa) = run_experiment(&c, 1).unwrap();
        let (b, sb) = run_experiment(&c, 4).unwrap();
        let ra: Vec<_> = a.iter().map(|o| &o.result).collect();
        let rb: Vec<_> = b.iter().map(|o| &o.result).collect();
        assert_eq!(ra, rb);
        assert_eq!(
            serde_json::to_string(&sa).unwrap(),
            serde_json::to_string(&sb).unwrap()
        );
    }

    #[test]
    fn budget_audit_passes_and_spend_respects_caps() {
        let (out, summary) = run_experiment(&small_config(), 2).unwrap();
        assert!(summary.budget_audit_passed);
        for o in &out {
            assert!(o.result.budget_ok);
            assert!(o.result.max_unit_epsilon() <= 1.0 + 1e-9);
            assert_eq!(o.result.spend.len(), 3);
        }
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let mut c = small_config();
        c.trials = 0;
        assert!(run_experiment(&c, 1).unwrap_err().is_config_error());
        let mut c = small_config();
        c.population.blocks = None;
        assert!(run_experiment(&c, 1).unwrap_err().is_config_error());
        let mut c = small_config();
        c.bound.beta_target = None;
        assert!(run_experiment(&c, 1).unwrap_err().is_config_error());
    }

    #[test]
    fn derived_beta_uses_the_laplace_tail() {
        let c = small_config();
        let eps_q: f64 = 1.0 / 6.0;
        let expected = 6.0 * (-0.2 * 200.0 * eps_q).exp();
        assert!((c.resolve_beta().unwrap() - expected).abs() < 1e-15);
    }
}
