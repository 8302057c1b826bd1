use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, TrialOutput, TrialResult};
use crate::mechanisms::{write_rejection_csv, RejectReason};
use crate::stats::{wilson_interval, Z95};
use crate::transcript::write_transcript_csv;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Sample,
    Distributional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRate {
    pub kind: ErrorKind,
    pub threshold: f64,
    pub trials: usize,
    pub failures: usize,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Fraction of trials whose maximum error of `kind` exceeds `threshold`,
/// with a 95% Wilson interval.
pub fn estimate_failure_rate(
    results: &[TrialResult],
    threshold: f64,
    kind: ErrorKind,
) -> Result<FailureRate> {
    if results.is_empty() {
        return Err(Error::Precondition(
            "failure rate needs at least one trial".into(),
        ));
    }
    let failures = results.iter().filter(|r| r.error(kind) > threshold).count();
    let (wilson_low, wilson_high) = wilson_interval(failures, results.len(), Z95)?;
    Ok(FailureRate {
        kind,
        threshold,
        trials: results.len(),
        failures,
        rate: failures as f64 / results.len() as f64,
        wilson_low,
        wilson_high,
    })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn median(v: &[f64]) -> Option<f64> {
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool_version: String,
    pub trials: usize,
    pub bound: BoundReport,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
    /// Sample error above `alpha`.
    pub sample: FailureRate,
    /// Distributional error above `alpha'`.
    pub distributional: FailureRate,
    pub mean_max_distributional_error: f64,
    pub median_max_distributional_error: f64,
    pub median_final_distributional_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_statistic: Option<f64>,
    pub rejections: BTreeMap<RejectReason, usize>,
    pub budget_audit_passed: bool,
    /// One-sided check: the Wilson upper bound of the distributional failure
    /// rate does not exceed `beta'`.
    pub check_passed: bool,
    pub config: ExperimentConfig,
}

impl Summary {
    /// Order-independent summary of a batch.
    pub fn new(config: &ExperimentConfig, results: &[TrialResult]) -> Result<Self> {
        let bound = config.resolve_bound()?;
        let params = bound.inputs;
        let sample = estimate_failure_rate(results, params.alpha, ErrorKind::Sample)?;
        let distributional =
            estimate_failure_rate(results, bound.alpha_prime, ErrorKind::Distributional)?;
        let dist = sorted(results.iter().map(|r| r.max_distributional_error).collect());
        let last = sorted(
            results
                .iter()
                .map(|r| r.final_distributional_error)
                .collect(),
        );
        let stats = sorted(results.iter().filter_map(|r| r.statistic).collect());
        let mut rejections: BTreeMap<RejectReason, usize> =
            RejectReason::ALL.iter().map(|r| (*r, 0)).collect();
        for r in results {
            for (reason, count) in &r.rejections {
                *rejections.entry(*reason).or_default() += count;
            }
        }
        let check_passed = distributional.wilson_high <= bound.beta_prime;
        Ok(Summary {
            tool_version: TOOL_VERSION.to_string(),
            trials: results.len(),
            alpha: params.alpha,
            beta: params.beta,
            alpha_prime: bound.alpha_prime,
            beta_prime: bound.beta_prime,
            sample,
            distributional,
            mean_max_distributional_error: mean(&dist).unwrap_or(0.0),
            median_max_distributional_error: median(&dist).unwrap_or(0.0),
            median_final_distributional_error: median(&last).unwrap_or(0.0),
            median_statistic: median(&stats),
            rejections,
            budget_audit_passed: results.iter().all(|r| r.budget_ok),
            check_passed,
            bound,
            config: config.clone(),
        })
    }
}

const RESULT_COLUMNS: [&str; 15] = [
    "trial_id",
    "max_sample_error",
    "max_distributional_error",
    "final_distributional_error",
    "transcript_len",
    "rejected_cross_block",
    "rejected_width",
    "rejected_window_passed",
    "rejected_budget",
    "rejected_malformed",
    "units_charged",
    "max_unit_epsilon",
    "max_unit_delta",
    "budget_ok",
    "statistic",
];

#[derive(Debug, Serialize)]
struct ResultRow {
    trial_id: u64,
    max_sample_error: f64,
    max_distributional_error: f64,
    final_distributional_error: f64,
    transcript_len: usize,
    rejected_cross_block: usize,
    rejected_width: usize,
    rejected_window_passed: usize,
    rejected_budget: usize,
    rejected_malformed: usize,
    units_charged: usize,
    max_unit_epsilon: f64,
    max_unit_delta: f64,
    budget_ok: bool,
    statistic: Option<f64>,
}

impl From<&TrialResult> for ResultRow {
    fn from(r: &TrialResult) -> Self {
        let count = |reason| r.rejections.get(&reason).copied().unwrap_or(0);
        ResultRow {
            trial_id: r.trial_id,
            max_sample_error: r.max_sample_error,
            max_distributional_error: r.max_distributional_error,
            final_distributional_error: r.final_distributional_error,
            transcript_len: r.transcript_len,
            rejected_cross_block: count(RejectReason::CrossBlock),
            rejected_width: count(RejectReason::Width),
            rejected_window_passed: count(RejectReason::WindowPassed),
            rejected_budget: count(RejectReason::Budget),
            rejected_malformed: count(RejectReason::Malformed),
            units_charged: r.spend.len(),
            max_unit_epsilon: r.max_unit_epsilon(),
            max_unit_delta: r.spend.values().map(|s| s.1).fold(0.0, f64::max),
            budget_ok: r.budget_ok,
            statistic: r.statistic,
        }
    }
}

pub fn write_results_csv<W: Write>(results: &[TrialResult], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    for r in results {
        w.serialize(ResultRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, `summary.json`, `rejections.csv` and, when enabled,
/// `transcripts.csv` into `dir`.
pub fn write_outputs(dir: &Path, outputs: &[TrialOutput], summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir)?;
    let results: Vec<TrialResult> = outputs.iter().map(|o| o.result.clone()).collect();
    write_results_csv(
        &results,
        BufWriter::new(File::create(dir.join("results.csv"))?),
    )?;

    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;

    let rejections: Vec<_> = outputs
        .iter()
        .flat_map(|o| {
            o.rejections
                .iter()
                .map(move |r| (o.result.trial_id, r.clone()))
        })
        .collect();
    write_rejection_csv(
        &rejections,
        BufWriter::new(File::create(dir.join("rejections.csv"))?),
    )?;

    if summary.config.write_transcripts {
        let rows: Vec<_> = outputs
            .iter()
            .flat_map(|o| o.transcript_rows.iter().cloned())
            .collect();
        write_transcript_csv(
            &rows,
            BufWriter::new(File::create(dir.join("transcripts.csv"))?),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn result(id: u64, sample: f64, dist: f64) -> TrialResult {
        TrialResult {
            trial_id: id,
            max_sample_error: sample,
            max_distributional_error: dist,
            final_distributional_error: dist,
            transcript_len: 1,
            rejections: BTreeMap::new(),
            spend: BTreeMap::new(),
            budget_ok: true,
            statistic: None,
        }
    }

    #[test]
    fn failure_rate_examples() {
        let rs: Vec<_> = (0..200)
            .map(|i| result(i, 0.01, if i < 3 { 0.5 } else { 0.01 }))
            .collect();
        let all_below = estimate_failure_rate(&rs, 0.1, ErrorKind::Sample).unwrap();
        assert_eq!(all_below.rate, 0.0);
        let r = estimate_failure_rate(&rs, 0.1, ErrorKind::Distributional).unwrap();
        assert_eq!(r.failures, 3);
        assert!((r.rate - 0.015).abs() < 1e-15);
        assert!((r.wilson_low - 0.005).abs() < 1e-3 && (r.wilson_high - 0.043).abs() < 1e-3);
        assert!(estimate_failure_rate(&[], 0.1, ErrorKind::Sample).is_err());
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(mean(&[1.0, 3.0]), Some(2.0));
    }

    proptest! {
        #[test]
        fn summary_is_permutation_invariant(errs in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..40), seed in any::<u64>()) {
            let config = crate::harness::tests::small_config();
            let rs: Vec<_> = errs.iter().enumerate().map(|(i, &(a, b))| result(i as u64, a, b)).collect();
            let mut shuffled = rs.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut crate::seed::rng_from_seed(seed));
            let a = Summary::new(&config, &rs).unwrap();
            let b = Summary::new(&config, &shuffled).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}
