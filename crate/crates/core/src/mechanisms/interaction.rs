use std::cell::RefCell;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adversaries::Analyst;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::answerer::Answerer;
use crate::mechanisms::config::MechanismConfig;
use crate::mechanisms::label_split::combine_split;
use crate::mechanisms::ledger::BudgetLedger;
use crate::mechanisms::policy::{AccessPolicy, RejectReason};
use crate::query::LinearQuery;
use crate::seed::{mix, rng_from_seed, tag, SimRng};
use crate::transcript::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Outcome {
    Answered(f64),
    Rejected(RejectReason),
}

/// One proposal and what the analyst was told about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub step: usize,
    pub query: LinearQuery,
    pub outcome: Outcome,
}

/// A stateful query answerer bound to one sample.
///
/// Each submitted query goes through the access policy, then the budget
/// ledger, then the answerer. A rejection at any stage leaves the ledger,
/// the policy state and the random stream untouched.
pub struct Mechanism<'a> {
    answerer: Answerer,
    policy: AccessPolicy,
    ledger: BudgetLedger,
    sample: &'a Dataset,
    split: Option<(Dataset, Dataset)>,
    rng: SimRng,
}

impl<'a> Mechanism<'a> {
    pub fn new(config: &MechanismConfig, sample: &'a Dataset, seed: u64) -> Result<Self> {
        let answerer = config.resolve()?;
        let policy = AccessPolicy::new(config.policy, sample.m(), sample.layout().cloned())?;
        let ledger = BudgetLedger::new(config.epsilon_cap, config.delta_cap)?;
        let split = if config.label_split {
            Some(sample.split_by_label()?)
        } else {
            None
        };
        if sample.n() == 0 {
            return Err(Error::Precondition(
                "mechanism needs a non-empty sample".into(),
            ));
        }
        Ok(Mechanism {
            answerer,
            policy,
            ledger,
            sample,
            split,
            rng: rng_from_seed(mix(seed, config.seed, tag::MECHANISM)),
        })
    }

    pub fn policy(&self) -> &AccessPolicy {
        &self.policy
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn answerer(&self) -> Answerer {
        self.answerer
    }

    fn serves(&self, q: &LinearQuery) -> bool {
        // label-split sub-mechanisms only see label-free rows
        !q.uses_label() || (self.split.is_none() && self.sample.is_labeled())
    }

    pub fn submit(&mut self, q: &LinearQuery) -> Result<Outcome> {
        if let Err(reason) = self.policy.check(q) {
            return Ok(Outcome::Rejected(reason));
        }
        if !self.serves(q) {
            return Ok(Outcome::Rejected(RejectReason::Malformed));
        }
        let (eps, delta) = self.answerer.cost();
        if let Err(reason) = self.ledger.charge_units(&self.policy.units(q), eps, delta) {
            return Ok(Outcome::Rejected(reason));
        }
        self.policy.commit(q);
        let answerer = self.answerer;
        let answer = match &self.split {
            Some((s0, s1)) => {
                let rng = RefCell::new(&mut self.rng);
                combine_split(
                    q,
                    s0,
                    s1,
                    |q: &LinearQuery, d: &Dataset| answerer.answer(q, d, &mut **rng.borrow_mut()),
                    |q: &LinearQuery, d: &Dataset| answerer.answer(q, d, &mut **rng.borrow_mut()),
                )?
            }
            None => answerer.answer(q, self.sample, &mut self.rng)?,
        };
        Ok(Outcome::Answered(answer))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub step: usize,
    pub query: LinearQuery,
    pub reason: RejectReason,
}

#[derive(Debug, Clone)]
pub struct Interaction {
    pub transcript: Transcript,
    pub rejections: Vec<Rejection>,
    pub history: Vec<Exchange>,
    pub ledger: BudgetLedger,
}

/// Runs the analyst against a fresh mechanism until the analyst stops or
/// `max_steps` proposals (answered or rejected) have been made.
pub fn run_interaction(
    config: &MechanismConfig,
    analyst: &mut dyn Analyst,
    sample: &Dataset,
    max_steps: usize,
    seed: u64,
) -> Result<Interaction> {
    let mut mechanism = Mechanism::new(config, sample, seed)?;
    let mut history: Vec<Exchange> = Vec::new();
    let mut transcript = Transcript::new();
    let mut rejections = Vec::new();
    for step in 0..max_steps {
        let Some(query) = analyst.next_query(&history) else {
            break;
        };
        let outcome = mechanism.submit(&query)?;
        match outcome {
            Outcome::Answered(a) => transcript.push(step, query.clone(), a)?,
            Outcome::Rejected(reason) => rejections.push(Rejection {
                step,
                query: query.clone(),
                reason,
            }),
        }
        history.push(Exchange {
            step,
            query,
            outcome,
        });
    }
    Ok(Interaction {
        transcript,
        rejections,
        history,
        ledger: mechanism.ledger.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
struct RejectionRow<'a> {
    trial_id: u64,
    step: usize,
    query_descriptor: String,
    reason: &'a str,
}

/// CSV rows `trial_id, step, query_descriptor, reason`.
pub fn write_rejection_csv<W: Write>(rows: &[(u64, Rejection)], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(["trial_id", "step", "query_descriptor", "reason"])?;
    for (trial_id, r) in rows {
        w.serialize(RejectionRow {
            trial_id: *trial_id,
            step: r.step,
            query_descriptor: r.query.descriptor(),
            reason: r.reason.as_str(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BlockLayout, Window};
    use crate::mechanisms::policy::PolicyKind;

    struct Scripted {
        queries: Vec<LinearQuery>,
        seen: Vec<Outcome>,
    }

    impl Analyst for Scripted {
        fn next_query(&mut self, history: &[Exchange]) -> Option<LinearQuery> {
            self.seen = history.iter().map(|e| e.outcome).collect();
            self.queries.get(history.len()).cloned()
        }
    }

    fn scripted(queries: Vec<LinearQuery>) -> Scripted {
        Scripted {
            queries,
            seen: vec![],
        }
    }

    fn sample() -> Dataset {
        let rows = (0..40)
            .map(|i| {
                (0..4)
                    .map(|j| ((i * 7 + j * 3) % 10) as f64 / 10.0)
                    .collect()
            })
            .collect();
        let labels = (0..40).map(|i| i % 3 == 0).collect();
        Dataset::from_rows(
            rows,
            Some(labels),
            Some(BlockLayout::uniform(2, 2).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn immediate_stop_gives_empty_transcript() {
        let s = sample();
        let cfg = MechanismConfig::exact(PolicyKind::Unrestricted);
        let r = run_interaction(&cfg, &mut scripted(vec![]), &s, 100, 1).unwrap();
        assert!(r.transcript.is_empty());
        assert!(r.rejections.is_empty());
    }

    #[test]
    fn in_budget_queries_are_all_answered() {
        let s = sample();
        let cfg = MechanismConfig::laplace_with_quota(PolicyKind::CrossBlockRefusal, 1.0, 5);
        let qs: Vec<_> = (0..5).map(|_| LinearQuery::attribute(1).unwrap()).collect();
        let r = run_interaction(&cfg, &mut scripted(qs), &s, 100, 1).unwrap();
        assert_eq!(r.transcript.len(), 5);
        assert!(r.ledger.within_caps());
    }

    #[test]
    fn rejections_are_visible_and_do_not_stop_the_analyst() {
        let s = sample();
        let cfg = MechanismConfig::laplace_with_quota(PolicyKind::CrossBlockRefusal, 1.0, 1);
        let qs = vec![
            LinearQuery::constant(Window::new(2, 3).unwrap(), 0.5).unwrap(),
            LinearQuery::attribute(1).unwrap(),
            LinearQuery::attribute(2).unwrap(),
            LinearQuery::attribute(3).unwrap(),
        ];
        let mut a = scripted(qs);
        let r = run_interaction(&cfg, &mut a, &s, 100, 1).unwrap();
        let reasons: Vec<_> = r.rejections.iter().map(|x| (x.step, x.reason)).collect();
        assert_eq!(
            reasons,
            vec![(0, RejectReason::CrossBlock), (2, RejectReason::Budget)]
        );
        assert_eq!(r.transcript.len(), 2);
        assert_eq!(a.seen[0], Outcome::Rejected(RejectReason::CrossBlock));
    }

    #[test]
    fn replay_is_deterministic() {
        let s = sample();
        let cfg = MechanismConfig::laplace_with_quota(PolicyKind::WidthLimited { d: 1 }, 2.0, 4);
        let qs: Vec<_> = (1..=4)
            .map(|i| LinearQuery::attribute(i).unwrap())
            .collect();
        let a = run_interaction(&cfg, &mut scripted(qs.clone()), &s, 100, 9).unwrap();
        let b = run_interaction(&cfg, &mut scripted(qs.clone()), &s, 100, 9).unwrap();
        assert_eq!(a.transcript, b.transcript);
        let c = run_interaction(&cfg, &mut scripted(qs), &s, 100, 10).unwrap();
        assert_ne!(a.transcript, c.transcript);
    }

    #[test]
    fn rejected_queries_leave_the_random_stream_alone() {
        let s = sample();
        let cfg = MechanismConfig::laplace_with_quota(PolicyKind::CrossBlockRefusal, 1.0, 10);
        let straddle = LinearQuery::constant(Window::new(2, 3).unwrap(), 0.5).unwrap();
        let q1 = LinearQuery::attribute(1).unwrap();
        let plain = run_interaction(
            &cfg,
            &mut scripted(vec![q1.clone(), q1.clone()]),
            &s,
            100,
            3,
        )
        .unwrap();
        let noisy = run_interaction(
            &cfg,
            &mut scripted(vec![q1.clone(), straddle.clone(), straddle, q1]),
            &s,
            100,
            3,
        )
        .unwrap();
        let answers = |t: &Transcript| t.entries().iter().map(|e| e.answer).collect::<Vec<_>>();
        assert_eq!(answers(&plain.transcript), answers(&noisy.transcript));
        assert_eq!(plain.ledger, noisy.ledger);
    }

    #[test]
    fn label_split_mode_recombines_and_refuses_label_reads() {
        let s = sample();
        let mut cfg = MechanismConfig::exact(PolicyKind::Unrestricted);
        cfg.label_split = true;
        let q = LinearQuery::attribute(2).unwrap();
        let label_q = LinearQuery::product(vec![crate::query::Factor::Label], 1).unwrap();
        let r = run_interaction(&cfg, &mut scripted(vec![q.clone(), label_q]), &s, 100, 1).unwrap();
        assert!(
            (r.transcript.entries()[0].answer - q.evaluate_on_sample(&s).unwrap()).abs() < 1e-12
        );
        assert_eq!(r.rejections[0].reason, RejectReason::Malformed);
    }

    #[test]
    fn max_steps_bounds_proposals() {
        let s = sample();
        let cfg = MechanismConfig::exact(PolicyKind::Unrestricted);
        let qs: Vec<_> = (0..10)
            .map(|_| LinearQuery::attribute(1).unwrap())
            .collect();
        let r = run_interaction(&cfg, &mut scripted(qs), &s, 3, 1).unwrap();
        assert_eq!(r.transcript.len(), 3);
    }

    #[test]
    fn rejection_csv_layout() {
        let rej = Rejection {
            step: 4,
            query: LinearQuery::attribute(2).unwrap(),
            reason: RejectReason::WindowPassed,
        };
        let mut buf = Vec::new();
        write_rejection_csv(&[(7, rej)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "trial_id,step,query_descriptor,reason\n7,4,\"weighted[2,2](1|b=0)\",window_passed\n"
        );
    }
}
