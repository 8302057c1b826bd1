//! Interaction transcripts and the accuracy metrics measured on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::query::LinearQuery;

/// Anything that can report `q(P)`, the expectation of a query under the
/// population.
pub trait PopulationOracle {
    fn population_value(&self, q: &LinearQuery) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    /// Position of the query among all proposals in the interaction,
    /// counting rejected ones.
    pub step: usize,
    pub query: LinearQuery,
    pub answer: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    entries: Vec<Entry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: usize, query: LinearQuery, answer: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&answer) {
            return Err(Error::Range(format!("answer {answer} outside [0, 1]")));
        }
        self.entries.push(Entry {
            step,
            query,
            answer,
        });
        Ok(())
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&Entry> {
        self.entries.last()
    }

    /// Keeps only the entries whose query satisfies `accept`, in order.
    pub fn restrict<F>(&self, accept: F) -> Transcript
    where
        F: Fn(&LinearQuery) -> bool,
    {
        Transcript {
            entries: self
                .entries
                .iter()
                .filter(|e| accept(&e.query))
                .cloned()
                .collect(),
        }
    }

    pub fn concat(&self, other: &Transcript) -> Transcript {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        Transcript { entries }
    }

    /// `max_j |q_j(S) - a_j|`, zero for an empty transcript.
    pub fn max_sample_error(&self, sample: &Dataset) -> Result<f64> {
        self.entries.iter().try_fold(0.0f64, |acc, e| {
            Ok(acc.max((e.query.evaluate_on_sample(sample)? - e.answer).abs()))
        })
    }

    /// `max_j |q_j(P) - a_j|`, zero for an empty transcript.
    pub fn max_distributional_error(&self, population: &dyn PopulationOracle) -> Result<f64> {
        self.entries.iter().try_fold(0.0f64, |acc, e| {
            Ok(acc.max((population.population_value(&e.query)? - e.answer).abs()))
        })
    }
}

pub fn restrict_transcript<F>(transcript: &Transcript, accept: F) -> Transcript
where
    F: Fn(&LinearQuery) -> bool,
{
    transcript.restrict(accept)
}

pub fn max_sample_error(transcript: &Transcript, sample: &Dataset) -> Result<f64> {
    transcript.max_sample_error(sample)
}

pub fn max_distributional_error(
    transcript: &Transcript,
    population: &dyn PopulationOracle,
) -> Result<f64> {
    transcript.max_distributional_error(population)
}

const TRANSCRIPT_COLUMNS: [&str; 8] = [
    "trial_id",
    "step",
    "query_descriptor",
    "window_lo",
    "window_hi",
    "answer",
    "sample_value",
    "population_value",
];

/// One row of the transcript CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub trial_id: u64,
    pub step: usize,
    pub query_descriptor: String,
    pub window_lo: usize,
    pub window_hi: usize,
    pub answer: f64,
    pub sample_value: f64,
    pub population_value: f64,
}

impl Transcript {
    /// Materializes CSV rows, evaluating each query on the sample and under the
    /// population.
    pub fn rows(
        &self,
        trial_id: u64,
        sample: &Dataset,
        population: &dyn PopulationOracle,
    ) -> Result<Vec<TranscriptRow>> {
        self.entries
            .iter()
            .map(|e| {
                Ok(TranscriptRow {
                    trial_id,
                    step: e.step,
                    query_descriptor: e.query.descriptor(),
                    window_lo: e.query.window().lo,
                    window_hi: e.query.window().hi,
                    answer: e.answer,
                    sample_value: e.query.evaluate_on_sample(sample)?,
                    population_value: population.population_value(&e.query)?,
                })
            })
            .collect()
    }
}

pub fn write_transcript_csv<W: Write>(rows: &[TranscriptRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(TRANSCRIPT_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Window;
    use proptest::prelude::*;

    struct Table(Vec<(LinearQuery, f64)>);

    impl PopulationOracle for Table {
        fn population_value(&self, q: &LinearQuery) -> Result<f64> {
            self.0
                .iter()
                .find(|(k, _)| k == q)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Unsupported(q.descriptor()))
        }
    }

    fn attr(i: usize) -> LinearQuery {
        LinearQuery::attribute(i).unwrap()
    }

    fn transcript(items: &[(LinearQuery, f64)]) -> Transcript {
        let mut t = Transcript::new();
        for (step, (q, a)) in items.iter().enumerate() {
            t.push(step, q.clone(), *a).unwrap();
        }
        t
    }

    #[test]
    fn restrict_filters_in_order() {
        let q1 = attr(1);
        let q2 = attr(5);
        let q3 = LinearQuery::constant(Window::new(1, 2).unwrap(), 0.2).unwrap();
        let t = transcript(&[(q1.clone(), 0.1), (q2, 0.2), (q3.clone(), 0.3)]);
        let inside = Window::new(1, 2).unwrap();
        let r = t.restrict(|q| q.window().is_within(&inside));
        assert_eq!(r.len(), 2);
        assert_eq!(r.entries()[0].query, q1);
        assert_eq!(r.entries()[1].query, q3);
        assert_eq!(t.restrict(|_| true), t);
        assert!(t.restrict(|_| false).is_empty());
    }

    #[test]
    fn sample_error_examples() {
        let s = Dataset::from_rows(vec![vec![0.0, 1.0], vec![1.0, 1.0]], None, None).unwrap();
        let exact = transcript(&[(attr(1), 0.5), (attr(2), 1.0)]);
        assert_eq!(exact.max_sample_error(&s).unwrap(), 0.0);
        let single = transcript(&[(attr(1), 0.62)]);
        assert!((single.max_sample_error(&s).unwrap() - 0.12).abs() < 1e-12);
        let two = transcript(&[(attr(1), 0.53), (attr(2), 0.8)]);
        assert!((two.max_sample_error(&s).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(Transcript::new().max_sample_error(&s).unwrap(), 0.0);
        let wide = transcript(&[(attr(3), 0.5)]);
        assert!(matches!(wide.max_sample_error(&s), Err(Error::Range(_))));
    }

    #[test]
    fn distributional_error_examples() {
        let pop = Table(vec![(attr(1), 0.5), (attr(2), 0.3), (attr(3), 0.9)]);
        let exact = transcript(&[(attr(1), 0.5), (attr(2), 0.3)]);
        assert_eq!(exact.max_distributional_error(&pop).unwrap(), 0.0);
        let one = transcript(&[(attr(1), 0.8)]);
        assert!((one.max_distributional_error(&pop).unwrap() - 0.3).abs() < 1e-12);
        // gaps 0.1, 0.25, 0.05
        let three = transcript(&[(attr(1), 0.6), (attr(2), 0.55), (attr(3), 0.85)]);
        assert!((three.max_distributional_error(&pop).unwrap() - 0.25).abs() < 1e-12);
        let unknown = transcript(&[(attr(4), 0.5)]);
        assert!(matches!(
            unknown.max_distributional_error(&pop),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn push_rejects_out_of_range_answers() {
        assert!(Transcript::new().push(0, attr(1), 1.2).is_err());
    }

    fn arb_transcript() -> impl Strategy<Value = Transcript> {
        prop::collection::vec((1..6usize, 0.0..=1.0f64), 0..12).prop_map(|v| {
            let items: Vec<_> = v.into_iter().map(|(i, a)| (attr(i), a)).collect();
            transcript(&items)
        })
    }

    proptest! {
        #[test]
        fn restrict_is_idempotent(t in arb_transcript(), cut in 1..6usize) {
            let pred = |q: &LinearQuery| q.window().hi <= cut;
            let once = t.restrict(pred);
            prop_assert_eq!(once.restrict(pred), once);
        }

        #[test]
        fn restrict_commutes_with_concat(a in arb_transcript(), b in arb_transcript(), cut in 1..6usize) {
            let pred = |q: &LinearQuery| q.window().lo >= cut;
            prop_assert_eq!(a.concat(&b).restrict(pred), a.restrict(pred).concat(&b.restrict(pred)));
        }

        #[test]
        fn errors_are_monotone_under_extension(a in arb_transcript(), b in arb_transcript()) {
            let s = Dataset::from_rows(vec![vec![0.2, 0.4, 0.6, 0.8, 1.0]; 3], None, None).unwrap();
            let pop = Table((1..6).map(|i| (attr(i), 0.5)).collect());
            let ab = a.concat(&b);
            prop_assert!(ab.max_sample_error(&s).unwrap() >= a.max_sample_error(&s).unwrap());
            prop_assert!(ab.max_distributional_error(&pop).unwrap() >= a.max_distributional_error(&pop).unwrap());
        }
    }
}
