//! Local-dependence chaser.
//!
//! Walks a window of width `d` along the attribute axis. At each position it
//! asks how often the two window endpoints agree (or, for `d = 0`, how often
//! the single attribute is at least 1/2) and records how far the answer sits
//! from the value 1/2 expected under independent fair attributes. It then
//! steps towards the neighbouring position with the largest recorded
//! deviation. Once the mechanism reports that a window has passed, the walk
//! only moves forward.

use rand::Rng;

use crate::adversaries::Analyst;
use crate::error::{Error, Result};
use crate::mechanisms::{Exchange, Outcome, RejectReason};
use crate::query::{Concord, LinearQuery, Var};
use crate::seed::{mix, rng_from_seed, tag, SimRng};

pub struct CorrelationChaser {
    m: usize,
    d: usize,
    steps: usize,
    issued: usize,
    seen: usize,
    pos: usize,
    positions: Vec<usize>,
    forward_only: bool,
    done: bool,
    scores: Vec<Option<f64>>,
    rng: SimRng,
}

impl CorrelationChaser {
    pub fn new(m: usize, d: usize, steps: usize, seed: u64) -> Result<Self> {
        if m == 0 || (d > 0 && d >= m) {
            return Err(Error::Config(format!(
                "chaser needs d < m, got d={d}, m={m}"
            )));
        }
        Ok(CorrelationChaser {
            m,
            d,
            steps,
            issued: 0,
            seen: 0,
            pos: 1,
            positions: Vec::new(),
            forward_only: false,
            done: false,
            scores: vec![None; m + 1],
            rng: rng_from_seed(mix(seed, 0, tag::ANALYST)),
        })
    }

    fn last_pos(&self) -> usize {
        self.m - self.d
    }

    fn query_at(&self, pos: usize) -> LinearQuery {
        let q = if self.d == 0 {
            LinearQuery::threshold(pos, 0.5)
        } else {
            let pair = Concord {
                a: Var::Attr(pos),
                b: Var::Attr(pos + self.d),
                flip: false,
            };
            LinearQuery::concordance(vec![pair], pos)
        };
        q.expect("chaser queries are well formed")
    }

    fn ingest(&mut self, history: &[Exchange]) {
        for e in &history[self.seen..] {
            let pos = self.positions[self.seen];
            self.seen += 1;
            match e.outcome {
                Outcome::Answered(a) => {
                    let dev = (a - 0.5).abs();
                    let s = &mut self.scores[pos];
                    *s = Some(s.map_or(dev, |old| old.max(dev)));
                }
                Outcome::Rejected(RejectReason::WindowPassed) => self.forward_only = true,
                Outcome::Rejected(_) => {}
            }
        }
    }

    fn advance(&mut self, last_rejected: bool) {
        let last = self.last_pos();
        if self.forward_only || last_rejected {
            if self.pos >= last {
                self.done = true;
            } else {
                self.pos += 1;
            }
            return;
        }
        let mut candidates: Vec<usize> = vec![self.pos];
        if self.pos > 1 {
            candidates.push(self.pos - 1);
        }
        if self.pos < last {
            candidates.push(self.pos + 1);
        }
        // unexplored neighbours first, then the largest deviation, with a
        // little random exploration
        let unexplored: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&c| self.scores[c].is_none())
            .collect();
        self.pos = if !unexplored.is_empty() {
            *unexplored.iter().max().expect("non-empty")
        } else if self.rng.random::<f64>() < 0.25 {
            candidates[self.rng.random_range(0..candidates.len())]
        } else {
            *candidates
                .iter()
                .max_by(|&&a, &&b| {
                    score(self.scores[a])
                        .total_cmp(&score(self.scores[b]))
                        .then(a.cmp(&b))
                })
                .expect("non-empty")
        };
    }

    /// Largest deviation from 1/2 observed at each window position.
    pub fn scores(&self) -> Vec<(usize, f64)> {
        self.scores
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .collect()
    }

    /// Window start of every query proposed so far.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }
}

fn score(s: Option<f64>) -> f64 {
    s.unwrap_or(f64::NEG_INFINITY)
}

impl Analyst for CorrelationChaser {
    fn next_query(&mut self, history: &[Exchange]) -> Option<LinearQuery> {
        self.ingest(history);
        if self.done || self.issued >= self.steps {
            return None;
        }
        if self.issued > 0 {
            let last_rejected = matches!(
                history.last().map(|e| e.outcome),
                Some(Outcome::Rejected(_))
            );
            self.advance(last_rejected);
            if self.done {
                return None;
            }
        }
        self.issued += 1;
        self.positions.push(self.pos);
        Some(self.query_at(self.pos))
    }

    fn statistic(&self) -> Option<f64> {
        self.scores.iter().flatten().copied().reduce(f64::max)
    }
}
