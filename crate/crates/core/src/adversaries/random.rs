//! Non-adaptive baseline: `k` queries drawn up front, answers ignored.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversaries::Analyst;
use crate::data::Window;
use crate::error::{Error, Result};
use crate::mechanisms::Exchange;
use crate::query::{Concord, Factor, LinearQuery, QueryKind, Var};
use crate::seed::{mix, rng_from_seed, tag, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomFamily {
    Weighted,
    Threshold,
    Product,
    Concordance,
    Mixed,
}

pub struct RandomAnalyst {
    queries: Vec<LinearQuery>,
    next: usize,
}

impl RandomAnalyst {
    /// `max_width` bounds the window width; 0 means unbounded.
    pub fn new(
        m: usize,
        k: usize,
        family: RandomFamily,
        max_width: usize,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("random analyst needs m >= 1".into()));
        }
        let mut rng = rng_from_seed(mix(seed, 1, tag::ANALYST));
        let w = if max_width == 0 {
            m - 1
        } else {
            max_width.min(m - 1)
        };
        let queries = (0..k)
            .map(|_| draw(&mut rng, m, w, family))
            .collect::<Result<_>>()?;
        Ok(RandomAnalyst { queries, next: 0 })
    }

    pub fn queries(&self) -> &[LinearQuery] {
        &self.queries
    }
}

fn draw(rng: &mut SimRng, m: usize, max_width: usize, family: RandomFamily) -> Result<LinearQuery> {
    let family = match family {
        RandomFamily::Mixed => [
            RandomFamily::Weighted,
            RandomFamily::Threshold,
            RandomFamily::Product,
            RandomFamily::Concordance,
        ][rng.random_range(0..4)],
        f => f,
    };
    let width = rng.random_range(0..=max_width);
    let lo = rng.random_range(1..=m - width);
    let window = Window::new(lo, lo + width)?;
    let mut attr = || rng.random_range(window.lo..=window.hi);
    match family {
        RandomFamily::Threshold => {
            let a = attr();
            LinearQuery::threshold(a, rng.random::<f64>())
        }
        RandomFamily::Product => {
            let a = attr();
            let b = attr();
            let factors = vec![
                Factor::AtLeast {
                    attr: a,
                    threshold: 0.5,
                },
                Factor::Value { attr: b },
            ];
            LinearQuery::product(factors, a)
        }
        RandomFamily::Concordance => {
            let a = attr();
            let b = attr();
            let pair = Concord {
                a: Var::Attr(a),
                b: Var::Attr(b),
                flip: rng.random::<bool>(),
            };
            LinearQuery::concordance(vec![pair], a)
        }
        RandomFamily::Weighted | RandomFamily::Mixed => {
            let weights: Vec<f64> = (0..window.len()).map(|_| rng.random::<f64>()).collect();
            let total: f64 = weights.iter().sum::<f64>().max(1e-12);
            let weights = weights.into_iter().map(|x| x / total).collect();
            LinearQuery::new(window, QueryKind::Weighted { weights, bias: 0.0 })
        }
    }
}

impl Analyst for RandomAnalyst {
    fn next_query(&mut self, _history: &[Exchange]) -> Option<LinearQuery> {
        let q = self.queries.get(self.next).cloned();
        self.next += 1;
        q
    }
}
