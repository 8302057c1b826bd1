//! Freedman's-paradox attack.
//!
//! Phase 1 estimates, for every attribute, the difference between its mean
//! among `y = 1` rows and among `y = 0` rows. Two counting queries per
//! attribute (`1[x_i >= 1/2] * y` and `1[x_i >= 1/2] * (1 - y)`) plus one
//! label-mean query per group suffice:
//!
//! ```text
//! assoc_i = a(x_i * y) / a(y) - a(x_i * (1 - y)) / (1 - a(y))
//! ```
//!
//! Phase 2 keeps the `k_sel` attributes with the largest `|assoc_i|` and
//! asks a concordance query aligned with the observed signs. When every
//! attribute is independent of the label, that query's population value is
//! 1/2 while its sample value is pushed away from 1/2 by the selection.

use std::collections::VecDeque;

use crate::adversaries::Analyst;
use crate::data::{BlockLayout, Window};
use crate::error::{Error, Result};
use crate::mechanisms::{Exchange, Outcome};
use crate::query::{Concord, Factor, LinearQuery, Var};

#[derive(Debug, Clone, PartialEq)]
pub enum FreedmanScope {
    /// One attack over all attributes.
    Global,
    /// An independent attack inside each block.
    PerBlock(BlockLayout),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    LabelMean,
    WithLabel(usize),
    WithoutLabel(usize),
    Composite,
}

#[derive(Debug, Clone, Default)]
struct GroupStats {
    label_mean: Option<f64>,
    with_label: Vec<Option<f64>>,
    without_label: Vec<Option<f64>>,
}

pub struct FreedmanAnalyst {
    groups: Vec<Window>,
    k_sel: usize,
    group: usize,
    stats: GroupStats,
    pending: VecDeque<(Role, LinearQuery)>,
    issued: Vec<Role>,
    seen: usize,
    in_phase_two: bool,
    associations: Vec<(usize, f64)>,
    selections: Vec<Vec<usize>>,
}

impl FreedmanAnalyst {
    pub fn new(m: usize, k_sel: usize, scope: FreedmanScope) -> Result<Self> {
        if m == 0 || k_sel == 0 {
            return Err(Error::Config(
                "Freedman analyst needs m >= 1 and k_sel >= 1".into(),
            ));
        }
        let groups = match scope {
            FreedmanScope::Global => vec![Window::new(1, m)?],
            FreedmanScope::PerBlock(layout) => {
                if layout.m() != m {
                    return Err(Error::Config(
                        "layout does not cover the attribute count".into(),
                    ));
                }
                layout.blocks().to_vec()
            }
        };
        let mut a = FreedmanAnalyst {
            groups,
            k_sel,
            group: 0,
            stats: GroupStats::default(),
            pending: VecDeque::new(),
            issued: Vec::new(),
            seen: 0,
            in_phase_two: false,
            associations: Vec::new(),
            selections: Vec::new(),
        };
        a.plan_phase_one();
        Ok(a)
    }

    fn plan_phase_one(&mut self) {
        let g = self.groups[self.group];
        self.stats = GroupStats {
            label_mean: None,
            with_label: vec![None; g.len()],
            without_label: vec![None; g.len()],
        };
        self.in_phase_two = false;
        let at_least = |attr| Factor::AtLeast {
            attr,
            threshold: 0.5,
        };
        self.pending.push_back((
            Role::LabelMean,
            LinearQuery::product(vec![Factor::Label], g.lo).expect("valid label query"),
        ));
        for attr in g.lo..=g.hi {
            self.pending.push_back((
                Role::WithLabel(attr),
                LinearQuery::product(vec![at_least(attr), Factor::Label], attr).expect("valid"),
            ));
            self.pending.push_back((
                Role::WithoutLabel(attr),
                LinearQuery::product(vec![at_least(attr), Factor::NotLabel], attr).expect("valid"),
            ));
        }
    }

    /// Observed associations of the current group, computed from answered
    /// phase-1 queries only.
    fn group_associations(&self) -> Vec<(usize, f64)> {
        let g = self.groups[self.group];
        let y = self.stats.label_mean.unwrap_or(0.5).clamp(1e-9, 1.0 - 1e-9);
        (g.lo..=g.hi)
            .filter_map(|attr| {
                let k = attr - g.lo;
                let (Some(with), Some(without)) =
                    (self.stats.with_label[k], self.stats.without_label[k])
                else {
                    return None;
                };
                Some((attr, with / y - without / (1.0 - y)))
            })
            .collect()
    }

    fn plan_phase_two(&mut self) {
        self.in_phase_two = true;
        let mut assoc = self.group_associations();
        self.associations.extend(assoc.iter().copied());
        // largest |assoc| first, ties by attribute index
        assoc.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        assoc.truncate(self.k_sel);
        if assoc.is_empty() {
            self.selections.push(Vec::new());
            return;
        }
        let pairs = assoc
            .iter()
            .map(|&(attr, a)| Concord {
                a: Var::Attr(attr),
                b: Var::Label,
                flip: a < 0.0,
            })
            .collect();
        self.selections.push(assoc.iter().map(|x| x.0).collect());
        let q =
            LinearQuery::concordance(pairs, self.groups[self.group].lo).expect("valid composite");
        self.pending.push_back((Role::Composite, q));
    }

    fn ingest(&mut self, history: &[Exchange]) {
        for e in &history[self.seen..] {
            let role = self.issued[self.seen];
            self.seen += 1;
            let Outcome::Answered(a) = e.outcome else {
                continue;
            };
            let lo = self.groups[self.group].lo;
            match role {
                Role::LabelMean => self.stats.label_mean = Some(a),
                Role::WithLabel(attr) => self.stats.with_label[attr - lo] = Some(a),
                Role::WithoutLabel(attr) => self.stats.without_label[attr - lo] = Some(a),
                Role::Composite => {}
            }
        }
    }

    /// Every association observed so far, as `(attribute, assoc)`.
    pub fn associations(&self) -> &[(usize, f64)] {
        &self.associations
    }

    pub fn max_abs_association(&self) -> Option<f64> {
        self.associations.iter().map(|a| a.1.abs()).reduce(f64::max)
    }

    /// Attributes chosen in phase 2, one list per group.
    pub fn selections(&self) -> &[Vec<usize>] {
        &self.selections
    }
}

impl Analyst for FreedmanAnalyst {
    fn next_query(&mut self, history: &[Exchange]) -> Option<LinearQuery> {
        self.ingest(history);
        loop {
            if let Some((role, q)) = self.pending.pop_front() {
                self.issued.push(role);
                return Some(q);
            }
            if !self.in_phase_two {
                self.plan_phase_two();
                continue;
            }
            if self.group + 1 >= self.groups.len() {
                return None;
            }
            self.group += 1;
            self.plan_phase_one();
        }
    }

    fn statistic(&self) -> Option<f64> {
        self.max_abs_association()
    }
}
