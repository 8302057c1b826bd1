use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::BlockLayout;
use crate::error::{Error, Result};
use crate::query::LinearQuery;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Accepts every well-formed query and charges one global unit. This is
    /// the no-re-use baseline.
    Unrestricted,
    /// Rejects queries whose window spans more than one block.
    CrossBlockRefusal,
    /// Blocks are visited as strictly ordered epochs: a query must lie in a
    /// single block at or after the current epoch, and moving to a later
    /// block closes every earlier one.
    StreamingBlocks,
    /// Rejects queries of width greater than `d`.
    WidthLimited { d: usize },
    /// Width at most `d`, and once an accepted query has touched attribute
    /// `i`, attributes `<= i - d` are closed forever.
    SlidingWindow { d: usize },
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Unrestricted => write!(f, "unrestricted"),
            PolicyKind::CrossBlockRefusal => write!(f, "cross_block_refusal"),
            PolicyKind::StreamingBlocks => write!(f, "streaming_blocks"),
            PolicyKind::WidthLimited { d } => write!(f, "width_limited({d})"),
            PolicyKind::SlidingWindow { d } => write!(f, "sliding_window({d})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    CrossBlock,
    Width,
    WindowPassed,
    Budget,
    /// The query cannot be evaluated on this sample at all (window beyond
    /// `m`, or a label read the mechanism does not serve).
    Malformed,
}

impl RejectReason {
    pub const ALL: [RejectReason; 5] = [
        RejectReason::CrossBlock,
        RejectReason::Width,
        RejectReason::WindowPassed,
        RejectReason::Budget,
        RejectReason::Malformed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::CrossBlock => "cross_block",
            RejectReason::Width => "width",
            RejectReason::WindowPassed => "window_passed",
            RejectReason::Budget => "budget",
            RejectReason::Malformed => "malformed",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Budget unit shared by every query under [`PolicyKind::Unrestricted`].
pub const GLOBAL_UNIT: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPolicy {
    kind: PolicyKind,
    m: usize,
    layout: Option<BlockLayout>,
    /// Largest attribute index touched by an accepted query.
    high_water: Option<usize>,
    /// Current streaming epoch (1-based block index).
    epoch: usize,
}

impl AccessPolicy {
    pub fn new(kind: PolicyKind, m: usize, layout: Option<BlockLayout>) -> Result<Self> {
        if matches!(
            kind,
            PolicyKind::CrossBlockRefusal | PolicyKind::StreamingBlocks
        ) {
            match &layout {
                None => return Err(Error::Config(format!("policy {kind} needs a block layout"))),
                Some(l) if l.m() != m => {
                    return Err(Error::Config(format!(
                        "block layout covers {} attributes, expected {m}",
                        l.m()
                    )))
                }
                _ => {}
            }
        }
        Ok(AccessPolicy {
            kind,
            m,
            layout,
            high_water: None,
            epoch: 1,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn high_water(&self) -> Option<usize> {
        self.high_water
    }

    /// Smallest attribute index a query may still touch.
    pub fn first_open_attribute(&self) -> usize {
        match (self.kind, self.high_water) {
            (PolicyKind::SlidingWindow { d }, Some(hw)) => (hw + 1).saturating_sub(d).max(1),
            (PolicyKind::StreamingBlocks, _) => self
                .layout
                .as_ref()
                .and_then(|l| l.block(self.epoch))
                .map(|w| w.lo)
                .unwrap_or(1),
            _ => 1,
        }
    }

    /// The decision `admit` would make, without changing state.
    pub fn check(&self, q: &LinearQuery) -> std::result::Result<(), RejectReason> {
        let w = q.window();
        if w.hi > self.m {
            return Err(RejectReason::Malformed);
        }
        match self.kind {
            PolicyKind::Unrestricted => Ok(()),
            PolicyKind::CrossBlockRefusal => self.single_block(q).map(|_| ()),
            PolicyKind::StreamingBlocks => {
                let b = self.single_block(q)?;
                if b < self.epoch {
                    Err(RejectReason::WindowPassed)
                } else {
                    Ok(())
                }
            }
            PolicyKind::WidthLimited { d } => {
                if w.width() > d {
                    Err(RejectReason::Width)
                } else {
                    Ok(())
                }
            }
            PolicyKind::SlidingWindow { d } => {
                if w.width() > d {
                    return Err(RejectReason::Width);
                }
                match self.high_water {
                    Some(hw) if hw >= d && w.lo <= hw - d => Err(RejectReason::WindowPassed),
                    _ => Ok(()),
                }
            }
        }
    }

    /// Records an accepted query.
    pub fn commit(&mut self, q: &LinearQuery) {
        let w = q.window();
        match self.kind {
            PolicyKind::SlidingWindow { .. } => {
                self.high_water = Some(self.high_water.map_or(w.hi, |hw| hw.max(w.hi)));
            }
            PolicyKind::StreamingBlocks => {
                if let Ok(b) = self.single_block(q) {
                    self.epoch = self.epoch.max(b);
                }
            }
            _ => {}
        }
    }

    /// Checks `q` and, on acceptance, updates the policy state.
    pub fn admit(&mut self, q: &LinearQuery) -> std::result::Result<(), RejectReason> {
        self.check(q)?;
        self.commit(q);
        Ok(())
    }

    fn single_block(&self, q: &LinearQuery) -> std::result::Result<usize, RejectReason> {
        let layout = self.layout.as_ref().expect("block policies carry a layout");
        layout
            .block_containing(&q.window())
            .ok_or(RejectReason::CrossBlock)
    }

    /// Budget units an answer to `q` is charged against.
    ///
    /// * block policies: the block holding the window;
    /// * `width_limited(d)`: every `i` whose neighbourhood `[i-2d, i+2d]`
    ///   intersects the window;
    /// * `sliding_window(d)`: every `i` with the window inside `[i-2d, i+d]`.
    ///
    /// Neighbourhoods are clamped to `1..=m`.
    pub fn units(&self, q: &LinearQuery) -> Vec<usize> {
        let w = q.window();
        let m = self.m;
        match self.kind {
            PolicyKind::Unrestricted => vec![GLOBAL_UNIT],
            PolicyKind::CrossBlockRefusal | PolicyKind::StreamingBlocks => {
                self.single_block(q).map(|b| vec![b]).unwrap_or_default()
            }
            PolicyKind::WidthLimited { d } => {
                let lo = w.lo.saturating_sub(2 * d).max(1);
                let hi = (w.hi + 2 * d).min(m);
                (lo..=hi).collect()
            }
            PolicyKind::SlidingWindow { d } => {
                let lo = w.hi.saturating_sub(d).max(1);
                let hi = (w.lo + 2 * d).min(m);
                (lo..=hi).collect()
            }
        }
    }
}

/// Spec-level entry point: decide and update policy state.
pub fn admit(policy: &mut AccessPolicy, q: &LinearQuery) -> std::result::Result<(), RejectReason> {
    policy.admit(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Window;

    fn span(lo: usize, hi: usize) -> LinearQuery {
        LinearQuery::constant(Window::new(lo, hi).unwrap(), 0.5).unwrap()
    }

    fn two_blocks() -> BlockLayout {
        BlockLayout::new(vec![
            Window::new(1, 5).unwrap(),
            Window::new(6, 10).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn cross_block_query_is_refused() {
        let mut p =
            AccessPolicy::new(PolicyKind::CrossBlockRefusal, 10, Some(two_blocks())).unwrap();
        assert_eq!(p.admit(&span(4, 7)), Err(RejectReason::CrossBlock));
        assert_eq!(p.admit(&span(6, 10)), Ok(()));
        assert_eq!(p.units(&span(6, 10)), vec![2]);
        assert!(AccessPolicy::new(PolicyKind::CrossBlockRefusal, 10, None).is_err());
    }

    #[test]
    fn width_boundary() {
        let mut p = AccessPolicy::new(PolicyKind::WidthLimited { d: 3 }, 10, None).unwrap();
        assert_eq!(p.admit(&span(2, 5)), Ok(()));
        assert_eq!(p.admit(&span(2, 6)), Err(RejectReason::Width));
    }

    #[test]
    fn sliding_window_closes_attributes_at_distance_d() {
        let mut p = AccessPolicy::new(PolicyKind::SlidingWindow { d: 2 }, 10, None).unwrap();
        assert_eq!(p.admit(&span(9, 9)), Ok(()));
        // 9 - 2 = 7 is itself closed
        assert_eq!(p.admit(&span(7, 7)), Err(RejectReason::WindowPassed));
        assert_eq!(p.admit(&span(6, 6)), Err(RejectReason::WindowPassed));
        assert_eq!(p.admit(&span(8, 8)), Ok(()));
        assert_eq!(p.admit(&span(7, 10)), Err(RejectReason::Width));
        assert_eq!(p.first_open_attribute(), 8);
    }

    #[test]
    fn sliding_window_only_moves_on_accept() {
        let mut p = AccessPolicy::new(PolicyKind::SlidingWindow { d: 1 }, 10, None).unwrap();
        assert_eq!(p.admit(&span(3, 5)), Err(RejectReason::Width));
        assert_eq!(p.high_water(), None);
        assert_eq!(p.check(&span(5, 5)), Ok(()));
        assert_eq!(p.high_water(), None);
    }

    #[test]
    fn streaming_epochs_are_ordered() {
        let layout = BlockLayout::uniform(3, 2).unwrap();
        let mut p = AccessPolicy::new(PolicyKind::StreamingBlocks, 6, Some(layout)).unwrap();
        assert_eq!(p.admit(&span(1, 2)), Ok(()));
        assert_eq!(p.admit(&span(3, 4)), Ok(()));
        assert_eq!(p.admit(&span(1, 1)), Err(RejectReason::WindowPassed));
        assert_eq!(p.admit(&span(4, 5)), Err(RejectReason::CrossBlock));
        assert_eq!(p.admit(&span(3, 3)), Ok(()));
        assert_eq!(p.first_open_attribute(), 3);
    }

    #[test]
    fn out_of_range_window_is_malformed() {
        let mut p = AccessPolicy::new(PolicyKind::Unrestricted, 4, None).unwrap();
        assert_eq!(p.admit(&span(4, 5)), Err(RejectReason::Malformed));
    }

    #[test]
    fn unit_neighbourhoods_clamp_at_edges() {
        let p = AccessPolicy::new(PolicyKind::WidthLimited { d: 1 }, 10, None).unwrap();
        assert_eq!(p.units(&span(1, 2)), vec![1, 2, 3, 4]);
        assert_eq!(p.units(&span(9, 10)), vec![7, 8, 9, 10]);
        let s = AccessPolicy::new(PolicyKind::SlidingWindow { d: 1 }, 10, None).unwrap();
        // window [4,5] inside [i-2, i+1] for i in 4..=6
        assert_eq!(s.units(&span(4, 5)), vec![4, 5, 6]);
    }
}
