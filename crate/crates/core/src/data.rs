//! Samples, individuals and attribute windows.
//!
//! Attributes are indexed `1..=m` everywhere in the public API.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive attribute index range `[lo, hi]`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
}

impl Window {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || hi < lo {
            return Err(Error::Range(format!("malformed window [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }

    pub fn single(index: usize) -> Result<Self> {
        Window::new(index, index)
    }

    /// `hi - lo`; a single attribute has width 0.
    pub fn width(&self) -> usize {
        self.hi - self.lo
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn contains(&self, index: usize) -> bool {
        self.lo <= index && index <= self.hi
    }

    pub fn is_within(&self, other: &Window) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersects(&self, other: &Window) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn check_in_range(&self, m: usize) -> Result<()> {
        if self.hi > m {
            return Err(Error::Range(format!(
                "window [{}, {}] exceeds attribute count {m}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Contiguous, disjoint, ordered blocks covering `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Window>", into = "Vec<Window>")]
pub struct BlockLayout {
    blocks: Vec<Window>,
}

impl BlockLayout {
    pub fn new(blocks: Vec<Window>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Spec(
                "block layout must contain at least one block".into(),
            ));
        }
        let mut next = 1;
        for b in &blocks {
            if b.lo != next {
                return Err(Error::Spec(format!(
                    "block {b} does not start at attribute {next}; blocks must be contiguous, disjoint and ordered"
                )));
            }
            next = b.hi + 1;
        }
        Ok(BlockLayout { blocks })
    }

    /// `count` blocks of `size` attributes each.
    pub fn uniform(count: usize, size: usize) -> Result<Self> {
        if count == 0 || size == 0 {
            return Err(Error::Spec(
                "uniform layout needs positive count and size".into(),
            ));
        }
        let blocks = (0..count)
            .map(|i| Window {
                lo: i * size + 1,
                hi: (i + 1) * size,
            })
            .collect();
        BlockLayout::new(blocks)
    }

    /// One block per attribute.
    pub fn singletons(m: usize) -> Result<Self> {
        BlockLayout::uniform(m, 1)
    }

    pub fn blocks(&self) -> &[Window] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of attributes covered.
    pub fn m(&self) -> usize {
        self.blocks.last().map(|b| b.hi).unwrap_or(0)
    }

    /// 1-based block index holding `attribute`.
    pub fn block_of(&self, attribute: usize) -> Option<usize> {
        let pos = self.blocks.partition_point(|b| b.hi < attribute);
        self.blocks
            .get(pos)
            .filter(|b| b.contains(attribute))
            .map(|_| pos + 1)
    }

    /// The single block containing the whole window, if there is one.
    pub fn block_containing(&self, window: &Window) -> Option<usize> {
        let b = self.block_of(window.lo)?;
        (self.blocks[b - 1].hi >= window.hi).then_some(b)
    }

    pub fn block(&self, index: usize) -> Option<&Window> {
        index.checked_sub(1).and_then(|i| self.blocks.get(i))
    }
}

impl TryFrom<Vec<Window>> for BlockLayout {
    type Error = Error;
    fn try_from(blocks: Vec<Window>) -> Result<Self> {
        BlockLayout::new(blocks)
    }
}

impl From<BlockLayout> for Vec<Window> {
    fn from(layout: BlockLayout) -> Self {
        layout.blocks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub attributes: Vec<f64>,
    pub label: Option<bool>,
}

impl Individual {
    pub fn new(attributes: Vec<f64>, label: Option<bool>) -> Result<Self> {
        if let Some((i, v)) = attributes
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Range(format!(
                "attribute {} has value {v} outside [0, 1]",
                i + 1
            )));
        }
        Ok(Individual { attributes, label })
    }

    /// Attribute values inside `window` (1-based, inclusive).
    pub fn window_values(&self, window: &Window) -> &[f64] {
        &self.attributes[window.lo - 1..window.hi]
    }
}

/// A sample of `n` individuals with `m` attributes each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    individuals: Vec<Individual>,
    m: usize,
    layout: Option<BlockLayout>,
}

impl Dataset {
    pub fn new(
        individuals: Vec<Individual>,
        m: usize,
        layout: Option<BlockLayout>,
    ) -> Result<Self> {
        if let Some(bad) = individuals.iter().position(|x| x.attributes.len() != m) {
            return Err(Error::Precondition(format!(
                "individual {bad} has {} attributes, expected {m}",
                individuals[bad].attributes.len()
            )));
        }
        if let Some(layout) = &layout {
            if layout.m() != m {
                return Err(Error::Spec(format!(
                    "block layout covers {} attributes but dataset has {m}",
                    layout.m()
                )));
            }
        }
        Ok(Dataset {
            individuals,
            m,
            layout,
        })
    }

    /// Builds a dataset from raw rows, validating every value.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<bool>>,
        layout: Option<BlockLayout>,
    ) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::Precondition(
                    "label count differs from row count".into(),
                ));
            }
        }
        let individuals = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| Individual::new(r, labels.as_ref().map(|l| l[i])))
            .collect::<Result<Vec<_>>>()?;
        let m = layout.as_ref().map(BlockLayout::m).unwrap_or(m);
        Dataset::new(individuals, m, layout)
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn n(&self) -> usize {
        self.individuals.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn layout(&self) -> Option<&BlockLayout> {
        self.layout.as_ref()
    }

    pub fn is_labeled(&self) -> bool {
        !self.individuals.is_empty() && self.individuals.iter().all(|x| x.label.is_some())
    }

    /// Splits a labeled sample into `(S_0, S_1)` by label, dropping the label
    /// column from both halves.
    pub fn split_by_label(&self) -> Result<(Dataset, Dataset)> {
        if !self.is_labeled() {
            return Err(Error::Config(
                "label split requires a fully labeled dataset".into(),
            ));
        }
        let (ones, zeros): (Vec<_>, Vec<_>) = self
            .individuals
            .iter()
            .map(|x| Individual {
                attributes: x.attributes.clone(),
                label: None,
            })
            .zip(self.individuals.iter().map(|x| x.label == Some(true)))
            .partition(|(_, y)| *y);
        let strip = |v: Vec<(Individual, bool)>| v.into_iter().map(|(x, _)| x).collect();
        Ok((
            Dataset {
                individuals: strip(zeros),
                m: self.m,
                layout: self.layout.clone(),
            },
            Dataset {
                individuals: strip(ones),
                m: self.m,
                layout: self.layout.clone(),
            },
        ))
    }

    /// CSV with columns `attr_1..attr_m[,label]`, one row per individual.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let labeled = self.is_labeled();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.m).map(|i| format!("attr_{i}")).collect();
        if labeled {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for x in &self.individuals {
            let mut row: Vec<String> = x.attributes.iter().map(|v| v.to_string()).collect();
            if labeled {
                row.push(if x.label == Some(true) { "1" } else { "0" }.into());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, layout: Option<BlockLayout>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let labeled = headers.iter().next_back() == Some("label");
        let m = headers.len() - usize::from(labeled);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for record in r.records() {
            let record = record?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Precondition(format!("bad CSV value {s:?}: {e}")))
            };
            let row = record
                .iter()
                .take(m)
                .map(parse)
                .collect::<Result<Vec<_>>>()?;
            if labeled {
                labels.push(parse(&record[m])? >= 0.5);
            }
            rows.push(row);
        }
        let labels = labeled.then_some(labels);
        let individuals = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| Individual::new(r, labels.as_ref().map(|l| l[i])))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(individuals, m, layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_width_and_membership() {
        assert_eq!(Window::new(3, 3).unwrap().width(), 0);
        assert_eq!(Window::new(2, 7).unwrap().width(), 5);
        assert!(Window::new(0, 2).is_err());
        assert!(Window::new(4, 3).is_err());
        let w = Window::new(2, 4).unwrap();
        assert!(w.is_within(&Window::new(1, 4).unwrap()));
        assert!(!w.is_within(&Window::new(3, 9).unwrap()));
    }

    #[test]
    fn layout_must_cover_contiguously() {
        let ok = BlockLayout::new(vec![
            Window::new(1, 5).unwrap(),
            Window::new(6, 10).unwrap(),
        ])
        .unwrap();
        assert_eq!(ok.m(), 10);
        assert_eq!(ok.block_of(5), Some(1));
        assert_eq!(ok.block_of(6), Some(2));
        assert_eq!(ok.block_of(11), None);
        assert_eq!(ok.block_containing(&Window::new(4, 7).unwrap()), None);
        assert_eq!(ok.block_containing(&Window::new(6, 9).unwrap()), Some(2));

        let gap = BlockLayout::new(vec![
            Window::new(1, 4).unwrap(),
            Window::new(6, 10).unwrap(),
        ]);
        assert!(gap.is_err());
        let late = BlockLayout::new(vec![Window::new(2, 4).unwrap()]);
        assert!(late.is_err());
    }

    #[test]
    fn individual_rejects_out_of_range_values() {
        assert!(Individual::new(vec![0.0, 1.0, 0.5], None).is_ok());
        assert!(Individual::new(vec![0.0, 1.5], None).is_err());
        assert!(Individual::new(vec![-0.1], None).is_err());
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        let rows = vec![
            Individual::new(vec![0.0, 1.0], None).unwrap(),
            Individual::new(vec![0.0], None).unwrap(),
        ];
        assert!(Dataset::new(rows, 2, None).is_err());
    }

    #[test]
    fn csv_roundtrip_with_label() {
        let ds = Dataset::from_rows(
            vec![vec![0.0, 0.25], vec![1.0, 0.5]],
            Some(vec![false, true]),
            None,
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("attr_1,attr_2,label\n0,0.25,0\n"));
        let back = Dataset::read_csv(&buf[..], None).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn split_by_label_drops_label_column() {
        let ds = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![0.5]],
            Some(vec![false, true, false]),
            None,
        )
        .unwrap();
        let (s0, s1) = ds.split_by_label().unwrap();
        assert_eq!(s0.n(), 2);
        assert_eq!(s1.n(), 1);
        assert!(s0.individuals().iter().all(|x| x.label.is_none()));
        let unlabeled = Dataset::from_rows(vec![vec![0.0]], None, None).unwrap();
        assert!(unlabeled.split_by_label().is_err());
    }
}
