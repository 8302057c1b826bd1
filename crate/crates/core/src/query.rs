//! Linear (statistical) queries.
//!
//! A query maps one individual into `[0, 1]` and is answered by its mean over
//! the sample. Queries are plain data: a window of attributes plus a family
//! descriptor. The evaluator is handed only the attribute values inside the
//! window, so a query cannot read anything outside it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Individual, Window};
use crate::error::{Error, Result};

/// A binary variable read by concordance queries: an attribute thresholded at
/// 1/2, or the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    Attr(usize),
    Label,
}

/// One multiplicative factor of a product query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// `x_attr`
    Value { attr: usize },
    /// `1 - x_attr`
    Complement { attr: usize },
    /// `1[x_attr >= threshold]`
    AtLeast { attr: usize, threshold: f64 },
    /// `1[x_attr < threshold]`
    Below { attr: usize, threshold: f64 },
    /// `y`
    Label,
    /// `1 - y`
    NotLabel,
}

impl Factor {
    pub fn attr(&self) -> Option<usize> {
        match *self {
            Factor::Value { attr }
            | Factor::Complement { attr }
            | Factor::AtLeast { attr, .. }
            | Factor::Below { attr, .. } => Some(attr),
            Factor::Label | Factor::NotLabel => None,
        }
    }
}

/// `1[bit(a) == bit(b)]`, or its complement when `flip` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concord {
    pub a: Var,
    pub b: Var,
    #[serde(default)]
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum QueryKind {
    /// `clamp(bias + sum_k weights[k] * x_{lo+k}, 0, 1)` over the window.
    Weighted { weights: Vec<f64>, bias: f64 },
    /// `1[x_attr >= threshold]`.
    Threshold { attr: usize, threshold: f64 },
    /// Product of one to three factors.
    Product { factors: Vec<Factor> },
    /// Mean of concordance indicators.
    Concordance { pairs: Vec<Concord> },
}

pub const MAX_PRODUCT_FACTORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuery", into = "RawQuery")]
pub struct LinearQuery {
    window: Window,
    kind: QueryKind,
}

#[derive(Serialize, Deserialize)]
struct RawQuery {
    window: Window,
    #[serde(flatten)]
    kind: QueryKind,
}

impl TryFrom<RawQuery> for LinearQuery {
    type Error = Error;
    fn try_from(raw: RawQuery) -> Result<Self> {
        LinearQuery::new(raw.window, raw.kind)
    }
}

impl From<LinearQuery> for RawQuery {
    fn from(q: LinearQuery) -> Self {
        RawQuery {
            window: q.window,
            kind: q.kind,
        }
    }
}

fn bit(v: f64) -> bool {
    v >= 0.5
}

impl LinearQuery {
    pub fn new(window: Window, kind: QueryKind) -> Result<Self> {
        let window = Window::new(window.lo, window.hi)?;
        let inside = |attr: usize| -> Result<()> {
            if window.contains(attr) {
                Ok(())
            } else {
                Err(Error::Range(format!(
                    "attribute {attr} is outside query window {window}"
                )))
            }
        };
        let finite = |v: f64, what: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Precondition(format!("{what} must be finite")))
            }
        };
        match &kind {
            QueryKind::Weighted { weights, bias } => {
                if weights.len() != window.len() {
                    return Err(Error::Precondition(format!(
                        "weighted query over {window} needs {} weights, got {}",
                        window.len(),
                        weights.len()
                    )));
                }
                weights.iter().try_for_each(|w| finite(*w, "weight"))?;
                finite(*bias, "bias")?;
            }
            QueryKind::Threshold { attr, threshold } => {
                inside(*attr)?;
                finite(*threshold, "threshold")?;
            }
            QueryKind::Product { factors } => {
                if factors.is_empty() || factors.len() > MAX_PRODUCT_FACTORS {
                    return Err(Error::Precondition(format!(
                        "product query needs 1..={MAX_PRODUCT_FACTORS} factors, got {}",
                        factors.len()
                    )));
                }
                for f in factors {
                    if let Some(a) = f.attr() {
                        inside(a)?;
                    }
                    if let Factor::AtLeast { threshold, .. } | Factor::Below { threshold, .. } = f {
                        finite(*threshold, "threshold")?;
                    }
                }
            }
            QueryKind::Concordance { pairs } => {
                if pairs.is_empty() {
                    return Err(Error::Precondition(
                        "concordance query needs at least one pair".into(),
                    ));
                }
                for p in pairs {
                    for v in [p.a, p.b] {
                        if let Var::Attr(a) = v {
                            inside(a)?;
                        }
                    }
                }
            }
        }
        Ok(LinearQuery { window, kind })
    }

    /// `q(x) = value` for every individual.
    pub fn constant(window: Window, value: f64) -> Result<Self> {
        LinearQuery::new(
            window,
            QueryKind::Weighted {
                weights: vec![0.0; window.len()],
                bias: value,
            },
        )
    }

    /// `q(x) = x_attr`.
    pub fn attribute(attr: usize) -> Result<Self> {
        LinearQuery::new(
            Window::single(attr)?,
            QueryKind::Weighted {
                weights: vec![1.0],
                bias: 0.0,
            },
        )
    }

    pub fn threshold(attr: usize, threshold: f64) -> Result<Self> {
        LinearQuery::new(
            Window::single(attr)?,
            QueryKind::Threshold { attr, threshold },
        )
    }

    /// Product query whose window is the tightest span of its attribute
    /// factors. `anchor` supplies the window for label-only products.
    pub fn product(factors: Vec<Factor>, anchor: usize) -> Result<Self> {
        let window = span(factors.iter().filter_map(Factor::attr), anchor)?;
        LinearQuery::new(window, QueryKind::Product { factors })
    }

    pub fn concordance(pairs: Vec<Concord>, anchor: usize) -> Result<Self> {
        let attrs = pairs
            .iter()
            .flat_map(|p| [p.a, p.b])
            .filter_map(|v| match v {
                Var::Attr(a) => Some(a),
                Var::Label => None,
            });
        let window = span(attrs, anchor)?;
        LinearQuery::new(window, QueryKind::Concordance { pairs })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn kind(&self) -> &QueryKind {
        &self.kind
    }

    /// `hi - lo` of the window.
    pub fn width(&self) -> usize {
        self.window.width()
    }

    pub fn uses_label(&self) -> bool {
        match &self.kind {
            QueryKind::Weighted { .. } | QueryKind::Threshold { .. } => false,
            QueryKind::Product { factors } => factors
                .iter()
                .any(|f| matches!(f, Factor::Label | Factor::NotLabel)),
            QueryKind::Concordance { pairs } => {
                pairs.iter().any(|p| p.a == Var::Label || p.b == Var::Label)
            }
        }
    }

    /// Evaluates the query on the windowed attribute values of one individual.
    /// `values[k]` is attribute `window.lo + k`.
    pub fn eval_window(&self, values: &[f64], label: Option<bool>) -> Result<f64> {
        debug_assert_eq!(values.len(), self.window.len());
        let lo = self.window.lo;
        let at = |attr: usize| values[attr - lo];
        let need_label = || {
            label.ok_or_else(|| {
                Error::Precondition("query reads the label but the individual has none".into())
            })
        };
        let v = match &self.kind {
            QueryKind::Weighted { weights, bias } => {
                let s: f64 = weights.iter().zip(values).map(|(w, x)| w * x).sum::<f64>() + bias;
                s.clamp(0.0, 1.0)
            }
            QueryKind::Threshold { attr, threshold } => {
                f64::from(u8::from(at(*attr) >= *threshold))
            }
            QueryKind::Product { factors } => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= match *f {
                        Factor::Value { attr } => at(attr),
                        Factor::Complement { attr } => 1.0 - at(attr),
                        Factor::AtLeast { attr, threshold } => {
                            f64::from(u8::from(at(attr) >= threshold))
                        }
                        Factor::Below { attr, threshold } => {
                            f64::from(u8::from(at(attr) < threshold))
                        }
                        Factor::Label => f64::from(u8::from(need_label()?)),
                        Factor::NotLabel => f64::from(u8::from(!need_label()?)),
                    };
                }
                acc
            }
            QueryKind::Concordance { pairs } => {
                let read = |v: Var| -> Result<bool> {
                    match v {
                        Var::Attr(a) => Ok(bit(at(a))),
                        Var::Label => need_label(),
                    }
                };
                let mut hits = 0usize;
                for p in pairs {
                    if (read(p.a)? == read(p.b)?) != p.flip {
                        hits += 1;
                    }
                }
                hits as f64 / pairs.len() as f64
            }
        };
        Ok(v)
    }

    pub fn eval(&self, x: &Individual) -> Result<f64> {
        if self.window.hi > x.attributes.len() {
            return Err(Error::Range(format!(
                "window {} exceeds attribute count {}",
                self.window,
                x.attributes.len()
            )));
        }
        self.eval_window(x.window_values(&self.window), x.label)
    }

    /// `q(S)`: the mean of the query over every individual in the sample.
    pub fn evaluate_on_sample(&self, sample: &Dataset) -> Result<f64> {
        self.window.check_in_range(sample.m())?;
        if sample.n() == 0 {
            return Err(Error::Precondition(
                "cannot evaluate a query on an empty sample".into(),
            ));
        }
        let mut total = 0.0;
        for x in sample.individuals() {
            total += self.eval_window(x.window_values(&self.window), x.label)?;
        }
        Ok(total / sample.n() as f64)
    }

    /// Canonical textual descriptor, stable across runs.
    pub fn descriptor(&self) -> String {
        self.to_string()
    }
}

fn span(attrs: impl Iterator<Item = usize>, anchor: usize) -> Result<Window> {
    let (lo, hi) = attrs.fold((usize::MAX, 0), |(lo, hi), a| (lo.min(a), hi.max(a)));
    if hi == 0 {
        Window::single(anchor)
    } else {
        Window::new(lo, hi)
    }
}

pub fn evaluate_on_sample(q: &LinearQuery, sample: &Dataset) -> Result<f64> {
    q.evaluate_on_sample(sample)
}

pub fn query_width(q: &LinearQuery) -> usize {
    q.width()
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Attr(a) => write!(f, "x{a}"),
            Var::Label => write!(f, "y"),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Value { attr } => write!(f, "x{attr}"),
            Factor::Complement { attr } => write!(f, "~x{attr}"),
            Factor::AtLeast { attr, threshold } => write!(f, "[x{attr}>={threshold}]"),
            Factor::Below { attr, threshold } => write!(f, "[x{attr}<{threshold}]"),
            Factor::Label => write!(f, "y"),
            Factor::NotLabel => write!(f, "~y"),
        }
    }
}

impl fmt::Display for LinearQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            QueryKind::Weighted { weights, bias } => {
                write!(f, "weighted{}(", self.window)?;
                for (k, w) in weights.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{w}")?;
                }
                write!(f, "|b={bias})")
            }
            QueryKind::Threshold { attr, threshold } => {
                write!(f, "threshold{}(x{attr}>={threshold})", self.window)
            }
            QueryKind::Product { factors } => {
                write!(f, "product{}(", self.window)?;
                for (k, x) in factors.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            QueryKind::Concordance { pairs } => {
                write!(f, "concordance{}(", self.window)?;
                for (k, p) in pairs.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    let op = if p.flip { "!=" } else { "==" };
                    write!(f, "{}{op}{}", p.a, p.b)?;
                }
                write!(f, ")")
            }
        }
    }
}
