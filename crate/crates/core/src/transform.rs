//! Fit/transform/summarize contract shared by every analyzer, plus sequential
//! pipelines and the tabular summaries they report.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::meta::MetaValue;
use crate::model::{Corpus, UtteranceRef};

/// Predicate selecting utterances, e.g. one side of a two-class comparison.
pub type UtterancePredicate = Arc<dyn Fn(&UtteranceRef<'_>) -> bool + Send + Sync>;

pub fn predicate(
    f: impl Fn(&UtteranceRef<'_>) -> bool + Send + Sync + 'static,
) -> UtterancePredicate {
    Arc::new(f)
}

pub fn select_all() -> UtterancePredicate {
    Arc::new(|_| true)
}

/// A stateful corpus analyzer.
///
/// `fit` only reads the corpus. `transform` mutates the corpus it is handed
/// and returns that same corpus; non-structural transformers only add or
/// change metadata.
pub trait Transformer {
    fn name(&self) -> &str;

    fn requires_fit(&self) -> bool {
        false
    }

    fn is_fitted(&self) -> bool {
        !self.requires_fit()
    }

    /// Structural transformers may add or remove utterances.
    fn is_structural(&self) -> bool {
        false
    }

    fn fit(&mut self, _corpus: &Corpus) -> Result<()> {
        Ok(())
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus>;

    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable>;

    fn fit_transform<'c>(&mut self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        self.fit(corpus)?;
        self.transform(corpus)
    }
}

pub(crate) fn ensure_fitted(t: &(impl Transformer + ?Sized)) -> Result<()> {
    if t.is_fitted() {
        Ok(())
    } else {
        Err(Error::NotFitted(t.name().to_owned()))
    }
}

/// Ordered, non-empty list of transformers applied left to right.
pub struct Pipeline {
    stages: Vec<Box<dyn Transformer>>,
}

impl Pipeline {
    pub fn new(stages: Vec<Box<dyn Transformer>>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidConfig(
                "pipeline needs at least one stage".into(),
            ));
        }
        Ok(Pipeline { stages })
    }

    pub fn stages(&self) -> &[Box<dyn Transformer>] {
        &self.stages
    }

    pub fn into_stages(self) -> Vec<Box<dyn Transformer>> {
        self.stages
    }

    /// Run every stage in order, fitting each on the output of the previous
    /// one when `fit_first` is set. Errors carry the 0-based stage index.
    pub fn run<'c>(&mut self, corpus: &'c mut Corpus, fit_first: bool) -> Result<&'c mut Corpus> {
        for (i, stage) in self.stages.iter_mut().enumerate() {
            let wrap = |e: Error, name: &str| Error::Stage {
                stage: i,
                name: name.to_owned(),
                source: Box::new(e),
            };
            if fit_first {
                stage.fit(corpus).map_err(|e| wrap(e, stage.name()))?;
            }
            if let Err(e) = ensure_fitted(stage.as_ref()) {
                return Err(wrap(e, stage.name()));
            }
            stage.transform(corpus).map_err(|e| wrap(e, stage.name()))?;
        }
        Ok(corpus)
    }
}

/// Machine-readable summary: labelled rows of values under named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub index_name: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<MetaValue>)>,
}

impl SummaryTable {
    pub fn new(index_name: &str, columns: &[&str]) -> Self {
        SummaryTable {
            index_name: index_name.to_owned(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, values: Vec<MetaValue>) {
        assert_eq!(
            values.len(),
            self.columns.len(),
            "summary row width must match the column count"
        );
        self.rows.push((label.into(), values));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, label: &str) -> Option<&[MetaValue]> {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Delimiter-separated rendering with a header line; floats use six
    /// significant digits.
    pub fn render(&self, delimiter: char) -> String {
        let mut out = String::new();
        out.push_str(&self.index_name);
        for c in &self.columns {
            out.push(delimiter);
            out.push_str(c);
        }
        out.push('\n');
        for (label, values) in &self.rows {
            out.push_str(label);
            for v in values {
                out.push(delimiter);
                out.push_str(&format_value(v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn format_value(v: &MetaValue) -> String {
    match v {
        MetaValue::Null => "NA".to_owned(),
        MetaValue::Float(f) => format_sig(*f),
        MetaValue::Str(s) => s.clone(),
        other => other.render(),
    }
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let mut s = String::new();
        let _ = write!(
            s,
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        );
        s
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
