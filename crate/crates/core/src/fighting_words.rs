//! Two-class lexical comparison by log-odds ratio with an informative
//! Dirichlet prior.
//!
//! For term `w` with class counts `y1`, `y2`, class totals `n1`, `n2`, prior
//! `a = alpha_w` and prior total `a0`:
//!
//! ```text
//! delta = ln((y1 + a) / (n1 + a0 - y1 - a)) - ln((y2 + a) / (n2 + a0 - y2 - a))
//! var   = 1 / (y1 + a) + 1 / (y2 + a)
//! z     = delta / sqrt(var)
//! ```
//!
//! Positive z marks class-1 vocabulary, negative z class-2 vocabulary.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::meta::MetaValue;
use crate::model::{Corpus, UtteranceRef};
use crate::num::Scalar;
use crate::text::words_or_tokenize;
use crate::transform::{ensure_fitted, SummaryTable, Transformer, UtterancePredicate};

pub const FIGHTING_WORDS_KEY: &str = "fighting_words";

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// The same pseudo-count for every term.
    Uniform(f64),
    /// Pseudo-counts proportional to add-one smoothed background frequencies,
    /// scaled so they sum to `alpha_total` over the vocabulary.
    Background {
        counts: BTreeMap<String, u64>,
        alpha_total: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwConfig {
    pub ngram_max: usize,
    pub min_count: u64,
    pub prior: Prior,
}

impl Default for FwConfig {
    fn default() -> Self {
        FwConfig {
            ngram_max: 1,
            min_count: 1,
            prior: Prior::Uniform(0.01),
        }
    }
}

impl FwConfig {
    fn validate(&self) -> Result<()> {
        let positive = match &self.prior {
            Prior::Uniform(a) => *a > 0.0 && a.is_finite(),
            Prior::Background { alpha_total, .. } => *alpha_total > 0.0 && alpha_total.is_finite(),
        };
        if !positive {
            return Err(Error::InvalidConfig(
                "fighting-words prior must be positive".into(),
            ));
        }
        if self.ngram_max == 0 || self.min_count == 0 {
            return Err(Error::InvalidConfig(
                "ngram_max and min_count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Space-joined n-grams of order 1..=`ngram_max` within each sentence.
pub fn ngram_counts(sentences: &[Vec<String>], ngram_max: usize, into: &mut BTreeMap<String, u64>) {
    for sent in sentences {
        for n in 1..=ngram_max.min(sent.len()) {
            for window in sent.windows(n) {
                *into.entry(window.join(" ")).or_default() += 1;
            }
        }
    }
}

/// Fitted comparison state.
#[derive(Debug, Clone, PartialEq)]
pub struct FwModel<F> {
    pub vocab: Vec<String>,
    pub y1: Vec<u64>,
    pub y2: Vec<u64>,
    pub n1: u64,
    pub n2: u64,
    pub alpha_w: Vec<F>,
    pub alpha0: F,
    pub zscores: Vec<F>,
}

/// z-score of one term.
pub fn log_odds_z<F: Scalar>(y1: u64, y2: u64, n1: u64, n2: u64, alpha: F, alpha0: F) -> F {
    let (y1, y2) = (F::of(y1 as f64), F::of(y2 as f64));
    let (n1, n2) = (F::of(n1 as f64), F::of(n2 as f64));
    let delta = ((y1 + alpha) / (n1 + alpha0 - y1 - alpha)).ln()
        - ((y2 + alpha) / (n2 + alpha0 - y2 - alpha)).ln();
    let var = (y1 + alpha).recip() + (y2 + alpha).recip();
    delta / var.sqrt()
}

impl<F: Scalar> FwModel<F> {
    /// Build the model from per-class n-gram counts.
    pub fn from_counts(
        counts1: &BTreeMap<String, u64>,
        counts2: &BTreeMap<String, u64>,
        config: &FwConfig,
    ) -> Result<Self> {
        config.validate()?;
        let vocab: Vec<String> = counts1
            .keys()
            .chain(counts2.keys())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|t| {
                counts1.get(*t).copied().unwrap_or(0) + counts2.get(*t).copied().unwrap_or(0)
                    >= config.min_count
            })
            .cloned()
            .collect();
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let y1: Vec<u64> = vocab
            .iter()
            .map(|t| counts1.get(t).copied().unwrap_or(0))
            .collect();
        let y2: Vec<u64> = vocab
            .iter()
            .map(|t| counts2.get(t).copied().unwrap_or(0))
            .collect();
        let n1 = y1.iter().sum();
        let n2 = y2.iter().sum();
        if n1 == 0 {
            return Err(Error::EmptyClass(1));
        }
        if n2 == 0 {
            return Err(Error::EmptyClass(2));
        }

        let alpha_w: Vec<F> = match &config.prior {
            Prior::Uniform(a) => vec![F::of(*a); vocab.len()],
            Prior::Background {
                counts,
                alpha_total,
            } => {
                let smoothed: Vec<f64> = vocab
                    .iter()
                    .map(|t| counts.get(t).copied().unwrap_or(0) as f64 + 1.0)
                    .collect();
                let total: f64 = smoothed.iter().sum();
                smoothed
                    .iter()
                    .map(|c| F::of(alpha_total * c / total))
                    .collect()
            }
        };
        let alpha0: F = alpha_w.iter().copied().sum();
        let zscores = (0..vocab.len())
            .map(|i| log_odds_z(y1[i], y2[i], n1, n2, alpha_w[i], alpha0))
            .collect();
        Ok(FwModel {
            vocab,
            y1,
            y2,
            n1,
            n2,
            alpha_w,
            alpha0,
            zscores,
        })
    }

    pub fn zscore(&self, term: &str) -> Option<F> {
        self.vocab
            .binary_search_by(|t| t.as_str().cmp(term))
            .ok()
            .map(|i| self.zscores[i])
    }

    /// Term indices by descending z, ties broken by term.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.vocab.len()).collect();
        idx.sort_by(|&a, &b| {
            self.zscores[b]
                .partial_cmp(&self.zscores[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.vocab[a].cmp(&self.vocab[b]))
        });
        idx
    }

    /// Top `k` class-1 terms (descending z) and top `k` class-2 terms
    /// (ascending z); ties broken by term.
    pub fn top_terms(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let class1: Vec<usize> = self.ranking().into_iter().take(k).collect();
        let mut asc: Vec<usize> = (0..self.vocab.len()).collect();
        asc.sort_by(|&a, &b| {
            self.zscores[a]
                .partial_cmp(&self.zscores[b])
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.vocab[a].cmp(&self.vocab[b]))
        });
        asc.truncate(k);
        (class1, asc)
    }

    /// Full ranking as rows of (term, y1, y2, z).
    pub fn export_rows(&self) -> Vec<(String, u64, u64, F)> {
        self.ranking()
            .into_iter()
            .map(|i| {
                (
                    self.vocab[i].clone(),
                    self.y1[i],
                    self.y2[i],
                    self.zscores[i],
                )
            })
            .collect()
    }
}

pub fn summarize_fw<F: Scalar>(model: &FwModel<F>, top_k: usize) -> SummaryTable {
    let mut t = SummaryTable::new("term", &["class", "zscore", "class1_count", "class2_count"]);
    let (c1, c2) = model.top_terms(top_k);
    for (label, idx) in [("class1", c1), ("class2", c2)] {
        for i in idx {
            t.push_row(
                model.vocab[i].clone(),
                vec![
                    label.into(),
                    model.zscores[i].as_f64().into(),
                    MetaValue::Int(model.y1[i] as i64),
                    MetaValue::Int(model.y2[i] as i64),
                ],
            );
        }
    }
    t
}

/// Count n-grams of both classes and fit the model.
pub fn fit_fw<F: Scalar>(
    corpus: &Corpus,
    class1: &dyn Fn(&UtteranceRef<'_>) -> bool,
    class2: &dyn Fn(&UtteranceRef<'_>) -> bool,
    config: &FwConfig,
) -> Result<FwModel<F>> {
    config.validate()?;
    let mut counts = [BTreeMap::new(), BTreeMap::new()];
    let mut seen: [HashSet<&str>; 2] = [HashSet::new(), HashSet::new()];
    for r in corpus.utterance_refs() {
        let picks = [class1(&r), class2(&r)];
        if !picks[0] && !picks[1] {
            continue;
        }
        let words = words_or_tokenize(r.utt);
        for (k, picked) in picks.into_iter().enumerate() {
            if picked {
                seen[k].insert(r.utt.id.as_str());
                ngram_counts(&words, config.ngram_max, &mut counts[k]);
            }
        }
    }
    for (k, c) in counts.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::EmptyClass(k as u8 + 1));
        }
    }
    let overlap = seen[0].intersection(&seen[1]).count();
    if overlap > 0 {
        log::warn!("fighting words: {overlap} utterances fall in both classes");
    }
    FwModel::from_counts(&counts[0], &counts[1], config)
}

/// Transformer wrapper: fits on two utterance classes and annotates every
/// utterance with the top-k distinctive n-grams it contains.
#[derive(Clone)]
pub struct FightingWords {
    class1: UtterancePredicate,
    class2: UtterancePredicate,
    pub config: FwConfig,
    pub top_k: usize,
    model: Option<FwModel<f64>>,
}

impl FightingWords {
    pub fn new(class1: UtterancePredicate, class2: UtterancePredicate) -> Self {
        FightingWords {
            class1,
            class2,
            config: FwConfig::default(),
            top_k: 10,
            model: None,
        }
    }

    pub fn with_config(mut self, config: FwConfig, top_k: usize) -> Self {
        self.config = config;
        self.top_k = top_k;
        self
    }

    pub fn model(&self) -> Option<&FwModel<f64>> {
        self.model.as_ref()
    }
}

impl Transformer for FightingWords {
    fn name(&self) -> &str {
        "fighting_words"
    }

    fn requires_fit(&self) -> bool {
        true
    }

    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }

    fn fit(&mut self, corpus: &Corpus) -> Result<()> {
        self.model = Some(fit_fw(
            corpus,
            self.class1.as_ref(),
            self.class2.as_ref(),
            &self.config,
        )?);
        Ok(())
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        ensure_fitted(self)?;
        let model = self.model.as_ref().expect("fitted");
        let (c1, c2) = model.top_terms(self.top_k);
        let top1: HashSet<&str> = c1.iter().map(|&i| model.vocab[i].as_str()).collect();
        let top2: HashSet<&str> = c2.iter().map(|&i| model.vocab[i].as_str()).collect();
        for u in corpus.utterances_mut() {
            let mut grams = BTreeMap::new();
            ngram_counts(&words_or_tokenize(u), self.config.ngram_max, &mut grams);
            let pick = |top: &HashSet<&str>| {
                MetaValue::List(
                    grams
                        .keys()
                        .filter(|g| top.contains(g.as_str()))
                        .map(|g| MetaValue::from(g.as_str()))
                        .collect(),
                )
            };
            let value: BTreeMap<String, MetaValue> = [
                ("class1".to_owned(), pick(&top1)),
                ("class2".to_owned(), pick(&top2)),
            ]
            .into();
            let owner = format!("utterance {:?}", u.id);
            u.meta.annotate(FIGHTING_WORDS_KEY, value, &owner);
        }
        Ok(corpus)
    }

    fn summarize(&self, _corpus: &Corpus) -> Result<SummaryTable> {
        ensure_fitted(self)?;
        Ok(summarize_fw(
            self.model.as_ref().expect("fitted"),
            self.top_k,
        ))
    }
}
