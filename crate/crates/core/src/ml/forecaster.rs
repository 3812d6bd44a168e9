use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::meta::MetaValue;
use crate::ml::classifier::label_of;
use crate::ml::vocab::word_tokens;
use crate::ml::{
    predict, train_classifier, LinearConfig, LinearModel, SparseVector, VocabConfig, Vocabulary,
};
use crate::model::{Corpus, TraversalOrder};
use crate::transform::{ensure_fitted, SummaryTable, Transformer};

pub const FORECAST_KEY: &str = "forecast";
pub const FORECAST_FINAL_KEY: &str = "forecast_final";

/// Scores every prefix of a conversation with the probability that its
/// terminal boolean label is positive. Features are cumulative bag-of-words
/// counts over the utterances seen so far in breadth-first order.
#[derive(Debug, Clone)]
pub struct Forecaster {
    pub label_key: String,
    pub vocab_config: VocabConfig,
    pub config: LinearConfig,
    fitted: Option<(Vocabulary, LinearModel<f64>)>,
}

impl Forecaster {
    pub fn new(label_key: impl Into<String>) -> Self {
        Forecaster {
            label_key: label_key.into(),
            vocab_config: VocabConfig::default(),
            config: Self::default_config(),
            fitted: None,
        }
    }

    /// Prefix pairs are many and highly correlated, so the penalty is
    /// lighter and training longer than the plain classifier's.
    pub fn default_config() -> LinearConfig {
        LinearConfig {
            l2: 0.01,
            epochs: 500,
            ..LinearConfig::default()
        }
    }

    pub fn with_config(mut self, vocab_config: VocabConfig, config: LinearConfig) -> Self {
        self.vocab_config = vocab_config;
        self.config = config;
        self
    }

    pub fn model(&self) -> Option<(&Vocabulary, &LinearModel<f64>)> {
        self.fitted.as_ref().map(|(v, m)| (v, m))
    }

    /// Per-utterance word lists of a conversation in breadth-first order.
    fn turns(
        &self,
        corpus: &Corpus,
        convo: &str,
        lowercase: bool,
    ) -> Result<Vec<(String, Vec<String>)>> {
        corpus
            .traverse(convo, TraversalOrder::Bfs)?
            .into_iter()
            .map(|u| {
                let mut words = Vec::new();
                word_tokens(u, lowercase, &mut words)?;
                Ok((u.id.clone(), words))
            })
            .collect()
    }
}

/// Feature vectors of every prefix `1..=n`.
fn prefix_vectors(vocab: &Vocabulary, turns: &[(String, Vec<String>)]) -> Vec<SparseVector<f64>> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    turns
        .iter()
        .map(|(_, words)| {
            for w in words {
                if let Some(i) = vocab.index(w) {
                    *counts.entry(i).or_default() += 1.0;
                }
            }
            SparseVector {
                dim: vocab.len(),
                entries: counts.iter().map(|(&i, &c)| (i, c)).collect(),
            }
        })
        .collect()
}

impl Transformer for Forecaster {
    fn name(&self) -> &str {
        "forecaster"
    }

    fn requires_fit(&self) -> bool {
        true
    }

    fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    fn fit(&mut self, corpus: &Corpus) -> Result<()> {
        let lowercase = self.vocab_config.lowercase;
        let mut convos = Vec::new();
        for c in corpus.conversations() {
            let label = label_of(&c.meta, &self.label_key).ok_or_else(|| Error::MissingLabel {
                conversation: c.id().to_owned(),
                key: self.label_key.clone(),
            })?;
            convos.push((label, self.turns(corpus, c.id(), lowercase)?));
        }
        if convos.is_empty() {
            return Err(Error::EmptySelection);
        }
        let docs: Vec<Vec<String>> = convos
            .iter()
            .map(|(_, turns)| turns.iter().flat_map(|t| t.1.iter().cloned()).collect())
            .collect();
        let vocab = Vocabulary::fit(docs.iter().map(Vec::as_slice), self.vocab_config.clone());
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (label, turns) in &convos {
            for x in prefix_vectors(&vocab, turns) {
                xs.push(x);
                ys.push(*label);
            }
        }
        let model = train_classifier(&xs, &ys, &self.config)?;
        self.fitted = Some((vocab, model));
        Ok(())
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        ensure_fitted(self)?;
        let (vocab, model) = self.fitted.as_ref().expect("fitted");
        let ids: Vec<String> = corpus.conversations().map(|c| c.id().to_owned()).collect();
        for cid in ids {
            let turns = self.turns(corpus, &cid, vocab.config().lowercase)?;
            let mut last = None;
            for ((uid, _), x) in turns.iter().zip(prefix_vectors(vocab, &turns)) {
                let (_, score) = predict(model, &x)?;
                let owner = format!("utterance {uid:?}");
                corpus
                    .utterance_mut(uid)
                    .expect("utterance exists")
                    .meta
                    .annotate(FORECAST_KEY, score, &owner);
                last = Some(score);
            }
            let owner = format!("conversation {cid:?}");
            corpus
                .conversation_mut(&cid)
                .expect("conversation exists")
                .meta
                .annotate(FORECAST_FINAL_KEY, MetaValue::from(last), &owner);
        }
        Ok(corpus)
    }

    /// One row per conversation with its final forecast and label.
    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let mut t = SummaryTable::new("conversation", &[FORECAST_FINAL_KEY, "label"]);
        for c in corpus.conversations() {
            let f = c
                .meta
                .get(FORECAST_FINAL_KEY)
                .and_then(MetaValue::as_f64)
                .ok_or_else(|| Error::MissingAnnotation {
                    key: FORECAST_FINAL_KEY.to_owned(),
                    object: format!("conversation {:?}", c.id()),
                })?;
            t.push_row(
                c.id(),
                vec![f.into(), label_of(&c.meta, &self.label_key).into()],
            );
        }
        Ok(t)
    }
}
