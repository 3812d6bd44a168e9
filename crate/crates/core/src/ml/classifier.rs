use std::sync::Arc;

use crate::error::{Error, Result};
use crate::meta::{MetaTable, MetaValue};
use crate::ml::vocab::object_meta_mut;
use crate::ml::{
    documents, predict, train_classifier, vectorize, Level, LinearConfig, LinearModel, ObjectRef,
    VocabConfig, Vocabulary,
};
use crate::model::Corpus;
use crate::transform::{ensure_fitted, SummaryTable, Transformer};

pub const PREDICTION_KEY: &str = "prediction";
pub const PREDICTION_SCORE_KEY: &str = "pred_score";

/// Object id, gold label if present, predicted label, probability.
type Row = (String, Option<bool>, bool, f64);

pub type ObjectPredicate = Arc<dyn Fn(&ObjectRef<'_>) -> bool + Send + Sync>;

/// Boolean label under `key`; integers 0 and 1 are accepted too.
pub(crate) fn label_of(meta: &MetaTable, key: &str) -> Option<bool> {
    match meta.get(key)? {
        MetaValue::Bool(b) => Some(*b),
        MetaValue::Int(0) => Some(false),
        MetaValue::Int(1) => Some(true),
        _ => None,
    }
}

/// Bag-of-words logistic regression over utterances, conversations or
/// speakers. Trains on the selected objects that carry a label and predicts
/// for every object at the level.
#[derive(Clone)]
pub struct Classifier {
    pub level: Level,
    pub label_key: String,
    pub vocab_config: VocabConfig,
    pub config: LinearConfig,
    selector: ObjectPredicate,
    fitted: Option<(Vocabulary, LinearModel<f64>)>,
}

impl Classifier {
    pub fn new(level: Level, label_key: impl Into<String>) -> Self {
        Classifier {
            level,
            label_key: label_key.into(),
            vocab_config: VocabConfig::default(),
            config: LinearConfig::default(),
            selector: Arc::new(|_| true),
            fitted: None,
        }
    }

    pub fn with_config(mut self, vocab_config: VocabConfig, config: LinearConfig) -> Self {
        self.vocab_config = vocab_config;
        self.config = config;
        self
    }

    /// Restrict training to a subset of objects.
    pub fn train_on(mut self, selector: ObjectPredicate) -> Self {
        self.selector = selector;
        self
    }

    /// Reuse an already trained model.
    pub fn with_model(mut self, vocabulary: Vocabulary, model: LinearModel<f64>) -> Self {
        self.fitted = Some((vocabulary, model));
        self
    }

    pub fn model(&self) -> Option<(&Vocabulary, &LinearModel<f64>)> {
        self.fitted.as_ref().map(|(v, m)| (v, m))
    }

    /// Share of labelled objects whose stored prediction equals the label.
    pub fn accuracy(&self, corpus: &Corpus) -> Result<f64> {
        let rows = self.rows(corpus)?;
        let scored: Vec<bool> = rows
            .iter()
            .filter_map(|r| r.1.map(|label| label == r.2))
            .collect();
        if scored.is_empty() {
            return Err(Error::EmptySelection);
        }
        Ok(scored.iter().filter(|&&ok| ok).count() as f64 / scored.len() as f64)
    }

    fn rows(&self, corpus: &Corpus) -> Result<Vec<Row>> {
        let metas: Vec<(String, &MetaTable)> = match self.level {
            Level::Utterance => corpus
                .utterances()
                .map(|u| (u.id.clone(), &u.meta))
                .collect(),
            Level::Conversation => corpus
                .conversations()
                .map(|c| (c.id().to_owned(), &c.meta))
                .collect(),
            Level::Speaker => corpus.speakers().map(|s| (s.id.clone(), &s.meta)).collect(),
        };
        metas
            .into_iter()
            .map(|(id, meta)| {
                let missing = || Error::MissingAnnotation {
                    key: PREDICTION_KEY.to_owned(),
                    object: format!("{:?} {id:?}", self.level),
                };
                let pred = meta
                    .get(PREDICTION_KEY)
                    .and_then(MetaValue::as_bool)
                    .ok_or_else(missing)?;
                let score = meta
                    .get(PREDICTION_SCORE_KEY)
                    .and_then(MetaValue::as_f64)
                    .ok_or_else(missing)?;
                Ok((id.clone(), label_of(meta, &self.label_key), pred, score))
            })
            .collect()
    }
}

impl Transformer for Classifier {
    fn name(&self) -> &str {
        "classifier"
    }

    fn requires_fit(&self) -> bool {
        true
    }

    fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    fn fit(&mut self, corpus: &Corpus) -> Result<()> {
        let key = self.label_key.clone();
        let selector = self.selector.clone();
        let docs = documents(
            corpus,
            self.level,
            &|o| selector(o) && label_of(o.meta(), &key).is_some(),
            self.vocab_config.lowercase,
        )?;
        if docs.is_empty() {
            return Err(Error::EmptySelection);
        }
        let vocab = Vocabulary::fit(
            docs.iter().map(|d| d.tokens.as_slice()),
            self.vocab_config.clone(),
        );
        let labels: Vec<bool> = docs
            .iter()
            .map(|d| {
                let meta = match self.level {
                    Level::Utterance => corpus.utterance(&d.id).map(|u| &u.meta),
                    Level::Conversation => corpus.conversation(&d.id).map(|c| &c.meta),
                    Level::Speaker => corpus.speaker(&d.id).map(|s| &s.meta),
                };
                meta.and_then(|m| label_of(m, &key))
                    .expect("selected objects are labelled")
            })
            .collect();
        let xs: Vec<_> = docs
            .iter()
            .map(|d| vectorize::<f64>(&vocab, &d.tokens))
            .collect();
        let model = train_classifier(&xs, &labels, &self.config)?;
        self.fitted = Some((vocab, model));
        Ok(())
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        ensure_fitted(self)?;
        let (vocab, model) = self.fitted.as_ref().expect("fitted");
        let docs = documents(corpus, self.level, &|_| true, vocab.config().lowercase)?;
        let mut out = Vec::with_capacity(docs.len());
        for d in docs {
            let (label, score) = predict(model, &vectorize(vocab, &d.tokens))?;
            out.push((d.id, label, score));
        }
        for (id, label, score) in out {
            let owner = format!("{:?} {id:?}", self.level);
            let meta = object_meta_mut(corpus, self.level, &id).expect("object exists");
            meta.annotate(PREDICTION_KEY, label, &owner);
            meta.annotate(PREDICTION_SCORE_KEY, score, &owner);
        }
        Ok(corpus)
    }

    /// One row per object: label (NA when absent), prediction and score.
    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let mut t = SummaryTable::new(
            &format!("{:?}", self.level).to_lowercase(),
            &["label", PREDICTION_KEY, PREDICTION_SCORE_KEY],
        );
        for (id, label, pred, score) in self.rows(corpus)? {
            t.push_row(id, vec![label.into(), pred.into(), score.into()]);
        }
        Ok(t)
    }
}
