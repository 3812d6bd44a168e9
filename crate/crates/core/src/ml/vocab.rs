use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::MetaTable;
use crate::model::{Conversation, Corpus, Speaker, TraversalOrder, Utterance, UtteranceRef};
use crate::num::Scalar;
use crate::text::{annotated_tokens, is_punct_token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Utterance,
    Conversation,
    Speaker,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "utterance" => Ok(Level::Utterance),
            "conversation" => Ok(Level::Conversation),
            "speaker" => Ok(Level::Speaker),
            _ => Err(Error::InvalidConfig(format!("unknown level {s:?}"))),
        }
    }
}

/// Any object of the hierarchy that can be a document.
#[derive(Debug, Clone, Copy)]
pub enum ObjectRef<'a> {
    Utterance(UtteranceRef<'a>),
    Conversation(&'a Conversation),
    Speaker(&'a Speaker),
}

impl<'a> ObjectRef<'a> {
    pub fn id(&self) -> &'a str {
        match self {
            ObjectRef::Utterance(u) => &u.utt.id,
            ObjectRef::Conversation(c) => c.id(),
            ObjectRef::Speaker(s) => &s.id,
        }
    }

    pub fn meta(&self) -> &'a MetaTable {
        match self {
            ObjectRef::Utterance(u) => &u.utt.meta,
            ObjectRef::Conversation(c) => &c.meta,
            ObjectRef::Speaker(s) => &s.meta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
}

pub(crate) fn word_tokens(utt: &Utterance, lowercase: bool, out: &mut Vec<String>) -> Result<()> {
    for tok in annotated_tokens(utt)?.into_iter().flatten() {
        if !is_punct_token(&tok) {
            out.push(if lowercase { tok.to_lowercase() } else { tok });
        }
    }
    Ok(())
}

/// Metadata of the object with `id` at `level`.
pub(crate) fn object_meta_mut<'c>(
    corpus: &'c mut Corpus,
    level: Level,
    id: &str,
) -> Option<&'c mut MetaTable> {
    match level {
        Level::Utterance => corpus.utterance_mut(id).map(|u| &mut u.meta),
        Level::Conversation => corpus.conversation_mut(id).map(|c| &mut c.meta),
        Level::Speaker => corpus.speaker_mut(id).map(|s| &mut s.meta),
    }
}

/// One document per selected object. Conversation documents concatenate
/// utterances in breadth-first order, speaker documents in chronological
/// order.
pub fn documents(
    corpus: &Corpus,
    level: Level,
    selector: &dyn Fn(&ObjectRef<'_>) -> bool,
    lowercase: bool,
) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut push = |id: &str, utts: Vec<&Utterance>| -> Result<()> {
        let mut tokens = Vec::new();
        for u in utts {
            word_tokens(u, lowercase, &mut tokens)?;
        }
        docs.push(Document {
            id: id.to_owned(),
            tokens,
        });
        Ok(())
    };
    match level {
        Level::Utterance => {
            for r in corpus.utterance_refs() {
                if selector(&ObjectRef::Utterance(r)) {
                    push(&r.utt.id, vec![r.utt])?;
                }
            }
        }
        Level::Conversation => {
            for c in corpus.conversations() {
                if selector(&ObjectRef::Conversation(c)) {
                    push(c.id(), corpus.traverse(c.id(), TraversalOrder::Bfs)?)?;
                }
            }
        }
        Level::Speaker => {
            for s in corpus.speakers() {
                if selector(&ObjectRef::Speaker(s)) {
                    push(&s.id, corpus.speaker_history(&s.id)?)?;
                }
            }
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabConfig {
    #[serde(default = "one")]
    pub min_df: usize,
    #[serde(default)]
    pub max_terms: Option<usize>,
    #[serde(default = "yes")]
    pub lowercase: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            min_df: 1,
            max_terms: None,
            lowercase: true,
        }
    }
}

/// Term to column mapping ordered by descending corpus frequency, ties
/// broken lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabRecord", into = "VocabRecord")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u64>,
    term_freq: Vec<u64>,
    config: VocabConfig,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabRecord {
    terms: Vec<String>,
    doc_freq: Vec<u64>,
    term_freq: Vec<u64>,
    config: VocabConfig,
}

impl TryFrom<VocabRecord> for Vocabulary {
    type Error = String;

    fn try_from(r: VocabRecord) -> std::result::Result<Self, String> {
        if r.doc_freq.len() != r.terms.len() || r.term_freq.len() != r.terms.len() {
            return Err("vocabulary arrays differ in length".into());
        }
        let index: HashMap<String, usize> = r
            .terms
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, t)| (t, i))
            .collect();
        if index.len() != r.terms.len() {
            return Err("vocabulary has duplicate terms".into());
        }
        Ok(Vocabulary {
            terms: r.terms,
            doc_freq: r.doc_freq,
            term_freq: r.term_freq,
            config: r.config,
            index,
        })
    }
}

impl From<Vocabulary> for VocabRecord {
    fn from(v: Vocabulary) -> Self {
        VocabRecord {
            terms: v.terms,
            doc_freq: v.doc_freq,
            term_freq: v.term_freq,
            config: v.config,
        }
    }
}

impl Vocabulary {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a [String]>, config: VocabConfig) -> Self {
        let mut stats: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for doc in docs {
            let mut local: BTreeMap<String, u64> = BTreeMap::new();
            for tok in doc {
                let t = if config.lowercase {
                    tok.to_lowercase()
                } else {
                    tok.clone()
                };
                *local.entry(t).or_default() += 1;
            }
            for (t, n) in local {
                let e = stats.entry(t).or_default();
                e.0 += 1;
                e.1 += n;
            }
        }
        let mut kept: Vec<(String, u64, u64)> = stats
            .into_iter()
            .filter(|(_, (df, _))| *df as usize >= config.min_df)
            .map(|(t, (df, tf))| (t, df, tf))
            .collect();
        kept.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        if let Some(cap) = config.max_terms {
            kept.truncate(cap);
        }
        let index = kept
            .iter()
            .enumerate()
            .map(|(i, k)| (k.0.clone(), i))
            .collect();
        Vocabulary {
            terms: kept.iter().map(|k| k.0.clone()).collect(),
            doc_freq: kept.iter().map(|k| k.1).collect(),
            term_freq: kept.iter().map(|k| k.2).collect(),
            config,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> Option<u64> {
        self.index(term).map(|i| self.doc_freq[i])
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn config(&self) -> &VocabConfig {
        &self.config
    }
}

pub fn fit_vocabulary(
    corpus: &Corpus,
    level: Level,
    selector: &dyn Fn(&ObjectRef<'_>) -> bool,
    config: VocabConfig,
) -> Result<Vocabulary> {
    let docs = documents(corpus, level, selector, config.lowercase)?;
    if docs.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(Vocabulary::fit(
        docs.iter().map(|d| d.tokens.as_slice()),
        config,
    ))
}

/// Sparse vector with entries sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<F> {
    pub dim: usize,
    pub entries: Vec<(usize, F)>,
}

impl<F: Scalar> SparseVector<F> {
    pub fn new(dim: usize, mut entries: Vec<(usize, F)>) -> Self {
        entries.sort_by_key(|e| e.0);
        SparseVector { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(values: &[F]) -> Self {
        SparseVector {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != F::zero())
                .map(|(i, v)| (i, *v))
                .collect(),
        }
    }

    pub fn get(&self, i: usize) -> F {
        self.entries
            .binary_search_by_key(&i, |e| e.0)
            .map_or(F::zero(), |k| self.entries[k].1)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn squared_norm(&self) -> F {
        self.entries.iter().map(|(_, v)| *v * *v).sum()
    }
}

/// Count vector over the vocabulary; unknown tokens are dropped.
pub fn vectorize<F: Scalar>(vocab: &Vocabulary, tokens: &[String]) -> SparseVector<F> {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for tok in tokens {
        let idx = if vocab.config.lowercase {
            vocab.index(&tok.to_lowercase())
        } else {
            vocab.index(tok)
        };
        if let Some(i) = idx {
            *counts.entry(i).or_default() += 1;
        }
    }
    SparseVector {
        dim: vocab.len(),
        entries: counts
            .into_iter()
            .map(|(i, c)| (i, F::of(c as f64)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(d: &[&str]) -> Vec<Vec<String>> {
        d.iter()
            .map(|s| s.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    fn fit(d: &[&str], config: VocabConfig) -> Vocabulary {
        let d = docs(d);
        Vocabulary::fit(d.iter().map(Vec::as_slice), config)
    }

    #[test]
    fn frequency_then_lexicographic() {
        let v = fit(&["a b", "b c"], VocabConfig::default());
        assert_eq!(v.terms(), ["b", "a", "c"]);
        assert_eq!(v.doc_freq("b"), Some(2));
    }

    #[test]
    fn min_df_and_cap() {
        let v = fit(
            &["a b", "b c"],
            VocabConfig {
                min_df: 2,
                ..VocabConfig::default()
            },
        );
        assert_eq!(v.terms(), ["b"]);
        let v = fit(
            &["a b", "b c"],
            VocabConfig {
                max_terms: Some(1),
                ..VocabConfig::default()
            },
        );
        assert_eq!(v.terms(), ["b"]);
    }

    #[test]
    fn vectorize_drops_oov() {
        let v = fit(&["a b", "b c"], VocabConfig::default());
        let x: SparseVector<f64> = vectorize(&v, &docs(&["B b z"])[0]);
        assert_eq!(x.entries, [(0, 2.0)]);
        assert_eq!(x.dim, 3);
        assert_eq!(vectorize::<f64>(&v, &[]).nnz(), 0);
        assert_eq!(vectorize::<f64>(&v, &docs(&["q r"])[0]).nnz(), 0);
    }

    #[test]
    fn serde_rebuilds_index() {
        let v = fit(&["x y y"], VocabConfig::default());
        let back: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index("x"), Some(1));
    }
}
