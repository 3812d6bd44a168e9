//! Per-speaker linguistic diversity across conversations: the mean pairwise
//! Jensen-Shannon divergence between the speaker's per-conversation unigram
//! distributions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::meta::MetaValue;
use crate::model::Corpus;
use crate::num::Scalar;
use crate::text::{annotated_tokens, words};
use crate::transform::{SummaryTable, Transformer};

pub const DIVERSITY_KEY: &str = "convo_diversity";

/// Divergence between two aligned probability vectors.
pub type Divergence<F> = fn(&[F], &[F]) -> F;

/// Jensen-Shannon divergence in nats, clamped to `[0, ln 2]`.
pub fn jensen_shannon<F: Scalar>(p: &[F], q: &[F]) -> F {
    assert_eq!(p.len(), q.len(), "distributions must be aligned");
    let half = F::of(0.5);
    let kl_to_mid = |a: &[F], b: &[F]| {
        a.iter()
            .zip(b)
            .filter(|(x, _)| **x > F::zero())
            .map(|(&x, &y)| x * (x / ((x + y) * half)).ln())
            .sum::<F>()
    };
    let js = half * kl_to_mid(p, q) + half * kl_to_mid(q, p);
    js.max(F::zero()).min(F::of(std::f64::consts::LN_2))
}

/// Normalize count maps over their shared support.
pub fn align_distributions<F: Scalar>(dists: &[BTreeMap<String, u64>]) -> Vec<Vec<F>> {
    let support: BTreeSet<&String> = dists.iter().flat_map(|d| d.keys()).collect();
    dists
        .iter()
        .map(|d| {
            let total = F::of(d.values().sum::<u64>() as f64);
            support
                .iter()
                .map(|t| F::of(d.get(*t).copied().unwrap_or(0) as f64) / total)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityScore<F> {
    /// `None` when fewer than two conversations qualify.
    pub value: Option<F>,
    pub n_conversations: usize,
}

impl<F: Scalar> DiversityScore<F> {
    pub fn to_meta(&self) -> MetaValue {
        MetaValue::Map(BTreeMap::from([
            ("value".to_owned(), self.value.map(|v| v.as_f64()).into()),
            ("n_conversations".to_owned(), self.n_conversations.into()),
        ]))
    }
}

/// Mean pairwise divergence over per-conversation count maps.
pub fn diversity_of<F: Scalar>(
    per_convo: &[BTreeMap<String, u64>],
    divergence: Divergence<F>,
) -> DiversityScore<F> {
    let n = per_convo.len();
    if n < 2 {
        return DiversityScore {
            value: None,
            n_conversations: n,
        };
    }
    let dists = align_distributions::<F>(per_convo);
    let mut total = F::zero();
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total = total + divergence(&dists[i], &dists[j]);
            pairs += 1;
        }
    }
    DiversityScore {
        value: Some(total / F::of_count(pairs)),
        n_conversations: n,
    }
}

/// Lowercased unigram counts per conversation for one speaker, keeping
/// conversations where the speaker produced at least `min_tokens` words.
pub fn speaker_unigrams(
    corpus: &Corpus,
    speaker_id: &str,
    min_tokens: usize,
) -> Result<Vec<BTreeMap<String, u64>>> {
    let mut per: BTreeMap<&str, BTreeMap<String, u64>> = BTreeMap::new();
    for u in corpus.speaker_history(speaker_id)? {
        let counts = per.entry(u.conversation_id.as_str()).or_default();
        for w in words(&annotated_tokens(u)?).into_iter().flatten() {
            *counts.entry(w).or_default() += 1;
        }
    }
    Ok(per
        .into_values()
        .filter(|c| c.values().sum::<u64>() as usize >= min_tokens.max(1))
        .collect())
}

pub fn speaker_diversity<F: Scalar>(
    corpus: &Corpus,
    speaker_id: &str,
    min_tokens: usize,
    divergence: Divergence<F>,
) -> Result<DiversityScore<F>> {
    Ok(diversity_of(
        &speaker_unigrams(corpus, speaker_id, min_tokens)?,
        divergence,
    ))
}

/// Annotates every speaker with `convo_diversity`.
#[derive(Debug, Clone)]
pub struct UserConvoDiversity {
    pub min_tokens_per_convo: usize,
    pub divergence: Divergence<f64>,
}

impl Default for UserConvoDiversity {
    fn default() -> Self {
        UserConvoDiversity {
            min_tokens_per_convo: 1,
            divergence: jensen_shannon::<f64>,
        }
    }
}

impl Transformer for UserConvoDiversity {
    fn name(&self) -> &str {
        "diversity"
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        let scores: Vec<(String, DiversityScore<f64>)> = corpus
            .speakers()
            .map(|s| {
                let d =
                    speaker_diversity(corpus, &s.id, self.min_tokens_per_convo, self.divergence)?;
                Ok((s.id.clone(), d))
            })
            .collect::<Result<_>>()?;
        for (sid, d) in scores {
            let owner = format!("speaker {sid:?}");
            corpus
                .speaker_mut(&sid)
                .expect("speaker exists")
                .meta
                .annotate(DIVERSITY_KEY, d.to_meta(), &owner);
        }
        Ok(corpus)
    }

    /// Speakers ranked by descending diversity; unscored speakers last.
    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let mut rows: Vec<(&str, Option<f64>, MetaValue)> = Vec::new();
        for s in corpus.speakers() {
            let m = s
                .meta
                .get(DIVERSITY_KEY)
                .and_then(MetaValue::as_map)
                .ok_or_else(|| Error::MissingAnnotation {
                    key: DIVERSITY_KEY.to_owned(),
                    object: format!("speaker {:?}", s.id),
                })?;
            let value = m.get("value").and_then(MetaValue::as_f64);
            rows.push((
                &s.id,
                value,
                m.get("n_conversations").cloned().unwrap_or_default(),
            ));
        }
        rows.sort_by(|a, b| match (a.1, b.1) {
            (Some(x), Some(y)) => y
                .partial_cmp(&x)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(b.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => a.0.cmp(b.0),
        });
        let mut t = SummaryTable::new("speaker", &["diversity", "n_conversations"]);
        for (id, v, n) in rows {
            t.push_row(id, vec![v.into(), n]);
        }
        Ok(t)
    }
}
