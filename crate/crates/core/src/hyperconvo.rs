//! Conversation structure features over the speaker response graph.
//!
//! The graph has one node per participating speaker and a weighted edge
//! `s -> t` counting the replies `s` made to `t`. Degree statistics use the
//! weighted degrees including self-replies; reciprocity and the triad motifs
//! use the unweighted graph without self-loops.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::meta::MetaValue;
use crate::model::Corpus;
use crate::num::Scalar;
use crate::transform::{SummaryTable, Transformer};

pub const HYPERCONVO_KEY: &str = "hyperconvo";

pub const FEATURE_NAMES: [&str; 15] = [
    "out_degree_max",
    "out_degree_mean",
    "out_degree_mean_nonzero",
    "out_degree_prop_nonzero",
    "out_degree_entropy",
    "in_degree_max",
    "in_degree_mean",
    "in_degree_mean_nonzero",
    "in_degree_prop_nonzero",
    "in_degree_entropy",
    "reciprocity",
    "motif_dyadic",
    "motif_out_star",
    "motif_in_star",
    "motif_transitive",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResponseGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u64>,
}

impl ResponseGraph {
    /// Graph from explicit edges; endpoints are added as nodes.
    pub fn from_edges<'a>(
        nodes: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str, u64)>,
    ) -> Self {
        let mut g = ResponseGraph {
            nodes: nodes.into_iter().map(str::to_owned).collect(),
            edges: BTreeMap::new(),
        };
        for (s, t, w) in edges {
            g.nodes.insert(s.to_owned());
            g.nodes.insert(t.to_owned());
            if w > 0 {
                *g.edges.entry((s.to_owned(), t.to_owned())).or_default() += w;
            }
        }
        g
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Out-neighbour sets of the simple directed graph (no self-loops).
    pub fn adjacency(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = self
            .nodes
            .iter()
            .map(|n| (n.as_str(), BTreeSet::new()))
            .collect();
        for (s, t) in self.edges.keys() {
            if s != t {
                adj.entry(s).or_default().insert(t);
            }
        }
        adj
    }
}

pub fn build_response_graph(corpus: &Corpus, conversation_id: &str) -> Result<ResponseGraph> {
    let members = corpus.conversation_utterances(conversation_id)?;
    let mut g = ResponseGraph::default();
    for u in &members {
        g.nodes.insert(u.speaker_id.clone());
        if let Some(parent) = u.reply_to.as_deref().and_then(|p| corpus.utterance(p)) {
            *g.edges
                .entry((u.speaker_id.clone(), parent.speaker_id.clone()))
                .or_default() += 1;
        }
    }
    Ok(g)
}

/// Motif counts on the unweighted graph without self-loops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MotifCounts {
    /// Unordered pairs joined in both directions.
    pub dyadic: u64,
    /// A node with edges to two distinct others.
    pub out_star: u64,
    /// A node receiving edges from two distinct others.
    pub in_star: u64,
    /// Ordered triples with `s->t`, `t->r` and `s->r`.
    pub transitive: u64,
}

fn choose2(n: usize) -> u64 {
    (n as u64) * (n as u64).saturating_sub(1) / 2
}

pub fn motif_counts(graph: &ResponseGraph) -> MotifCounts {
    let out = graph.adjacency();
    let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
    for targets in out.values() {
        for t in targets {
            *indeg.entry(t).or_default() += 1;
        }
    }
    let mut m = MotifCounts::default();
    for (s, targets) in &out {
        m.out_star += choose2(targets.len());
        for t in targets {
            if s < t && out.get(t).is_some_and(|back| back.contains(s)) {
                m.dyadic += 1;
            }
            if let Some(next) = out.get(t) {
                m.transitive += next.intersection(targets).count() as u64;
            }
        }
    }
    m.in_star = indeg.values().map(|&d| choose2(d)).sum();
    m
}

/// Mutual pairs over pairs with at least one edge (self-loops ignored);
/// zero when no pair interacts.
pub fn reciprocity<F: Scalar>(graph: &ResponseGraph) -> F {
    let out = graph.adjacency();
    let mut linked = 0usize;
    let mut mutual = 0usize;
    for (s, targets) in &out {
        for t in targets {
            let back = out.get(t).is_some_and(|b| b.contains(s));
            if back {
                if s < t {
                    mutual += 1;
                    linked += 1;
                }
            } else {
                linked += 1;
            }
        }
    }
    if linked == 0 {
        F::zero()
    } else {
        F::of_count(mutual) / F::of_count(linked)
    }
}

/// max, mean, mean over nonzero, proportion nonzero, Shannon entropy (nats).
pub fn degree_stats<F: Scalar>(degrees: &[u64]) -> [F; 5] {
    if degrees.is_empty() {
        return [F::zero(); 5];
    }
    let n = F::of_count(degrees.len());
    let total: u64 = degrees.iter().sum();
    let nonzero = degrees.iter().filter(|&&d| d > 0).count();
    let max = F::of(*degrees.iter().max().expect("non-empty") as f64);
    let sum = F::of(total as f64);
    let mean_nonzero = if nonzero == 0 {
        F::zero()
    } else {
        sum / F::of_count(nonzero)
    };
    let entropy = if total == 0 {
        F::zero()
    } else {
        degrees
            .iter()
            .filter(|&&d| d > 0)
            .map(|&d| {
                let p = F::of(d as f64) / sum;
                -p * p.ln()
            })
            .sum::<F>()
            .max(F::zero())
    };
    [
        max,
        sum / n,
        mean_nonzero,
        F::of_count(nonzero) / n,
        entropy,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFeatures<F> {
    pub values: [F; 15],
}

impl<F: Scalar> StructureFeatures<F> {
    pub fn get(&self, name: &str) -> Option<F> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, F)> + '_ {
        FEATURE_NAMES
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn to_meta(&self) -> MetaValue {
        MetaValue::Map(
            self.iter()
                .map(|(n, v)| (n.to_owned(), MetaValue::Float(v.as_f64())))
                .collect(),
        )
    }
}

pub fn extract_features<F: Scalar>(graph: &ResponseGraph) -> StructureFeatures<F> {
    let mut out_deg: BTreeMap<&str, u64> = graph.nodes.iter().map(|n| (n.as_str(), 0)).collect();
    let mut in_deg = out_deg.clone();
    for ((s, t), w) in &graph.edges {
        *out_deg.entry(s).or_default() += w;
        *in_deg.entry(t).or_default() += w;
    }
    let out_stats = degree_stats::<F>(&out_deg.values().copied().collect::<Vec<_>>());
    let in_stats = degree_stats::<F>(&in_deg.values().copied().collect::<Vec<_>>());
    let motifs = motif_counts(graph);
    let mut values = [F::zero(); 15];
    values[..5].copy_from_slice(&out_stats);
    values[5..10].copy_from_slice(&in_stats);
    values[10] = reciprocity(graph);
    values[11] = F::of(motifs.dyadic as f64);
    values[12] = F::of(motifs.out_star as f64);
    values[13] = F::of(motifs.in_star as f64);
    values[14] = F::of(motifs.transitive as f64);
    StructureFeatures { values }
}

/// Annotates every conversation with its structure features.
#[derive(Debug, Clone, Default)]
pub struct HyperConvo;

impl Transformer for HyperConvo {
    fn name(&self) -> &str {
        "hyperconvo"
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        let features: Vec<(String, MetaValue)> = corpus
            .conversations()
            .map(|c| {
                let g = build_response_graph(corpus, c.id())?;
                Ok((c.id().to_owned(), extract_features::<f64>(&g).to_meta()))
            })
            .collect::<Result<_>>()?;
        for (cid, f) in features {
            let owner = format!("conversation {cid:?}");
            corpus
                .conversation_mut(&cid)
                .expect("conversation exists")
                .meta
                .annotate(HYPERCONVO_KEY, f, &owner);
        }
        Ok(corpus)
    }

    /// Per-conversation feature matrix.
    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let mut t = SummaryTable::new("conversation_id", &FEATURE_NAMES);
        for c in corpus.conversations() {
            let missing = || Error::MissingAnnotation {
                key: HYPERCONVO_KEY.to_owned(),
                object: format!("conversation {:?}", c.id()),
            };
            let m = c
                .meta
                .get(HYPERCONVO_KEY)
                .and_then(MetaValue::as_map)
                .ok_or_else(missing)?;
            let row = FEATURE_NAMES
                .iter()
                .map(|n| m.get(*n).cloned().ok_or_else(missing))
                .collect::<Result<Vec<_>>>()?;
            t.push_row(c.id(), row);
        }
        Ok(t)
    }
}
