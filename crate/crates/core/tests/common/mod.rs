//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use convoforge::hyperconvo::ResponseGraph;
use convoforge::{Corpus, CorpusBuilder, MetaTable, MetaValue, Speaker, Utterance};
use proptest::prelude::*;

pub fn meta_value() -> impl Strategy<Value = MetaValue> {
    let leaf = prop_oneof![
        Just(MetaValue::Null),
        any::<bool>().prop_map(MetaValue::Bool),
        any::<i64>().prop_map(MetaValue::Int),
        prop::num::f64::NORMAL.prop_map(MetaValue::Float),
        Just(MetaValue::Float(0.5)),
        "[a-zA-Z0-9 \"\\\\\u{e9}\u{4e2d}\n]{0,8}".prop_map(MetaValue::Str),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(MetaValue::List),
            prop::collection::btree_map("[a-z_]{1,5}", inner, 0..4).prop_map(MetaValue::Map),
        ]
    })
}

pub fn meta_table() -> impl Strategy<Value = MetaTable> {
    prop::collection::btree_map("[a-z_]{1,6}", meta_value(), 0..3).prop_map(MetaTable::from)
}

/// Shape of one random utterance before ids are assigned.
#[derive(Debug, Clone)]
pub struct UttSpec {
    pub conversation: usize,
    pub parent_pick: usize,
    pub speaker: usize,
    pub timestamp: Option<i64>,
    pub text: String,
    pub meta: MetaTable,
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub utts: Vec<UttSpec>,
    pub speaker_meta: Vec<MetaTable>,
    pub convo_meta: Vec<MetaTable>,
    pub corpus_meta: MetaTable,
}

const WORDS: &[&str] = &[
    "the", "cat", "sat", "on", "a", "mat", "hello", "please", "thanks", "why", "we", "you",
];

pub fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..8).prop_map(|w| w.join(" "))
}

pub fn utt_spec(with_meta: bool) -> impl Strategy<Value = UttSpec> {
    let meta = if with_meta {
        meta_table().boxed()
    } else {
        Just(MetaTable::new()).boxed()
    };
    (
        0usize..4,
        any::<usize>(),
        0usize..5,
        prop::option::of(0i64..20),
        sentence(),
        meta,
    )
        .prop_map(
            |(conversation, parent_pick, speaker, timestamp, text, meta)| UttSpec {
                conversation,
                parent_pick,
                speaker,
                timestamp,
                text,
                meta,
            },
        )
}

pub fn corpus_spec(max_utts: usize, with_meta: bool) -> impl Strategy<Value = CorpusSpec> {
    let tables = |n: usize| {
        if with_meta {
            prop::collection::vec(meta_table(), n).boxed()
        } else {
            Just(vec![MetaTable::new(); n]).boxed()
        }
    };
    (
        prop::collection::vec(utt_spec(with_meta), 1..=max_utts),
        tables(5),
        tables(4),
        if with_meta {
            meta_table().boxed()
        } else {
            Just(MetaTable::new()).boxed()
        },
    )
        .prop_map(|(utts, speaker_meta, convo_meta, corpus_meta)| CorpusSpec {
            utts,
            speaker_meta,
            convo_meta,
            corpus_meta,
        })
}

impl CorpusSpec {
    /// Utterances with ids and reply links: the first utterance of each
    /// conversation is its root, later ones reply to an earlier member.
    pub fn utterances(&self) -> Vec<Utterance> {
        let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let mut out = Vec::new();
        for (i, u) in self.utts.iter().enumerate() {
            let id = format!("u{i:03}");
            let cid = format!("c{}", u.conversation);
            let earlier = members.entry(u.conversation).or_default();
            let mut utt = Utterance::new(&id, format!("s{}", u.speaker), &cid, &u.text)
                .with_meta(u.meta.clone());
            utt.timestamp = u.timestamp;
            if !earlier.is_empty() {
                utt = utt.reply_to(earlier[u.parent_pick % earlier.len()].clone());
            }
            earlier.push(id);
            out.push(utt);
        }
        out
    }

    pub fn build(&self) -> Corpus {
        let utts = self.utterances();
        let used: std::collections::BTreeSet<usize> =
            self.utts.iter().map(|u| u.conversation).collect();
        let mut b = CorpusBuilder::new()
            .speakers(
                self.speaker_meta
                    .iter()
                    .enumerate()
                    .map(|(i, m)| Speaker::new(format!("s{i}")).with_meta(m.clone()))
                    .collect(),
            )
            .corpus_meta(self.corpus_meta.clone());
        for c in used {
            b = b.conversation_meta(format!("c{c}"), self.convo_meta[c].clone());
        }
        b.build(utts).expect("generated corpus is valid")
    }
}

/// Sibling order: timestamp ascending with missing last, then id.
fn sibling_key(u: &Utterance) -> (bool, i64, String) {
    (
        u.timestamp.is_none(),
        u.timestamp.unwrap_or(0),
        u.id.clone(),
    )
}

fn kids<'a>(members: &[&'a Utterance], parent: &str) -> Vec<&'a Utterance> {
    let mut k: Vec<&Utterance> = members
        .iter()
        .copied()
        .filter(|u| u.reply_to.as_deref() == Some(parent))
        .collect();
    k.sort_by_key(|u| sibling_key(u));
    k
}

/// Recursive reference traversals over a conversation's utterances.
pub fn oracle_orders(members: &[&Utterance]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let root = members.iter().find(|u| u.reply_to.is_none()).expect("root");
    let mut bfs = Vec::new();
    let mut queue = VecDeque::from([*root]);
    while let Some(u) = queue.pop_front() {
        bfs.push(u.id.clone());
        queue.extend(kids(members, &u.id));
    }
    fn pre(members: &[&Utterance], u: &Utterance, out: &mut Vec<String>) {
        out.push(u.id.clone());
        for k in kids(members, &u.id) {
            pre(members, k, out);
        }
    }
    fn post(members: &[&Utterance], u: &Utterance, out: &mut Vec<String>) {
        for k in kids(members, &u.id) {
            post(members, k, out);
        }
        out.push(u.id.clone());
    }
    let (mut p, mut q) = (Vec::new(), Vec::new());
    pre(members, root, &mut p);
    post(members, root, &mut q);
    (bfs, p, q)
}

/// Longest root-to-leaf chain counted in utterances.
pub fn oracle_depth(members: &[&Utterance]) -> usize {
    members
        .iter()
        .map(|u| {
            let mut d = 1;
            let mut cur = *u;
            while let Some(p) = cur.reply_to.as_deref() {
                cur = members.iter().find(|m| m.id == p).expect("parent present");
                d += 1;
            }
            d
        })
        .max()
        .unwrap_or(0)
}

/// Motif counts and reciprocity by enumerating ordered pairs and triples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForce {
    pub dyadic: u64,
    pub out_star: u64,
    pub in_star: u64,
    pub transitive: u64,
    pub reciprocity: f64,
}

pub fn brute_force(g: &ResponseGraph) -> BruteForce {
    let nodes: Vec<&String> = g.nodes.iter().collect();
    let e = |a: &String, b: &String| {
        a != b && g.edges.get(&(a.clone(), b.clone())).is_some_and(|&w| w > 0)
    };
    let (mut dyadic, mut linked, mut out_star, mut in_star, mut transitive) = (0, 0, 0, 0, 0);
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if e(a, b) && e(b, a) {
                dyadic += 1;
            }
            if e(a, b) || e(b, a) {
                linked += 1;
            }
        }
    }
    for s in &nodes {
        for t in &nodes {
            for r in &nodes {
                if s == t || t == r || s == r {
                    continue;
                }
                if t < r && e(s, t) && e(s, r) {
                    out_star += 1;
                }
                if t < r && e(t, s) && e(r, s) {
                    in_star += 1;
                }
                if e(s, t) && e(t, r) && e(s, r) {
                    transitive += 1;
                }
            }
        }
    }
    BruteForce {
        dyadic,
        out_star,
        in_star,
        transitive,
        reciprocity: if linked == 0 {
            0.0
        } else {
            dyadic as f64 / linked as f64
        },
    }
}
