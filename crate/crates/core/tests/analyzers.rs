mod common;

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use common::{brute_force, corpus_spec};
use convoforge::attributes::SpeakerMix;
use convoforge::diversity::{
    diversity_of, jensen_shannon, speaker_diversity, UserConvoDiversity, DIVERSITY_KEY,
};
use convoforge::fighting_words::{fit_fw, log_odds_z, FwConfig};
use convoforge::hyperconvo::{
    build_response_graph, extract_features, motif_counts, reciprocity, HyperConvo, ResponseGraph,
    FEATURE_NAMES, HYPERCONVO_KEY,
};
use convoforge::io::load;
use convoforge::politeness::{PolitenessStrategies, POLITENESS_KEY};
use convoforge::registry::{build_pipeline, StageSpec};
use convoforge::text::TextCleaner;
use convoforge::{build_corpus, Corpus, Error, Transformer, Utterance};
use proptest::prelude::*;

fn toy_movie() -> Corpus {
    load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/corpora/toy_movie"
    ))
    .unwrap()
}

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = ResponseGraph> {
    (1..=max_nodes).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 1u64..4), 0..(n * n + 2)).prop_map(move |edges| {
            let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
            ResponseGraph::from_edges(
                names.iter().map(String::as_str),
                edges
                    .iter()
                    .map(|&(s, t, w)| (names[s].as_str(), names[t].as_str(), w)),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn motifs_match_enumeration(g in graph_strategy(6)) {
        let fast = motif_counts(&g);
        let slow = brute_force(&g);
        prop_assert_eq!(
            (fast.dyadic, fast.out_star, fast.in_star, fast.transitive),
            (slow.dyadic, slow.out_star, slow.in_star, slow.transitive)
        );
        prop_assert_eq!(reciprocity::<f64>(&g), slow.reciprocity);
    }

    #[test]
    fn feature_invariants(g in graph_strategy(6)) {
        let f = extract_features::<f64>(&g);
        prop_assert_eq!(f.iter().count(), 15);
        prop_assert!(f.iter().all(|(_, v)| v.is_finite()));
        let r = f.get("reciprocity").unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        for side in ["out_degree", "in_degree"] {
            let e = f.get(&format!("{side}_entropy")).unwrap();
            let nonzero = f.get(&format!("{side}_prop_nonzero")).unwrap() * g.nodes.len() as f64;
            prop_assert!(e >= 0.0);
            if nonzero >= 1.0 {
                prop_assert!(e <= nonzero.round().ln() + 1e-12);
            }
        }
    }

    #[test]
    fn features_ignore_speaker_names(g in graph_strategy(5)) {
        let renamed = ResponseGraph::from_edges(
            g.nodes.iter().map(|n| format!("zz{n}")).collect::<Vec<_>>().iter().map(String::as_str),
            g.edges
                .iter()
                .map(|((s, t), w)| (format!("zz{s}"), format!("zz{t}"), *w))
                .collect::<Vec<_>>()
                .iter()
                .map(|(s, t, w)| (s.as_str(), t.as_str(), *w)),
        );
        prop_assert_eq!(extract_features::<f64>(&g), extract_features::<f64>(&renamed));
    }

    #[test]
    fn edge_weight_counts_replies(spec in corpus_spec(40, false)) {
        let corpus = spec.build();
        for c in corpus.conversations() {
            let g = build_response_graph(&corpus, c.id()).unwrap();
            prop_assert_eq!(g.total_weight() as usize, c.len() - 1);
        }
    }

    #[test]
    fn fighting_words_swap_negates(split in prop::collection::vec(any::<bool>(), 42)) {
        prop_assume!(split.iter().any(|&b| b) && split.iter().any(|&b| !b));
        let corpus = toy_movie();
        let ids: Vec<String> = corpus.utterances().map(|u| u.id.clone()).collect();
        let side: BTreeMap<String, bool> = ids.into_iter().zip(split).collect();
        let s1 = side.clone();
        let s2 = side.clone();
        let in1 = move |r: &convoforge::UtteranceRef<'_>| s1[&r.utt.id];
        let in2 = move |r: &convoforge::UtteranceRef<'_>| !s2[&r.utt.id];
        let cfg = FwConfig::default();
        match (fit_fw::<f64>(&corpus, &in1, &in2, &cfg), fit_fw::<f64>(&corpus, &in2, &in1, &cfg)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.vocab, &b.vocab);
                for (za, zb) in a.zscores.iter().zip(&b.zscores) {
                    prop_assert!((za + zb).abs() <= 1e-12);
                }
            }
            (Err(Error::EmptyClass(_)), Err(Error::EmptyClass(_))) => {}
            other => prop_assert!(false, "asymmetric outcome {:?}", other.0.err()),
        }
    }

    #[test]
    fn diversity_is_bounded(texts in prop::collection::vec(prop::collection::btree_map("[a-e]", 1u64..5, 1..5), 0..6)) {
        let d = diversity_of::<f64>(&texts, jensen_shannon);
        prop_assert_eq!(d.n_conversations, texts.len());
        match d.value {
            Some(v) => prop_assert!((0.0..=LN_2).contains(&v)),
            None => prop_assert!(texts.len() < 2),
        }
    }
}

#[test]
fn hyperconvo_worked_examples() {
    let g = ResponseGraph::from_edges(["A"], []);
    let f = extract_features::<f64>(&g);
    assert!(f.iter().all(|(_, v)| v == 0.0));

    let g = ResponseGraph::from_edges([], [("A", "B", 1), ("B", "A", 1)]);
    let f = extract_features::<f64>(&g);
    assert_eq!(f.get("reciprocity"), Some(1.0));
    assert_eq!(f.get("motif_dyadic"), Some(1.0));
    assert_eq!(f.get("motif_out_star"), Some(0.0));

    let g = ResponseGraph::from_edges(
        [],
        [("A", "B", 1), ("B", "A", 1), ("A", "C", 1), ("C", "D", 1)],
    );
    let f = extract_features::<f64>(&g);
    assert!((f.get("reciprocity").unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(f.get("motif_out_star"), Some(1.0));
    assert_eq!(f.get("motif_in_star"), Some(0.0));
    assert_eq!(f.get("motif_transitive"), Some(0.0));
}

#[test]
fn hyperconvo_transform_annotates_conversations() {
    let mut c = toy_movie();
    HyperConvo.transform(&mut c).unwrap();
    for convo in c.conversations() {
        let m = convo.meta.get(HYPERCONVO_KEY).unwrap().as_map().unwrap();
        assert_eq!(m.len(), FEATURE_NAMES.len());
    }
    let t = HyperConvo.summarize(&c).unwrap();
    assert_eq!(t.len(), 12);
    assert_eq!(t.columns.len(), 15);
}

#[test]
fn fighting_words_golden_and_identical_classes() {
    let corpus = build_corpus(
        vec![
            Utterance::new("1", "s", "c1", "a a b"),
            Utterance::new("2", "s", "c2", "b b"),
        ],
        None,
    )
    .unwrap();
    let in1 = |r: &convoforge::UtteranceRef<'_>| r.utt.conversation_id == "c1";
    let in2 = |r: &convoforge::UtteranceRef<'_>| r.utt.conversation_id == "c2";
    let m = fit_fw::<f64>(&corpus, &in1, &in2, &FwConfig::default()).unwrap();
    assert!((m.zscore("a").unwrap() - 0.5976640480167308).abs() < 1e-9);
    assert!((m.zscore("b").unwrap() + 4.912358255434521).abs() < 1e-9);
    assert_eq!(m.zscore("a").unwrap(), log_odds_z(2, 0, 3, 2, 0.01, 0.02));

    let same = fit_fw::<f64>(&corpus, &in1, &in1, &FwConfig::default()).unwrap();
    assert!(same.zscores.iter().all(|&z| z == 0.0));

    let none = |_: &convoforge::UtteranceRef<'_>| false;
    assert!(matches!(
        fit_fw::<f64>(&corpus, &none, &in2, &FwConfig::default()),
        Err(Error::EmptyClass(1))
    ));
}

#[test]
fn diversity_exact_cases() {
    let mk = |texts: &[&str]| -> Corpus {
        let utts = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance::new(format!("u{i}"), "s", format!("c{i}"), *t))
            .collect();
        let mut c = build_corpus(utts, None).unwrap();
        TextCleaner::default().transform(&mut c).unwrap();
        c
    };
    let same = mk(&["a b c", "c b a", "a b c"]);
    assert_eq!(
        speaker_diversity::<f64>(&same, "s", 1, jensen_shannon)
            .unwrap()
            .value,
        Some(0.0)
    );
    let disjoint = mk(&["a b", "c d"]);
    let v = speaker_diversity::<f64>(&disjoint, "s", 1, jensen_shannon)
        .unwrap()
        .value
        .unwrap();
    assert!((v - LN_2).abs() <= 1e-12);

    let mut c = mk(&["a", "a", "b"]);
    UserConvoDiversity::default().transform(&mut c).unwrap();
    let m = c
        .speaker("s")
        .unwrap()
        .meta
        .get(DIVERSITY_KEY)
        .unwrap()
        .as_map()
        .unwrap();
    assert!((m["value"].as_f64().unwrap() - 2.0 / 3.0 * LN_2).abs() < 1e-12);

    let untokenized = build_corpus(vec![Utterance::new("u", "s", "c", "x")], None).unwrap();
    assert!(matches!(
        speaker_diversity::<f64>(&untokenized, "s", 1, jensen_shannon),
        Err(Error::MissingAnnotation { .. })
    ));
}

#[test]
fn politeness_requires_tokens_and_summarizes() {
    let mut c = build_corpus(
        vec![
            Utterance::new("a", "s", "c", "Please please help"),
            Utterance::new("b", "s", "c", "ok").reply_to("a"),
        ],
        None,
    )
    .unwrap();
    let stage = PolitenessStrategies::default();
    assert!(matches!(
        stage.transform(&mut c),
        Err(Error::MissingAnnotation { .. })
    ));
    TextCleaner::default().transform(&mut c).unwrap();
    stage.transform(&mut c).unwrap();
    let t = stage.summarize(&c).unwrap();
    assert_eq!(t.len(), 18);
    assert_eq!(t.row("please").unwrap()[0].as_f64(), Some(1.0));
}

#[test]
fn declarative_pipeline_matches_manual_steps() {
    let specs: Vec<StageSpec> = serde_json::from_str(
        r#"[{"name": "text_clean"}, {"name": "mixed_attribute"}, {"name": "politeness"}, {"name": "hyperconvo"}]"#,
    )
    .unwrap();
    let mut declared = toy_movie();
    build_pipeline(&specs, std::path::Path::new("."))
        .unwrap()
        .run(&mut declared, true)
        .unwrap();

    let mut manual = toy_movie();
    TextCleaner::default().transform(&mut manual).unwrap();
    SpeakerMix::default().transform(&mut manual).unwrap();
    PolitenessStrategies::default()
        .transform(&mut manual)
        .unwrap();
    HyperConvo.transform(&mut manual).unwrap();
    assert_eq!(declared, manual);
    assert!(declared
        .utterances()
        .all(|u| u.meta.get(POLITENESS_KEY).is_some()));

    let mixed: Vec<bool> = declared
        .conversations()
        .map(|c| c.meta.get("mixed").unwrap().as_bool().unwrap())
        .collect();
    assert_eq!(mixed.iter().filter(|&&m| m).count(), 6);
}
