mod common;

use std::sync::Arc;

use convoforge::ml::{
    fit_vocabulary, load_model, loss_and_gradient, predict, save_model, train_classifier,
    vectorize, Classifier, Forecaster, Level, LinearConfig, ObjectRef, VocabConfig,
    FORECAST_FINAL_KEY, FORECAST_KEY,
};
use convoforge::text::Tokenizer;
use convoforge::{
    Corpus, CorpusBuilder, MetaTable, SparseVector, Transformer, TraversalOrder, Utterance,
};
use proptest::prelude::*;

fn sparse(values: &[f64]) -> SparseVector {
    SparseVector::from_dense(values)
}

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>, Vec<f64>, f64)> {
    (1usize..=10, 2usize..=20).prop_flat_map(|(v, n)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, v), n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-2.0f64..2.0, v + 1),
            0.0f64..2.0,
        )
    })
}

/// Norm-relative error between two gradient vectors.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 =
        a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences((x, y, w, l2) in dataset()) {
        let xs: Vec<SparseVector> = x.iter().map(|r| sparse(r)).collect();
        let (_, g) = loss_and_gradient(&w, &xs, &y, l2);
        let h = 1e-5;
        let fd: Vec<f64> = (0..w.len())
            .map(|i| {
                let mut a = w.clone();
                let mut b = w.clone();
                a[i] += h;
                b[i] -= h;
                (loss_and_gradient(&a, &xs, &y, l2).0 - loss_and_gradient(&b, &xs, &y, l2).0) / (2.0 * h)
            })
            .collect();
        prop_assert!(relative_error(&g, &fd) < 1e-5);
    }

    #[test]
    fn duplicated_rows_give_same_model((x, y, _, _) in dataset()) {
        prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
        let xs: Vec<SparseVector> = x.iter().map(|r| sparse(r)).collect();
        let cfg = LinearConfig { learning_rate: Some(0.05), ..LinearConfig::default() };
        let once = train_classifier(&xs, &y, &cfg).unwrap();
        let xs2: Vec<SparseVector> = xs.iter().chain(&xs).cloned().collect();
        let y2: Vec<bool> = y.iter().chain(&y).copied().collect();
        let twice = train_classifier(&xs2, &y2, &cfg).unwrap();
        for (a, b) in once.weights.iter().zip(&twice.weights) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_is_monotone_with_default_step((x, y, _, l2) in dataset()) {
        prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
        let xs: Vec<SparseVector> = x.iter().map(|r| sparse(r)).collect();
        let cfg = LinearConfig { l2, epochs: 50, ..LinearConfig::default() };
        let m = train_classifier(&xs, &y, &cfg).unwrap();
        for pair in m.loss_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-9);
        }
        for xi in &xs {
            let (label, p) = predict(&m, xi).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert_eq!(label, p >= 0.5);
        }
    }
}

#[test]
fn one_dimensional_separable_data() {
    let xs: Vec<SparseVector> = [-1.0, -1.0, 1.0, 1.0]
        .iter()
        .map(|&v| sparse(&[v]))
        .collect();
    let y = [false, false, true, true];
    let m = train_classifier(
        &xs,
        &y,
        &LinearConfig {
            l2: 0.01,
            ..LinearConfig::default()
        },
    )
    .unwrap();
    let acc = xs
        .iter()
        .zip(y)
        .filter(|(x, y)| predict(&m, x).unwrap().0 == *y)
        .count();
    assert_eq!(acc, 4);
    let zero = convoforge::LinearModel {
        weights: vec![0.0, 0.0],
        config: LinearConfig::default(),
        loss_trace: vec![],
    };
    assert_eq!(predict(&zero, &sparse(&[5.0])).unwrap(), (true, 0.5));
}

fn tokenized(utts: Vec<Utterance>, convo_meta: Vec<(String, MetaTable)>) -> Corpus {
    let mut b = CorpusBuilder::new();
    for (id, m) in convo_meta {
        b = b.conversation_meta(id, m);
    }
    let mut c = b.build(utts).unwrap();
    Tokenizer.transform(&mut c).unwrap();
    c
}

#[test]
fn vocabulary_levels_and_model_files() {
    let c = tokenized(
        vec![
            Utterance::new("1", "s", "c1", "a b").at(1),
            Utterance::new("2", "t", "c1", "b c").reply_to("1").at(2),
            Utterance::new("3", "s", "c2", "d").at(3),
        ],
        vec![],
    );
    let all = |_: &ObjectRef<'_>| true;
    let v = fit_vocabulary(&c, Level::Utterance, &all, VocabConfig::default()).unwrap();
    assert_eq!(v.terms(), ["b", "a", "c", "d"]);
    let v = fit_vocabulary(
        &c,
        Level::Conversation,
        &all,
        VocabConfig {
            min_df: 2,
            ..VocabConfig::default()
        },
    );
    assert!(v.unwrap().is_empty());
    let v = fit_vocabulary(&c, Level::Speaker, &all, VocabConfig::default()).unwrap();
    assert_eq!(v.doc_freq("b"), Some(2));
    let none = |_: &ObjectRef<'_>| false;
    assert!(fit_vocabulary(&c, Level::Speaker, &none, VocabConfig::default()).is_err());

    let mut clf = Classifier::new(Level::Utterance, "label")
        .train_on(Arc::new(|o: &ObjectRef<'_>| o.id() != "3"));
    let mut labelled = c.clone();
    labelled
        .utterance_mut("1")
        .unwrap()
        .meta
        .insert("label", true);
    labelled
        .utterance_mut("2")
        .unwrap()
        .meta
        .insert("label", false);
    clf.fit(&labelled).unwrap();
    let (vocab, model) = clf.model().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&path, vocab, model).unwrap();
    let (v2, m2) = load_model(&path).unwrap();
    let x = vectorize::<f64>(&v2, &["a".to_owned(), "z".to_owned()]);
    assert_eq!(
        predict(&m2, &x).unwrap(),
        predict(model, &vectorize(vocab, &["a".to_owned()])).unwrap()
    );
}

fn label(v: bool) -> MetaTable {
    let mut m = MetaTable::new();
    m.insert("outcome", v);
    m
}

/// Labelled chain conversations; positives contain the word "x".
fn forecast_corpus(n: usize) -> Corpus {
    let mut utts = Vec::new();
    let mut meta = Vec::new();
    for i in 0..n {
        let cid = format!("c{i:02}");
        let positive = i % 2 == 0;
        let texts = if positive {
            ["start here", "then x happens", "and more"]
        } else {
            ["start here", "then y happens", "and more"]
        };
        for (k, t) in texts.iter().enumerate().take(1 + i % 3) {
            let mut u =
                Utterance::new(format!("{cid}.{k}"), format!("s{k}"), &cid, *t).at(k as i64);
            if k > 0 {
                u = u.reply_to(format!("{cid}.{}", k - 1));
            }
            utts.push(u);
        }
        meta.push((cid, label(positive)));
    }
    tokenized(utts, meta)
}

#[test]
fn forecaster_scores_every_utterance() {
    let mut c = forecast_corpus(12);
    let mut f = Forecaster::new("outcome");
    f.fit_transform(&mut c).unwrap();
    for u in c.utterances() {
        let s = u.meta.get(FORECAST_KEY).unwrap().as_f64().unwrap();
        assert!(s > 0.0 && s < 1.0);
        if u.text.contains(" x ") {
            assert!(s > 0.5, "{}", u.id);
        }
    }
    for convo in c.conversations() {
        let order = c.traverse(convo.id(), TraversalOrder::Bfs).unwrap();
        let last = order
            .last()
            .unwrap()
            .meta
            .get(FORECAST_KEY)
            .unwrap()
            .clone();
        assert_eq!(convo.meta.get(FORECAST_FINAL_KEY), Some(&last));
    }
    let t = f.summarize(&c).unwrap();
    assert_eq!(t.len(), 12);
}

#[test]
fn forecaster_is_causal() {
    let mut c = forecast_corpus(12);
    let mut f = Forecaster::new("outcome");
    f.fit(&c).unwrap();
    f.transform(&mut c).unwrap();
    let before = c.clone();
    for convo in before.conversations() {
        let order = before.traverse(convo.id(), TraversalOrder::Bfs).unwrap();
        for k in 0..order.len() {
            let mut mutated = before.clone();
            for u in &order[k + 1..] {
                mutated.utterance_mut(&u.id).unwrap().text = "x x x totally different".into();
            }
            Tokenizer.transform(&mut mutated).unwrap();
            f.transform(&mut mutated).unwrap();
            for u in &order[..=k] {
                assert_eq!(
                    mutated.utterance(&u.id).unwrap().meta.get(FORECAST_KEY),
                    before.utterance(&u.id).unwrap().meta.get(FORECAST_KEY)
                );
            }
        }
    }
}
