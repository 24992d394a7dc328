use std::collections::BTreeMap;

use proptest::prelude::*;
use sentitrend::corpus::split;
use sentitrend::eval::{confusion, metrics};
use sentitrend::features::idf_weight;
use sentitrend::models::{logistic, train_logreg, train_nb, LinearKind, LinearModel, Prediction};
use sentitrend::preprocess::{process_text, tokenize};
use sentitrend::service::TrendWindow;
use sentitrend::{Label, LabeledDocument, PreprocessConfig, SparseVector, TfIdfModel, TokenSequence, TrainConfig};

fn label() -> impl Strategy<Value = Label> {
    (0usize..3).prop_map(|i| Label::ALL[i])
}

fn word() -> impl Strategy<Value = String> {
    "[a-e]{1,3}"
}

fn token_lists() -> impl Strategy<Value = Vec<TokenSequence>> {
    prop::collection::vec(prop::collection::vec(word(), 0..8), 1..12)
        .prop_map(|docs| docs.into_iter().map(TokenSequence::from_iter).collect())
}

fn sparse_rows(n: usize, dim: usize) -> impl Strategy<Value = Vec<SparseVector>> {
    prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), -2.0..2.0f64], dim), n)
        .prop_map(|rows| rows.iter().map(|r| SparseVector::from_dense(r)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn split_is_a_stratified_partition(labels in prop::collection::vec(label(), 1..80), seed in any::<u64>()) {
        let docs: Vec<LabeledDocument> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| LabeledDocument::new(i.to_string(), "x", *l))
            .collect();
        let s = split(&docs, 0.8, seed).unwrap();
        prop_assert_eq!(s.train.len() + s.test.len(), docs.len());
        let mut ids: Vec<usize> = s.train.iter().chain(&s.test).map(|d| d.id.parse().unwrap()).collect();
        ids.sort();
        prop_assert_eq!(ids, (0..docs.len()).collect::<Vec<_>>());
        let mut per_class: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
        for d in &s.train { per_class.entry(d.label).or_default().0 += 1; }
        for d in &s.test { per_class.entry(d.label).or_default().1 += 1; }
        for (tr, te) in per_class.values() {
            let exact = 0.8 * (tr + te) as f64;
            prop_assert!((*tr as f64 - exact).abs() <= 1.0 + 1e-9);
        }
        prop_assert_eq!(split(&docs, 0.8, seed).unwrap(), s);
    }

    #[test]
    fn preprocessing_is_idempotent(text in "\\PC{0,60}") {
        let cfg = PreprocessConfig::default();
        let once = process_text(&text, &cfg);
        prop_assert_eq!(process_text(&once.join(" "), &cfg), once);
    }

    #[test]
    fn whitespace_runs_do_not_matter(words in prop::collection::vec("[a-zA-Z']{1,6}", 0..10), gaps in prop::collection::vec("[ \t\n]{1,4}", 10)) {
        let single = words.join(" ");
        let mut spaced = String::new();
        for (w, g) in words.iter().zip(&gaps) {
            spaced.push_str(g);
            spaced.push_str(w);
        }
        let cfg = PreprocessConfig::default();
        prop_assert_eq!(process_text(&single, &cfg), process_text(&spaced, &cfg));
        prop_assert_eq!(tokenize(&single), tokenize(&spaced));
    }

    #[test]
    fn tfidf_rows_are_unit_or_zero(corpus in token_lists(), probe in prop::collection::vec(word(), 0..10)) {
        let model = TfIdfModel::fit(&corpus, 50);
        for tokens in corpus.iter().chain(std::iter::once(&TokenSequence::from_iter(probe))) {
            let v = model.transform(tokens);
            prop_assert!(v.is_zero() || (v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tfidf_ignores_token_order(corpus in token_lists(), tokens in prop::collection::vec(word(), 0..10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let model = TfIdfModel::fit(&corpus, 50);
        let mut shuffled = tokens.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(
            model.transform(&TokenSequence::from_iter(tokens)),
            model.transform(&TokenSequence::from_iter(shuffled))
        );
    }

    #[test]
    fn idf_of_ubiquitous_term_is_one(n in 1usize..1_000_000) {
        prop_assert_eq!(idf_weight(n, n), 1.0);
    }

    #[test]
    fn naive_bayes_distributions_sum_to_one(x in sparse_rows(6, 5), ys in prop::collection::vec(label(), 6), alpha in 0.01..5.0f64) {
        let x: Vec<SparseVector> = x.into_iter().map(|v| SparseVector::from_pairs(v.dim(), v.iter().map(|(i, w)| (i, w.abs())))).collect();
        let m = train_nb(&x, &ys, alpha).unwrap();
        for row in &m.feature_log_prob {
            prop_assert!((row.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
        }
        prop_assert!((m.class_log_prior.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn logistic_scores_form_a_simplex(x in sparse_rows(8, 4), ys in prop::collection::vec(label(), 8), probe in prop::collection::vec(-50.0..50.0f64, 4)) {
        let cfg = TrainConfig { max_epochs: 50, ..TrainConfig::default() };
        let m = train_logreg(&x, &ys, &cfg).unwrap();
        let p = m.predict(&SparseVector::from_dense(&probe)).unwrap();
        prop_assert!(p.scores.iter().all(|s| *s >= 0.0));
        prop_assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(logistic::softmax(&m.margins(&SparseVector::from_dense(&probe))), p.scores);
    }

    #[test]
    fn svm_label_survives_positive_scaling(
        w in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 3),
        b in prop::collection::vec(-3.0..3.0f64, 3),
        probe in prop::collection::vec(-3.0..3.0f64, 3),
        k in 1e-3..1e3f64,
    ) {
        let mut m = LinearModel::zeros(3, LinearKind::Svm, 1.0);
        m.weights.clone_from_slice(&w);
        m.bias.copy_from_slice(&b);
        let mut scaled = m.clone();
        for c in 0..3 {
            scaled.weights[c].iter_mut().for_each(|v| *v *= k);
            scaled.bias[c] *= k;
        }
        let x = SparseVector::from_dense(&probe);
        let a = m.predict(&x).unwrap();
        let s = scaled.predict(&x).unwrap();
        let top = a.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ties = a.scores.iter().filter(|v| (top - **v).abs() < 1e-9).count();
        if ties == 1 {
            prop_assert_eq!(a.label, s.label);
        }
    }

    #[test]
    fn ties_break_to_lowest_index(top in -10.0..10.0f64, low in -30.0..-11.0f64, mask in 1u8..8) {
        let scores: [f64; 3] = std::array::from_fn(|c| if mask & (1 << c) != 0 { top } else { low });
        let expected = Label::ALL[mask.trailing_zeros() as usize];
        prop_assert_eq!(Prediction::from_scores(scores).label, expected);
    }

    #[test]
    fn metrics_identities(pairs in prop::collection::vec((label(), label()), 1..200)) {
        let (t, p): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
        let cm = confusion(&t, &p).unwrap();
        prop_assert_eq!(cm.total() as usize, t.len());
        let m = metrics(&cm).unwrap();
        prop_assert!((m.weighted.recall - m.accuracy).abs() < 1e-12);
        for c in &m.per_class {
            for v in [c.precision, c.recall, c.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if c.precision + c.recall > 0.0 {
                prop_assert!(c.f1 >= c.precision.min(c.recall) - 1e-12);
                prop_assert!(c.f1 <= c.precision.max(c.recall) + 1e-12);
            }
        }
    }

    #[test]
    fn window_is_order_independent(
        recs in prop::collection::vec((0i64..3_000_000, label()), 0..200),
        seed in any::<u64>(),
        retained in 1usize..40,
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut a = TrendWindow::new(60, retained);
        let mut b = TrendWindow::new(60, retained);
        for (ts, l) in &recs { a.record(*ts, *l); }
        for (ts, l) in &shuffled { b.record(*ts, *l); }
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.retained_total() + a.dropped_late(), recs.len() as u64);
    }
}
