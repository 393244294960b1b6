use super::*;
use crate::ingest::ReviewDump;
use crate::learn::{Algorithm, AlgorithmConfig, TreeParams};
use crate::model::fixtures::{self, comment, patchset, ts};
use crate::model::{ChangeStatus, CommentThread};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lex() -> &'static Lexicons {
    Lexicons::builtin()
}

/// The shared fixture change plus an earlier change by the same author that
/// bob reviewed.
fn history() -> (ReviewChange, ReviewDump) {
    let mut change = fixtures::change();
    change.threads[0].comments[0].text = "Why is fooBar null here? Please use a guard.".into();
    change.threads[0].comments[0].code_context = Some("if fooBar == null { return guard; }".into());
    let earlier = ReviewChange {
        change_id: "c0".into(),
        project_id: "p1".into(),
        author_id: "alice".into(),
        created_at: ts(1, 1),
        status: ChangeStatus::Merged,
        patchsets: vec![patchset(1, ts(1, 1), &[("src/a.rs", &[4])])],
        threads: vec![CommentThread {
            thread_id: "t0".into(),
            file_path: "src/a.rs".into(),
            line: 4,
            origin_patchset: 1,
            comments: vec![comment("k0", "t0", "bob", ts(1, 2), 1, "Typo.")],
        }],
    };
    let dump = ReviewDump {
        changes: vec![earlier, change.clone()],
        ..ReviewDump::default()
    };
    (change, dump)
}

#[test]
fn hand_computed_row() {
    let (change, dump) = history();
    let k1 = &change.threads[0].comments[0];
    let v = Vectorizer::fit_texts(&["guard null"], 10).unwrap();
    let out = extract(k1, &change, &HistoryIndex::new(&dump), &v, lex()).unwrap();
    assert!(!out.missing_code_context);
    let fv = &out.vector;
    let expected: [(&str, f64); 25] = [
        ("comment_sentiment", 0.0),
        ("question_ratio", 0.5),
        // fooBar (camelCase) and null (keyword)
        ("code_element_number", 2.0),
        ("code_element_ratio", 2.0 / 9.0),
        ("similarity", 0.5101490193104812),
        // 9 words, 2 sentences, 10 syllables
        ("readability", 206.835 - 1.015 * 4.5 - 84.6 * 10.0 / 9.0),
        ("word_count", 9.0),
        // why, is, here, a
        ("stop_word_ratio", 4.0 / 9.0),
        ("author_responded", 1.0),
        ("review_interval", 3.0 * 3600.0),
        ("patch_id", 1.0),
        ("num_patches", 3.0),
        // patchset 2 changed line 12, two lines from the thread's line 10
        ("change_trigger", 1.0),
        ("line_change", 2.0),
        ("confirmatory_response", 1.0),
        ("gratitude", 0.0),
        ("reply_sentiment", 0.0),
        ("is_last_patch", 0.0),
        ("thread_length", 2.0),
        ("num_participant", 2.0),
        ("review_status", 1.0),
        ("code_reviewership", 1.0),
        ("code_ownership", 0.0),
        ("reviewing_experience", 1.0),
        ("developer_experience", 2.0),
    ];
    for (name, want) in expected {
        let got = fv.get(name).unwrap();
        assert!((got - want).abs() < 1e-9, "{name}: got {got}, want {want}");
    }
    // the message block only sees vocabulary terms: guard and null, equal weight
    assert_eq!(fv.tfidf.entries.len(), 2);
    assert!((fv.tfidf.entries[0].1 - fv.tfidf.entries[1].1).abs() < 1e-12);
}

#[test]
fn no_replies_and_last_patch() {
    let (mut change, dump) = history();
    change.threads[0].comments.truncate(1);
    change.threads[0].comments[0].patchset_number = 3;
    change.threads[0].comments[0].written_at = ts(3, 10);
    change.threads[0].comments[0].code_context = None;
    let k1 = change.threads[0].comments[0].clone();
    let v = Vectorizer::fit_texts(&["x"], 10).unwrap();
    let out = extract(&k1, &change, &HistoryIndex::new(&dump), &v, lex()).unwrap();
    let fv = &out.vector;
    for name in ["author_responded", "confirmatory_response", "gratitude", "reply_sentiment", "similarity"] {
        assert_eq!(fv.get(name), Some(0.0), "{name}");
    }
    assert_eq!(fv.get("is_last_patch"), Some(1.0));
    assert_eq!(fv.get("review_status"), Some(1.0));
    assert_eq!(fv.get("line_change"), Some(999.0));
    assert!(out.missing_code_context);
}

#[test]
fn comment_from_another_change() {
    let (change, dump) = history();
    let stray = comment("zz", "t1", "bob", ts(1, 12), 1, "hm");
    let v = Vectorizer::fit_texts(&["x"], 10).unwrap();
    assert!(matches!(
        extract(&stray, &change, &HistoryIndex::new(&dump), &v, lex()),
        Err(FeatureError::CommentNotInChange(..))
    ));
}

#[test]
fn similarity_ignores_stop_words_and_syntax() {
    assert_eq!(code_similarity("the", "the", lex()), 0.0);
    assert!((code_similarity("fooBar();", "foobar", lex()) - 1.0).abs() < 1e-12);
    assert_eq!(code_similarity("rename", "x = y;", lex()), 0.0);
}

#[test]
fn design_layout() {
    let fv = FeatureVector {
        tfidf: SparseVector { dim: 3, entries: vec![(1, 0.5)] },
        scalars: std::array::from_fn(|i| i as f64),
    };
    let features = vec!["similarity".to_string(), TFIDF.to_string(), "comment_sentiment".to_string()];
    let d = design_matrix(std::slice::from_ref(&fv), &features, 3).unwrap();
    assert_eq!(d.x.row(0), &[0.0, 0.5, 0.0, 0.0, 4.0]);
    assert_eq!(d.groups[0], (TFIDF.to_string(), 0..3));
    assert_eq!(d.groups[2], ("similarity".to_string(), 4..5));
    assert!(matches!(
        design_row(&fv, &features, 5),
        Err(FeatureError::Learn(LearnError::SchemaMismatch { expected: 5, got: 3 }))
    ));
    assert!(matches!(
        design_row(&fv, &["bogus".to_string()], 3),
        Err(FeatureError::UnknownFeature(_))
    ));
}

fn toy_vectors(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let mut s = [0.0; NUM_SCALARS];
        for v in s.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let signal = s[12] > 0.5;
        let label = if rng.gen_bool(0.05) { !signal } else { signal };
        out.push(FeatureVector { tfidf: SparseVector::zeros(0), scalars: s });
        y.push(label);
    }
    (out, y)
}

#[test]
fn duplicate_feature_keeps_stronger_member() {
    // column 1 = column 0 plus small noise, column 1 tracks y more closely
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        let label = i % 3 != 0;
        let a: f64 = rng.gen_range(0.0..1.0) + if label { 0.6 } else { 0.0 };
        let b = a + if label { 0.05 } else { -0.05 };
        rows.push([a, b, rng.gen_range(0.0..1.0), 7.0]);
        y.push(label);
    }
    let x = Matrix::from_rows(&rows);
    let names = ["a", "b", "noise", "constant"];
    let s = drop_correlated(&x, &names, &y, 0.9).unwrap();
    assert_eq!(s.kept, vec![1, 2]);
    assert!(s.audit.contains(&AuditEntry::DroppedDegenerate { feature: "constant".into() }));
    let dropped_a = s.audit.iter().any(|e| matches!(e,
        AuditEntry::DroppedCorrelated { feature, correlated_with, feature_target_r, kept_target_r, .. }
            if feature == "a" && correlated_with == "b" && kept_target_r.abs() > feature_target_r.abs()));
    assert!(dropped_a, "{:?}", s.audit);
}

#[test]
fn uncorrelated_features_all_kept() {
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    let s = drop_correlated(&x, &["a", "b"], &[true, false, true, false], 0.9).unwrap();
    assert_eq!(s.kept, vec![0, 1]);
    assert!(s.audit.is_empty());
}

#[test]
fn identical_copies_leave_one() {
    let (vectors, y) = toy_vectors(120, 2);
    let copies: Vec<FeatureVector> = vectors
        .iter()
        .map(|v| FeatureVector { tfidf: v.tfidf.clone(), scalars: [v.scalars[0]; NUM_SCALARS] })
        .collect();
    let sel = FeatureSelection::fit(&copies, &y, 0, 0.9, None).unwrap();
    assert_eq!(sel.final_selected.len(), 1);
}

fn rfe_config() -> RfeConfig {
    RfeConfig {
        algorithm: AlgorithmConfig::DecisionTree(TreeParams { max_depth: 4, ..TreeParams::default() }),
        folds: 5,
        seed: 42,
        smote: true,
    }
}

#[test]
fn rfe_drops_pure_noise() {
    let (vectors, y) = toy_vectors(300, 7);
    let names = vec!["change_trigger".to_string(), "similarity".to_string(), "word_count".to_string()];
    let design = design_matrix(&vectors, &names, 0).unwrap();
    let out = rfe_cv(&design, &y, &rfe_config()).unwrap();
    assert_eq!(out.selected, vec!["change_trigger".to_string()]);
    assert_eq!(out.steps.len(), 3);
    assert_eq!(rfe_cv(&design, &y, &rfe_config()).unwrap(), out);
}

#[test]
fn full_selection_is_reproducible() {
    let (vectors, y) = toy_vectors(150, 11);
    let a = FeatureSelection::fit(&vectors, &y, 0, 0.9, Some(&rfe_config())).unwrap();
    let b = FeatureSelection::fit(&vectors, &y, 0, 0.9, Some(&rfe_config())).unwrap();
    assert_eq!(a, b);
    assert!(a.final_selected.contains(&"change_trigger".to_string()));
    assert!(a.final_selected.iter().all(|f| a.kept_after_correlation.contains(f)));
    assert_eq!(rfe_config().algorithm.algorithm(), Algorithm::DecisionTree);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_surviving_pair_reaches_threshold(
        rows in proptest::collection::vec(proptest::collection::vec(0u8..4, 6), 8..30),
        flags in proptest::collection::vec(any::<bool>(), 30),
        threshold in 0.3f64..0.95,
    ) {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let x = Matrix::from_rows(&rows);
        let y = &flags[..rows.len()];
        let names = ["a", "b", "c", "d", "e", "f"];
        let s = drop_correlated(&x, &names, y, threshold).unwrap();
        for (i, &p) in s.kept.iter().enumerate() {
            for &q in &s.kept[i + 1..] {
                prop_assert!(pearson(&x.column(p), &x.column(q)).abs() < threshold);
            }
        }
        prop_assert_eq!(s.kept.len() + s.audit.len(), 6);
    }

    #[test]
    fn extracted_values_are_finite(
        text in "\\PC{0,60}",
        code in proptest::option::of("\\PC{0,60}"),
        line in 1u32..40,
        later in proptest::collection::vec(1u32..60, 0..5),
    ) {
        let (mut change, dump) = history();
        change.threads[0].line = line;
        change.patchsets[1].files[0].changed_new_lines = later.into_iter().collect();
        change.threads[0].comments[0].text = text.clone();
        change.threads[0].comments[0].code_context = code;
        let k1 = change.threads[0].comments[0].clone();
        let v = Vectorizer::fit_texts(&[text.as_str(), "guard"], 50).unwrap();
        let out = extract(&k1, &change, &HistoryIndex::new(&dump), &v, lex()).unwrap();
        prop_assert!(out.vector.scalars.iter().all(|s| s.is_finite()));
        for name in ["author_responded", "change_trigger", "confirmatory_response", "gratitude", "is_last_patch"] {
            let b = out.vector.get(name).unwrap();
            prop_assert!(b == 0.0 || b == 1.0);
        }
        prop_assert!(out.vector.tfidf.entries.iter().all(|(_, w)| w.is_finite()));
    }
}
