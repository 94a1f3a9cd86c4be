//! Randomized property tests for the metric, selection and model layers.

use proptest::prelude::*;
use rand::Rng;
use solvencylab_core::eval::{auc, roc_curve};
use solvencylab_core::matrix::{ColumnDef, FeatureFamily, FeatureMatrix, FeatureVector, SampleKey};
use solvencylab_core::models::{fit, ForestConfig, GbdtConfig, LogisticConfig, ModelConfig};
use solvencylab_core::seeding;
use solvencylab_core::selection::{information_value, quantile_bins, select_features, BinningSpec};

/// Scores plus labels with both classes guaranteed.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..100).prop_flat_map(|n| {
        (
            proptest::collection::vec((0u8..5).prop_map(|q| q as f64 / 4.0), n),
            proptest::collection::vec(0u8..2, n - 2),
        )
            .prop_map(|(scores, mut labels)| {
                // force both classes
                labels.push(0);
                labels.push(1);
                (scores, labels)
            })
    })
}

fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
    let mut concordant = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                concordant += 1.0;
            } else if si == sj {
                concordant += 0.5;
            }
        }
    }
    concordant / pairs
}

proptest! {
    #[test]
    fn auc_equals_mann_whitney((scores, labels) in instance()) {
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((a - mann_whitney(&scores, &labels)).abs() < 1e-9);
    }

    #[test]
    fn auc_invariant_under_monotone_transform((scores, labels) in instance()) {
        let transformed: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&transformed, &labels).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn auc_negation_complements_for_tie_free(labels in proptest::collection::vec(0u8..2, 4..60)) {
        let mut labels = labels;
        labels.push(0);
        labels.push(1);
        // tie-free scores: distinct by construction
        let scores: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&neg, &labels).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_label_swap_symmetry((scores, labels) in instance()) {
        let swapped: Vec<u8> = labels.iter().map(|&y| 1 - y).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&neg, &swapped).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn roc_is_monotone_and_anchored((scores, labels) in instance()) {
        let curve = roc_curve(&scores, &labels).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for pair in curve.points.windows(2) {
            prop_assert!(pair[1].fpr >= pair[0].fpr);
            prop_assert!(pair[1].tpr >= pair[0].tpr);
        }
    }

    #[test]
    fn iv_invariant_under_monotone_transform(
        values in proptest::collection::vec(proptest::option::weighted(0.9, -50.0..50.0f64), 30..120),
        labels_seed in proptest::collection::vec(0u8..2, 30..120),
    ) {
        let n = values.len().min(labels_seed.len());
        let values = &values[..n];
        let mut labels = labels_seed[..n].to_vec();
        labels[0] = 0;
        labels[n - 1] = 1;
        prop_assume!(values.iter().any(|v| v.is_some()));
        let transformed: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| 2.0 * x + 1.0)).collect();
        let a = information_value(&quantile_bins(values, &labels, 10).unwrap(), 0.5).unwrap();
        let b = information_value(&quantile_bins(&transformed, &labels, 10).unwrap(), 0.5).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

/// Independent oracle: IV as the sum of per-bin contributions computed one
/// bin at a time from the published counts.
#[test]
fn iv_additive_over_bins() {
    let spec = BinningSpec {
        feature: "x".into(),
        edges: vec![1.0, 2.0, 3.0],
        has_missing_bin: false,
        good: vec![40, 30, 20, 10],
        bad: vec![5, 10, 25, 60],
    };
    let iv = information_value(&spec, 0.5).unwrap();
    let (g_total, b_total) = (100.0, 100.0);
    let mut oracle = 0.0;
    for (g, b) in spec.good.iter().zip(&spec.bad) {
        let gs = *g as f64 / g_total;
        let bs = *b as f64 / b_total;
        oracle += (gs - bs) * (gs / bs).ln();
    }
    assert!((iv - oracle).abs() < 1e-12);
}

fn labeled_matrix(columns: Vec<(&str, Vec<Option<f64>>)>, labels: &[u8]) -> FeatureMatrix {
    let defs: Vec<ColumnDef> = columns
        .iter()
        .map(|(name, _)| ColumnDef { name: (*name).into(), family: FeatureFamily::Fr })
        .collect();
    let mut m = FeatureMatrix::new(defs).unwrap();
    for (i, &y) in labels.iter().enumerate() {
        let mut fv = FeatureVector::new();
        for (name, values) in &columns {
            fv.push(*name, FeatureFamily::Fr, values[i]);
        }
        m.push_row(
            SampleKey { company_id: format!("c{i}"), reference_year: 2015, window_length: 1 },
            y,
            &fv,
        )
        .unwrap();
    }
    m
}

#[test]
fn iv_report_invariant_under_row_permutation() {
    let n = 200;
    let mut rng = seeding::rng(3, &[1]);
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() < 0.3)).collect();
    let values: Vec<Option<f64>> = labels
        .iter()
        .map(|&y| Some(y as f64 * 2.0 + rng.gen::<f64>()))
        .collect();
    let m = labeled_matrix(vec![("x", values.clone())], &labels);
    let report = select_features(&m, 10, 0.02, 0.7).unwrap();

    // reversed row order
    let rev_labels: Vec<u8> = labels.iter().rev().copied().collect();
    let rev_values: Vec<Option<f64>> = values.iter().rev().copied().collect();
    let rev = labeled_matrix(vec![("x", rev_values)], &rev_labels);
    let rev_report = select_features(&rev, 10, 0.02, 0.7).unwrap();
    assert_eq!(report.rows, rev_report.rows);
}

#[test]
fn selection_examples() {
    let n = 10_000;
    let mut rng = seeding::rng(42, &[7]);
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() < 0.2)).collect();
    // pure noise, independent of the labels
    let noise: Vec<Option<f64>> = (0..n).map(|_| Some(rng.gen::<f64>())).collect();
    // perfect separation
    let perfect: Vec<Option<f64>> = labels.iter().map(|&y| Some(y as f64)).collect();
    // informative but 80% missing
    let mostly_missing: Vec<Option<f64>> = labels
        .iter()
        .map(|&y| (rng.gen::<f64>() >= 0.8).then_some(y as f64))
        .collect();
    let m = labeled_matrix(
        vec![("noise", noise), ("perfect", perfect), ("mostly_missing", mostly_missing)],
        &labels,
    );
    let report = select_features(&m, 10, 0.02, 0.7).unwrap();
    let noise_row = report.rows.iter().find(|r| r.feature == "noise").unwrap();
    assert!(noise_row.iv < 0.02, "noise IV {}", noise_row.iv);
    assert!(!noise_row.selected);
    let missing_row = report.rows.iter().find(|r| r.feature == "mostly_missing").unwrap();
    assert!(missing_row.missing_rate >= 0.7);
    assert!(!missing_row.selected, "high-missing feature must not be selected");
    // maximal IV and sorted first
    assert_eq!(report.rows[0].feature, "perfect");
    assert!(report.rows[0].selected);
}

fn two_column_fixture() -> FeatureMatrix {
    let n = 40;
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
    let a: Vec<Option<f64>> = (0..n).map(|i| Some(i as f64)).collect();
    let b: Vec<Option<f64>> = (0..n).map(|i| Some(((i * 13) % n) as f64)).collect();
    let m = labeled_matrix(vec![("a", a), ("b", b)], &labels);
    m
}

#[test]
fn scoring_tolerates_consistent_column_permutation() {
    let m = two_column_fixture();
    let permuted = m.select_columns(&[1, 0]);
    for config in [
        ModelConfig::Logistic(LogisticConfig { max_iter: 100, ..Default::default() }),
        ModelConfig::RandomForest(ForestConfig { n_trees: 10, ..Default::default() }),
        ModelConfig::Gbdt(GbdtConfig { rounds: 10, ..Default::default() }),
    ] {
        let model = fit(&config, &m, 5).unwrap();
        let straight = model.predict_proba(&m).unwrap();
        let shuffled = model.predict_proba(&permuted).unwrap();
        assert_eq!(straight, shuffled);
    }
}

#[test]
fn forest_invariant_under_monotone_feature_transform() {
    let n = 60;
    let labels: Vec<u8> = (0..n).map(|i| u8::from((i * 11) % n >= n / 2)).collect();
    let x: Vec<Option<f64>> = (0..n).map(|i| Some(((i * 7) % n) as f64)).collect();
    let tx: Vec<Option<f64>> = x.iter().map(|v| v.map(|x| 2.0 * x + 1.0)).collect();
    let m = labeled_matrix(vec![("x", x)], &labels);
    let mt = labeled_matrix(vec![("x", tx)], &labels);
    let cfg = ModelConfig::RandomForest(ForestConfig { n_trees: 20, max_depth: 5, ..Default::default() });
    let a = auc(&fit(&cfg, &m, 8).unwrap().predict_proba(&m).unwrap(), &labels).unwrap();
    let b = auc(&fit(&cfg, &mt, 8).unwrap().predict_proba(&mt).unwrap(), &labels).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn row_permutation_permutes_scores() {
    let m = two_column_fixture();
    let n = m.n_rows();
    let reversed_idx: Vec<usize> = (0..n).rev().collect();
    let reversed = m.select_rows(&reversed_idx);
    let model = fit(
        &ModelConfig::Gbdt(GbdtConfig { rounds: 10, ..Default::default() }),
        &m,
        2,
    )
    .unwrap();
    let straight = model.predict_proba(&m).unwrap();
    let mut back: Vec<f64> = model.predict_proba(&reversed).unwrap();
    back.reverse();
    assert_eq!(straight, back);
}

#[test]
fn empty_matrix_scores_empty() {
    let m = two_column_fixture();
    let model = fit(
        &ModelConfig::Logistic(LogisticConfig { max_iter: 50, ..Default::default() }),
        &m,
        0,
    )
    .unwrap();
    let empty = m.select_rows(&[]);
    assert!(model.predict_proba(&empty).unwrap().is_empty());
}
