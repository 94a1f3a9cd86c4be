//! Round-trip and error-reporting tests for the file formats.

use std::path::Path;

use solvencylab::io::{self, RegistryPaths};
use solvencylab_core::eval::{roc_curve, RocCurve, RocPoint};
use solvencylab_core::features::FeatureConfig;
use solvencylab_core::selection::select_features;
use solvencylab_core::synth::{generate_registry, CovidRegime, SynthConfig};
use solvencylab_core::windows::build_samples;

fn small_registry() -> solvencylab_core::Registry {
    let cfg = SynthConfig {
        n_companies: 120,
        covid: Some(CovidRegime::standard()),
        ..SynthConfig::default()
    };
    generate_registry(&cfg, 5).unwrap().0
}

fn read_all(paths: &RegistryPaths) -> Vec<Vec<u8>> {
    [&paths.companies, &paths.balance_sheets, &paths.filings]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect()
}

#[test]
fn registry_round_trips_through_csv() {
    let registry = small_registry();
    let dir = tempfile::tempdir().unwrap();
    let paths = RegistryPaths::in_dir(dir.path());
    io::write_registry(&registry, &paths).unwrap();
    let reloaded = io::load_registry(&paths).unwrap();

    let original: Vec<_> = registry.companies().cloned().collect();
    let round: Vec<_> = reloaded.companies().cloned().collect();
    assert_eq!(original, round);
    let original: Vec<_> = registry.snapshots().cloned().collect();
    let round: Vec<_> = reloaded.snapshots().cloned().collect();
    assert_eq!(original, round);
    assert_eq!(registry.events(), reloaded.events());

    // writing the reloaded registry reproduces the same bytes
    let dir2 = tempfile::tempdir().unwrap();
    let paths2 = RegistryPaths::in_dir(dir2.path());
    io::write_registry(&reloaded, &paths2).unwrap();
    assert_eq!(read_all(&paths), read_all(&paths2));
}

#[test]
fn malformed_rows_report_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let paths = RegistryPaths::in_dir(dir.path());
    io::write_registry(&small_registry(), &paths).unwrap();

    // corrupt line 3 of companies.csv (first data row is line 2)
    let text = std::fs::read_to_string(&paths.companies).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let bad = lines[2].replace(&lines[2][lines[2].rfind(',').unwrap()..], ",not-a-date");
    lines[2] = &bad;
    std::fs::write(&paths.companies, lines.join("\n")).unwrap();

    let err = io::load_registry(&paths).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let msg = err.to_string();
    assert!(msg.contains("companies.csv:3:"), "message lacks file:line — {msg}");
    assert!(msg.contains("not-a-date"), "message lacks the offending value — {msg}");
}

#[test]
fn wrong_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let paths = RegistryPaths::in_dir(dir.path());
    io::write_registry(&small_registry(), &paths).unwrap();
    std::fs::write(&paths.filings, "company_id,date,event_type\n").unwrap();
    let err = io::load_registry(&paths).unwrap_err();
    assert!(err.to_string().contains("header"), "{err}");
}

fn sample_matrix() -> solvencylab_core::FeatureMatrix {
    let registry = small_registry();
    let features = FeatureConfig::default();
    build_samples(&registry, &features, 2, 2015).unwrap().matrix
}

#[test]
fn feature_matrix_round_trips_through_csv() {
    let matrix = sample_matrix();
    assert!(matrix.n_rows() > 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.csv");
    io::write_feature_matrix(&matrix, &path).unwrap();
    let reloaded = io::read_feature_matrix(&path).unwrap();
    assert_eq!(matrix, reloaded);
}

#[test]
fn family_inference_follows_column_prefixes() {
    use solvencylab_core::FeatureFamily;
    assert_eq!(io::family_of_column("rb_total_events"), FeatureFamily::Rb);
    assert_eq!(io::family_of_column("afe_div_cash_equity"), FeatureFamily::Afe);
    assert_eq!(io::family_of_column("current_ratio"), FeatureFamily::Fr);
}

#[test]
fn iv_report_csv_has_expected_shape() {
    let matrix = sample_matrix();
    let report = select_features(&matrix, 10, 0.02, 0.7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("iv_report.csv");
    io::write_iv_report(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("feature,family,iv,missing_rate,selected"));
    assert_eq!(lines.count(), report.rows.len());
}

#[test]
fn roc_csv_round_trips_exactly() {
    let scores = vec![0.1, 0.4, 0.4, 0.8, 0.65, 0.3];
    let labels = vec![0, 0, 1, 1, 1, 0];
    let curve = roc_curve(&scores, &labels).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roc.csv");
    io::write_roc_csv(&curve, &path).unwrap();
    let reloaded = io::read_roc_csv(&path).unwrap();
    assert_eq!(curve, reloaded);
    // the anchor threshold is +inf and must survive the round trip
    assert!(reloaded.points[0].threshold.is_infinite());
}

fn toy_report(cells: &[(&str, solvencylab_core::eval::FeatureSet)]) -> solvencylab_core::eval::AblationReport {
    use solvencylab_core::eval::{AblationCell, AblationReport, EvalSplit};
    let mut report = AblationReport::default();
    for (family, fs) in cells {
        report.cells.push(AblationCell {
            family: family.to_string(),
            feature_set: *fs,
            window: 1,
            split: EvalSplit::Test,
            auc: 0.5,
            n_samples: 10,
            n_positive: 2,
            roc: RocCurve {
                points: vec![
                    RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY },
                    RocPoint { fpr: 1.0, tpr: 1.0, threshold: 0.1 },
                ],
            },
        });
    }
    report
}

#[test]
fn emit_roc_csv_writes_one_file_per_cell() {
    use solvencylab_core::eval::FeatureSet;
    let report = toy_report(&[
        ("gbdt", FeatureSet::Fr),
        ("gbdt", FeatureSet::FrRb),
        ("logistic", FeatureSet::Fr),
        ("logistic", FeatureSet::FrRb),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let written = io::emit_roc_csv(&report, dir.path()).unwrap();
    assert_eq!(written.len(), 4);
    assert!(written.iter().any(|p| p.ends_with(Path::new("roc_gbdt_FR+RB_1y_test.csv"))));
    for path in &written {
        assert_eq!(io::read_roc_csv(path).unwrap(), report.cells[0].roc);
    }
}

#[test]
fn emit_roc_csv_on_empty_report_succeeds_with_zero_files() {
    let report = toy_report(&[]);
    let dir = tempfile::tempdir().unwrap();
    let written = io::emit_roc_csv(&report, dir.path()).unwrap();
    assert!(written.is_empty());
}

#[test]
fn rate_percent_formats_edge_cases() {
    assert_eq!(io::rate_percent(0, 0), "0.00%");
    assert_eq!(io::rate_percent(1, 3), "25.00%");
    assert_eq!(io::rate_percent(1, 0), "100.00%");
}
