//! File formats: registry CSVs, feature-matrix CSVs, selection and ROC
//! report CSVs, split manifests and serialized models.
//!
//! All readers report malformed rows with file path and line number; all
//! writers emit deterministic, canonically ordered output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use solvencylab_core::eval::{AblationReport, DriftReport, RocCurve};
use solvencylab_core::matrix::{ColumnDef, FeatureMatrix, SampleKey};
use solvencylab_core::models::TrainedModel;
use solvencylab_core::registry::{
    BalanceSheetSnapshot, CompanyRecord, FilingEvent, Registry, LINE_ITEM_NAMES,
};
use solvencylab_core::selection::IvReport;
use solvencylab_core::windows::SplitBundle;
use solvencylab_core::{Date, FeatureFamily};

use crate::error::{CliError, Stage};

fn data_err(path: &Path, line: u64, detail: impl std::fmt::Display) -> CliError {
    CliError::data(
        Stage::Ingest,
        format!("{}:{line}: {detail}", path.display()),
    )
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>, CliError> {
    let file = File::open(path).map_err(|e| {
        CliError::data(Stage::Ingest, format!("cannot open {}: {e}", path.display()))
    })?;
    Ok(csv::ReaderBuilder::new().flexible(false).from_reader(BufReader::new(file)))
}

fn check_header(
    reader: &mut csv::Reader<BufReader<File>>,
    path: &Path,
    expected: &[&str],
) -> Result<(), CliError> {
    let headers = reader
        .headers()
        .map_err(|e| data_err(path, 1, e))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if headers != expected {
        return Err(data_err(
            path,
            1,
            format!("header {headers:?} does not match expected {expected:?}"),
        ));
    }
    Ok(())
}

fn parse_opt_f64(field: &str, path: &Path, line: u64, col: &str) -> Result<Option<f64>, CliError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| data_err(path, line, format!("invalid number {field:?} in column {col}")))
}

fn parse_date(field: &str, path: &Path, line: u64, col: &str) -> Result<Date, CliError> {
    Date::parse(field)
        .map_err(|_| data_err(path, line, format!("invalid date {field:?} in column {col}")))
}

/// The three registry input files.
#[derive(Debug, Clone)]
pub struct RegistryPaths {
    pub companies: PathBuf,
    pub balance_sheets: PathBuf,
    pub filings: PathBuf,
}

impl RegistryPaths {
    pub fn in_dir(dir: &Path) -> Self {
        RegistryPaths {
            companies: dir.join("companies.csv"),
            balance_sheets: dir.join("balance_sheets.csv"),
            filings: dir.join("filings.csv"),
        }
    }
}

pub const COMPANIES_HEADER: [&str; 4] = ["company_id", "sector", "incorporated_year", "bankrupt_date"];
pub const FILINGS_HEADER: [&str; 3] = ["company_id", "event_date", "event_type"];

fn balance_sheet_header() -> Vec<&'static str> {
    let mut h = vec!["company_id", "fiscal_year"];
    h.extend(LINE_ITEM_NAMES);
    h
}

pub fn load_registry(paths: &RegistryPaths) -> Result<Registry, CliError> {
    let mut companies = Vec::new();
    {
        let path = &paths.companies;
        let mut reader = open_reader(path)?;
        check_header(&mut reader, path, &COMPANIES_HEADER)?;
        for (i, record) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let record = record.map_err(|e| data_err(path, line, e))?;
            let incorporated_year = record[2]
                .parse::<i32>()
                .map_err(|_| data_err(path, line, format!("invalid year {:?}", &record[2])))?;
            let bankrupt_date = if record[3].is_empty() {
                None
            } else {
                Some(parse_date(&record[3], path, line, "bankrupt_date")?)
            };
            companies.push(CompanyRecord {
                company_id: record[0].to_string(),
                sector: record[1].to_string(),
                incorporated_year,
                bankrupt_date,
            });
        }
    }
    let mut snapshots = Vec::new();
    {
        let path = &paths.balance_sheets;
        let mut reader = open_reader(path)?;
        check_header(&mut reader, path, &balance_sheet_header())?;
        for (i, record) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let record = record.map_err(|e| data_err(path, line, e))?;
            let fiscal_year = record[1]
                .parse::<i32>()
                .map_err(|_| data_err(path, line, format!("invalid year {:?}", &record[1])))?;
            let mut snapshot = BalanceSheetSnapshot {
                company_id: record[0].to_string(),
                fiscal_year,
                ..Default::default()
            };
            let items: Vec<Option<f64>> = (0..LINE_ITEM_NAMES.len())
                .map(|idx| parse_opt_f64(&record[idx + 2], path, line, LINE_ITEM_NAMES[idx]))
                .collect::<Result<_, _>>()?;
            [
                &mut snapshot.total_assets,
                &mut snapshot.current_assets,
                &mut snapshot.quick_assets,
                &mut snapshot.cash,
                &mut snapshot.marketable_securities,
                &mut snapshot.fixed_assets,
                &mut snapshot.total_liabilities,
                &mut snapshot.current_liabilities,
                &mut snapshot.long_term_debt,
                &mut snapshot.equity,
            ]
            .into_iter()
            .zip(items)
            .for_each(|(slot, v)| *slot = v);
            snapshots.push(snapshot);
        }
    }
    let mut events = Vec::new();
    {
        let path = &paths.filings;
        let mut reader = open_reader(path)?;
        check_header(&mut reader, path, &FILINGS_HEADER)?;
        for (i, record) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let record = record.map_err(|e| data_err(path, line, e))?;
            events.push(FilingEvent {
                company_id: record[0].to_string(),
                event_date: parse_date(&record[1], path, line, "event_date")?,
                event_type: record[2].to_string(),
            });
        }
    }
    Registry::build(companies, snapshots, events)
        .map_err(|e| CliError::data(Stage::Ingest, e.to_string()))
}

fn create_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(Stage::Report, format!("mkdir {}: {e}", parent.display())))?;
    }
    let file = File::create(path).map_err(|e| {
        CliError::runtime(Stage::Report, format!("cannot create {}: {e}", path.display()))
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip representation keeps files byte-stable
    format!("{v}")
}

pub fn write_registry(registry: &Registry, paths: &RegistryPaths) -> Result<(), CliError> {
    let mut w = create_writer(&paths.companies)?;
    let io_err = |e: csv::Error| CliError::runtime(Stage::Report, e.to_string());
    w.write_record(COMPANIES_HEADER).map_err(io_err)?;
    for c in registry.companies() {
        w.write_record([
            c.company_id.as_str(),
            c.sector.as_str(),
            &c.incorporated_year.to_string(),
            &c.bankrupt_date.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))?;

    let mut w = create_writer(&paths.balance_sheets)?;
    w.write_record(balance_sheet_header()).map_err(io_err)?;
    for s in registry.snapshots() {
        let mut row = vec![s.company_id.clone(), s.fiscal_year.to_string()];
        row.extend(s.line_items().iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))?;

    let mut w = create_writer(&paths.filings)?;
    w.write_record(FILINGS_HEADER).map_err(io_err)?;
    for e in registry.events() {
        w.write_record([e.company_id.as_str(), &e.event_date.to_string(), e.event_type.as_str()])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))?;
    Ok(())
}

/// Family from the naming convention of generated columns: behavior features
/// are `rb_*`, generated accounting features `afe_*`, everything else is a
/// financial ratio.
pub fn family_of_column(name: &str) -> FeatureFamily {
    if name.starts_with("rb_") {
        FeatureFamily::Rb
    } else if name.starts_with("afe_") {
        FeatureFamily::Afe
    } else {
        FeatureFamily::Fr
    }
}

pub fn write_feature_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<(), CliError> {
    let mut w = create_writer(path)?;
    let io_err = |e: csv::Error| CliError::runtime(Stage::Report, e.to_string());
    let mut header = vec![
        "company_id".to_string(),
        "reference_year".to_string(),
        "window_length".to_string(),
        "label".to_string(),
    ];
    header.extend(matrix.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(io_err)?;
    for row in 0..matrix.n_rows() {
        let key = &matrix.keys()[row];
        let mut record = vec![
            key.company_id.clone(),
            key.reference_year.to_string(),
            key.window_length.to_string(),
            matrix.labels()[row].to_string(),
        ];
        record.extend(matrix.row(row).iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))
}

pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix, CliError> {
    let mut reader = open_reader(path)?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| data_err(path, 1, e))?.iter().map(str::to_string).collect();
    let fixed = ["company_id", "reference_year", "window_length", "label"];
    if headers.len() < fixed.len() || headers[..fixed.len()] != fixed {
        return Err(data_err(path, 1, "feature matrix header must start with key columns"));
    }
    let columns: Vec<ColumnDef> = headers[fixed.len()..]
        .iter()
        .map(|name| ColumnDef { name: name.clone(), family: family_of_column(name) })
        .collect();
    let n_features = columns.len();
    let mut matrix = FeatureMatrix::new(columns)
        .map_err(|e| data_err(path, 1, e))?;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| data_err(path, line, e))?;
        let key = SampleKey {
            company_id: record[0].to_string(),
            reference_year: record[1]
                .parse()
                .map_err(|_| data_err(path, line, "invalid reference_year"))?,
            window_length: record[2]
                .parse()
                .map_err(|_| data_err(path, line, "invalid window_length"))?,
        };
        let label: u8 = record[3].parse().map_err(|_| data_err(path, line, "invalid label"))?;
        let mut fv = solvencylab_core::FeatureVector::new();
        for c in 0..n_features {
            let name = &matrix.columns()[c].name.clone();
            let family = matrix.columns()[c].family;
            let value = parse_opt_f64(&record[c + 4], path, line, name)?;
            fv.push(name.clone(), family, value);
        }
        matrix
            .push_row(key, label, &fv)
            .map_err(|e| data_err(path, line, e))?;
    }
    Ok(matrix)
}

pub fn write_iv_report(report: &IvReport, path: &Path) -> Result<(), CliError> {
    let mut w = create_writer(path)?;
    let io_err = |e: csv::Error| CliError::runtime(Stage::Report, e.to_string());
    w.write_record(["feature", "family", "iv", "missing_rate", "selected"]).map_err(io_err)?;
    for row in &report.rows {
        w.write_record([
            row.feature.as_str(),
            row.family.as_str(),
            &fmt_f64(row.iv),
            &fmt_f64(row.missing_rate),
            &row.selected.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))
}

pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<(), CliError> {
    let mut w = create_writer(path)?;
    let io_err = |e: csv::Error| CliError::runtime(Stage::Report, e.to_string());
    w.write_record(["fpr", "tpr", "threshold"]).map_err(io_err)?;
    for p in &curve.points {
        w.write_record([fmt_f64(p.fpr), fmt_f64(p.tpr), fmt_f64(p.threshold)]).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))
}

pub fn read_roc_csv(path: &Path) -> Result<RocCurve, CliError> {
    let mut reader = open_reader(path)?;
    check_header(&mut reader, path, &["fpr", "tpr", "threshold"])?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| data_err(path, line, e))?;
        let parse = |s: &str| -> Result<f64, CliError> {
            if s == "inf" {
                return Ok(f64::INFINITY);
            }
            s.parse().map_err(|_| data_err(path, line, format!("invalid number {s:?}")))
        };
        points.push(solvencylab_core::eval::RocPoint {
            fpr: parse(&record[0])?,
            tpr: parse(&record[1])?,
            threshold: parse(&record[2])?,
        });
    }
    Ok(RocCurve { points })
}

/// One CSV per (family, feature set, window, split), named
/// `roc_<family>_<featureset>_<W>y_<split>.csv`. Returns the written paths.
pub fn emit_roc_csv(report: &AblationReport, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for cell in &report.cells {
        let name = format!(
            "roc_{}_{}_{}y_{}.csv",
            cell.family,
            cell.feature_set.as_str(),
            cell.window,
            cell.split.as_str()
        );
        let path = dir.join(name);
        write_roc_csv(&cell.roc, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// The full (family, feature set, window, split) AUC matrix.
pub fn write_auc_matrix(report: &AblationReport, path: &Path) -> Result<(), CliError> {
    let mut w = create_writer(path)?;
    let io_err = |e: csv::Error| CliError::runtime(Stage::Report, e.to_string());
    w.write_record(["family", "feature_set", "window", "split", "auc", "n_samples", "n_positive"])
        .map_err(io_err)?;
    for cell in &report.cells {
        w.write_record([
            cell.family.as_str(),
            cell.feature_set.as_str(),
            &cell.window.to_string(),
            cell.split.as_str(),
            &fmt_f64(cell.auc),
            &cell.n_samples.to_string(),
            &cell.n_positive.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))
}

/// Hybrid-minus-single AUC deltas on the test split, absolute and relative.
pub fn write_hybrid_deltas(report: &AblationReport, path: &Path) -> Result<(), CliError> {
    let mut w = create_writer(path)?;
    let io_err = |e: csv::Error| CliError::runtime(Stage::Report, e.to_string());
    w.write_record(["family", "feature_set", "window", "auc_delta", "auc_delta_relative_percent"])
        .map_err(io_err)?;
    for (family, fs, window, delta) in &report.hybrid_deltas {
        let base = fs
            .single_counterpart()
            .and_then(|single| report.cell(family, single, *window, solvencylab_core::eval::EvalSplit::Test))
            .map(|c| c.auc)
            .unwrap_or(f64::NAN);
        w.write_record([
            family.as_str(),
            fs.as_str(),
            &window.to_string(),
            &fmt_f64(*delta),
            &format!("{:.2}", 100.0 * delta / base),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))
}

pub fn write_drift_report(report: &DriftReport, path: &Path) -> Result<(), CliError> {
    let mut w = create_writer(path)?;
    let io_err = |e: csv::Error| CliError::runtime(Stage::Report, e.to_string());
    w.write_record([
        "family",
        "feature_set",
        "window",
        "test_auc",
        "pre_covid_delta",
        "post_covid_delta",
        "degrades_vs_single",
    ])
    .map_err(io_err)?;
    for row in &report.rows {
        w.write_record([
            row.family.as_str(),
            row.feature_set.as_str(),
            &row.window.to_string(),
            &fmt_f64(row.test_auc),
            &fmt_f64(row.pre_covid_delta),
            &fmt_f64(row.post_covid_delta),
            &row.degrades_vs_single.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::runtime(Stage::Report, e.to_string()))
}

/// Bankruptcy-rate percentage: positives/(positives+negatives) to two
/// decimals, e.g. 2625 and 110805 format as "2.31%".
pub fn rate_percent(positives: usize, negatives: usize) -> String {
    let total = positives + negatives;
    if total == 0 {
        return String::from("0.00%");
    }
    format!("{:.2}%", 100.0 * positives as f64 / total as f64)
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SplitCounts {
    pub n_samples: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub bankruptcy_rate: String,
}

fn split_counts(matrix: &FeatureMatrix) -> SplitCounts {
    let n_positive = matrix.labels().iter().filter(|&&y| y == 1).count();
    let n_negative = matrix.n_rows() - n_positive;
    SplitCounts {
        n_samples: matrix.n_rows(),
        n_positive,
        n_negative,
        bankruptcy_rate: rate_percent(n_positive, n_negative),
    }
}

/// JSON manifest of one window's four splits.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SplitManifest {
    pub window_length: u8,
    pub split_seed: u64,
    pub split_fraction: f64,
    pub splits: BTreeMap<String, SplitCounts>,
}

pub fn split_manifest(bundle: &SplitBundle) -> SplitManifest {
    let mut splits = BTreeMap::new();
    splits.insert("train".to_string(), split_counts(&bundle.train));
    splits.insert("test".to_string(), split_counts(&bundle.test));
    splits.insert("pre_covid".to_string(), split_counts(&bundle.pre_covid));
    splits.insert("post_covid".to_string(), split_counts(&bundle.post_covid));
    SplitManifest {
        window_length: bundle.window_length,
        split_seed: bundle.split_seed,
        split_fraction: bundle.split_fraction,
        splits,
    }
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(Stage::Report, format!("mkdir {}: {e}", parent.display())))?;
    }
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::runtime(Stage::Report, e.to_string()))?;
    let mut file = File::create(path).map_err(|e| {
        CliError::runtime(Stage::Report, format!("cannot create {}: {e}", path.display()))
    })?;
    file.write_all(json.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| CliError::runtime(Stage::Report, e.to_string()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| {
        CliError::data(Stage::Ingest, format!("cannot open {}: {e}", path.display()))
    })?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::data(Stage::Ingest, format!("{}: {e}", path.display())))
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), CliError> {
    write_json(model, path)
}

pub fn load_model(path: &Path) -> Result<TrainedModel, CliError> {
    read_json(path)
}
