//! Information-value feature selection: quantile binning, the IV statistic
//! and the threshold-based selection report.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::math;
use crate::matrix::{FeatureFamily, FeatureMatrix};

/// Smoothing constant applied to per-bin counts when any count is zero,
/// keeping exact IV values on clean fixtures.
pub const DEFAULT_SMOOTHING: f64 = 0.5;
pub const DEFAULT_N_BINS: usize = 10;
pub const DEFAULT_IV_THRESHOLD: f64 = 0.02;
pub const DEFAULT_MISSING_THRESHOLD: f64 = 0.7;

/// Per-feature binning with good/bad counts. `good` holds label-0 counts
/// per bin, `bad` label-1 counts; the last slot is the missing bin when
/// `has_missing_bin` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub feature: String,
    /// Internal edges, strictly increasing. Bin i covers
    /// (edges[i-1], edges[i]], the first bin is (-inf, edges[0]] and the
    /// last value bin (edges[n-1], +inf).
    pub edges: Vec<f64>,
    pub has_missing_bin: bool,
    pub good: Vec<u64>,
    pub bad: Vec<u64>,
}

impl BinningSpec {
    pub fn total_good(&self) -> u64 {
        self.good.iter().sum()
    }

    pub fn total_bad(&self) -> u64 {
        self.bad.iter().sum()
    }

    /// Bins holding at least one observation.
    pub fn effective_bins(&self) -> usize {
        self.good
            .iter()
            .zip(&self.bad)
            .filter(|(g, b)| **g + **b > 0)
            .count()
    }

    fn bin_of(&self, value: f64) -> usize {
        self.edges.partition_point(|e| value > *e)
    }
}

/// Bins a column at empirical quantiles of its non-missing values, with
/// duplicate edges collapsed and a dedicated missing bin.
pub fn quantile_bins(
    values: &[Option<f64>],
    labels: &[u8],
    n_bins: usize,
) -> Result<BinningSpec, CoreError> {
    if values.len() != labels.len() {
        return Err(CoreError::LengthMismatch { left: values.len(), right: labels.len() });
    }
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(CoreError::Unbinnable { feature: String::new() });
    }
    present.sort_by(|a, b| a.total_cmp(b));
    let mut edges: Vec<f64> = Vec::new();
    for k in 1..n_bins.max(1) {
        // upper edge of bin k: quantile at rank k/n_bins
        let idx = (k * present.len()) / n_bins;
        let q = present[idx.saturating_sub(1).min(present.len() - 1)];
        if edges.last().map_or(true, |last| q > *last) && q < present[present.len() - 1] {
            edges.push(q);
        }
    }
    let n_value_bins = edges.len() + 1;
    let has_missing = values.iter().any(|v| v.is_none());
    let n_total = n_value_bins + usize::from(has_missing);
    let mut spec = BinningSpec {
        feature: String::new(),
        edges,
        has_missing_bin: has_missing,
        good: alloc::vec![0; n_total],
        bad: alloc::vec![0; n_total],
    };
    for (v, &label) in values.iter().zip(labels) {
        let bin = match v {
            Some(v) => spec.bin_of(*v),
            None => n_total - 1,
        };
        if label == 0 {
            spec.good[bin] += 1;
        } else {
            spec.bad[bin] += 1;
        }
    }
    Ok(spec)
}

/// IV = sum over bins of (G_i/G - B_i/B) * ln((G_i/G) / (B_i/B)).
///
/// When any occupied bin has a zero good or bad count, `smoothing` is added
/// to every occupied bin's counts before normalization. Fewer than two
/// occupied bins yields IV = 0 (degenerate column).
pub fn information_value(spec: &BinningSpec, smoothing: f64) -> Result<f64, CoreError> {
    let total_good = spec.total_good();
    let total_bad = spec.total_bad();
    if total_good == 0 || total_bad == 0 {
        return Err(CoreError::SingleClass);
    }
    if spec.effective_bins() < 2 {
        return Ok(0.0);
    }
    let occupied: Vec<(f64, f64)> = spec
        .good
        .iter()
        .zip(&spec.bad)
        .filter(|(g, b)| **g + **b > 0)
        .map(|(g, b)| (*g as f64, *b as f64))
        .collect();
    let needs_smoothing = occupied.iter().any(|(g, b)| *g == 0.0 || *b == 0.0);
    let s = if needs_smoothing { smoothing } else { 0.0 };
    let g_total: f64 = occupied.iter().map(|(g, _)| g + s).sum();
    let b_total: f64 = occupied.iter().map(|(_, b)| b + s).sum();
    let mut iv = 0.0;
    for (g, b) in occupied {
        let gs = (g + s) / g_total;
        let bs = (b + s) / b_total;
        if gs > 0.0 && bs > 0.0 {
            iv += (gs - bs) * math::ln(gs / bs);
        }
    }
    // each term is non-negative; clamp away -0.0 noise
    Ok(iv.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvRow {
    pub feature: String,
    pub family: FeatureFamily,
    pub iv: f64,
    pub missing_rate: f64,
    pub selected: bool,
}

/// Per-feature IV and missing-rate report, sorted by IV descending with
/// ties broken by feature name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IvReport {
    pub rows: Vec<IvRow>,
    pub iv_threshold: f64,
    pub missing_threshold: f64,
}

impl IvReport {
    pub fn selected_features(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.selected).map(|r| r.feature.as_str()).collect()
    }
}

pub fn select_features(
    matrix: &FeatureMatrix,
    n_bins: usize,
    iv_threshold: f64,
    missing_threshold: f64,
) -> Result<IvReport, CoreError> {
    let labels = matrix.labels();
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(CoreError::SingleClass);
    }
    let mut rows = Vec::with_capacity(matrix.n_cols());
    for (col, def) in matrix.columns().iter().enumerate() {
        let values: Vec<Option<f64>> = matrix.column_values(col).collect();
        let missing_rate = matrix.missing_rate(col);
        let iv = match quantile_bins(&values, labels, n_bins) {
            Ok(spec) => information_value(&spec, DEFAULT_SMOOTHING)?,
            Err(CoreError::Unbinnable { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        let selected = iv > iv_threshold && missing_rate < missing_threshold;
        rows.push(IvRow { feature: def.name.clone(), family: def.family, iv, missing_rate, selected });
    }
    rows.sort_by(|a, b| b.iv.total_cmp(&a.iv).then_with(|| a.feature.cmp(&b.feature)));
    Ok(IvReport { rows, iv_threshold, missing_threshold })
}
