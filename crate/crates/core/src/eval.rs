//! ROC/AUC metrics, the ablation experiment matrix and the Covid-period
//! drift comparison.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::matrix::FeatureFamily;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// TP / (TP + FN); None when no positives exist.
    pub fn tpr(&self) -> Option<f64> {
        let denom = self.tp + self.fn_;
        (denom > 0).then(|| self.tp as f64 / denom as f64)
    }

    /// FP / (FP + TN); None when no negatives exist.
    pub fn fpr(&self) -> Option<f64> {
        let denom = self.fp + self.tn;
        (denom > 0).then(|| self.fp as f64 / denom as f64)
    }
}

/// Counts predictions at a threshold; predicted positive means
/// score >= threshold.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts, CoreError> {
    if scores.len() != labels.len() {
        return Err(CoreError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score threshold at which this vertex is reached; +inf for the anchor.
    pub threshold: f64,
}

/// ROC vertices from threshold +inf downwards. Tied scores collapse into a
/// single vertex so the trapezoidal area matches the Mann-Whitney statistic
/// exactly. Starts at (0,0), ends at (1,1), both coordinates non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve, CoreError> {
    if scores.len() != labels.len() {
        return Err(CoreError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let pos = labels.iter().filter(|&&y| y != 0).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(CoreError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = alloc::vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        // absorb the whole tie block before emitting a vertex
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] != 0 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp / neg, tpr: tp / pos, threshold: score });
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the ROC curve. Equals the Mann-Whitney statistic
/// P(score_pos > score_neg) + 0.5 P(tie).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, CoreError> {
    let curve = roc_curve(scores, labels)?;
    Ok(auc_of_curve(&curve))
}

pub fn auc_of_curve(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for pair in curve.points.windows(2) {
        area += (pair[1].fpr - pair[0].fpr) * (pair[1].tpr + pair[0].tpr) / 2.0;
    }
    area
}

/// The ablation feature sets of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    Fr,
    Afe,
    FrRb,
    AfeRb,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [FeatureSet::Fr, FeatureSet::Afe, FeatureSet::FrRb, FeatureSet::AfeRb];

    pub fn families(&self) -> &'static [FeatureFamily] {
        match self {
            FeatureSet::Fr => &[FeatureFamily::Fr],
            FeatureSet::Afe => &[FeatureFamily::Afe],
            FeatureSet::FrRb => &[FeatureFamily::Fr, FeatureFamily::Rb],
            FeatureSet::AfeRb => &[FeatureFamily::Afe, FeatureFamily::Rb],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSet::Fr => "FR",
            FeatureSet::Afe => "AFE",
            FeatureSet::FrRb => "FR+RB",
            FeatureSet::AfeRb => "AFE+RB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "FR" => Some(FeatureSet::Fr),
            "AFE" => Some(FeatureSet::Afe),
            "FR+RB" => Some(FeatureSet::FrRb),
            "AFE+RB" => Some(FeatureSet::AfeRb),
            _ => None,
        }
    }

    /// The single-source set a hybrid extends, if any.
    pub fn single_counterpart(&self) -> Option<FeatureSet> {
        match self {
            FeatureSet::FrRb => Some(FeatureSet::Fr),
            FeatureSet::AfeRb => Some(FeatureSet::Afe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvalSplit {
    Test,
    PreCovid,
    PostCovid,
}

impl EvalSplit {
    pub const ALL: [EvalSplit; 3] = [EvalSplit::Test, EvalSplit::PreCovid, EvalSplit::PostCovid];

    pub fn as_str(&self) -> &'static str {
        match self {
            EvalSplit::Test => "test",
            EvalSplit::PreCovid => "pre_covid",
            EvalSplit::PostCovid => "post_covid",
        }
    }
}

/// One evaluated (family, feature set, window, split) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub family: String,
    pub feature_set: FeatureSet,
    pub window: u8,
    pub split: EvalSplit,
    pub auc: f64,
    pub n_samples: usize,
    pub n_positive: usize,
    pub roc: RocCurve,
}

/// The full experiment matrix plus hybrid-minus-single deltas on
/// the test split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    /// (family, hybrid set, window) -> AUC(hybrid) - AUC(single), test split.
    pub hybrid_deltas: Vec<(String, FeatureSet, u8, f64)>,
}

impl AblationReport {
    pub fn cell(
        &self,
        family: &str,
        feature_set: FeatureSet,
        window: u8,
        split: EvalSplit,
    ) -> Option<&AblationCell> {
        self.cells.iter().find(|c| {
            c.family == family && c.feature_set == feature_set && c.window == window && c.split == split
        })
    }

    pub fn compute_hybrid_deltas(&mut self) {
        let mut deltas = Vec::new();
        for cell in &self.cells {
            if cell.split != EvalSplit::Test {
                continue;
            }
            if let Some(single) = cell.feature_set.single_counterpart() {
                if let Some(base) = self.cell(&cell.family, single, cell.window, EvalSplit::Test) {
                    deltas.push((cell.family.clone(), cell.feature_set, cell.window, cell.auc - base.auc));
                }
            }
        }
        self.hybrid_deltas = deltas;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub family: String,
    pub feature_set: FeatureSet,
    pub window: u8,
    pub test_auc: f64,
    pub pre_covid_delta: f64,
    pub post_covid_delta: f64,
    /// For hybrid sets: true when this set degrades more on post-Covid than
    /// its single-source counterpart (the pandemic reporting-shift signature).
    pub degrades_vs_single: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub rows: Vec<DriftRow>,
}

/// Per-cell AUC deltas of the Covid splits against the test split.
pub fn drift_report(ablation: &AblationReport) -> DriftReport {
    let mut rows = Vec::new();
    for cell in &ablation.cells {
        if cell.split != EvalSplit::Test {
            continue;
        }
        let pre = ablation.cell(&cell.family, cell.feature_set, cell.window, EvalSplit::PreCovid);
        let post = ablation.cell(&cell.family, cell.feature_set, cell.window, EvalSplit::PostCovid);
        let (pre, post) = match (pre, post) {
            (Some(p), Some(q)) => (p, q),
            _ => continue,
        };
        let post_delta = post.auc - cell.auc;
        let degrades_vs_single = cell.feature_set.single_counterpart().and_then(|single| {
            let st = ablation.cell(&cell.family, single, cell.window, EvalSplit::Test)?;
            let sp = ablation.cell(&cell.family, single, cell.window, EvalSplit::PostCovid)?;
            Some(post_delta < sp.auc - st.auc)
        });
        rows.push(DriftRow {
            family: cell.family.clone(),
            feature_set: cell.feature_set,
            window: cell.window,
            test_auc: cell.auc,
            pre_covid_delta: pre.auc - cell.auc,
            post_covid_delta: post_delta,
            degrades_vs_single,
        });
    }
    DriftReport { rows }
}
