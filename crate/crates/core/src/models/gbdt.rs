//! Histogram gradient boosting with logistic loss. Trees grow leaf-wise to a
//! leaf budget using first/second-order gradient statistics accumulated on
//! per-feature histograms of at most 255 bins; bin code 255 marks missing,
//! whose direction is learned per split.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{
    data_fingerprint, require_finite, Dense, InputSchema, ModelConfig, ModelFamily, ModelParams,
    TrainMetadata, TrainedModel,
};
use crate::error::CoreError;
use crate::math;
use crate::matrix::FeatureMatrix;

/// Bin code reserved for missing values.
const MISSING_BIN: u8 = u8::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    /// Upper bound on value bins per feature (excludes the missing bin).
    pub max_bins: usize,
    /// L2 regularization on leaf values.
    pub lambda: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig { rounds: 200, max_leaves: 31, learning_rate: 0.05, max_bins: 255, lambda: 1.0 }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.max_leaves < 2 {
            return Err(CoreError::InvalidConfig { detail: "max_leaves must be >= 2".into() });
        }
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::InvalidConfig { detail: "learning_rate must be > 0".into() });
        }
        if self.max_bins < 2 || self.max_bins > 255 {
            return Err(CoreError::InvalidConfig { detail: "max_bins must be in 2..=255".into() });
        }
        if !(self.lambda >= 0.0) {
            return Err(CoreError::InvalidConfig { detail: "lambda must be >= 0".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GbdtNode {
    Leaf {
        /// Additive logit contribution, shrinkage already applied.
        value: f64,
    },
    Split {
        feature: usize,
        /// Raw values <= threshold go left.
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtTree {
    pub nodes: Vec<GbdtNode>,
}

impl GbdtTree {
    fn score_row(&self, row: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                GbdtNode::Leaf { value } => return *value,
                GbdtNode::Split { feature, threshold, missing_left, left, right } => {
                    let x = row[*feature];
                    let go_left = if x.is_nan() { *missing_left } else { x <= *threshold };
                    node = if go_left { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    /// Log-odds of the training positive prevalence.
    pub base_score: f64,
    pub trees: Vec<GbdtTree>,
}

/// One feature's binning: values in bin `b` satisfy
/// `edges[b-1] < x <= edges[b]`; the last bin is unbounded above.
struct BinnedColumn {
    /// Inclusive upper edges of all bins but the last.
    edges: Vec<f64>,
    /// Per-row bin codes; `MISSING_BIN` for NaN.
    codes: Vec<u8>,
}

fn bin_columns(dense: &Dense, max_bins: usize) -> Vec<BinnedColumn> {
    (0..dense.n_cols)
        .map(|f| {
            let mut distinct: Vec<f64> =
                (0..dense.n_rows).map(|r| dense.get(r, f)).filter(|v| !v.is_nan()).collect();
            distinct.sort_by(|a, b| a.total_cmp(b));
            distinct.dedup();
            let edges: Vec<f64> = if distinct.len() <= max_bins {
                // one bin per distinct value; the last needs no upper edge
                distinct.iter().take(distinct.len().saturating_sub(1)).copied().collect()
            } else {
                // quantile cut points, deduplicated
                let mut edges: Vec<f64> = (1..max_bins)
                    .map(|i| distinct[i * distinct.len() / max_bins])
                    .collect();
                edges.dedup();
                edges
            };
            let codes = (0..dense.n_rows)
                .map(|r| {
                    let x = dense.get(r, f);
                    if x.is_nan() {
                        MISSING_BIN
                    } else {
                        edges.partition_point(|e| *e < x) as u8
                    }
                })
                .collect();
            BinnedColumn { edges, codes }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct SplitInfo {
    gain: f64,
    feature: usize,
    /// Last bin of the left child.
    bin: u8,
    missing_left: bool,
}

fn leaf_objective(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Best histogram split of a leaf, or None when no split improves the
/// objective. Ties on float-equal gain break to lowest feature, then lowest
/// bin, then missing-left.
fn best_split(
    rows: &[u32],
    binned: &[BinnedColumn],
    grad: &[f64],
    hess: &[f64],
    lambda: f64,
) -> Option<SplitInfo> {
    let total_g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
    let total_h: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
    let parent = leaf_objective(total_g, total_h, lambda);
    let mut best: Option<SplitInfo> = None;
    for (f, col) in binned.iter().enumerate() {
        let n_bins = col.edges.len() + 1;
        // histogram: (grad, hess, count) per value bin, plus the missing bin
        let mut hist = alloc::vec![(0.0f64, 0.0f64, 0u32); n_bins];
        let mut miss = (0.0f64, 0.0f64, 0u32);
        for &r in rows {
            let code = col.codes[r as usize];
            let slot = if code == MISSING_BIN { &mut miss } else { &mut hist[code as usize] };
            slot.0 += grad[r as usize];
            slot.1 += hess[r as usize];
            slot.2 += 1;
        }
        let mut left = (0.0f64, 0.0f64, 0u32);
        for bin in 0..n_bins.saturating_sub(1) {
            left.0 += hist[bin].0;
            left.1 += hist[bin].1;
            left.2 += hist[bin].2;
            for missing_left in [true, false] {
                let (lg, lh, ln) = if missing_left {
                    (left.0 + miss.0, left.1 + miss.1, left.2 + miss.2)
                } else {
                    (left.0, left.1, left.2)
                };
                let (rg, rh, rn) =
                    (total_g - lg, total_h - lh, rows.len() as u32 - ln);
                if ln == 0 || rn == 0 {
                    continue;
                }
                let gain =
                    leaf_objective(lg, lh, lambda) + leaf_objective(rg, rh, lambda) - parent;
                if gain <= 0.0 {
                    continue;
                }
                let cand = SplitInfo { gain, feature: f, bin: bin as u8, missing_left };
                let better = match &best {
                    None => true,
                    Some(b) => match gain.total_cmp(&b.gain) {
                        core::cmp::Ordering::Greater => true,
                        core::cmp::Ordering::Less => false,
                        core::cmp::Ordering::Equal => {
                            (cand.feature, cand.bin, !cand.missing_left)
                                < (b.feature, b.bin, !b.missing_left)
                        }
                    },
                };
                if better {
                    best = Some(cand);
                }
            }
        }
    }
    best
}

struct BuildLeaf {
    rows: Vec<u32>,
    /// Index of this leaf's slot in the output node list.
    node: usize,
    split: Option<SplitInfo>,
}

fn grow_tree(
    rows: Vec<u32>,
    binned: &[BinnedColumn],
    grad: &[f64],
    hess: &[f64],
    cfg: &GbdtConfig,
) -> GbdtTree {
    let mut nodes = alloc::vec![GbdtNode::Leaf { value: 0.0 }];
    let mut leaves = Vec::new();
    let root_split = best_split(&rows, binned, grad, hess, cfg.lambda);
    leaves.push(BuildLeaf { rows, node: 0, split: root_split });

    while leaves.len() < cfg.max_leaves {
        // leaf-wise growth: split the leaf with the largest cached gain;
        // float-equal gains go to the earliest-created leaf
        let Some(pick) = leaves
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.split.map(|s| (i, s.gain)))
            .max_by(|(ai, a), (bi, b)| a.total_cmp(b).then(bi.cmp(ai)))
            .map(|(i, _)| i)
        else {
            break;
        };
        let leaf = leaves.swap_remove(pick);
        let split = leaf.split.unwrap();
        let col = &binned[split.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.into_iter().partition(|&r| {
            let code = col.codes[r as usize];
            if code == MISSING_BIN { split.missing_left } else { code <= split.bin }
        });
        let left_node = nodes.len();
        nodes.push(GbdtNode::Leaf { value: 0.0 });
        let right_node = nodes.len();
        nodes.push(GbdtNode::Leaf { value: 0.0 });
        nodes[leaf.node] = GbdtNode::Split {
            feature: split.feature,
            threshold: col.edges[split.bin as usize],
            missing_left: split.missing_left,
            left: left_node,
            right: right_node,
        };
        let left_split = best_split(&left_rows, binned, grad, hess, cfg.lambda);
        let right_split = best_split(&right_rows, binned, grad, hess, cfg.lambda);
        leaves.push(BuildLeaf { rows: left_rows, node: left_node, split: left_split });
        leaves.push(BuildLeaf { rows: right_rows, node: right_node, split: right_split });
    }

    for leaf in &leaves {
        let g: f64 = leaf.rows.iter().map(|&r| grad[r as usize]).sum();
        let h: f64 = leaf.rows.iter().map(|&r| hess[r as usize]).sum();
        nodes[leaf.node] = GbdtNode::Leaf { value: -cfg.learning_rate * g / (h + cfg.lambda) };
    }
    GbdtTree { nodes }
}

pub fn fit(cfg: &GbdtConfig, matrix: &FeatureMatrix, seed: u64) -> Result<TrainedModel, CoreError> {
    let schema = InputSchema::raw(matrix.columns().to_vec());
    let dense = schema.transform(matrix)?;
    require_finite(&dense, true)?;
    let labels = matrix.labels();
    let n = dense.n_rows;

    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let base_score = math::ln(pos / (n as f64 - pos));
    let binned = bin_columns(&dense, cfg.max_bins);

    let mut logit = alloc::vec![base_score; n];
    let mut trees = Vec::with_capacity(cfg.rounds);
    for _round in 0..cfg.rounds {
        let mut grad = alloc::vec![0.0; n];
        let mut hess = alloc::vec![0.0; n];
        for r in 0..n {
            let p = math::sigmoid(logit[r]);
            grad[r] = p - labels[r] as f64;
            hess[r] = p * (1.0 - p);
        }
        let tree = grow_tree((0..n as u32).collect(), &binned, &grad, &hess, cfg);
        for r in 0..n {
            logit[r] += tree.score_row(dense.row(r));
        }
        trees.push(tree);
    }

    Ok(TrainedModel {
        version: super::MODEL_FORMAT_VERSION,
        family: ModelFamily::Gbdt,
        schema,
        params: ModelParams::Gbdt(GbdtParams { base_score, trees }),
        metadata: TrainMetadata {
            seed,
            config: ModelConfig::Gbdt(cfg.clone()),
            data_fingerprint: data_fingerprint(matrix),
        },
    })
}

pub fn score(params: &GbdtParams, dense: &Dense) -> Vec<f64> {
    (0..dense.n_rows)
        .map(|r| {
            let row = dense.row(r);
            let z: f64 =
                params.base_score + params.trees.iter().map(|t| t.score_row(row)).sum::<f64>();
            math::sigmoid(z)
        })
        .collect()
}
