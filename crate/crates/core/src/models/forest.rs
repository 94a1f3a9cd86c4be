//! Random forest of bagged CART trees: gini splits, per-node feature
//! subsampling of ceil(sqrt(p)), learned default directions for missing
//! values. Scores are mean leaf positive-fractions across trees.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    data_fingerprint, require_finite, Dense, InputSchema, ModelConfig, ModelFamily, ModelParams,
    TrainMetadata, TrainedModel,
};
use crate::error::CoreError;
use crate::math;
use crate::matrix::FeatureMatrix;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Bootstrap-resample rows per tree; disable for exact single-tree
    /// reproduction of a split oracle.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 200, max_depth: 12, min_leaf: 5, bootstrap: true }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.n_trees == 0 {
            return Err(CoreError::InvalidConfig { detail: "n_trees must be >= 1".into() });
        }
        if self.max_depth == 0 {
            return Err(CoreError::InvalidConfig { detail: "max_depth must be >= 1".into() });
        }
        if self.min_leaf == 0 {
            return Err(CoreError::InvalidConfig { detail: "min_leaf must be >= 1".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// Positive fraction of the training rows that reached this leaf.
        value: f64,
    },
    Split {
        feature: usize,
        /// Rows with value <= threshold go left.
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, missing_left, left, right } => {
                    let x = row[*feature];
                    let go_left = if x.is_nan() { *missing_left } else { x <= *threshold };
                    node = if go_left { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<Tree>,
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    missing_left: bool,
}

impl SplitCandidate {
    /// Ties on float-equal gain break to lowest feature, then lowest
    /// threshold, then missing-left.
    fn better_than(&self, other: &Option<SplitCandidate>) -> bool {
        match other {
            None => true,
            Some(o) => match self.gain.total_cmp(&o.gain) {
                core::cmp::Ordering::Greater => true,
                core::cmp::Ordering::Less => false,
                core::cmp::Ordering::Equal => {
                    (self.feature, self.threshold, !self.missing_left)
                        < (o.feature, o.threshold, !o.missing_left)
                }
            },
        }
    }
}

struct TreeBuilder<'a> {
    dense: &'a Dense,
    labels: &'a [u8],
    cfg: &'a ForestConfig,
    tree_seed: u64,
    n_subsample: usize,
    nodes: Vec<TreeNode>,
    node_counter: u64,
}

impl<'a> TreeBuilder<'a> {
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<SplitCandidate> {
        let total = rows.len();
        let total_pos = rows.iter().filter(|&&r| self.labels[r] == 1).count();
        let parent = gini(total_pos, total);
        let mut best: Option<SplitCandidate> = None;
        for &f in features {
            let mut present: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
            let mut missing_pos = 0usize;
            let mut missing_n = 0usize;
            for &r in rows {
                let x = self.dense.get(r, f);
                if x.is_nan() {
                    missing_n += 1;
                    missing_pos += (self.labels[r] == 1) as usize;
                } else {
                    present.push((x, self.labels[r]));
                }
            }
            if present.len() < 2 {
                continue;
            }
            present.sort_by(|a, b| a.0.total_cmp(&b.0));
            let present_pos: usize = present.iter().filter(|(_, y)| *y == 1).count();
            let mut left_n = 0usize;
            let mut left_pos = 0usize;
            for i in 0..present.len() - 1 {
                left_n += 1;
                left_pos += (present[i].1 == 1) as usize;
                if present[i].0 == present[i + 1].0 {
                    continue;
                }
                let threshold = (present[i].0 + present[i + 1].0) / 2.0;
                for missing_left in [true, false] {
                    let (ln, lp) = if missing_left {
                        (left_n + missing_n, left_pos + missing_pos)
                    } else {
                        (left_n, left_pos)
                    };
                    let rn = total - ln;
                    let rp = total_pos - lp;
                    if ln < self.cfg.min_leaf || rn < self.cfg.min_leaf {
                        continue;
                    }
                    let weighted = (ln as f64 * gini(lp, ln) + rn as f64 * gini(rp, rn))
                        / total as f64;
                    let cand = SplitCandidate { gain: parent - weighted, feature: f, threshold, missing_left };
                    if cand.gain > 0.0 && cand.better_than(&best) {
                        best = Some(cand);
                    }
                }
            }
            let _ = present_pos;
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let total = rows.len();
        let pos = rows.iter().filter(|&&r| self.labels[r] == 1).count();
        let leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode::Leaf { value: pos as f64 / total.max(1) as f64 });
            nodes.len() - 1
        };
        if depth >= self.cfg.max_depth || pos == 0 || pos == total || total < 2 * self.cfg.min_leaf {
            return leaf(&mut self.nodes);
        }
        let node_id = self.node_counter;
        self.node_counter += 1;
        let mut features: Vec<usize> = (0..self.dense.n_cols).collect();
        features.shuffle(&mut seeding::rng(self.tree_seed, &[0x6ea7, node_id]));
        features.truncate(self.n_subsample);
        features.sort_unstable();
        let Some(split) = self.best_split(&rows, &features) else {
            return leaf(&mut self.nodes);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| {
            let x = self.dense.get(r, split.feature);
            if x.is_nan() {
                split.missing_left
            } else {
                x <= split.threshold
            }
        });
        let idx = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 }); // placeholder
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[idx] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            missing_left: split.missing_left,
            left,
            right,
        };
        idx
    }
}

pub fn fit(cfg: &ForestConfig, matrix: &FeatureMatrix, seed: u64) -> Result<TrainedModel, CoreError> {
    let schema = InputSchema::raw(matrix.columns().to_vec());
    let dense = schema.transform(matrix)?;
    require_finite(&dense, true)?;
    let labels = matrix.labels();
    let n = dense.n_rows;
    let n_subsample = (math::sqrt(dense.n_cols as f64) as usize).max(1).min(dense.n_cols);
    let n_subsample = if (n_subsample * n_subsample) < dense.n_cols {
        n_subsample + 1 // ceil
    } else {
        n_subsample
    };

    let mut trees = Vec::with_capacity(cfg.n_trees);
    for t in 0..cfg.n_trees {
        let tree_seed = seeding::derive(seed, &[0x7ee5, t as u64]);
        let rows: Vec<usize> = if cfg.bootstrap {
            let mut rng = seeding::rng(tree_seed, &[0xb005]);
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = TreeBuilder {
            dense: &dense,
            labels,
            cfg,
            tree_seed,
            n_subsample,
            nodes: Vec::new(),
            node_counter: 0,
        };
        let root = builder.build(rows, 0);
        debug_assert_eq!(root, 0);
        trees.push(Tree { nodes: builder.nodes });
    }

    Ok(TrainedModel {
        version: super::MODEL_FORMAT_VERSION,
        family: ModelFamily::RandomForest,
        schema,
        params: ModelParams::RandomForest(ForestParams { trees }),
        metadata: TrainMetadata {
            seed,
            config: ModelConfig::RandomForest(cfg.clone()),
            data_fingerprint: data_fingerprint(matrix),
        },
    })
}

pub fn score(params: &ForestParams, dense: &Dense) -> Vec<f64> {
    (0..dense.n_rows)
        .map(|r| {
            let row = dense.row(r);
            params.trees.iter().map(|t| t.score_row(row)).sum::<f64>() / params.trees.len() as f64
        })
        .collect()
}
