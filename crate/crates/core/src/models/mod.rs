//! Four model families behind a single fit/score contract, plus stratified
//! grid-search cross-validation.
//!
//! Trees consume raw values and learn default directions for missing cells;
//! the linear and neural families use median imputation and standardization
//! with constants stored in the model schema, so every family runs on the
//! same sanitized matrix.

mod forest;
mod gbdt;
mod logistic;
pub mod mlp;

pub use forest::{ForestConfig, ForestParams, Tree, TreeNode};
pub use gbdt::{GbdtConfig, GbdtNode, GbdtParams, GbdtTree};
pub use logistic::{LogisticConfig, LogisticParams};
pub use mlp::{MlpConfig, MlpParams};

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::eval;
use crate::matrix::{ColumnDef, FeatureFamily, FeatureMatrix};
use crate::seeding;

/// Bump when the serialized model layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelFamily {
    Logistic,
    RandomForest,
    Gbdt,
    Mlp,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] =
        [ModelFamily::Logistic, ModelFamily::RandomForest, ModelFamily::Gbdt, ModelFamily::Mlp];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::Logistic => "logistic",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::Gbdt => "gbdt",
            ModelFamily::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logistic" => Some(ModelFamily::Logistic),
            "random_forest" => Some(ModelFamily::RandomForest),
            "gbdt" => Some(ModelFamily::Gbdt),
            "mlp" => Some(ModelFamily::Mlp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelConfig {
    Logistic(LogisticConfig),
    RandomForest(ForestConfig),
    Gbdt(GbdtConfig),
    Mlp(MlpConfig),
}

impl ModelConfig {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelConfig::Logistic(_) => ModelFamily::Logistic,
            ModelConfig::RandomForest(_) => ModelFamily::RandomForest,
            ModelConfig::Gbdt(_) => ModelFamily::Gbdt,
            ModelConfig::Mlp(_) => ModelFamily::Mlp,
        }
    }

    pub fn default_for(family: ModelFamily) -> ModelConfig {
        match family {
            ModelFamily::Logistic => ModelConfig::Logistic(LogisticConfig::default()),
            ModelFamily::RandomForest => ModelConfig::RandomForest(ForestConfig::default()),
            ModelFamily::Gbdt => ModelConfig::Gbdt(GbdtConfig::default()),
            ModelFamily::Mlp => ModelConfig::Mlp(MlpConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        match self {
            ModelConfig::Logistic(c) => c.validate(),
            ModelConfig::RandomForest(c) => c.validate(),
            ModelConfig::Gbdt(c) => c.validate(),
            ModelConfig::Mlp(c) => c.validate(),
        }
    }
}

/// Input contract of a trained model: ordered columns plus the imputation
/// and standardization constants learned at fit time (absent for trees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSchema {
    pub columns: Vec<ColumnDef>,
    pub impute: Option<Vec<f64>>,
    pub mean: Option<Vec<f64>>,
    pub std: Option<Vec<f64>>,
}

impl InputSchema {
    /// Raw schema for tree models: no imputation, no standardization.
    pub fn raw(columns: Vec<ColumnDef>) -> Self {
        InputSchema { columns, impute: None, mean: None, std: None }
    }

    /// Learns median-imputation and standardization constants from `matrix`.
    pub fn standardized(matrix: &FeatureMatrix) -> Self {
        let n_cols = matrix.n_cols();
        let mut impute = Vec::with_capacity(n_cols);
        for col in 0..n_cols {
            let mut present: Vec<f64> = matrix.column_values(col).flatten().collect();
            if present.is_empty() {
                impute.push(0.0);
                continue;
            }
            present.sort_by(|a, b| a.total_cmp(b));
            let mid = present.len() / 2;
            let median = if present.len() % 2 == 1 {
                present[mid]
            } else {
                (present[mid - 1] + present[mid]) / 2.0
            };
            impute.push(median);
        }
        let mut mean = Vec::with_capacity(n_cols);
        let mut std = Vec::with_capacity(n_cols);
        let n = matrix.n_rows().max(1) as f64;
        for col in 0..n_cols {
            let sum: f64 = matrix
                .column_values(col)
                .map(|v| v.unwrap_or(impute[col]))
                .sum();
            let mu = sum / n;
            let var: f64 = matrix
                .column_values(col)
                .map(|v| {
                    let d = v.unwrap_or(impute[col]) - mu;
                    d * d
                })
                .sum::<f64>()
                / n;
            mean.push(mu);
            std.push(if var > 0.0 { crate::math::sqrt(var) } else { 1.0 });
        }
        InputSchema {
            columns: matrix.columns().to_vec(),
            impute: Some(impute),
            mean: Some(mean),
            std: Some(std),
        }
    }

    /// Maps each schema column to its index in `matrix`. Any consistent
    /// column permutation is accepted; missing or extra columns are listed
    /// in the error.
    pub fn column_mapping(&self, matrix: &FeatureMatrix) -> Result<Vec<usize>, CoreError> {
        if self.columns == matrix.columns() {
            return Ok((0..self.columns.len()).collect());
        }
        let got: Vec<&str> = matrix.columns().iter().map(|c| c.name.as_str()).collect();
        let mapping: Option<Vec<usize>> = self
            .columns
            .iter()
            .map(|c| got.iter().position(|g| *g == c.name))
            .collect();
        match mapping {
            Some(m) if got.len() == self.columns.len() => Ok(m),
            _ => {
                let expected: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
                let missing: Vec<&&str> = expected.iter().filter(|c| !got.contains(c)).collect();
                let extra: Vec<&&str> = got.iter().filter(|c| !expected.contains(c)).collect();
                Err(CoreError::SchemaMismatch {
                    detail: alloc::format!("missing columns {missing:?}, extra columns {extra:?}"),
                })
            }
        }
    }

    pub fn check_columns(&self, matrix: &FeatureMatrix) -> Result<(), CoreError> {
        self.column_mapping(matrix).map(|_| ())
    }

    /// Row-major dense view in schema column order; missing encoded as NaN,
    /// then imputed and standardized when the schema carries constants.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<Dense, CoreError> {
        let mapping = self.column_mapping(matrix)?;
        let n_cols = self.columns.len();
        let mut data = Vec::with_capacity(matrix.n_rows() * n_cols);
        for row in 0..matrix.n_rows() {
            let values = matrix.row(row);
            for (col, &src) in mapping.iter().enumerate() {
                let mut x = values[src].unwrap_or(f64::NAN);
                if x.is_nan() {
                    if let Some(impute) = &self.impute {
                        x = impute[col];
                    }
                }
                if let (Some(mean), Some(std)) = (&self.mean, &self.std) {
                    if !x.is_nan() {
                        x = (x - mean[col]) / std[col];
                    }
                }
                data.push(x);
            }
        }
        Ok(Dense { n_rows: matrix.n_rows(), n_cols, data })
    }

    /// Column indices of RB-family features.
    pub fn rb_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.family == FeatureFamily::Rb)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Row-major dense matrix; NaN marks missing (tree models only).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetadata {
    pub seed: u64,
    pub config: ModelConfig,
    pub data_fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Logistic(logistic::LogisticParams),
    RandomForest(forest::ForestParams),
    Gbdt(gbdt::GbdtParams),
    Mlp(mlp::MlpParams),
}

/// A fitted scorer: family, parameters, input schema and training metadata.
/// Immutable; scoring is deterministic and row-independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub family: ModelFamily,
    pub schema: InputSchema,
    pub params: ModelParams,
    pub metadata: TrainMetadata,
}

impl TrainedModel {
    /// Scores every row of `matrix` in order; probabilities in [0, 1].
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, CoreError> {
        let dense = self.schema.transform(matrix)?;
        let scores = match &self.params {
            ModelParams::Logistic(p) => logistic::score(p, &dense),
            ModelParams::RandomForest(p) => forest::score(p, &dense),
            ModelParams::Gbdt(p) => gbdt::score(p, &dense),
            ModelParams::Mlp(p) => mlp::score(p, &dense),
        };
        Ok(scores)
    }
}

pub(crate) fn require_both_classes(labels: &[u8]) -> Result<(), CoreError> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos < 1 || pos == labels.len() {
        return Err(CoreError::SingleClass);
    }
    Ok(())
}

pub(crate) fn require_finite(dense: &Dense, allow_missing: bool) -> Result<(), CoreError> {
    for &v in &dense.data {
        if v.is_infinite() || (!allow_missing && v.is_nan()) {
            return Err(CoreError::InvalidRecord {
                detail: String::from("non-finite input after sanitation"),
            });
        }
    }
    Ok(())
}

/// Stable fingerprint of the training data for the model metadata.
pub fn data_fingerprint(matrix: &FeatureMatrix) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for c in matrix.columns() {
        eat(c.name.as_bytes());
    }
    eat(matrix.labels());
    for row in 0..matrix.n_rows() {
        for v in matrix.row(row) {
            match v {
                Some(v) => eat(&v.to_bits().to_le_bytes()),
                None => eat(&[0xff]),
            }
        }
    }
    h
}

/// Fits a model of the config's family.
pub fn fit(config: &ModelConfig, matrix: &FeatureMatrix, seed: u64) -> Result<TrainedModel, CoreError> {
    config.validate()?;
    require_both_classes(matrix.labels())?;
    match config {
        ModelConfig::Logistic(c) => logistic::fit(c, matrix, seed),
        ModelConfig::RandomForest(c) => forest::fit(c, matrix, seed),
        ModelConfig::Gbdt(c) => gbdt::fit(c, matrix, seed),
        ModelConfig::Mlp(c) => mlp::fit(c, matrix, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best_config: ModelConfig,
    /// Mean validation AUC per grid cell, in grid order.
    pub cell_scores: Vec<f64>,
}

/// Stratified k-fold cross-validated grid search. The best cell has the
/// highest mean validation AUC; float-equal ties go to the earlier cell, so
/// grids enumerated in lexicographic hyperparameter order break ties
/// documentably.
pub fn grid_search_cv(
    grid: &[ModelConfig],
    matrix: &FeatureMatrix,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult, CoreError> {
    if grid.is_empty() {
        return Err(CoreError::InvalidConfig { detail: String::from("empty grid") });
    }
    let family = grid[0].family();
    if grid.iter().any(|c| c.family() != family) {
        return Err(CoreError::InvalidConfig {
            detail: String::from("grid mixes model families"),
        });
    }
    if folds < 2 {
        return Err(CoreError::InvalidConfig { detail: String::from("folds must be >= 2") });
    }
    require_both_classes(matrix.labels())?;
    let fold_of = stratified_fold_assignment(matrix.labels(), folds, seed)?;

    let mut cell_scores = Vec::with_capacity(grid.len());
    for (cell, config) in grid.iter().enumerate() {
        let mut sum = 0.0;
        for fold in 0..folds {
            let train_idx: Vec<usize> =
                (0..matrix.n_rows()).filter(|&r| fold_of[r] != fold).collect();
            let val_idx: Vec<usize> =
                (0..matrix.n_rows()).filter(|&r| fold_of[r] == fold).collect();
            let train = matrix.select_rows(&train_idx);
            let val = matrix.select_rows(&val_idx);
            let model = fit(config, &train, seeding::derive(seed, &[cell as u64, fold as u64]))?;
            let scores = model.predict_proba(&val)?;
            sum += eval::auc(&scores, val.labels())?;
        }
        cell_scores.push(sum / folds as f64);
    }
    let best_index = cell_scores
        .iter()
        .enumerate()
        .max_by(|(ai, a), (bi, b)| a.total_cmp(b).then(bi.cmp(ai)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(GridSearchResult { best_index, best_config: grid[best_index].clone(), cell_scores })
}

/// Per-row fold ids such that each fold holds both classes; errors when a
/// class has fewer members than folds.
fn stratified_fold_assignment(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>, CoreError> {
    let mut fold_of = alloc::vec![0usize; labels.len()];
    for label in [0u8, 1u8] {
        let mut idx: Vec<usize> =
            (0..labels.len()).filter(|&r| labels[r] == label).collect();
        if idx.len() < folds {
            return Err(CoreError::InvalidConfig {
                detail: alloc::format!(
                    "class {label} has {} samples, fewer than {folds} folds",
                    idx.len()
                ),
            });
        }
        idx.shuffle(&mut seeding::rng(seed, &[0xf01d, label as u64]));
        for (i, r) in idx.into_iter().enumerate() {
            fold_of[r] = i % folds;
        }
    }
    Ok(fold_of)
}
