//! Execution of the ablation experiment matrix: for every (window, model
//! family, feature set) cell, undersample the training split, pick
//! hyperparameters (grid-search when a grid is supplied), fit, and score the
//! test, pre-Covid and post-Covid splits.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::eval::{auc_of_curve, roc_curve, AblationCell, AblationReport, EvalSplit, FeatureSet};
use crate::matrix::FeatureMatrix;
use crate::models::{fit, grid_search_cv, ModelConfig, ModelFamily};
use crate::seeding;
use crate::windows::{undersample, SplitBundle};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOptions {
    pub undersample_rate: f64,
    pub seed: u64,
    /// Hyperparameter grids per family. A family without a grid (or with a
    /// single-cell grid) is fitted with that config directly, skipping
    /// cross-validation.
    pub grids: BTreeMap<ModelFamily, Vec<ModelConfig>>,
    pub cv_folds: usize,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions {
            undersample_rate: crate::windows::DEFAULT_UNDERSAMPLE_RATE,
            seed: 0,
            grids: BTreeMap::new(),
            cv_folds: 5,
        }
    }
}

/// Checks the structural preconditions of the ablation: every feature set
/// must select the same sample keys (it always does when sets are column
/// selections of one matrix, but a corrupted input would invalidate the
/// whole comparison), and hybrid sets must contain their single-source
/// counterpart's columns.
fn check_feature_sets(
    parent: &FeatureMatrix,
    feature_sets: &[FeatureSet],
) -> Result<BTreeMap<FeatureSet, FeatureMatrix>, CoreError> {
    let mut selected = BTreeMap::new();
    for &fs in feature_sets {
        let m = parent.select_families(fs.families());
        if m.keys() != parent.keys() {
            return Err(CoreError::SampleKeyMismatch {
                detail: alloc::format!("feature set {} altered the sample keys", fs.as_str()),
            });
        }
        selected.insert(fs, m);
    }
    for &fs in feature_sets {
        let Some(single) = fs.single_counterpart() else { continue };
        let Some(single_m) = selected.get(&single) else { continue };
        let hybrid_cols = selected[&fs].column_names();
        for col in single_m.column_names() {
            if !hybrid_cols.contains(&col) {
                return Err(CoreError::SampleKeyMismatch {
                    detail: alloc::format!(
                        "hybrid set {} lacks column {col} of {}",
                        fs.as_str(),
                        single.as_str()
                    ),
                });
            }
        }
    }
    Ok(selected)
}

pub fn ablation_matrix(
    bundles: &[SplitBundle],
    families: &[ModelFamily],
    feature_sets: &[FeatureSet],
    options: &AblationOptions,
) -> Result<AblationReport, CoreError> {
    let mut report = AblationReport::default();
    for bundle in bundles {
        let w = bundle.window_length;
        let train_sets = check_feature_sets(&bundle.train, feature_sets)?;
        let eval_sets: Vec<(EvalSplit, BTreeMap<FeatureSet, FeatureMatrix>)> = [
            (EvalSplit::Test, &bundle.test),
            (EvalSplit::PreCovid, &bundle.pre_covid),
            (EvalSplit::PostCovid, &bundle.post_covid),
        ]
        .into_iter()
        .map(|(split, m)| Ok((split, check_feature_sets(m, feature_sets)?)))
        .collect::<Result<_, CoreError>>()?;

        for (fi, &family) in families.iter().enumerate() {
            for (si, &fs) in feature_sets.iter().enumerate() {
                let cell_seed =
                    seeding::derive(options.seed, &[0xab1a, w as u64, fi as u64, si as u64]);
                let (train, _) = undersample(
                    &train_sets[&fs],
                    options.undersample_rate,
                    seeding::derive(cell_seed, &[0x05a0]),
                )?;
                let config = match options.grids.get(&family) {
                    Some(grid) if grid.len() > 1 => {
                        grid_search_cv(grid, &train, options.cv_folds, cell_seed)?.best_config
                    }
                    Some(grid) => grid[0].clone(),
                    None => ModelConfig::default_for(family),
                };
                let model = fit(&config, &train, seeding::derive(cell_seed, &[0xf17]))?;
                for (split, sets) in &eval_sets {
                    let matrix = &sets[&fs];
                    let scores = model.predict_proba(matrix)?;
                    let roc = roc_curve(&scores, matrix.labels())?;
                    report.cells.push(AblationCell {
                        family: family.as_str().to_string(),
                        feature_set: fs,
                        window: w,
                        split: *split,
                        auc: auc_of_curve(&roc),
                        n_samples: matrix.n_rows(),
                        n_positive: matrix.labels().iter().filter(|&&y| y == 1).count(),
                        roc,
                    });
                }
            }
        }
    }
    report.compute_hybrid_deltas();
    Ok(report)
}

/// The full report cardinality: families x feature sets x windows x splits.
pub fn expected_cells(bundles: usize, families: usize, feature_sets: usize) -> usize {
    bundles * families * feature_sets * 3
}
