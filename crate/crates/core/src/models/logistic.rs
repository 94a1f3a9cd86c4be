//! L2-regularized logistic regression fit by gradient descent with
//! backtracking on standardized, median-imputed inputs.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{
    data_fingerprint, require_finite, Dense, InputSchema, ModelConfig, ModelFamily, ModelParams,
    TrainMetadata, TrainedModel,
};
use crate::error::CoreError;
use crate::math;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub learning_rate: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1.0, tol: 1e-8, max_iter: 5000, learning_rate: 1.0 }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.l2 < 0.0 || !self.l2.is_finite() {
            return Err(CoreError::InvalidConfig { detail: "l2 must be >= 0".into() });
        }
        if self.tol <= 0.0 {
            return Err(CoreError::InvalidConfig { detail: "tol must be > 0".into() });
        }
        if self.max_iter == 0 {
            return Err(CoreError::InvalidConfig { detail: "max_iter must be >= 1".into() });
        }
        if self.learning_rate <= 0.0 {
            return Err(CoreError::InvalidConfig { detail: "learning_rate must be > 0".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn logits(params: &LogisticParams, dense: &Dense) -> Vec<f64> {
    (0..dense.n_rows)
        .map(|r| {
            let row = dense.row(r);
            params.bias
                + row.iter().zip(&params.weights).map(|(x, w)| x * w).sum::<f64>()
        })
        .collect()
}

/// Mean binary cross-entropy plus l2/(2n) |w|^2, evaluated from logits.
fn loss(params: &LogisticParams, dense: &Dense, labels: &[u8], l2: f64) -> f64 {
    let n = dense.n_rows as f64;
    let bce: f64 = logits(params, dense)
        .iter()
        .zip(labels)
        .map(|(&z, &y)| math::softplus(z) - y as f64 * z)
        .sum::<f64>()
        / n;
    let reg: f64 = params.weights.iter().map(|w| w * w).sum::<f64>() * l2 / (2.0 * n);
    bce + reg
}

fn gradient(params: &LogisticParams, dense: &Dense, labels: &[u8], l2: f64) -> (Vec<f64>, f64) {
    let n = dense.n_rows as f64;
    let mut gw = alloc::vec![0.0; dense.n_cols];
    let mut gb = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = dense.row(r);
        let z = params.bias
            + row.iter().zip(&params.weights).map(|(x, w)| x * w).sum::<f64>();
        let residual = math::sigmoid(z) - y as f64;
        gb += residual;
        for (g, x) in gw.iter_mut().zip(row) {
            *g += residual * x;
        }
    }
    for (g, w) in gw.iter_mut().zip(&params.weights) {
        *g = *g / n + l2 / n * w;
    }
    (gw, gb / n)
}

pub fn fit(cfg: &LogisticConfig, matrix: &FeatureMatrix, seed: u64) -> Result<TrainedModel, CoreError> {
    let schema = InputSchema::standardized(matrix);
    let dense = schema.transform(matrix)?;
    require_finite(&dense, false)?;
    let labels = matrix.labels();

    let mut params = LogisticParams { weights: alloc::vec![0.0; dense.n_cols], bias: 0.0 };
    let mut current_loss = loss(&params, &dense, labels, cfg.l2);
    for _ in 0..cfg.max_iter {
        let (gw, gb) = gradient(&params, &dense, labels, cfg.l2);
        let gmax = gw.iter().chain(core::iter::once(&gb)).fold(0.0f64, |m, g| m.max(math::abs(*g)));
        if gmax < cfg.tol {
            break;
        }
        // backtracking: halve the step until the loss stops increasing
        let mut step = cfg.learning_rate;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = LogisticParams {
                weights: params
                    .weights
                    .iter()
                    .zip(&gw)
                    .map(|(w, g)| w - step * g)
                    .collect(),
                bias: params.bias - step * gb,
            };
            let trial_loss = loss(&trial, &dense, labels, cfg.l2);
            if trial_loss <= current_loss {
                params = trial;
                current_loss = trial_loss;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break; // no descent direction progress left at float precision
        }
    }

    Ok(TrainedModel {
        version: super::MODEL_FORMAT_VERSION,
        family: ModelFamily::Logistic,
        schema,
        params: ModelParams::Logistic(params),
        metadata: TrainMetadata {
            seed,
            config: ModelConfig::Logistic(cfg.clone()),
            data_fingerprint: data_fingerprint(matrix),
        },
    })
}

pub fn score(params: &LogisticParams, dense: &Dense) -> Vec<f64> {
    logits(params, dense).into_iter().map(math::sigmoid).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use crate::models::tests::single_feature_matrix;
    use alloc::vec;

    #[test]
    fn separable_data_ranks_perfectly() {
        let m = single_feature_matrix(
            &[Some(-1.0), Some(-1.0), Some(1.0), Some(1.0)],
            &[0, 0, 1, 1],
        );
        let model = fit(&LogisticConfig::default(), &m, 0).unwrap();
        let scores = model.predict_proba(&m).unwrap();
        assert_eq!(auc(&scores, m.labels()).unwrap(), 1.0);
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn single_class_rejected() {
        let m = single_feature_matrix(&[Some(0.0), Some(1.0)], &[1, 1]);
        assert_eq!(
            crate::models::fit(&ModelConfig::Logistic(LogisticConfig::default()), &m, 0)
                .unwrap_err(),
            CoreError::SingleClass
        );
    }

    #[test]
    fn regularized_coefficients_stay_finite() {
        let m = single_feature_matrix(
            &[Some(-1.0), Some(-1.0), Some(1.0), Some(1.0)],
            &[0, 0, 1, 1],
        );
        let model = fit(&LogisticConfig { l2: 1.0, ..Default::default() }, &m, 0).unwrap();
        match &model.params {
            ModelParams::Logistic(p) => {
                assert!(p.weights.iter().all(|w| w.is_finite()));
                assert!(p.bias.is_finite());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn training_loss_is_monotone_nonincreasing() {
        // replay descent manually and check the loss trace
        let m = single_feature_matrix(
            &(0..16).map(|i| Some((i % 7) as f64 - 3.0)).collect::<Vec<_>>(),
            &(0..16).map(|i| ((i % 7) >= 3) as u8).collect::<Vec<_>>(),
        );
        let cfg = LogisticConfig { max_iter: 50, ..Default::default() };
        let schema = InputSchema::standardized(&m);
        let dense = schema.transform(&m).unwrap();
        let labels = m.labels();
        let mut params = LogisticParams { weights: vec![0.0; dense.n_cols], bias: 0.0 };
        let mut prev = loss(&params, &dense, labels, cfg.l2);
        for _ in 0..50 {
            let (gw, gb) = gradient(&params, &dense, labels, cfg.l2);
            let mut step = cfg.learning_rate;
            loop {
                let trial = LogisticParams {
                    weights: params.weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect(),
                    bias: params.bias - step * gb,
                };
                let l = loss(&trial, &dense, labels, cfg.l2);
                if l <= prev {
                    assert!(l <= prev);
                    params = trial;
                    prev = l;
                    break;
                }
                step /= 2.0;
            }
        }
    }

    #[test]
    fn deterministic_fit() {
        let m = single_feature_matrix(
            &(0..10).map(|i| Some(i as f64)).collect::<Vec<_>>(),
            &(0..10).map(|i| u8::from(i >= 5)).collect::<Vec<_>>(),
        );
        let a = fit(&LogisticConfig::default(), &m, 3).unwrap();
        let b = fit(&LogisticConfig::default(), &m, 3).unwrap();
        assert_eq!(a, b);
    }
}
