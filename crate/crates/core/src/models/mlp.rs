//! Feed-forward network for the hybrid feature setup: a learned dense
//! projection compresses the restructuring-behavior block, its output is
//! concatenated with the standardized remaining features, then two rectifier
//! hidden layers feed a sigmoid output trained with binary cross-entropy and
//! mini-batch Adam.
//!
//! Parameters live in one flat vector with documented offsets so gradients
//! can be checked against central finite differences.

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
pub struct MlpConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    /// Width of the dense projection applied to the RB feature block;
    /// skipped when the schema has no RB columns.
    pub rb_projection: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden1: 64,
            hidden2: 32,
            rb_projection: 16,
            batch_size: 64,
            epochs: 50,
            learning_rate: 1e-5,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(CoreError::InvalidConfig { detail: "hidden sizes must be >= 1".into() });
        }
        if self.rb_projection == 0 {
            return Err(CoreError::InvalidConfig { detail: "rb_projection must be >= 1".into() });
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidConfig { detail: "batch_size must be >= 1".into() });
        }
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::InvalidConfig { detail: "learning_rate must be > 0".into() });
        }
        Ok(())
    }
}

/// Network shape plus the RB column gather list. The flat weight vector is
/// laid out as: projection weights (proj x n_rb, row-major) and biases (only
/// when the projection is active), then W1 (h1 x input_dim) and b1, W2
/// (h2 x h1) and b2, and the output weights (h2) and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub rb_cols: Vec<usize>,
    pub proj: usize,
    pub h1: usize,
    pub h2: usize,
    pub weights: Vec<f64>,
}

impl MlpParams {
    fn projection_active(&self) -> bool {
        !self.rb_cols.is_empty()
    }

    fn n_other(&self, n_cols: usize) -> usize {
        n_cols - self.rb_cols.len()
    }

    fn input_dim(&self, n_cols: usize) -> usize {
        if self.projection_active() {
            self.proj + self.n_other(n_cols)
        } else {
            n_cols
        }
    }

    pub fn n_weights(&self, n_cols: usize) -> usize {
        let proj_len = if self.projection_active() {
            self.proj * self.rb_cols.len() + self.proj
        } else {
            0
        };
        let input = self.input_dim(n_cols);
        proj_len + self.h1 * input + self.h1 + self.h2 * self.h1 + self.h2 + self.h2 + 1
    }
}

/// Offsets of each weight block inside the flat vector.
struct Offsets {
    proj_w: usize,
    proj_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    input: usize,
}

fn offsets(params: &MlpParams, n_cols: usize) -> Offsets {
    let (n_rb, proj) = if params.projection_active() { (params.rb_cols.len(), params.proj) } else { (0, 0) };
    let input = params.input_dim(n_cols);
    let proj_w = 0;
    let proj_b = proj_w + proj * n_rb;
    let w1 = proj_b + proj;
    let b1 = w1 + params.h1 * input;
    let w2 = b1 + params.h1;
    let b2 = w2 + params.h2 * params.h1;
    let w3 = b2 + params.h2;
    let b3 = w3 + params.h2;
    Offsets { proj_w, proj_b, w1, b1, w2, b2, w3, b3, input }
}

struct Forward {
    x_in: Vec<f64>,
    rb_vals: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    logit: f64,
}

fn forward(params: &MlpParams, w: &[f64], off: &Offsets, row: &[f64]) -> Forward {
    let mut rb_vals = Vec::new();
    let mut x_in = Vec::with_capacity(off.input);
    if params.projection_active() {
        rb_vals = params.rb_cols.iter().map(|&c| row[c]).collect();
        for p in 0..params.proj {
            let base = off.proj_w + p * rb_vals.len();
            let z: f64 = rb_vals.iter().enumerate().map(|(j, v)| w[base + j] * v).sum::<f64>()
                + w[off.proj_b + p];
            x_in.push(z);
        }
        for (c, &v) in row.iter().enumerate() {
            if !params.rb_cols.contains(&c) {
                x_in.push(v);
            }
        }
    } else {
        x_in.extend_from_slice(row);
    }
    let mut z1 = Vec::with_capacity(params.h1);
    for i in 0..params.h1 {
        let base = off.w1 + i * off.input;
        z1.push(x_in.iter().enumerate().map(|(j, v)| w[base + j] * v).sum::<f64>() + w[off.b1 + i]);
    }
    let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
    let mut z2 = Vec::with_capacity(params.h2);
    for i in 0..params.h2 {
        let base = off.w2 + i * params.h1;
        z2.push(a1.iter().enumerate().map(|(j, v)| w[base + j] * v).sum::<f64>() + w[off.b2 + i]);
    }
    let a2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();
    let logit =
        a2.iter().enumerate().map(|(j, v)| w[off.w3 + j] * v).sum::<f64>() + w[off.b3];
    Forward { x_in, rb_vals, z1, a1, z2, a2, logit }
}

/// Mean binary cross-entropy (with logits) over `batch` rows and its
/// gradient with respect to the flat weight vector.
pub fn loss_and_grad(
    params: &MlpParams,
    weights: &[f64],
    dense: &Dense,
    labels: &[u8],
    batch: &[usize],
) -> (f64, Vec<f64>) {
    let off = offsets(params, dense.n_cols);
    let mut grad = alloc::vec![0.0; weights.len()];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for &r in batch {
        let fwd = forward(params, weights, &off, dense.row(r));
        let y = labels[r] as f64;
        loss += scale * (math::softplus(fwd.logit) - y * fwd.logit);
        let dz = scale * (math::sigmoid(fwd.logit) - y);
        for j in 0..params.h2 {
            grad[off.w3 + j] += dz * fwd.a2[j];
        }
        grad[off.b3] += dz;
        let mut dz2 = alloc::vec![0.0; params.h2];
        for j in 0..params.h2 {
            if fwd.z2[j] > 0.0 {
                dz2[j] = dz * weights[off.w3 + j];
            }
        }
        let mut da1 = alloc::vec![0.0; params.h1];
        for i in 0..params.h2 {
            let base = off.w2 + i * params.h1;
            grad[off.b2 + i] += dz2[i];
            for j in 0..params.h1 {
                grad[base + j] += dz2[i] * fwd.a1[j];
                da1[j] += dz2[i] * weights[base + j];
            }
        }
        let mut dz1 = alloc::vec![0.0; params.h1];
        for j in 0..params.h1 {
            if fwd.z1[j] > 0.0 {
                dz1[j] = da1[j];
            }
        }
        let mut dx_in = alloc::vec![0.0; off.input];
        for i in 0..params.h1 {
            let base = off.w1 + i * off.input;
            grad[off.b1 + i] += dz1[i];
            for j in 0..off.input {
                grad[base + j] += dz1[i] * fwd.x_in[j];
                dx_in[j] += dz1[i] * weights[base + j];
            }
        }
        if params.projection_active() {
            for p in 0..params.proj {
                let base = off.proj_w + p * fwd.rb_vals.len();
                grad[off.proj_b + p] += dx_in[p];
                for (j, v) in fwd.rb_vals.iter().enumerate() {
                    grad[base + j] += dx_in[p] * v;
                }
            }
        }
    }
    (loss, grad)
}

fn init_weights(params: &MlpParams, n_cols: usize, seed: u64) -> Vec<f64> {
    let off = offsets(params, n_cols);
    let n = params.n_weights(n_cols);
    let mut w = alloc::vec![0.0; n];
    let mut rng = seeding::rng(seed, &[0x1417]);
    // uniform fan-scaled init per weight block; biases stay zero
    let mut fill = |w: &mut [f64], start: usize, len: usize, fan_in: usize, fan_out: usize| {
        let s = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        for v in &mut w[start..start + len] {
            *v = rng.gen_range(-s..=s);
        }
    };
    if params.projection_active() {
        fill(&mut w, off.proj_w, params.proj * params.rb_cols.len(), params.rb_cols.len(), params.proj);
    }
    fill(&mut w, off.w1, params.h1 * off.input, off.input, params.h1);
    fill(&mut w, off.w2, params.h2 * params.h1, params.h1, params.h2);
    fill(&mut w, off.w3, params.h2, params.h2, 1);
    w
}

pub fn fit(cfg: &MlpConfig, matrix: &FeatureMatrix, seed: u64) -> Result<TrainedModel, CoreError> {
    let schema = InputSchema::standardized(matrix);
    let dense = schema.transform(matrix)?;
    require_finite(&dense, false)?;
    let labels = matrix.labels();

    let mut params = MlpParams {
        rb_cols: schema.rb_columns(),
        proj: cfg.rb_projection,
        h1: cfg.hidden1,
        h2: cfg.hidden2,
        weights: Vec::new(),
    };
    let mut weights = init_weights(&params, dense.n_cols, seed);

    // Adam state
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut m = alloc::vec![0.0; weights.len()];
    let mut v = alloc::vec![0.0; weights.len()];
    let mut t = 0u32;

    let mut order: Vec<usize> = (0..dense.n_rows).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seeding::rng(seed, &[0xe70c, epoch as u64]));
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = loss_and_grad(&params, &weights, &dense, labels, batch);
            t += 1;
            let bc1 = 1.0 - math::powi(beta1, t as i32);
            let bc2 = 1.0 - math::powi(beta2, t as i32);
            for i in 0..weights.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                weights[i] -= cfg.learning_rate * (m[i] / bc1) / (math::sqrt(v[i] / bc2) + eps);
            }
        }
    }
    params.weights = weights;

    Ok(TrainedModel {
        version: super::MODEL_FORMAT_VERSION,
        family: ModelFamily::Mlp,
        schema,
        params: ModelParams::Mlp(params),
        metadata: TrainMetadata {
            seed,
            config: ModelConfig::Mlp(cfg.clone()),
            data_fingerprint: data_fingerprint(matrix),
        },
    })
}

pub fn score(params: &MlpParams, dense: &Dense) -> Vec<f64> {
    let off = offsets(params, dense.n_cols);
    (0..dense.n_rows)
        .map(|r| math::sigmoid(forward(params, &params.weights, &off, dense.row(r)).logit))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{ColumnDef, FeatureFamily, FeatureMatrix, FeatureVector, SampleKey};
    use alloc::vec;
    use alloc::vec::Vec;

    /// Two FR columns and two RB columns with a weak planted signal.
    fn mixed_matrix(n: usize) -> FeatureMatrix {
        let cols = vec![
            ColumnDef { name: "fr_a".into(), family: FeatureFamily::Fr },
            ColumnDef { name: "fr_b".into(), family: FeatureFamily::Fr },
            ColumnDef { name: "rb_a".into(), family: FeatureFamily::Rb },
            ColumnDef { name: "rb_b".into(), family: FeatureFamily::Rb },
        ];
        let mut m = FeatureMatrix::new(cols).unwrap();
        for i in 0..n {
            let x = i as f64 / n as f64;
            let mut fv = FeatureVector::new();
            fv.push("fr_a", FeatureFamily::Fr, Some(x));
            fv.push("fr_b", FeatureFamily::Fr, Some(1.0 - x));
            fv.push("rb_a", FeatureFamily::Rb, Some(((i * 3) % 7) as f64));
            fv.push("rb_b", FeatureFamily::Rb, Some(((i * 5) % 11) as f64));
            m.push_row(
                SampleKey {
                    company_id: alloc::format!("c{i}"),
                    reference_year: 2015,
                    window_length: 1,
                },
                u8::from(i >= n / 2),
                &fv,
            )
            .unwrap();
        }
        m
    }

    fn small_params(rb_cols: Vec<usize>) -> MlpParams {
        MlpParams { rb_cols, proj: 2, h1: 3, h2: 2, weights: Vec::new() }
    }

    #[test]
    fn all_zero_weights_score_half() {
        let m = mixed_matrix(8);
        let schema = InputSchema::standardized(&m);
        let dense = schema.transform(&m).unwrap();
        let mut params = small_params(schema.rb_columns());
        params.weights = vec![0.0; params.n_weights(dense.n_cols)];
        for s in score(&params, &dense) {
            assert_eq!(s, 0.5);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = mixed_matrix(10);
        let schema = InputSchema::standardized(&m);
        let dense = schema.transform(&m).unwrap();
        let params = small_params(schema.rb_columns());
        let mut weights = init_weights(&params, dense.n_cols, 11);
        // nudge every weight (biases included) off zero so no unit sits
        // exactly on a rectifier kink, where the subgradient and the
        // symmetric difference legitimately disagree
        for (i, w) in weights.iter_mut().enumerate() {
            *w += 0.01 * ((i % 7) as f64 - 3.0);
        }
        let batch: Vec<usize> = (0..10).collect();
        let (_, grad) = loss_and_grad(&params, &weights, &dense, m.labels(), &batch);
        let h = 1e-6;
        for i in 0..weights.len() {
            let mut wp = weights.clone();
            wp[i] += h;
            let (lp, _) = loss_and_grad(&params, &wp, &dense, m.labels(), &batch);
            let mut wm = weights.clone();
            wm[i] -= h;
            let (lm, _) = loss_and_grad(&params, &wm, &dense, m.labels(), &batch);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1.0);
            assert!(rel <= 1e-4, "param {i}: analytic {} vs fd {fd}", grad[i]);
        }
    }

    #[test]
    fn no_rb_block_skips_projection_and_trains() {
        let m = crate::models::tests::single_feature_matrix(
            &(0..20).map(|i| Some(i as f64)).collect::<Vec<_>>(),
            &(0..20).map(|i| u8::from(i >= 10)).collect::<Vec<_>>(),
        );
        let cfg = MlpConfig { hidden1: 4, hidden2: 3, epochs: 3, ..Default::default() };
        let model = fit(&cfg, &m, 0).unwrap();
        match &model.params {
            ModelParams::Mlp(p) => {
                assert!(p.rb_cols.is_empty());
                assert_eq!(p.n_weights(1), p.weights.len());
            }
            _ => unreachable!(),
        }
        let scores = model.predict_proba(&m).unwrap();
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn deterministic_fit() {
        let m = mixed_matrix(32);
        let cfg = MlpConfig { hidden1: 4, hidden2: 3, epochs: 2, ..Default::default() };
        let a = fit(&cfg, &m, 9).unwrap();
        let b = fit(&cfg, &m, 9).unwrap();
        assert_eq!(a, b);
    }
}
