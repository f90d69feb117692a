use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError, Params, TrainingSet};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbConfig {
    /// Additive smoothing, must be positive.
    pub alpha: f64,
}

impl Default for NbConfig {
    fn default() -> Self {
        NbConfig { alpha: 1.0 }
    }
}

pub(crate) fn check_non_negative(x: &FeatureMatrix) -> Result<(), ModelError> {
    for row in 0..x.n_rows() {
        for (col, value) in x.row(row) {
            if value < 0.0 || value.is_nan() {
                return Err(ModelError::NegativeInput { row, col, value });
            }
        }
    }
    Ok(())
}

pub(crate) fn joint_log(x: &FeatureMatrix, i: usize, log_prior: &[f64; 2], log_lik: &[Vec<f64>; 2]) -> [f64; 2] {
    let mut out = *log_prior;
    for (j, v) in x.row(i) {
        out[0] += v * log_lik[0][j];
        out[1] += v * log_lik[1][j];
    }
    out
}

/// Multinomial model: ln P(c) = ln(n_c / n) and
/// ln P(j | c) = ln((N_cj + alpha) / (N_c + alpha * V)).
pub fn train_nb(ts: &TrainingSet<'_>, cfg: &NbConfig) -> Result<Model, ModelError> {
    if !(cfg.alpha > 0.0 && cfg.alpha.is_finite()) {
        return Err(ModelError::InvalidConfig(format!("alpha must be positive, got {}", cfg.alpha)));
    }
    check_non_negative(ts.x)?;
    let v = ts.x.n_cols;
    let mut n_c = [0usize; 2];
    let mut mass = [vec![0.0; v], vec![0.0; v]];
    for (i, &c) in ts.y.iter().enumerate() {
        n_c[c] += 1;
        for (j, val) in ts.x.row(i) {
            mass[c][j] += val;
        }
    }
    let n = ts.len() as f64;
    let log_prior = [(n_c[0] as f64 / n).ln(), (n_c[1] as f64 / n).ln()];
    let log_likelihood = mass.map(|row| {
        let total: f64 = row.iter().sum();
        let denom = total + cfg.alpha * v as f64;
        row.iter().map(|m| ((m + cfg.alpha) / denom).ln()).collect()
    });
    Ok(Model {
        config: ModelConfig::Nb(*cfg),
        vocab_fingerprint: ts.x.fingerprint.clone(),
        n_features: v,
        classes: ts.classes.clone(),
        params: Params::NaiveBayes {
            log_prior,
            log_likelihood,
        },
    })
}
