use serde::{Deserialize, Serialize};

use super::{dot_row, sigmoid, Model, ModelConfig, ModelError, Params, TrainingSet};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            l2_lambda: 1.0,
            learning_rate: 0.1,
            max_iters: 1000,
            tol: 1e-6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Inverse regularization strength; lambda = 1 / (C * n).
    pub c: f64,
    pub epochs: usize,
    /// Initial step; step t is learning_rate / sqrt(t).
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 1000,
            learning_rate: 1.0,
            seed: 42,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus (lambda / 2n)·‖w‖², with its gradient in w and b.
/// The bias is not regularized.
pub fn lr_objective(x: &FeatureMatrix, y: &[usize], w: &[f64], b: f64, lambda: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let z = dot_row(x, i, w) + b;
        let t = label as f64;
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        gb += r;
        for (j, v) in x.row(i) {
            gw[j] += r * v;
        }
    }
    let sq: f64 = w.iter().map(|v| v * v).sum();
    loss = loss / n + lambda / (2.0 * n) * sq;
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / n + lambda / n * wj;
    }
    (loss, gw, gb / n)
}

fn check_positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

/// Full-batch gradient descent from the zero vector.
pub fn train_lr(ts: &TrainingSet<'_>, cfg: &LrConfig) -> Result<Model, ModelError> {
    check_positive("learning_rate", cfg.learning_rate)?;
    if !(cfg.l2_lambda >= 0.0 && cfg.l2_lambda.is_finite()) {
        return Err(ModelError::InvalidConfig(format!("l2_lambda must be non-negative, got {}", cfg.l2_lambda)));
    }
    let v = ts.x.n_cols;
    let mut w = vec![0.0; v];
    let mut b = 0.0;
    for iteration in 0..cfg.max_iters {
        let (loss, gw, gb) = lr_objective(ts.x, ts.y, &w, b, cfg.l2_lambda);
        if !loss.is_finite() {
            return Err(ModelError::NonFinite { iteration });
        }
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if norm < cfg.tol {
            break;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= cfg.learning_rate * g;
        }
        b -= cfg.learning_rate * gb;
    }
    if w.iter().any(|x| !x.is_finite()) || !b.is_finite() {
        return Err(ModelError::NonFinite { iteration: cfg.max_iters });
    }
    Ok(Model {
        config: ModelConfig::Lr(*cfg),
        vocab_fingerprint: ts.x.fingerprint.clone(),
        n_features: v,
        classes: ts.classes.clone(),
        params: Params::Linear { weights: w, bias: b },
    })
}

/// (lambda / 2)·‖w‖² + mean hinge loss, labels mapped to -1 / +1.
pub fn svm_objective(x: &FeatureMatrix, y: &[usize], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let hinge: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let s = if l == 1 { 1.0 } else { -1.0 };
            (1.0 - s * (dot_row(x, i, w) + b)).max(0.0)
        })
        .sum();
    lambda / 2.0 * w.iter().map(|v| v * v).sum::<f64>() + hinge / n
}

/// Full-batch subgradient descent with step learning_rate / sqrt(t),
/// returning the iterate with the lowest objective.
pub fn train_svm(ts: &TrainingSet<'_>, cfg: &SvmConfig) -> Result<Model, ModelError> {
    check_positive("c", cfg.c)?;
    check_positive("learning_rate", cfg.learning_rate)?;
    let n = ts.len() as f64;
    let lambda = 1.0 / (cfg.c * n);
    let v = ts.x.n_cols;
    let mut w = vec![0.0; v];
    let mut b = 0.0;
    let mut best = (svm_objective(ts.x, ts.y, &w, b, lambda), w.clone(), b);
    for t in 1..=cfg.epochs {
        let mut gw: Vec<f64> = w.iter().map(|wj| lambda * wj).collect();
        let mut gb = 0.0;
        for (i, &l) in ts.y.iter().enumerate() {
            let s = if l == 1 { 1.0 } else { -1.0 };
            if s * (dot_row(ts.x, i, &w) + b) < 1.0 {
                gb -= s / n;
                for (j, xv) in ts.x.row(i) {
                    gw[j] -= s * xv / n;
                }
            }
        }
        let eta = cfg.learning_rate / (t as f64).sqrt();
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= eta * g;
        }
        b -= eta * gb;
        let obj = svm_objective(ts.x, ts.y, &w, b, lambda);
        if !obj.is_finite() {
            return Err(ModelError::NonFinite { iteration: t });
        }
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    let (_, weights, bias) = best;
    Ok(Model {
        config: ModelConfig::Svm(*cfg),
        vocab_fingerprint: ts.x.fingerprint.clone(),
        n_features: v,
        classes: ts.classes.clone(),
        params: Params::Linear { weights, bias },
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weights(m: &Model) -> (&[f64], f64) {
        match &m.params {
            Params::Linear { weights, bias } => (weights, *bias),
            _ => unreachable!(),
        }
    }

    #[test]
    fn two_point_separable() {
        let x = matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = [0, 1];
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        let m = train_lr(&ts, &LrConfig::default()).unwrap();
        let p = m.predict(&x).unwrap();
        assert_eq!(p.labels, y);
        for s in p.scores {
            assert!((0.0..=1.0).contains(&s));
            assert!((s + (1.0 - s) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..5).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
        let y: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let x = matrix(&rows);
        for _ in 0..10 {
            let w: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = rng.gen_range(-1.0..1.0);
            let (_, gw, gb) = lr_objective(&x, &y, &w, b, 0.7);
            let h = 1e-5;
            for j in 0..=5 {
                let eval = |d: f64| {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if j < 5 {
                        w2[j] += d;
                    } else {
                        b2 += d;
                    }
                    lr_objective(&x, &y, &w2, b2, 0.7).0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = if j < 5 { gw[j] } else { gb };
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-5, "coordinate {j}: analytic {an} numeric {fd}");
            }
        }
    }

    #[test]
    fn weight_norm_shrinks_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + 0.3 * r[1] > 0.6)).collect();
        let x = matrix(&rows);
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        let norms: Vec<f64> = [0.01, 1.0, 100.0]
            .iter()
            .map(|&l| {
                let m = train_lr(&ts, &LrConfig { l2_lambda: l, ..LrConfig::default() }).unwrap();
                weights(&m).0.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
    }

    #[test]
    fn divergence_reports_non_finite() {
        let x = matrix(&[vec![1e200, 0.0], vec![0.0, 1e200]]);
        let c = classes();
        let ts = TrainingSet::new(&x, &[0, 1], &c).unwrap();
        let cfg = LrConfig { learning_rate: 1e300, ..LrConfig::default() };
        assert!(matches!(train_lr(&ts, &cfg), Err(ModelError::NonFinite { .. })));
    }

    #[test]
    fn svm_reaches_zero_hinge_on_separable_data() {
        let x = matrix(&[vec![2.0, 0.0], vec![3.0, 1.0], vec![0.0, 2.0], vec![1.0, 3.0]]);
        let y = [0, 0, 1, 1];
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        let m = train_svm(&ts, &SvmConfig { c: 100.0, epochs: 3000, ..SvmConfig::default() }).unwrap();
        let (w, b) = weights(&m);
        let hinge = svm_objective(&x, &y, w, b, 0.0);
        assert!(hinge < 1e-9, "hinge {hinge}");
        assert_eq!(m.predict(&x).unwrap().labels, y);
    }

    #[test]
    fn svm_sign_is_the_decision() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > r[1])).collect();
        let x = matrix(&rows);
        let c = classes();
        let m = train_svm(&TrainingSet::new(&x, &y, &c).unwrap(), &SvmConfig::default()).unwrap();
        let (w, b) = weights(&m);
        let pts: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let px = matrix(&pts);
        let p = m.predict(&px).unwrap();
        for (i, r) in pts.iter().enumerate() {
            let z: f64 = r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            assert_eq!(p.labels[i], usize::from(z > 0.0));
            assert_eq!(p.scores[i].to_bits(), (dot_row(&px, i, w) + b).to_bits());
        }
    }

    #[test]
    fn svm_matches_grid_search() {
        let rows = vec![
            vec![1.0, 2.0],
            vec![2.0, 2.5],
            vec![0.5, 0.5],
            vec![2.0, 0.5],
            vec![3.0, 1.0],
            vec![1.5, 1.4],
        ];
        let y = [1, 1, 0, 0, 0, 1];
        let x = matrix(&rows);
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        let cfg = SvmConfig { c: 1.0, epochs: 20_000, ..SvmConfig::default() };
        let m = train_svm(&ts, &cfg).unwrap();
        let lambda = 1.0 / (cfg.c * rows.len() as f64);
        let (w, b) = weights(&m);
        let ours = svm_objective(&x, &y, w, b, lambda);

        let mut grid_best = f64::INFINITY;
        let steps = 120;
        let at = |k: i32| -3.0 + 6.0 * f64::from(k) / f64::from(steps);
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let o = svm_objective(&x, &y, &[at(i), at(j)], at(k), lambda);
                    grid_best = grid_best.min(o);
                }
            }
        }
        assert!(ours <= grid_best + 1e-2, "ours {ours} grid {grid_best}");
    }

    #[test]
    fn linear_training_is_bit_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..25).map(|_| (0..6).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
        let y: Vec<usize> = (0..25).map(|i| usize::from(i % 3 == 0)).collect();
        let x = matrix(&rows);
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        assert_eq!(train_lr(&ts, &LrConfig::default()).unwrap(), train_lr(&ts, &LrConfig::default()).unwrap());
        assert_eq!(train_svm(&ts, &SvmConfig::default()).unwrap(), train_svm(&ts, &SvmConfig::default()).unwrap());
    }
}
