//! Binary classifiers over [`FeatureMatrix`] rows: multinomial Naive Bayes,
//! logistic regression, a linear SVM and a random forest.
//!
//! Class labels are ordinals 0 and 1 into [`TrainingSet::classes`]. Every
//! tie (equal posteriors, equal votes, zero margin) resolves to ordinal 0.

mod forest;
mod linear;
mod nb;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;

pub use forest::{train_rf, FeatureSubsample, RfConfig, Tree, TreeNode};
pub use linear::{lr_objective, svm_objective, train_lr, train_svm, LrConfig, SvmConfig};
pub use nb::{train_nb, NbConfig};

pub const ARTIFACT_FORMAT: &str = "ruhs-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("row {row}: label {label} is not 0 or 1")]
    InvalidLabel { row: usize, label: usize },
    #[error("row {row}, column {col}: negative value {value} not allowed for naive bayes")]
    NegativeInput { row: usize, col: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("objective became non-finite at iteration {iteration}; lower the learning rate")]
    NonFinite { iteration: usize },
    #[error("feature vocabulary mismatch: model {expected} ({expected_cols} columns), input {found} ({found_cols} columns)")]
    VocabularyMismatch {
        expected: String,
        expected_cols: usize,
        found: String,
        found_cols: usize,
    },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Lr,
    Svm,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Nb, ModelKind::Lr, ModelKind::Rf, ModelKind::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nb => "NB",
            ModelKind::Lr => "LR",
            ModelKind::Svm => "SVM",
            ModelKind::Rf => "RF",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nb" => Ok(ModelKind::Nb),
            "lr" => Ok(ModelKind::Lr),
            "svm" => Ok(ModelKind::Svm),
            "rf" => Ok(ModelKind::Rf),
            _ => Err(format!("unknown classifier {s:?} (expected nb, lr, svm or rf)")),
        }
    }
}

/// Features, labels and the two class names.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub x: &'a FeatureMatrix,
    pub y: &'a [usize],
    pub classes: &'a [String; 2],
}

impl<'a> TrainingSet<'a> {
    pub fn new(x: &'a FeatureMatrix, y: &'a [usize], classes: &'a [String; 2]) -> Result<Self, ModelError> {
        if x.n_rows() != y.len() {
            return Err(ModelError::LengthMismatch {
                rows: x.n_rows(),
                labels: y.len(),
            });
        }
        let mut seen = [false; 2];
        for (row, &label) in y.iter().enumerate() {
            if label > 1 {
                return Err(ModelError::InvalidLabel { row, label });
            }
            seen[label] = true;
        }
        if !(seen[0] && seen[1]) {
            return Err(ModelError::SingleClass);
        }
        Ok(TrainingSet { x, y, classes })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelConfig {
    Nb(NbConfig),
    Lr(LrConfig),
    Svm(SvmConfig),
    Rf(RfConfig),
}

impl ModelConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Nb => ModelConfig::Nb(NbConfig::default()),
            ModelKind::Lr => ModelConfig::Lr(LrConfig::default()),
            ModelKind::Svm => ModelConfig::Svm(SvmConfig::default()),
            ModelKind::Rf => ModelConfig::Rf(RfConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Nb(_) => ModelKind::Nb,
            ModelConfig::Lr(_) => ModelKind::Lr,
            ModelConfig::Svm(_) => ModelKind::Svm,
            ModelConfig::Rf(_) => ModelKind::Rf,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ModelConfig::Nb(_) => None,
            ModelConfig::Lr(c) => Some(c.seed),
            ModelConfig::Svm(c) => Some(c.seed),
            ModelConfig::Rf(c) => Some(c.seed),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelConfig::Nb(_) => {}
            ModelConfig::Lr(c) => c.seed = seed,
            ModelConfig::Svm(c) => c.seed = seed,
            ModelConfig::Rf(c) => c.seed = seed,
        }
        self
    }

    /// `key=value` pairs in a fixed order, for report headers.
    pub fn describe(&self) -> String {
        match self {
            ModelConfig::Nb(c) => format!("alpha={}", c.alpha),
            ModelConfig::Lr(c) => format!(
                "l2_lambda={} learning_rate={} max_iters={} tol={} seed={}",
                c.l2_lambda, c.learning_rate, c.max_iters, c.tol, c.seed
            ),
            ModelConfig::Svm(c) => format!(
                "c={} epochs={} learning_rate={} seed={}",
                c.c, c.epochs, c.learning_rate, c.seed
            ),
            ModelConfig::Rf(c) => format!(
                "n_trees={} max_depth={} min_leaf={} feature_subsample={} bootstrap={} seed={}",
                c.n_trees, c.max_depth, c.min_leaf, c.feature_subsample, c.bootstrap, c.seed
            ),
        }
    }
}

pub fn train(ts: &TrainingSet<'_>, cfg: &ModelConfig) -> Result<Model, ModelError> {
    match cfg {
        ModelConfig::Nb(c) => train_nb(ts, c),
        ModelConfig::Lr(c) => train_lr(ts, c),
        ModelConfig::Svm(c) => train_svm(ts, c),
        ModelConfig::Rf(c) => train_rf(ts, c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Params {
    NaiveBayes {
        /// ln P(c) per class.
        log_prior: [f64; 2],
        /// ln P(term j | c), one row per class.
        log_likelihood: [Vec<f64>; 2],
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Forest {
        trees: Vec<Tree>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab_fingerprint: String,
    pub n_features: usize,
    pub classes: [String; 2],
    pub params: Params,
}

/// Per-row class ordinals plus one real score per row. The score is
/// P(class 1) for NB and LR, the margin w·x+b for SVM and the class-1 vote
/// share for RF.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub scores: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot_row(x: &FeatureMatrix, i: usize, w: &[f64]) -> f64 {
    x.row(i).map(|(j, v)| w[j] * v).sum()
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.config.kind()
    }

    pub fn seed(&self) -> Option<u64> {
        self.config.seed()
    }

    pub fn check_input(&self, x: &FeatureMatrix) -> Result<(), ModelError> {
        if x.fingerprint != self.vocab_fingerprint || x.n_cols != self.n_features {
            return Err(ModelError::VocabularyMismatch {
                expected: self.vocab_fingerprint.clone(),
                expected_cols: self.n_features,
                found: x.fingerprint.clone(),
                found_cols: x.n_cols,
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Prediction, ModelError> {
        self.check_input(x)?;
        let n = x.n_rows();
        let mut labels = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        match &self.params {
            Params::NaiveBayes { log_prior, log_likelihood } => {
                nb::check_non_negative(x)?;
                for i in 0..n {
                    let joint = nb::joint_log(x, i, log_prior, log_likelihood);
                    labels.push(usize::from(joint[1] > joint[0]));
                    scores.push(sigmoid(joint[1] - joint[0]));
                }
            }
            Params::Linear { weights, bias } => {
                for i in 0..n {
                    let z = dot_row(x, i, weights) + bias;
                    labels.push(usize::from(z > 0.0));
                    scores.push(match self.kind() {
                        ModelKind::Lr => sigmoid(z),
                        _ => z,
                    });
                }
            }
            Params::Forest { trees } => {
                for i in 0..n {
                    let votes = trees.iter().filter(|t| t.predict_row(x, i) == 1).count();
                    labels.push(usize::from(2 * votes > trees.len()));
                    scores.push(votes as f64 / trees.len() as f64);
                }
            }
        }
        Ok(Prediction { labels, scores })
    }

    /// Class names for each predicted row.
    pub fn predict_names(&self, x: &FeatureMatrix) -> Result<Vec<&str>, ModelError> {
        Ok(self
            .predict(x)?
            .labels
            .into_iter()
            .map(|l| self.classes[l].as_str())
            .collect())
    }

    /// Pretty JSON artifact: a header (format, version, kind, hyperparameters,
    /// seed, vocabulary fingerprint, feature count, classes) followed by the
    /// parameter payload.
    pub fn save<W: Write>(&self, w: W) -> Result<(), ModelError> {
        let art = ArtifactRef {
            format: ARTIFACT_FORMAT,
            version: ARTIFACT_VERSION,
            kind: self.kind(),
            hyperparameters: &self.config,
            seed: self.seed(),
            vocab_fingerprint: &self.vocab_fingerprint,
            n_features: self.n_features,
            classes: &self.classes,
            params: &self.params,
        };
        serde_json::to_writer_pretty(w, &art).map_err(|e| ModelError::Artifact(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn load<R: Read>(r: R) -> Result<Model, ModelError> {
        let art: Artifact = serde_json::from_reader(r).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if art.format != ARTIFACT_FORMAT {
            return Err(ModelError::Artifact(format!("unexpected format {:?}", art.format)));
        }
        if art.version != ARTIFACT_VERSION {
            return Err(ModelError::Artifact(format!("unsupported version {}", art.version)));
        }
        if art.kind != art.hyperparameters.kind() {
            return Err(ModelError::Artifact("kind disagrees with hyperparameters".into()));
        }
        let shape_ok = match &art.params {
            Params::NaiveBayes { log_likelihood, .. } => log_likelihood.iter().all(|r| r.len() == art.n_features),
            Params::Linear { weights, .. } => weights.len() == art.n_features,
            Params::Forest { trees } => !trees.is_empty() && trees.iter().all(|t| t.max_feature() < art.n_features),
        };
        if !shape_ok {
            return Err(ModelError::Artifact("parameter shapes do not match n_features".into()));
        }
        Ok(Model {
            config: art.hyperparameters,
            vocab_fingerprint: art.vocab_fingerprint,
            n_features: art.n_features,
            classes: art.classes,
            params: art.params,
        })
    }
}

#[derive(Serialize)]
struct ArtifactRef<'a> {
    format: &'a str,
    version: u32,
    kind: ModelKind,
    hyperparameters: &'a ModelConfig,
    seed: Option<u64>,
    vocab_fingerprint: &'a str,
    n_features: usize,
    classes: &'a [String; 2],
    params: &'a Params,
}

#[derive(Deserialize)]
struct Artifact {
    format: String,
    version: u32,
    kind: ModelKind,
    hyperparameters: ModelConfig,
    #[allow(dead_code)]
    seed: Option<u64>,
    vocab_fingerprint: String,
    n_features: usize,
    classes: [String; 2],
    params: Params,
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::features::Scheme;

    pub fn classes() -> [String; 2] {
        ["N".to_string(), "H".to_string()]
    }

    pub fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_dense(rows, Scheme::Count, "test")
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    fn separable() -> (FeatureMatrix, Vec<usize>) {
        let rows = vec![
            vec![3.0, 0.0, 1.0],
            vec![2.0, 0.0, 0.0],
            vec![4.0, 1.0, 0.0],
            vec![0.0, 3.0, 1.0],
            vec![0.0, 2.0, 0.0],
            vec![1.0, 4.0, 0.0],
        ];
        (matrix(&rows), vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn training_set_validation() {
        let (x, y) = separable();
        let c = classes();
        assert!(matches!(TrainingSet::new(&x, &[0; 6], &c), Err(ModelError::SingleClass)));
        assert!(matches!(
            TrainingSet::new(&x, &y[..5], &c),
            Err(ModelError::LengthMismatch { rows: 6, labels: 5 })
        ));
        assert!(matches!(
            TrainingSet::new(&x, &[0, 1, 2, 0, 0, 0], &c),
            Err(ModelError::InvalidLabel { row: 2, label: 2 })
        ));
    }

    #[test]
    fn every_kind_fits_separable_data_and_round_trips() {
        let (x, y) = separable();
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        for kind in ModelKind::ALL {
            let cfg = match ModelConfig::default_for(kind) {
                ModelConfig::Rf(mut r) => {
                    r.n_trees = 15;
                    ModelConfig::Rf(r)
                }
                other => other,
            };
            let m = train(&ts, &cfg).unwrap();
            let p = m.predict(&x).unwrap();
            assert_eq!(p.labels, y, "{kind}");
            let json = m.to_json();
            let back = Model::load(json.as_bytes()).unwrap();
            assert_eq!(back, m, "{kind}");
            assert_eq!(back.predict(&x).unwrap(), p, "{kind}");
            assert_eq!(back.to_json(), json);
        }
    }

    #[test]
    fn mismatched_vocabulary_is_rejected() {
        let (x, y) = separable();
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        let m = train_nb(&ts, &NbConfig::default()).unwrap();
        let mut other = x.clone();
        other.fingerprint = "other".into();
        assert!(matches!(m.predict(&other), Err(ModelError::VocabularyMismatch { .. })));
    }

    #[test]
    fn artifact_header_fields() {
        let (x, y) = separable();
        let c = classes();
        let ts = TrainingSet::new(&x, &y, &c).unwrap();
        let m = train(&ts, &ModelConfig::default_for(ModelKind::Lr).with_seed(7)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["format"], ARTIFACT_FORMAT);
        assert_eq!(v["version"], ARTIFACT_VERSION);
        assert_eq!(v["kind"], "lr");
        assert_eq!(v["seed"], 7);
        assert_eq!(v["n_features"], 3);
        assert_eq!(v["vocab_fingerprint"], "test");
        assert_eq!(v["hyperparameters"]["l2_lambda"], 1.0);

        let mut bad = v.clone();
        bad["version"] = 99.into();
        assert!(Model::load(bad.to_string().as_bytes()).is_err());
        let mut bad = v;
        bad["params"]["weights"] = serde_json::json!([1.0]);
        assert!(Model::load(bad.to_string().as_bytes()).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("LR".parse::<ModelKind>().unwrap(), ModelKind::Lr);
        assert!("xgb".parse::<ModelKind>().is_err());
    }
}
