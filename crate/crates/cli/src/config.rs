//! Flat `key = value` run configuration. Flags override file values and the
//! effective result is echoed into report headers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ruhs_core::eval::Task;
use ruhs_core::features::{FeatureCode, FeatureSpec};
use ruhs_core::{ModelConfig, ModelKind};
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub corpus: Option<String>,
    pub out: Option<PathBuf>,
    pub task: Task,
    pub features: FeatureCode,
    pub min_df: usize,
    pub max_features: Option<usize>,
    pub classifier: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
    /// `<classifier>.<field>` overrides, e.g. `lr.l2_lambda`.
    pub hyper: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let limits = FeatureCode::Cv.spec().limits;
        RunConfig {
            lexicon: None,
            stopwords: None,
            corpus: None,
            out: None,
            task: Task::NeutralHostile,
            features: FeatureCode::Cv,
            min_df: limits.min_df,
            max_features: limits.max_features,
            classifier: ModelKind::Lr,
            k: 10,
            seed: DEFAULT_SEED,
            threshold: 0.4,
            hyper: BTreeMap::new(),
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config {key} = {value:?}: {why}"))
}

fn model_fields(kind: ModelKind) -> serde_json::Map<String, Value> {
    match serde_json::to_value(ModelConfig::default_for(kind)) {
        Ok(Value::Object(mut m)) => {
            m.remove("kind");
            m.remove("seed");
            m
        }
        _ => unreachable!("model configs serialize to objects"),
    }
}

impl RunConfig {
    pub fn parse_file(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key = value", i + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::Usage(format!("config line {}: {key} set twice", i + 1)));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "lexicon" => self.lexicon = Some(PathBuf::from(value)),
            "stopwords" => self.stopwords = Some(PathBuf::from(value)),
            "corpus" => self.corpus = Some(value.to_string()),
            "out" => self.out = Some(PathBuf::from(value)),
            "task" => self.task = value.parse().map_err(|e| bad(key, value, e))?,
            "features" => self.features = value.parse().map_err(|e| bad(key, value, e))?,
            "classifier" => self.classifier = value.parse().map_err(|e| bad(key, value, e))?,
            "min_df" => self.min_df = value.parse().map_err(|e| bad(key, value, e))?,
            "max_features" => {
                self.max_features = match value {
                    "none" => None,
                    v => Some(v.parse().map_err(|e| bad(key, value, e))?),
                }
            }
            "k" => {
                self.k = value.parse().map_err(|e| bad(key, value, e))?;
                if self.k < 2 {
                    return Err(bad(key, value, "k must be at least 2"));
                }
            }
            "seed" => self.seed = value.parse().map_err(|e| bad(key, value, e))?,
            "threshold" => {
                self.threshold = value.parse().map_err(|e| bad(key, value, e))?;
                if !(self.threshold > 0.0 && self.threshold <= 1.0) {
                    return Err(bad(key, value, "threshold must lie in (0, 1]"));
                }
            }
            _ => {
                let Some((prefix, field)) = key.split_once('.') else {
                    return Err(CliError::Usage(format!("unknown config key {key:?}")));
                };
                let kind: ModelKind = prefix
                    .parse()
                    .map_err(|_| CliError::Usage(format!("unknown config key {key:?}")))?;
                let fields = model_fields(kind);
                let Some(template) = fields.get(field) else {
                    let known: Vec<&String> = fields.keys().collect();
                    return Err(CliError::Usage(format!("unknown config key {key:?} (known for {kind}: {known:?})")));
                };
                coerce(template, value).map_err(|e| bad(key, value, e))?;
                self.hyper.insert(format!("{}.{field}", kind.as_str().to_lowercase()), value.to_string());
            }
        }
        Ok(())
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        let mut spec = self.features.spec();
        spec.limits.min_df = self.min_df;
        spec.limits.max_features = self.max_features;
        spec
    }

    /// Classifier defaults with this config's overrides and seed applied.
    pub fn model_config(&self) -> Result<ModelConfig, CliError> {
        let mut v = serde_json::to_value(ModelConfig::default_for(self.classifier)).expect("serializable");
        let prefix = format!("{}.", self.classifier.as_str().to_lowercase());
        for (key, value) in &self.hyper {
            if let Some(field) = key.strip_prefix(&prefix) {
                let typed = coerce(&v[field], value).map_err(|e| bad(key, value, e))?;
                v[field] = typed;
            }
        }
        let cfg: ModelConfig = serde_json::from_value(v).map_err(|e| CliError::Usage(format!("model config: {e}")))?;
        Ok(cfg.with_seed(self.seed))
    }

    /// `# key = value` lines for every setting, in a fixed order.
    pub fn header(&self, command: &str) -> Result<String, CliError> {
        let path = |p: &Option<PathBuf>, default: &str| {
            p.as_ref().map_or(default.to_string(), |p| p.display().to_string())
        };
        let model = self.model_config()?;
        let mut lines = vec![
            format!("command = {command}"),
            format!("corpus = {}", self.corpus.as_deref().unwrap_or("-")),
            format!("lexicon = {}", path(&self.lexicon, "(shipped)")),
            format!("stopwords = {}", path(&self.stopwords, "(lexicon)")),
            format!("task = {}", self.task),
            format!("features = {}", self.features),
            format!("min_df = {}", self.min_df),
            format!(
                "max_features = {}",
                self.max_features.map_or("none".to_string(), |n| n.to_string())
            ),
            format!("classifier = {}", self.classifier),
            format!("model = {}", model.describe()),
            format!("k = {}", self.k),
            format!("seed = {}", self.seed),
            format!("threshold = {}", self.threshold),
        ];
        lines.extend(self.hyper.iter().map(|(k, v)| format!("{k} = {v}")));
        Ok(lines.into_iter().map(|l| format!("# {l}\n")).collect())
    }
}

/// Parses `value` into the JSON type of `template`.
fn coerce(template: &Value, value: &str) -> Result<Value, String> {
    match template {
        Value::Bool(_) => value.parse::<bool>().map(Value::Bool).map_err(|e| e.to_string()),
        Value::Number(n) if n.is_u64() => value.parse::<u64>().map(Value::from).map_err(|e| e.to_string()),
        Value::Number(_) => {
            let x: f64 = value.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
            serde_json::Number::from_f64(x).map(Value::Number).ok_or_else(|| "not a finite number".into())
        }
        Value::String(_) => Ok(Value::String(value.to_string())),
        _ => Err("unsupported setting".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg = RunConfig::parse_file("# comment\nk = 5\nseed=7\nclassifier = nb\nnb.alpha = 0.5\n").unwrap();
        assert_eq!((cfg.k, cfg.seed, cfg.classifier), (5, 7, ModelKind::Nb));
        match cfg.model_config().unwrap() {
            ModelConfig::Nb(c) => assert_eq!(c.alpha, 0.5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse_file("colour = red"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse_file("lr.momentum = 1"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse_file("k = 1"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse_file("k = 3\nk = 4"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::parse_file("just words"), Err(CliError::Usage(_))));
    }

    #[test]
    fn overrides_reach_the_model() {
        let mut cfg = RunConfig::default();
        cfg.set("classifier", "rf").unwrap();
        cfg.set("rf.n_trees", "7").unwrap();
        cfg.set("rf.bootstrap", "false").unwrap();
        cfg.set("seed", "9").unwrap();
        match cfg.model_config().unwrap() {
            ModelConfig::Rf(c) => assert_eq!((c.n_trees, c.bootstrap, c.seed), (7, false, 9)),
            other => panic!("{other:?}"),
        }
        assert!(cfg.set("rf.n_trees", "many").is_err());
        let h = cfg.header("cv").unwrap();
        assert!(h.contains("# seed = 9\n") && h.contains("# rf.n_trees = 7\n"));
    }
}
