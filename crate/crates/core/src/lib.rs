//! Roman-Urdu hostile-speech corpus construction and classification.
//!
//! The pipeline runs from raw tweet dumps to evaluated classifiers:
//!
//! * [`ingest`] parses JSON-lines dumps, strips noise and filters candidates.
//! * [`normalize`] standardizes spelling variants and tokenizes.
//! * [`corpus`] holds labelled comments, their TSV form and summary counts.
//! * [`annotate`] is the staged guideline engine and annotation sessions.
//! * [`agreement`] computes Cohen's kappa between two annotators.
//! * [`features`] builds count, TF and TF-IDF matrices.
//! * [`models`] trains Naive Bayes, logistic regression, linear SVM and random forest.
//! * [`eval`] runs stratified cross-validation and renders result tables.

pub mod agreement;
pub mod annotate;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod normalize;

pub use agreement::{kappa, AgreementReport, AgreementTable};
pub use annotate::{decide, rule_catalog, AnnotationSession};
pub use corpus::{LabelPath, LabeledComment, RuleId, Stage};
pub use eval::{cross_validate, make_folds, metrics, Dataset, Task};
pub use features::{FeatureCode, FeatureMatrix, Vocabulary};
pub use models::{Model, ModelConfig, ModelKind};
pub use normalize::{standardize, NormalizationLexicon};

/// Root of the seed lexicon shipped with the repository.
pub fn shipped_lexicon_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/lexicon")
}
