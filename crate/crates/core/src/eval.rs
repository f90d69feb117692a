//! Stratified k-fold cross-validation, precision/recall/F1, result tables and
//! misclassification reason tagging.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FineLabel, LabelPath, LabeledComment, Structure, TopLabel};
use crate::features::{fit_vocabulary, transform, FeatureCode, FeatureError, FeatureSpec, Vocabulary};
use crate::models::{train, ModelConfig, ModelError, ModelKind, TrainingSet};
use crate::normalize::{preprocess, standardize, NormalizationLexicon, PreprocessConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class:?} has {count} examples, fewer than k={k}")]
    TooFewExamples { class: String, count: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("fold plan covers {plan} items but the dataset has {data}")]
    PlanMismatch { plan: usize, data: usize },
    #[error("unknown reason code {0:?} (expected A to J)")]
    UnknownReasonCode(String),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which binary problem a dataset poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Every comment; Hostile is the positive class.
    NeutralHostile,
    /// Hostile comments only; Hateful is the positive class.
    OffensiveHateful,
}

impl Task {
    /// Class names by ordinal; ordinal 1 is the positive class.
    pub fn classes(self) -> [String; 2] {
        match self {
            Task::NeutralHostile => ["N".to_string(), "H".to_string()],
            Task::OffensiveHateful => ["O".to_string(), "H".to_string()],
        }
    }

    fn label(self, path: &LabelPath) -> Option<usize> {
        match self {
            Task::NeutralHostile => Some(usize::from(path.top == TopLabel::Hostile)),
            Task::OffensiveHateful => path.fine.map(|f| usize::from(f == FineLabel::Hateful)),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::NeutralHostile => "neutral-hostile",
            Task::OffensiveHateful => "offensive-hateful",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neutral-hostile" | "nh" | "1" => Ok(Task::NeutralHostile),
            "offensive-hateful" | "oh" | "2" => Ok(Task::OffensiveHateful),
            _ => Err(format!("unknown task {s:?} (expected neutral-hostile or offensive-hateful)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub task: Task,
    pub classes: [String; 2],
    pub examples: Vec<Example>,
}

impl Dataset {
    /// Standardizes and tokenizes every comment the task applies to.
    pub fn from_corpus(corpus: &[LabeledComment], task: Task, lex: &NormalizationLexicon, cfg: PreprocessConfig) -> Self {
        let examples = corpus
            .iter()
            .filter_map(|c| {
                let label = task.label(&c.path)?;
                let tokens = preprocess(&standardize(&c.text, lex), lex, cfg).lemmas();
                Some(Example {
                    id: c.id.clone(),
                    text: c.text.clone(),
                    tokens,
                    label,
                })
            })
            .collect();
        Dataset {
            task,
            classes: task.classes(),
            examples,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold index of each item, in dataset order.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    /// Map from item id to fold.
    pub fn by_id<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, usize> {
        ids.into_iter()
            .zip(&self.assignments)
            .map(|(id, &f)| (id.to_string(), f))
            .collect()
    }
}

/// Shuffles each class with a seeded ChaCha8 stream, then deals items to
/// folds round-robin. The dealing position carries over from one class to the
/// next, so fold sizes differ by at most one overall and per class.
pub fn make_folds(labels: &[usize], k: usize, seed: u64, classes: &[String; 2]) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for (c, name) in classes.iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < k {
            return Err(EvalError::TooFewExamples {
                class: name.clone(),
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    /// tp + fp = 0.
    pub no_predicted_positives: bool,
    /// tp + fn = 0.
    pub no_actual_positives: bool,
    /// P + R = 0.
    pub f1_undefined: bool,
    pub empty: bool,
}

impl MetricFlags {
    pub fn any(&self) -> bool {
        self.no_predicted_positives || self.no_actual_positives || self.f1_undefined || self.empty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: MetricFlags,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

/// Accuracy, precision, recall and F1 for the positive class. Zero
/// denominators yield 0 and set the matching flag.
pub fn metrics(tp: u64, fp: u64, fn_: u64, tn: u64) -> Metrics {
    let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let (accuracy, empty) = ratio(tp + tn, tp + fp + fn_ + tn);
    let (precision, no_pred) = ratio(tp, tp + fp);
    let (recall, no_actual) = ratio(tp, tp + fn_);
    let (f1, f1_undefined) = ratio(2.0 * precision * recall, precision + recall);
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
        flags: MetricFlags {
            no_predicted_positives: no_pred,
            no_actual_positives: no_actual,
            f1_undefined,
            empty,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    /// Zero-based; tables print it one-based.
    pub fold: usize,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub metrics: Metrics,
    /// Dataset indices of misclassified test items with their predicted ordinal.
    pub misclassified: Vec<(usize, usize)>,
}

impl FoldReport {
    pub fn from_predictions(fold: usize, indices: &[usize], actual: &[usize], predicted: &[usize]) -> Self {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        let mut misclassified = Vec::new();
        for ((&i, &a), &p) in indices.iter().zip(actual).zip(predicted) {
            match (a, p) {
                (1, 1) => tp += 1,
                (0, 1) => fp += 1,
                (1, 0) => fn_ += 1,
                _ => tn += 1,
            }
            if a != p {
                misclassified.push((i, p));
            }
        }
        FoldReport {
            fold,
            tp,
            fp,
            fn_,
            tn,
            metrics: metrics(tp, fp, fn_, tn),
            misclassified,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: Task,
    pub classifier: ModelKind,
    pub feature: FeatureCode,
    pub model_config: ModelConfig,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
}

impl RunReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.metrics.accuracy).collect()
    }
}

/// The documents at `idx`, borrowed.
fn docs_at<'a>(ds: &'a Dataset, idx: &[usize]) -> Vec<&'a [String]> {
    idx.iter().map(|&i| ds.examples[i].tokens.as_slice()).collect()
}

/// Vocabulary fitted on the training split of one fold only.
pub fn fold_vocabulary(ds: &Dataset, plan: &FoldPlan, fold: usize, spec: &FeatureSpec) -> Result<Vocabulary, EvalError> {
    let train_idx = plan.train_indices(fold);
    Ok(fit_vocabulary(&docs_at(ds, &train_idx), spec.mode, spec.limits)?)
}

fn run_fold(ds: &Dataset, plan: &FoldPlan, fold: usize, spec: &FeatureSpec, cfg: &ModelConfig) -> Result<FoldReport, EvalError> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let vocab = fold_vocabulary(ds, plan, fold, spec)?;
    let x_train = transform(&docs_at(ds, &train_idx), &vocab, spec.scheme);
    let x_test = transform(&docs_at(ds, &test_idx), &vocab, spec.scheme);
    let y_train: Vec<usize> = train_idx.iter().map(|&i| ds.examples[i].label).collect();
    let y_test: Vec<usize> = test_idx.iter().map(|&i| ds.examples[i].label).collect();
    let ts = TrainingSet::new(&x_train, &y_train, &ds.classes)?;
    let model = train(&ts, cfg)?;
    let pred = model.predict(&x_test)?;
    Ok(FoldReport::from_predictions(fold, &test_idx, &y_test, &pred.labels))
}

/// Evaluates the listed folds in parallel and assembles them in the order given.
pub fn evaluate_folds(
    ds: &Dataset,
    feature: FeatureCode,
    spec: &FeatureSpec,
    cfg: &ModelConfig,
    plan: &FoldPlan,
    folds: &[usize],
) -> Result<RunReport, EvalError> {
    if plan.assignments.len() != ds.len() {
        return Err(EvalError::PlanMismatch {
            plan: plan.assignments.len(),
            data: ds.len(),
        });
    }
    let reports: Vec<FoldReport> = folds
        .par_iter()
        .map(|&f| run_fold(ds, plan, f, spec, cfg))
        .collect::<Result<_, _>>()?;
    let n = reports.len() as f64;
    let mean_accuracy = reports.iter().map(|r| r.metrics.accuracy).sum::<f64>() / n;
    let mean_f1 = reports.iter().map(|r| r.metrics.f1).sum::<f64>() / n;
    Ok(RunReport {
        task: ds.task,
        classifier: cfg.kind(),
        feature,
        model_config: cfg.clone(),
        k: plan.k,
        seed: plan.seed,
        folds: reports,
        mean_accuracy,
        mean_f1,
    })
}

pub fn cross_validate(
    ds: &Dataset,
    feature: FeatureCode,
    spec: &FeatureSpec,
    cfg: &ModelConfig,
    plan: &FoldPlan,
) -> Result<RunReport, EvalError> {
    let folds: Vec<usize> = (0..plan.k).collect();
    evaluate_folds(ds, feature, spec, cfg, plan, &folds)
}

/// A single stratified 90:10 split: fold 0 of a 10-fold plan.
pub fn holdout(ds: &Dataset, feature: FeatureCode, spec: &FeatureSpec, cfg: &ModelConfig, seed: u64) -> Result<RunReport, EvalError> {
    let plan = make_folds(&ds.labels(), 10, seed, &ds.classes)?;
    evaluate_folds(ds, feature, spec, cfg, &plan, &[0])
}

/// Classifier and feature pairings that appear in the reference result tables.
pub fn reference_pairing(kind: ModelKind, feature: FeatureCode) -> bool {
    match kind {
        ModelKind::Nb | ModelKind::Lr => true,
        ModelKind::Rf => feature != FeatureCode::Clv,
        ModelKind::Svm => feature == FeatureCode::Ngv,
    }
}

fn pad(cells: &[String], widths: &[usize]) -> String {
    cells
        .iter()
        .zip(widths)
        .map(|(c, w)| format!("{c:<w$}"))
        .collect::<Vec<_>>()
        .join("  ")
        .trim_end()
        .to_string()
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0))
        .collect();
    rows.iter().map(|r| pad(r, &widths) + "\n").collect()
}

/// Fold accuracies per classifier and feature code, two decimals. The
/// classifier name is printed on its first row only.
pub fn render_accuracy_table(runs: &[RunReport]) -> String {
    let k = runs.iter().map(|r| r.folds.len()).max().unwrap_or(0);
    let mut header = vec!["Classifier".to_string(), "Feature".to_string()];
    header.extend((1..=k).map(|i| i.to_string()));
    header.push("Mean Score".to_string());
    let mut rows = vec![header];
    let mut last: Option<ModelKind> = None;
    let mut unpaired = false;
    for r in runs {
        let name = if last == Some(r.classifier) { String::new() } else { r.classifier.to_string() };
        last = Some(r.classifier);
        let mut feature = r.feature.to_string();
        if !reference_pairing(r.classifier, r.feature) {
            feature.push('+');
            unpaired = true;
        }
        let mut row = vec![name, feature];
        row.extend(r.folds.iter().map(|f| format!("{:.2}", f.metrics.accuracy)));
        row.extend(std::iter::repeat_n(String::new(), k - r.folds.len()));
        row.push(format!("{:.2}", r.mean_accuracy));
        rows.push(row);
    }
    let mut out = aligned(&rows);
    if unpaired {
        out.push_str("+ pairing not among the reference results\n");
    }
    out
}

/// Per-fold confusion counts with P, R and F1 to three decimals; the
/// average F1 sits on the first fold's row.
pub fn render_fold_table(run: &RunReport) -> String {
    let head = ["Folds", "TP", "FP", "FN", "TN", "P", "R", "F1 score", "Avg. F1 score"];
    let mut rows = vec![head.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for (n, f) in run.folds.iter().enumerate() {
        let m = &f.metrics;
        rows.push(vec![
            (f.fold + 1).to_string(),
            f.tp.to_string(),
            f.fp.to_string(),
            f.fn_.to_string(),
            f.tn.to_string(),
            format!("{:.3}", m.precision),
            format!("{:.3}", m.recall),
            format!("{:.3}", m.f1),
            if n == 0 { format!("{:.3}", run.mean_f1) } else { String::new() },
        ]);
    }
    let mut out = format!("{} + {} ({})\n", run.classifier, run.feature, run.task);
    out.push_str(&aligned(&rows));
    out
}

pub const RUNS_TSV_HEADER: &str = "task\tclassifier\tfeature\tfold\ttp\tfp\tfn\ttn\taccuracy\tprecision\trecall\tf1\tflags";

/// One row per fold, full precision.
pub fn write_runs_tsv<W: Write>(mut w: W, runs: &[RunReport]) -> std::io::Result<()> {
    writeln!(w, "{RUNS_TSV_HEADER}")?;
    for r in runs {
        for f in &r.folds {
            let m = &f.metrics;
            let mut flags = Vec::new();
            if m.flags.no_predicted_positives {
                flags.push("no_predicted_positives");
            }
            if m.flags.no_actual_positives {
                flags.push("no_actual_positives");
            }
            if m.flags.f1_undefined {
                flags.push("f1_undefined");
            }
            if m.flags.empty {
                flags.push("empty");
            }
            let flags = if flags.is_empty() { "-".to_string() } else { flags.join(",") };
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.task,
                r.classifier,
                r.feature,
                f.fold + 1,
                f.tp,
                f.fp,
                f.fn_,
                f.tn,
                m.accuracy,
                m.precision,
                m.recall,
                m.f1,
                flags
            )?;
        }
    }
    Ok(())
}

/// Misclassification reasons A to J.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReasonCode {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
}

impl ReasonCode {
    pub const ALL: [ReasonCode; 10] = [
        ReasonCode::A,
        ReasonCode::B,
        ReasonCode::C,
        ReasonCode::D,
        ReasonCode::E,
        ReasonCode::F,
        ReasonCode::G,
        ReasonCode::H,
        ReasonCode::I,
        ReasonCode::J,
    ];

    pub fn description(self) -> &'static str {
        match self {
            ReasonCode::A => "Use of Hate word(s)",
            ReasonCode::B => "No Hate word(s)",
            ReasonCode::C => "Sarcasm/Taunt",
            ReasonCode::D => "Offensive Act (without much hate wording)",
            ReasonCode::E => "Blame/Threat (without much hate wording)",
            ReasonCode::F => "Abbreviation of some offensive/hateful term is used",
            ReasonCode::G => "Hate word rarely occurred in the dataset",
            ReasonCode::H => "Word(s) is predominantly hateful in the dataset",
            ReasonCode::I => "Word(s) is predominantly neutral in the dataset",
            ReasonCode::J => "Spelling variations in Roman Urdu",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ReasonCode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        ReasonCode::ALL
            .into_iter()
            .find(|c| c.to_string() == t)
            .ok_or_else(|| EvalError::UnknownReasonCode(t.to_string()))
    }
}

/// Comma-separated codes such as "B, C"; an empty field means untagged.
pub fn parse_reasons(s: &str) -> Result<Vec<ReasonCode>, EvalError> {
    let mut out: Vec<ReasonCode> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misclassified {
    pub text: String,
    pub actual: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedError {
    pub text: String,
    pub actual: String,
    pub predicted: String,
    pub reasons: Vec<ReasonCode>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub entries: Vec<TaggedError>,
    pub counts: BTreeMap<ReasonCode, usize>,
}

/// Joins each misclassified comment with its human-assigned reason codes.
pub fn tag_errors(items: &[Misclassified], codes: &[&str]) -> Result<ErrorReport, EvalError> {
    let mut report = ErrorReport::default();
    for (m, c) in items.iter().zip(codes) {
        let reasons = parse_reasons(c)?;
        for r in &reasons {
            *report.counts.entry(*r).or_default() += 1;
        }
        report.entries.push(TaggedError {
            text: m.text.clone(),
            actual: m.actual.clone(),
            predicted: m.predicted.clone(),
            reasons,
        });
    }
    Ok(report)
}

pub const ERRORS_TSV_HEADER: &str = "text\tactual\tpredicted\treasons";

impl ErrorReport {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{ERRORS_TSV_HEADER}")?;
        for e in &self.entries {
            let reasons: Vec<String> = e.reasons.iter().map(ToString::to_string).collect();
            writeln!(w, "{}\t{}\t{}\t{}", e.text, e.actual, e.predicted, reasons.join(","))?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut items = Vec::new();
        let mut codes = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if n == 0 && line == ERRORS_TSV_HEADER {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(EvalError::Format {
                    line: n + 1,
                    reason: format!("expected 4 columns, found {}", cols.len()),
                });
            }
            items.push(Misclassified {
                text: cols[0].to_string(),
                actual: cols[1].to_string(),
                predicted: cols[2].to_string(),
            });
            codes.push(cols[3].to_string());
        }
        let refs: Vec<&str> = codes.iter().map(String::as_str).collect();
        tag_errors(&items, &refs)
    }

    /// Count per reason code, every code listed.
    pub fn render_counts(&self) -> String {
        let rows: Vec<Vec<String>> = std::iter::once(vec!["Code".into(), "Count".into(), "Reason".into()])
            .chain(ReasonCode::ALL.iter().map(|c| {
                vec![
                    c.to_string(),
                    self.counts.get(c).copied().unwrap_or(0).to_string(),
                    c.description().to_string(),
                ]
            }))
            .collect();
        aligned(&rows)
    }
}

/// Misclassified items of a run as (text, actual, predicted) names.
pub fn misclassified(ds: &Dataset, run: &RunReport) -> Vec<Misclassified> {
    run.folds
        .iter()
        .flat_map(|f| f.misclassified.iter())
        .map(|&(i, p)| Misclassified {
            text: ds.examples[i].text.clone(),
            actual: ds.classes[ds.examples[i].label].clone(),
            predicted: ds.classes[p].clone(),
        })
        .collect()
}

/// Labelled comments with two disjoint keyword vocabularies plus shared
/// filler words. Each comment draws three keywords from its own class and
/// five fillers; with probability `noise` one keyword is swapped for one of
/// the other class.
pub fn synthetic_corpus(n: usize, hostile_share: f64, noise: f64, seed: u64) -> Vec<LabeledComment> {
    const HOSTILE: [&str; 12] = [
        "ghaddar", "jahil", "kutta", "beghairat", "munafiq", "chor", "zaleel", "kameena", "lanati", "badtameez", "fasadi", "dhokebaz",
    ];
    const NEUTRAL: [&str; 12] = [
        "shukriya", "mubarak", "khubsurat", "dost", "khushi", "mohabbat", "sukoon", "barish", "kitab", "safar", "chai", "sabaq",
    ];
    const FILLER: [&str; 16] = [
        "yeh", "woh", "hai", "tha", "aur", "ke", "ki", "ko", "se", "per", "bhi", "ab", "log", "din", "waqt", "baat",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let hostile = rng.gen_bool(hostile_share);
            let (own, other) = if hostile { (&HOSTILE, &NEUTRAL) } else { (&NEUTRAL, &HOSTILE) };
            let mut words: Vec<&str> = (0..3).map(|_| own[rng.gen_range(0..own.len())]).collect();
            if rng.gen_bool(noise) {
                words[0] = other[rng.gen_range(0..other.len())];
            }
            words.extend((0..5).map(|_| FILLER[rng.gen_range(0..FILLER.len())]));
            words.shuffle(&mut rng);
            let path = if hostile {
                let fine = if rng.gen_bool(0.25) { FineLabel::Hateful } else { FineLabel::Offensive };
                LabelPath::hostile(Structure::Simple, fine)
            } else {
                LabelPath::neutral()
            };
            LabeledComment {
                id: format!("s{i:05}"),
                text: words.join(" "),
                path,
                annotator: "synthetic".into(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nh() -> [String; 2] {
        Task::NeutralHostile.classes()
    }

    #[test]
    fn reference_fold_rows() {
        let m = metrics(4160, 500, 110, 230);
        assert!((m.precision - 0.893).abs() < 5e-4);
        assert!((m.recall - 0.974).abs() < 5e-4);
        assert!((m.f1 - 0.932).abs() < 5e-4);
        let m = metrics(622, 60, 228, 1880);
        assert!((m.precision - 0.912).abs() < 5e-4);
        assert!((m.recall - 0.732).abs() < 5e-4);
        assert!((m.f1 - 0.812).abs() < 5e-4);
    }

    #[test]
    fn ten_found_of_a_hundred() {
        let m = metrics(10, 0, 90, 0);
        assert_eq!((m.precision, m.recall), (1.0, 0.1));
    }

    #[test]
    fn degenerate_counts_are_flagged() {
        let m = metrics(0, 0, 0, 0);
        assert!(m.flags.empty && m.flags.no_predicted_positives && m.flags.no_actual_positives && m.flags.f1_undefined);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.0, 0.0, 0.0, 0.0));
        let m = metrics(0, 0, 5, 5);
        assert!(m.flags.no_predicted_positives && !m.flags.no_actual_positives);
        assert_eq!(m.accuracy, 0.5);
        assert!(!metrics(1, 1, 1, 1).flags.any());
    }

    #[test]
    fn metric_formulas_match_confusion_oracle() {
        for tp in 0..=50u64 {
            for fp in 0..=50u64 {
                for fn_ in 0..=50u64 {
                    let tn = (tp * 7 + fp * 3 + fn_) % 51;
                    let m = metrics(tp, fp, fn_, tn);
                    // Oracle: rational arithmetic on the integer counts.
                    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
                    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
                    let f1 = if 2 * tp + fp + fn_ == 0 || tp == 0 {
                        0.0
                    } else {
                        (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
                    };
                    let total = tp + fp + fn_ + tn;
                    let acc = if total == 0 { 0.0 } else { (tp + tn) as f64 / total as f64 };
                    assert!((m.precision - p).abs() < 1e-12);
                    assert!((m.recall - r).abs() < 1e-12);
                    assert!((m.f1 - f1).abs() < 1e-12, "{tp} {fp} {fn_}");
                    assert!((m.accuracy - acc).abs() < 1e-12);
                    assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
                    assert!(m.f1 >= m.precision.min(m.recall) - 1e-12 || tp == 0);
                    if m.precision == m.recall {
                        assert!((m.f1 - m.precision).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn fold_sizes_on_paper_scale_corpus() {
        let labels: Vec<usize> = (0..5000).map(|i| usize::from(i < 3570)).collect();
        let plan = make_folds(&labels, 10, 42, &nh()).unwrap();
        for f in 0..10 {
            let test = plan.test_indices(f);
            assert_eq!(test.len(), 500);
            let hostile = test.iter().filter(|&&i| labels[i] == 1).count();
            assert!((356..=358).contains(&hostile), "{hostile}");
            assert!((142..=144).contains(&(500 - hostile)));
        }
    }

    #[test]
    fn small_fold_cases() {
        let plan = make_folds(&[0, 0, 1, 1], 2, 1, &nh()).unwrap();
        for f in 0..2 {
            let t = plan.test_indices(f);
            assert_eq!(t.len(), 2);
            assert_eq!(t.iter().filter(|&&i| i >= 2).count(), 1);
        }
        let labels: Vec<usize> = (0..30).map(|i| usize::from(i >= 5)).collect();
        assert!(matches!(
            make_folds(&labels, 10, 1, &nh()),
            Err(EvalError::TooFewExamples { count: 5, k: 10, .. })
        ));
        assert!(matches!(make_folds(&labels, 1, 1, &nh()), Err(EvalError::InvalidK(1))));
    }

    #[test]
    fn reason_tagging() {
        let items = vec![
            Misclassified {
                text: "eik nasli kutta 100 badnasal yaron se behter hota hai".into(),
                actual: "Neutral".into(),
                predicted: "Hostile".into(),
            },
            Misclassified {
                text: "maryam ka papa papa nai papi hai".into(),
                actual: "Hostile".into(),
                predicted: "Neutral".into(),
            },
        ];
        let r = tag_errors(&items, &["A", "C, E"]).unwrap();
        assert_eq!(r.entries[0].reasons, vec![ReasonCode::A]);
        assert_eq!(r.entries[1].reasons, vec![ReasonCode::C, ReasonCode::E]);
        assert_eq!(r.counts[&ReasonCode::C], 1);
        assert!(matches!(tag_errors(&items[..1], &["K"]), Err(EvalError::UnknownReasonCode(c)) if c == "K"));

        let mut buf = Vec::new();
        r.write_tsv(&mut buf).unwrap();
        assert_eq!(ErrorReport::read_tsv(buf.as_slice()).unwrap(), r);
        assert!(r.render_counts().contains("E     1      Blame/Threat"));
    }

    fn synthetic(n: usize, seed: u64) -> Dataset {
        let corpus = synthetic_corpus(n, 0.6, 0.0, seed);
        let cfg = PreprocessConfig {
            remove_stopwords: false,
            ..PreprocessConfig::default()
        };
        Dataset::from_corpus(&corpus, Task::NeutralHostile, &NormalizationLexicon::default(), cfg)
    }

    #[test]
    fn separable_corpus_is_learned_perfectly() {
        let ds = synthetic(200, 3);
        let plan = make_folds(&ds.labels(), 5, 1, &ds.classes).unwrap();
        let code = FeatureCode::Cv;
        let run = cross_validate(&ds, code, &code.spec(), &ModelConfig::default_for(ModelKind::Nb), &plan).unwrap();
        assert_eq!(run.folds.len(), 5);
        for f in &run.folds {
            assert_eq!(f.metrics.accuracy, 1.0);
        }
        assert_eq!(run.folds.iter().map(FoldReport::total).sum::<u64>(), 200);
        let again = cross_validate(&ds, code, &code.spec(), &ModelConfig::default_for(ModelKind::Nb), &plan).unwrap();
        assert_eq!(run, again);
        let h = holdout(&ds, code, &code.spec(), &ModelConfig::default_for(ModelKind::Nb), 1).unwrap();
        assert_eq!(h.folds.len(), 1);
        assert_eq!(h.folds[0].total(), 20);
    }

    #[test]
    fn offensive_hateful_task_uses_hostile_subset() {
        let corpus = synthetic_corpus(100, 0.5, 0.0, 9);
        let ds = Dataset::from_corpus(&corpus, Task::OffensiveHateful, &NormalizationLexicon::default(), PreprocessConfig::default());
        let hostile = corpus.iter().filter(|c| c.path.top == TopLabel::Hostile).count();
        assert_eq!(ds.len(), hostile);
        assert_eq!(ds.classes, ["O".to_string(), "H".to_string()]);
    }

    #[test]
    fn tables_render() {
        let ds = synthetic(100, 4);
        let plan = make_folds(&ds.labels(), 10, 1, &ds.classes).unwrap();
        let mut runs = Vec::new();
        for (kind, code) in [(ModelKind::Nb, FeatureCode::Cv), (ModelKind::Nb, FeatureCode::Wltf), (ModelKind::Svm, FeatureCode::Cv)] {
            runs.push(cross_validate(&ds, code, &code.spec(), &ModelConfig::default_for(kind), &plan).unwrap());
        }
        let t = render_accuracy_table(&runs);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Classifier  Feature  1"));
        assert!(lines[0].ends_with("Mean Score"));
        assert!(lines[1].starts_with("NB          CV "));
        assert!(lines[2].starts_with("            WLTF"));
        assert!(lines[3].starts_with("SVM         CV+"));
        assert!(lines[4].starts_with("+ pairing"));
        let f = render_fold_table(&runs[0]);
        assert!(f.lines().nth(1).unwrap().starts_with("Folds  TP"));
        let mut buf = Vec::new();
        write_runs_tsv(&mut buf, &runs).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 31);
    }

    proptest! {
        #[test]
        fn fold_laws(n0 in 2usize..40, n1 in 2usize..40, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n0 >= k && n1 >= k);
            let mut labels = vec![0; n0];
            labels.extend(vec![1; n1]);
            let plan = make_folds(&labels, k, seed, &nh()).unwrap();
            let mut seen = vec![0; labels.len()];
            for f in 0..k {
                let t = plan.test_indices(f);
                for &i in &t {
                    seen[i] += 1;
                }
                for (c, n) in [(0, n0), (1, n1)] {
                    let cnt = t.iter().filter(|&&i| labels[i] == c).count();
                    prop_assert!(cnt == n / k || cnt == n.div_ceil(k));
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            prop_assert_eq!(make_folds(&labels, k, seed, &nh()).unwrap(), plan);
        }
    }
}
