//! `ruhs`: batch commands over the corpus pipeline.
//!
//! Usage errors exit with status 2, data errors with status 1; either way a
//! single `error: ...` line goes to stderr. A path of `-` means stdin.

mod config;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ruhs_api::{Comment, ServerOptions};
use ruhs_core::agreement::{kappa, table_from_sessions, table_over_intersection, AgreementTable, Level};
use ruhs_core::annotate::{read_events, AnnotationSession};
use ruhs_core::corpus::{load_tsv, stats, LabeledComment};
use ruhs_core::eval::{
    cross_validate, make_folds, misclassified, reference_pairing, render_accuracy_table, render_fold_table,
    synthetic_corpus, write_runs_tsv, Dataset, ErrorReport, RunReport, TaggedError,
};
use ruhs_core::features::{transform, FeatureCode};
use ruhs_core::ingest::{
    cleanse, filter_candidates_logged, parse_dump, read_kept_tsv, write_tsv, Attrition, CleanseOutcome,
    CleansedText, CleansingConfig, RawTweet, TsvRow,
};
use ruhs_core::models::{train, TrainingSet};
use ruhs_core::normalize::{preprocess, standardize, NormalizationLexicon, PreprocessConfig};
use ruhs_core::{shipped_lexicon_dir, ModelKind};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "ruhs", version, about = "Roman-Urdu hostile-speech corpus and classifier lab")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for fold assignment and stochastic models.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of cross-validation folds.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Output directory; outputs go to stdout when unset and the command allows it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Feature code: clv, ngv, cv or wltf.
    #[arg(long, global = true)]
    features: Option<String>,
    /// Classifier code: nb, lr, svm or rf.
    #[arg(long, global = true)]
    classifier: Option<String>,
    /// neutral-hostile (1) or offensive-hateful (2).
    #[arg(long, global = true)]
    task: Option<String>,
    /// Lexicon directory (variants.tsv, stopwords.txt, ...).
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Replacement stopword list, one word per line.
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    /// Extra `key=value` settings, as in the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct DataInput {
    /// Labelled corpus TSV, or `-` for stdin.
    input: Option<String>,
    /// Use a generated corpus of this many comments instead of a file.
    #[arg(long, conflicts_with = "input")]
    synthetic: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cleanse a JSON-lines tweet dump into `id<TAB>text<TAB>drop-reason` rows.
    Clean { input: String },
    /// Drop replies, retweets, sequences and non-Roman-Urdu texts from cleansed rows.
    Filter {
        input: String,
        /// The original dump, for reply/retweet/sequence metadata.
        #[arg(long)]
        raw: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Standardize spelling variants of kept rows.
    Normalize {
        input: String,
        /// Add a column with the preprocessed tokens.
        #[arg(long)]
        tokens: bool,
    },
    /// Summary counts of a labelled corpus.
    Stats(DataInput),
    /// Cohen's kappa from a 2x2 table (a b c d) or from two session logs.
    Kappa {
        counts: Vec<u64>,
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        #[arg(long, default_value = "top")]
        level: String,
        /// Compare over the comments both sessions decided.
        #[arg(long)]
        intersection: bool,
    },
    /// Fit a vocabulary and write the feature matrix.
    Featurize(DataInput),
    /// Train one classifier on the whole corpus and save it.
    Train(DataInput),
    /// Stratified k-fold cross-validation of one classifier and feature code.
    Cv(DataInput),
    /// Cross-validate a grid of classifiers and features, or summarize tagged errors.
    Report {
        #[command(flatten)]
        data: DataInput,
        /// Include pairings outside the reference set (marked `+`).
        #[arg(long)]
        all_pairings: bool,
        /// Summarize an error-analysis TSV with reason codes instead.
        #[arg(long, conflicts_with_all = ["input", "synthetic"])]
        tagged: Option<String>,
    },
    /// Run the annotation API.
    Serve {
        /// Comments to annotate: labelled corpus TSV or `id<TAB>text` rows.
        #[arg(long)]
        comments: String,
        #[arg(long)]
        sessions: Option<PathBuf>,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

fn effective_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::parse_file(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set {kv:?}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let flags: [(&str, Option<String>); 8] = [
        ("seed", c.seed.map(|s| s.to_string())),
        ("k", c.k.map(|k| k.to_string())),
        ("features", c.features.clone()),
        ("classifier", c.classifier.clone()),
        ("task", c.task.clone()),
        ("out", c.out.as_ref().map(|p| p.display().to_string())),
        ("lexicon", c.lexicon.as_ref().map(|p| p.display().to_string())),
        ("stopwords", c.stopwords.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    Ok(cfg)
}

fn open_input(path: &str) -> Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let f = File::open(path).map_err(|e| CliError::data(format!("{path}: {e}")))?;
        Ok(Box::new(BufReader::new(f)))
    }
}

fn load_lexicon(cfg: &RunConfig) -> Result<NormalizationLexicon> {
    let dir = cfg.lexicon.clone().unwrap_or_else(shipped_lexicon_dir);
    let mut lex = NormalizationLexicon::load_dir(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    if let Some(p) = &cfg.stopwords {
        let text = fs::read_to_string(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
        lex = lex.with_stopword_list(&text);
    }
    Ok(lex)
}

fn load_corpus(cfg: &mut RunConfig, input: &DataInput) -> Result<Vec<LabeledComment>> {
    if let Some(n) = input.synthetic {
        cfg.corpus = Some(format!("synthetic:{n}"));
        return Ok(synthetic_corpus(n, 0.6, 0.2, cfg.seed));
    }
    if let Some(p) = &input.input {
        cfg.corpus = Some(p.clone());
    }
    let path = cfg
        .corpus
        .clone()
        .ok_or_else(|| CliError::Usage("no corpus given (positional path, --synthetic or `corpus` key)".into()))?;
    load_tsv(open_input(&path)?).map_err(|e| CliError::data(format!("{path}: {e}")))
}

fn dataset(cfg: &RunConfig, corpus: &[LabeledComment]) -> Result<Dataset> {
    let lex = load_lexicon(cfg)?;
    let ds = Dataset::from_corpus(corpus, cfg.task, &lex, PreprocessConfig::default());
    if ds.is_empty() {
        return Err(CliError::Data(format!("corpus has no examples for task {}", cfg.task)));
    }
    Ok(ds)
}

/// Where one named output goes: a file under `--out`, or stdout.
fn sink(cfg: &RunConfig, name: &str) -> Result<Box<dyn Write>> {
    match &cfg.out {
        Some(dir) => Ok(Box::new(BufWriter::new(create(dir, name)?))),
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn create(dir: &Path, name: &str) -> Result<File> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn require_out(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    cfg.out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{command} writes several files and needs --out")))
}

fn io_err(e: io::Error) -> CliError {
    CliError::data(e)
}

fn cmd_clean(cfg: &RunConfig, input: &str) -> Result<()> {
    let tweets = parse_dump(open_input(input)?).map_err(|e| CliError::data(format!("{input}: {e}")))?;
    let ccfg = CleansingConfig::default();
    let mut attrition = Attrition {
        input: tweets.len(),
        ..Default::default()
    };
    let rows: Vec<TsvRow> = tweets
        .iter()
        .map(|t| match cleanse(t, &ccfg) {
            CleanseOutcome::Kept(c) => {
                attrition.kept += 1;
                TsvRow {
                    id: c.id,
                    text: c.text,
                    dropped: None,
                }
            }
            CleanseOutcome::Dropped(r) => {
                attrition.record(r);
                TsvRow {
                    id: t.id.clone(),
                    text: t.text.clone(),
                    dropped: Some(r),
                }
            }
        })
        .collect();
    let mut w = sink(cfg, "cleaned.tsv")?;
    write_tsv(&mut w, &rows).and_then(|_| w.flush()).map_err(io_err)?;
    attrition.log();
    eprintln!("kept {} of {} tweets", attrition.kept, attrition.input);
    Ok(())
}

fn cmd_filter(cfg: &RunConfig, input: &str, raw: Option<&str>) -> Result<()> {
    let rows = read_kept_tsv(open_input(input)?).map_err(|e| CliError::data(format!("{input}: {e}")))?;
    let raw: Vec<RawTweet> = match raw {
        Some(p) => parse_dump(open_input(p)?).map_err(|e| CliError::data(format!("{p}: {e}")))?,
        None => Vec::new(),
    };
    let texts: Vec<CleansedText> = rows
        .into_iter()
        .map(|(id, text)| CleansedText {
            id,
            text,
            removals: Default::default(),
        })
        .collect();
    let lex = load_lexicon(cfg)?;
    let outcome = filter_candidates_logged(&texts, &raw, &lex, cfg.threshold);
    let dropped: std::collections::HashMap<&str, _> = outcome.dropped.iter().map(|(id, r)| (id.as_str(), *r)).collect();
    let out: Vec<TsvRow> = texts
        .iter()
        .map(|t| TsvRow {
            id: t.id.clone(),
            text: t.text.clone(),
            dropped: dropped.get(t.id.as_str()).copied(),
        })
        .collect();
    let mut w = sink(cfg, "filtered.tsv")?;
    write_tsv(&mut w, &out).and_then(|_| w.flush()).map_err(io_err)?;
    eprintln!("kept {} of {} texts", outcome.kept.len(), texts.len());
    Ok(())
}

fn cmd_normalize(cfg: &RunConfig, input: &str, tokens: bool) -> Result<()> {
    let rows = read_kept_tsv(open_input(input)?).map_err(|e| CliError::data(format!("{input}: {e}")))?;
    let lex = load_lexicon(cfg)?;
    let mut w = sink(cfg, "normalized.tsv")?;
    for (id, text) in rows {
        let std = standardize(&text, &lex);
        if tokens {
            let toks = preprocess(&std, &lex, PreprocessConfig::default()).lemmas().join(" ");
            writeln!(w, "{id}\t{std}\t{toks}").map_err(io_err)?;
        } else {
            writeln!(w, "{id}\t{std}").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

fn cmd_stats(cfg: &mut RunConfig, input: &DataInput) -> Result<()> {
    let corpus = load_corpus(cfg, input)?;
    let mut w = sink(cfg, "stats.txt")?;
    w.write_all(stats(&corpus).render().as_bytes()).and_then(|_| w.flush()).map_err(io_err)
}

fn load_session(p: &Path) -> Result<AnnotationSession> {
    let events = read_events(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
    AnnotationSession::replay(&events).map_err(|e| CliError::data(format!("{}: {e}", p.display())))
}

fn cmd_kappa(
    cfg: &RunConfig,
    counts: &[u64],
    sessions: Option<(&Path, &Path)>,
    level: &str,
    intersection: bool,
) -> Result<()> {
    let table = match (counts, sessions) {
        ([a, b, c, d], None) => AgreementTable::new(*a, *b, *c, *d),
        ([], Some((pa, pb))) => {
            let level: Level = level.parse().map_err(CliError::Usage)?;
            let (s1, s2) = (load_session(pa)?, load_session(pb)?);
            if intersection {
                table_over_intersection(&s1, &s2, level).map_err(CliError::data)?.table
            } else {
                table_from_sessions(&s1, &s2, level).map_err(CliError::data)?
            }
        }
        _ => return Err(CliError::Usage("kappa takes four counts a b c d, or --a and --b session logs".into())),
    };
    let r = kappa(&table).map_err(CliError::data)?;
    let mut w = sink(cfg, "kappa.txt")?;
    write!(
        w,
        "table = [{} {} {} {}]\nκ={:.3}, se={:.3}, ci=[{:.3},{:.3}]\n{}",
        table.a,
        table.b,
        table.c,
        table.d,
        r.kappa,
        r.se,
        r.ci_low,
        r.ci_high,
        r.render(&table)
    )
    .and_then(|_| w.flush())
    .map_err(io_err)
}

fn cmd_featurize(cfg: &mut RunConfig, input: &DataInput) -> Result<()> {
    let out = require_out(cfg, "featurize")?;
    let corpus = load_corpus(cfg, input)?;
    let ds = dataset(cfg, &corpus)?;
    let docs: Vec<&[String]> = ds.examples.iter().map(|e| e.tokens.as_slice()).collect();
    let spec = cfg.feature_spec();
    let (vocab, x) = spec.fit_transform(&docs).map_err(CliError::data)?;
    let mut v = BufWriter::new(create(&out, "vocab.tsv")?);
    vocab.write_tsv(&mut v).and_then(|_| v.flush()).map_err(io_err)?;
    let mut m = BufWriter::new(create(&out, "matrix.tsv")?);
    x.write_triplets(&mut m).and_then(|_| m.flush()).map_err(io_err)?;
    let mut l = BufWriter::new(create(&out, "labels.tsv")?);
    for e in &ds.examples {
        writeln!(l, "{}\t{}", e.id, ds.classes[e.label]).map_err(io_err)?;
    }
    l.flush().map_err(io_err)?;
    create(&out, "config.txt")?.write_all(cfg.header("featurize")?.as_bytes()).map_err(io_err)?;
    eprintln!("{} rows x {} columns, {} non-zeros", x.n_rows(), vocab.len(), x.nnz());
    Ok(())
}

fn cmd_train(cfg: &mut RunConfig, input: &DataInput) -> Result<()> {
    let out = require_out(cfg, "train")?;
    let corpus = load_corpus(cfg, input)?;
    let ds = dataset(cfg, &corpus)?;
    let docs: Vec<&[String]> = ds.examples.iter().map(|e| e.tokens.as_slice()).collect();
    let spec = cfg.feature_spec();
    let (vocab, _) = spec.fit_transform(&docs).map_err(CliError::data)?;
    let x = transform(&docs, &vocab, spec.scheme);
    let y = ds.labels();
    let ts = TrainingSet::new(&x, &y, &ds.classes).map_err(CliError::data)?;
    let model = train(&ts, &cfg.model_config()?).map_err(CliError::data)?;
    let mut mw = BufWriter::new(create(&out, "model.json")?);
    model.save(&mut mw).map_err(CliError::data)?;
    mw.flush().map_err(io_err)?;
    let mut vw = BufWriter::new(create(&out, "vocab.tsv")?);
    vocab.write_tsv(&mut vw).and_then(|_| vw.flush()).map_err(io_err)?;
    create(&out, "config.txt")?.write_all(cfg.header("train")?.as_bytes()).map_err(io_err)?;
    let train_acc = {
        let p = model.predict(&x).map_err(CliError::data)?;
        p.labels.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    };
    eprintln!("trained {} on {} examples, training accuracy {train_acc:.4}", model.kind(), y.len());
    Ok(())
}

fn run_cv(cfg: &RunConfig, ds: &Dataset, kind: ModelKind, code: FeatureCode) -> Result<RunReport> {
    let mut c = cfg.clone();
    c.classifier = kind;
    c.features = code;
    let plan = make_folds(&ds.labels(), c.k, c.seed, &ds.classes).map_err(CliError::data)?;
    cross_validate(ds, code, &c.feature_spec(), &c.model_config()?, &plan).map_err(CliError::data)
}

fn cmd_cv(cfg: &mut RunConfig, input: &DataInput) -> Result<()> {
    let corpus = load_corpus(cfg, input)?;
    let ds = dataset(cfg, &corpus)?;
    let run = run_cv(cfg, &ds, cfg.classifier, cfg.features)?;
    let mut report = cfg.header("cv")?;
    report.push_str(&format!("# examples = {}\n\n", ds.len()));
    report.push_str(&render_accuracy_table(std::slice::from_ref(&run)));
    report.push('\n');
    report.push_str(&render_fold_table(&run));
    report.push_str(&format!(
        "\nmean accuracy = {:.4}\nmean f1 = {:.4}\n",
        run.mean_accuracy, run.mean_f1
    ));
    let mut w = sink(cfg, "cv_report.txt")?;
    w.write_all(report.as_bytes()).and_then(|_| w.flush()).map_err(io_err)?;
    if let Some(dir) = &cfg.out {
        let mut t = BufWriter::new(create(dir, "runs.tsv")?);
            write_runs_tsv(&mut t, std::slice::from_ref(&run)).and_then(|_| t.flush()).map_err(io_err)?;
    }
    Ok(())
}

fn cmd_report(cfg: &mut RunConfig, input: &DataInput, all_pairings: bool) -> Result<()> {
    let out = require_out(cfg, "report")?;
    let corpus = load_corpus(cfg, input)?;
    let ds = dataset(cfg, &corpus)?;
    let mut runs = Vec::new();
    for kind in ModelKind::ALL {
        for code in FeatureCode::ALL {
            if all_pairings || reference_pairing(kind, code) {
                log::info!("cross-validating {kind} + {code}");
                runs.push(run_cv(cfg, &ds, kind, code)?);
            }
        }
    }
    let mut report = cfg.header("report")?;
    report.push_str(&format!("# examples = {}\n\n", ds.len()));
    report.push_str(&render_accuracy_table(&runs));
    for run in &runs {
        report.push_str(&format!("\n{} + {}\n", run.classifier, run.feature));
        report.push_str(&render_fold_table(run));
    }
    let mut r = create(&out, "report.txt")?;
    r.write_all(report.as_bytes()).map_err(io_err)?;
    let mut t = BufWriter::new(create(&out, "runs.tsv")?);
    write_runs_tsv(&mut t, &runs).and_then(|_| t.flush()).map_err(io_err)?;

    // Misclassifications of the best run, ready for reason tagging.
    if let Some(best) = runs.iter().max_by(|a, b| a.mean_accuracy.total_cmp(&b.mean_accuracy)) {
        let report = ErrorReport {
            entries: misclassified(&ds, best)
                .into_iter()
                .map(|m| TaggedError {
                    text: m.text,
                    actual: m.actual,
                    predicted: m.predicted,
                    reasons: vec![],
                })
                .collect(),
            counts: Default::default(),
        };
        let mut e = BufWriter::new(create(&out, "errors.tsv")?);
        report.write_tsv(&mut e).and_then(|_| e.flush()).map_err(io_err)?;
    }
    print!("{report}");
    Ok(())
}

fn cmd_tagged(cfg: &RunConfig, path: &str) -> Result<()> {
    let report = ErrorReport::read_tsv(open_input(path)?).map_err(|e| CliError::data(format!("{path}: {e}")))?;
    let mut w = sink(cfg, "reasons.txt")?;
    w.write_all(report.render_counts().as_bytes()).and_then(|_| w.flush()).map_err(io_err)
}

fn load_comments(path: &str) -> Result<Vec<Comment>> {
    let mut text = String::new();
    open_input(path)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::data(format!("{path}: {e}")))?;
    if text.starts_with(ruhs_core::corpus::TSV_HEADER) {
        let corpus = load_tsv(text.as_bytes()).map_err(|e| CliError::data(format!("{path}: {e}")))?;
        return Ok(corpus.into_iter().map(|c| Comment { id: c.id, text: c.text }).collect());
    }
    let rows = read_kept_tsv(text.as_bytes()).map_err(|e| CliError::data(format!("{path}: {e}")))?;
    Ok(rows.into_iter().map(|(id, text)| Comment { id, text }).collect())
}

fn cmd_serve(comments: &str, opts: ServerOptions, addr: SocketAddr) -> Result<()> {
    let comments = load_comments(comments)?;
    let rt = tokio::runtime::Runtime::new().map_err(io_err)?;
    rt.block_on(ruhs_api::serve(addr, comments, opts)).map_err(io_err)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = effective_config(&cli.common)?;
    match cli.command {
        Command::Clean { input } => cmd_clean(&cfg, &input),
        Command::Filter { input, raw, threshold } => {
            if let Some(t) = threshold {
                cfg.set("threshold", &t.to_string())?;
            }
            cmd_filter(&cfg, &input, raw.as_deref())
        }
        Command::Normalize { input, tokens } => cmd_normalize(&cfg, &input, tokens),
        Command::Stats(input) => cmd_stats(&mut cfg, &input),
        Command::Kappa {
            counts,
            a,
            b,
            level,
            intersection,
        } => {
            let sessions = a.as_deref().zip(b.as_deref());
            cmd_kappa(&cfg, &counts, sessions, &level, intersection)
        }
        Command::Featurize(input) => cmd_featurize(&mut cfg, &input),
        Command::Train(input) => cmd_train(&mut cfg, &input),
        Command::Cv(input) => cmd_cv(&mut cfg, &input),
        Command::Report {
            data,
            all_pairings,
            tagged,
        } => match tagged {
            Some(p) => cmd_tagged(&cfg, &p),
            None => cmd_report(&mut cfg, &data, all_pairings),
        },
        Command::Serve {
            comments,
            sessions,
            static_dir,
            addr,
            cors_origin,
        } => cmd_serve(
            &comments,
            ServerOptions {
                session_dir: sessions,
                static_dir,
                cors_origin,
            },
            addr,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', "; ");
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
