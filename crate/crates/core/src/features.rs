//! Count, term-frequency and TF-IDF vectorizers at word, word n-gram and
//! character n-gram level.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMode {
    Word,
    WordNgram { min: usize, max: usize },
    /// Character n-grams taken inside each token, never across a boundary.
    CharNgram { min: usize, max: usize },
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMode::Word => write!(f, "word"),
            FeatureMode::WordNgram { min, max } => write!(f, "word_ngram({min},{max})"),
            FeatureMode::CharNgram { min, max } => write!(f, "char_ngram({min},{max})"),
        }
    }
}

impl FeatureMode {
    /// Every term occurrence of a document, in order.
    pub fn terms<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        match *self {
            FeatureMode::Word => tokens.iter().map(|t| t.as_ref().to_string()).collect(),
            FeatureMode::WordNgram { min, max } => {
                let mut out = Vec::new();
                for n in min.max(1)..=max {
                    for w in tokens.windows(n) {
                        out.push(w.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" "));
                    }
                }
                out
            }
            FeatureMode::CharNgram { min, max } => {
                let mut out = Vec::new();
                for n in min.max(1)..=max {
                    for tok in tokens {
                        let chars: Vec<char> = tok.as_ref().chars().collect();
                        for w in chars.windows(n) {
                            out.push(w.iter().collect());
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabLimits {
    pub min_df: usize,
    pub max_features: Option<usize>,
}

impl Default for VocabLimits {
    fn default() -> Self {
        VocabLimits {
            min_df: 1,
            max_features: Some(50_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("no documents to fit")]
    NoDocuments,
    #[error("no term survives the vocabulary limits")]
    EmptyVocabulary,
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub mode: FeatureMode,
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(mode: FeatureMode, terms: Vec<String>, df: Vec<usize>, n_docs: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            mode,
            terms,
            df,
            n_docs,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, column: usize) -> usize {
        self.df[column]
    }

    pub fn idf(&self, column: usize) -> f64 {
        (self.n_docs as f64 / self.df[column] as f64).ln()
    }

    /// Hex SHA-256 over the mode and the ordered term list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.mode.to_string().as_bytes());
        for t in &self.terms {
            h.update([0u8]);
            h.update(t.as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Sidecar format: `term<TAB>index<TAB>df` per line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(w, "{t}\t{i}\t{}", self.df[i])?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, mode: FeatureMode, n_docs: usize) -> Result<Self, FeatureError> {
        let mut terms = Vec::new();
        let mut df = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let bad = |reason: &str| FeatureError::Format {
                line: i + 1,
                reason: reason.to_string(),
            };
            let line = line.map_err(|e| bad(&e.to_string()))?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected term<TAB>index<TAB>df"));
            }
            if cols[1].parse::<usize>().ok() != Some(i) {
                return Err(bad("indices must be dense and in order"));
            }
            terms.push(cols[0].to_string());
            df.push(cols[2].parse().map_err(|_| bad("bad df"))?);
        }
        Ok(Self::from_parts(mode, terms, df, n_docs))
    }
}

/// Deserialized vocabularies need their lookup index rebuilt.
impl Vocabulary {
    pub fn rebuild_index(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }
}

/// Keeps terms with df >= min_df, ordered by descending df then
/// lexicographically, truncated to max_features.
pub fn fit_vocabulary<D: AsRef<[String]>>(
    docs: &[D],
    mode: FeatureMode,
    limits: VocabLimits,
) -> Result<Vocabulary, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::NoDocuments);
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in docs {
        let mut terms = mode.terms(doc.as_ref());
        terms.sort_unstable();
        terms.dedup();
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, d)| *d >= limits.min_df).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(max) = limits.max_features {
        kept.truncate(max);
    }
    if kept.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    let (terms, dfs) = kept.into_iter().unzip();
    Ok(Vocabulary::from_parts(mode, terms, dfs, docs.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Count,
    Tf,
    TfIdf,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Count => "count",
            Scheme::Tf => "tf",
            Scheme::TfIdf => "tfidf",
        })
    }
}

/// Compressed sparse row document-term matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub scheme: Scheme,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Fingerprint of the vocabulary the columns refer to.
    pub fingerprint: String,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows(), self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// (column, value) pairs of one row, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (j, v) in self.row(i) {
            out[j] = v;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.dense_row(i)).collect()
    }

    /// The listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            for (j, v) in self.row(r) {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        FeatureMatrix {
            scheme: self.scheme,
            n_cols: self.n_cols,
            indptr,
            indices,
            values,
            fingerprint: self.fingerprint.clone(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>], scheme: Scheme, fingerprint: impl Into<String>) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged dense matrix");
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        FeatureMatrix {
            scheme,
            n_cols,
            indptr,
            indices,
            values,
            fingerprint: fingerprint.into(),
        }
    }

    /// `row col value` lines, zero-based.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.n_rows() {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(
        reader: R,
        shape: (usize, usize),
        scheme: Scheme,
        fingerprint: impl Into<String>,
    ) -> Result<Self, FeatureError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); shape.0];
        for (n, line) in reader.lines().enumerate() {
            let bad = |reason: String| FeatureError::Format { line: n + 1, reason };
            let line = line.map_err(|e| bad(e.to_string()))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [i, j, v] = parts[..] else {
                return Err(bad("expected `row col value`".into()));
            };
            let i: usize = i.parse().map_err(|_| bad(format!("bad row {i:?}")))?;
            let j: usize = j.parse().map_err(|_| bad(format!("bad column {j:?}")))?;
            let v: f64 = v.parse().map_err(|_| bad(format!("bad value {v:?}")))?;
            if i >= shape.0 || j >= shape.1 {
                return Err(bad(format!("({i}, {j}) outside {shape:?}")));
            }
            rows[i].push((j, v));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut r in rows {
            r.sort_by_key(|(j, _)| *j);
            for (j, v) in r {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(FeatureMatrix {
            scheme,
            n_cols: shape.1,
            indptr,
            indices,
            values,
            fingerprint: fingerprint.into(),
        })
    }
}

/// Per-document vocabulary counts plus the document's total term count
/// (out-of-vocabulary terms included).
fn counts<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> (Vec<(usize, f64)>, usize) {
    let terms = vocab.mode.terms(tokens);
    let total = terms.len();
    let mut map: HashMap<usize, f64> = HashMap::new();
    for t in &terms {
        if let Some(j) = vocab.index_of(t) {
            *map.entry(j).or_default() += 1.0;
        }
    }
    let mut row: Vec<(usize, f64)> = map.into_iter().collect();
    row.sort_unstable_by_key(|(j, _)| *j);
    (row, total)
}

pub fn transform<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary, scheme: Scheme) -> FeatureMatrix {
    let mut indptr = Vec::with_capacity(docs.len() + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for doc in docs {
        let (row, total) = counts(doc.as_ref(), vocab);
        for (j, c) in row {
            let v = match scheme {
                Scheme::Count => c,
                Scheme::Tf => c / total as f64,
                Scheme::TfIdf => c / total as f64 * vocab.idf(j),
            };
            if v != 0.0 {
                indices.push(j);
                values.push(v);
            }
        }
        indptr.push(indices.len());
    }
    FeatureMatrix {
        scheme,
        n_cols: vocab.len(),
        indptr,
        indices,
        values,
        fingerprint: vocab.fingerprint(),
    }
}

pub fn transform_count<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary) -> FeatureMatrix {
    transform(docs, vocab, Scheme::Count)
}

/// Term count over the document's total term count; empty documents give a zero row.
pub fn transform_tf<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary) -> FeatureMatrix {
    transform(docs, vocab, Scheme::Tf)
}

/// TF times ln(N / df); a term present in every fitted document weighs zero.
pub fn transform_tfidf<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary) -> FeatureMatrix {
    transform(docs, vocab, Scheme::TfIdf)
}

/// The four feature configurations used in the result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureCode {
    /// Character n-gram TF-IDF.
    Clv,
    /// Word n-gram TF-IDF.
    Ngv,
    /// Word-level counts.
    Cv,
    /// Word-level TF-IDF.
    Wltf,
}

impl FeatureCode {
    pub const ALL: [FeatureCode; 4] = [FeatureCode::Clv, FeatureCode::Ngv, FeatureCode::Wltf, FeatureCode::Cv];

    pub fn spec(self) -> FeatureSpec {
        let (mode, scheme) = match self {
            FeatureCode::Clv => (FeatureMode::CharNgram { min: 2, max: 5 }, Scheme::TfIdf),
            FeatureCode::Ngv => (FeatureMode::WordNgram { min: 2, max: 3 }, Scheme::TfIdf),
            FeatureCode::Cv => (FeatureMode::Word, Scheme::Count),
            FeatureCode::Wltf => (FeatureMode::Word, Scheme::TfIdf),
        };
        FeatureSpec {
            mode,
            scheme,
            limits: VocabLimits::default(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCode::Clv => "CLV",
            FeatureCode::Ngv => "NGV",
            FeatureCode::Cv => "CV",
            FeatureCode::Wltf => "WLTF",
        }
    }
}

impl fmt::Display for FeatureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "clv" => Ok(FeatureCode::Clv),
            "ngv" => Ok(FeatureCode::Ngv),
            "cv" => Ok(FeatureCode::Cv),
            "wltf" => Ok(FeatureCode::Wltf),
            _ => Err(format!("unknown feature code {s:?} (expected clv, ngv, cv or wltf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub mode: FeatureMode,
    pub scheme: Scheme,
    pub limits: VocabLimits,
}

impl FeatureSpec {
    pub fn fit_transform<D: AsRef<[String]>>(&self, docs: &[D]) -> Result<(Vocabulary, FeatureMatrix), FeatureError> {
        let vocab = fit_vocabulary(docs, self.mode, self.limits)?;
        let m = transform(docs, &vocab, self.scheme);
        Ok((vocab, m))
    }
}
