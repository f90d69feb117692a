//! Roman-Urdu spelling standardization and the classification-time
//! preprocessing chain.
//!
//! Lexicon files are plain UTF-8:
//!
//! * `variants.tsv`  `variant<TAB>canonical` per line
//! * `stopwords.txt` one token per line
//! * `lemmas.tsv`    `token<TAB>lemma` per line
//! * `pos.tsv`       `token<TAB>tag` per line (optional)
//! * `protected.txt` one token per line, in the casing it must keep (e.g. `CPEC`)
//!
//! Blank lines and lines starting with `#` are ignored.
//!
//! Variant keys are normally lowercase and match any casing of a token; the
//! token's capitalization is carried over to the canonical form (`Mai` ->
//! `Main`). A key containing uppercase letters matches that exact surface form
//! only and its canonical form is emitted verbatim.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{file}:{line}: {reason}")]
    Format {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("variant chain starting at {0:?} does not terminate")]
    Cycle(String),
    #[error("canonical form {canonical:?} is itself rewritten to {target:?}")]
    Unsettled { canonical: String, target: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationLexicon {
    variants: BTreeMap<String, String>,
    stopwords: BTreeSet<String>,
    lemmas: BTreeMap<String, String>,
    pos: BTreeMap<String, String>,
    protected: BTreeMap<String, String>,
}

fn is_exact_key(k: &str) -> bool {
    k.chars().any(char::is_uppercase)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Carries the capitalization pattern of `surface` over to `canonical`.
fn transfer_case(surface: &str, canonical: &str) -> String {
    let letters: Vec<char> = surface.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        canonical.to_uppercase()
    } else if surface.chars().next().is_some_and(char::is_uppercase) {
        capitalize(canonical)
    } else {
        canonical.to_string()
    }
}

impl NormalizationLexicon {
    /// Builds a lexicon, resolving variant chains (`a->b`, `b->c` becomes
    /// `a->c`, `b->c`) and rejecting cycles.
    pub fn from_tables(
        variants: Vec<(String, String)>,
        stopwords: impl IntoIterator<Item = String>,
        lemmas: Vec<(String, String)>,
        pos: Vec<(String, String)>,
        protected: impl IntoIterator<Item = String>,
    ) -> Result<Self, LexiconError> {
        let raw: BTreeMap<String, String> = variants
            .into_iter()
            .map(|(k, v)| {
                let k = if is_exact_key(&k) { k } else { k.to_lowercase() };
                (k, v)
            })
            .filter(|(k, v)| k != v)
            .collect();

        let mut settled = BTreeMap::new();
        for start in raw.keys() {
            let mut seen = BTreeSet::from([start.as_str()]);
            let mut cur = &raw[start];
            while let Some(next) = raw.get(cur.as_str()) {
                if !seen.insert(cur.as_str()) {
                    return Err(LexiconError::Cycle(start.clone()));
                }
                cur = next;
            }
            settled.insert(start.clone(), cur.clone());
        }

        let lex = NormalizationLexicon {
            variants: settled,
            stopwords: stopwords.into_iter().map(|s| s.to_lowercase()).collect(),
            lemmas: lemmas
                .into_iter()
                .map(|(k, v)| (k.to_lowercase(), v.to_lowercase()))
                .collect(),
            pos: pos.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect(),
            protected: protected
                .into_iter()
                .map(|p| (p.to_lowercase(), p))
                .collect(),
        };
        lex.check_settled()?;
        Ok(lex)
    }

    /// Every casing of a canonical form that `standardize` may emit must be a
    /// fixed point of the variant map.
    fn check_settled(&self) -> Result<(), LexiconError> {
        for (key, canonical) in &self.variants {
            let renderings = if is_exact_key(key) {
                vec![canonical.clone()]
            } else {
                vec![canonical.clone(), capitalize(canonical), canonical.to_uppercase()]
            };
            for r in renderings {
                let emitted = self.protected_form(&r).map(String::from).unwrap_or(r);
                let again = self.standardize_token(&emitted);
                if again != emitted {
                    return Err(LexiconError::Unsettled {
                        canonical: emitted,
                        target: again,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self, LexiconError> {
        let read = |name: &str, required: bool| -> Result<Option<String>, LexiconError> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(s) => Ok(Some(s)),
                Err(e) if !required && e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(LexiconError::Io {
                    path: path.display().to_string(),
                    source: e,
                }),
            }
        };
        let variants = parse_pairs(&read("variants.tsv", true)?.unwrap_or_default(), "variants.tsv")?;
        let stopwords = parse_list(&read("stopwords.txt", false)?.unwrap_or_default());
        let lemmas = parse_pairs(&read("lemmas.tsv", false)?.unwrap_or_default(), "lemmas.tsv")?;
        let pos = parse_pairs(&read("pos.tsv", false)?.unwrap_or_default(), "pos.tsv")?;
        let protected = parse_list(&read("protected.txt", false)?.unwrap_or_default());
        Self::from_tables(variants, stopwords, lemmas, pos, protected)
    }

    /// Replaces the stopword list with the words of a one-per-line file.
    pub fn with_stopword_list(mut self, text: &str) -> Self {
        self.stopwords = parse_list(text).into_iter().map(|s| s.to_lowercase()).collect();
        self
    }

    pub fn variants(&self) -> &BTreeMap<String, String> {
        &self.variants
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(&token.to_lowercase())
    }

    pub fn lemma<'a>(&'a self, token: &'a str) -> &'a str {
        self.lemmas.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn pos_tag(&self, token: &str) -> Option<&str> {
        self.pos.get(&token.to_lowercase()).map(String::as_str)
    }

    pub fn protected_form(&self, token: &str) -> Option<&str> {
        self.protected.get(&token.to_lowercase()).map(String::as_str)
    }

    /// Whether any table mentions the token.
    pub fn knows(&self, token: &str) -> bool {
        let lower = token.to_lowercase();
        self.variants.contains_key(&lower)
            || self.variants.contains_key(token)
            || self.variants.values().any(|v| v.to_lowercase() == lower)
            || self.stopwords.contains(&lower)
            || self.lemmas.contains_key(&lower)
            || self.lemmas.values().any(|v| *v == lower)
            || self.pos.contains_key(&lower)
            || self.protected.contains_key(&lower)
    }

    fn standardize_token(&self, token: &str) -> String {
        let mapped = if let Some(v) = self.variants.get(token).filter(|_| is_exact_key(token)) {
            v.clone()
        } else if let Some(v) = self.variants.get(&token.to_lowercase()) {
            transfer_case(token, v)
        } else {
            token.to_string()
        };
        match self.protected_form(&mapped) {
            Some(p) => p.to_string(),
            None => mapped,
        }
    }
}

fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

pub fn parse_pairs(text: &str, file: &str) -> Result<Vec<(String, String)>, LexiconError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(k), Some(v), None) if !k.trim().is_empty() && !v.trim().is_empty() => {
                out.push((k.trim().to_string(), v.trim().to_string()))
            }
            _ => {
                return Err(LexiconError::Format {
                    file: file.to_string(),
                    line: i + 1,
                    reason: "expected exactly two non-empty tab-separated columns".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Caps runs of the same letter at `max_run` ("Plzzzzzzzz" -> "Plzz" for 2).
/// Digits and other characters are left alone.
pub fn collapse_elongations(text: &str, max_run: usize) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    let mut run = 0;
    for c in text.chars() {
        if Some(c) == prev && c.is_alphabetic() {
            run += 1;
        } else {
            run = 1;
            prev = Some(c);
        }
        if !c.is_alphabetic() || run <= max_run {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardizeOptions {
    /// Maximum run of a repeated letter kept before lookup; `None` disables.
    pub collapse_repeats: Option<usize>,
}

impl Default for StandardizeOptions {
    fn default() -> Self {
        StandardizeOptions {
            collapse_repeats: Some(2),
        }
    }
}

/// Rewrites each whitespace token through the variant map and uppercases
/// protected abbreviations. Token count is preserved.
pub fn standardize(text: &str, lex: &NormalizationLexicon) -> String {
    standardize_with(text, lex, StandardizeOptions::default())
}

pub fn standardize_with(text: &str, lex: &NormalizationLexicon, opts: StandardizeOptions) -> String {
    text.split_whitespace()
        .map(|tok| match opts.collapse_repeats {
            Some(n) => lex.standardize_token(&collapse_elongations(tok, n)),
            None => lex.standardize_token(tok),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }

    /// The terms the vectorizers consume.
    pub fn lemmas(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.lemma.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub remove_stopwords: bool,
    pub lemmatize: bool,
    pub pos_tags: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            remove_stopwords: true,
            lemmatize: true,
            pos_tags: false,
        }
    }
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '’'
}

/// Case folding, tokenization, stopword removal, lemmatization and optional
/// POS tagging.
pub fn preprocess(text: &str, lex: &NormalizationLexicon, cfg: PreprocessConfig) -> TokenStream {
    let tokens = text
        .split(|c: char| !is_token_char(c))
        .map(|t| t.trim_matches(|c| c == '\'' || c == '’'))
        .filter(|t| !t.is_empty())
        .map(|t| match lex.protected_form(t) {
            Some(p) => p.to_string(),
            None if cfg.lowercase => t.to_lowercase(),
            None => t.to_string(),
        })
        .filter(|t| !(cfg.remove_stopwords && lex.is_stopword(t)))
        .map(|surface| {
            let key = surface.to_lowercase();
            let lemma = if cfg.lemmatize {
                match lex.lemmas.get(&key) {
                    Some(l) => l.clone(),
                    None => surface.clone(),
                }
            } else {
                surface.clone()
            };
            let pos = if cfg.pos_tags {
                lex.pos_tag(&key).map(String::from)
            } else {
                None
            };
            Token { surface, lemma, pos }
        })
        .collect();
    TokenStream { tokens }
}

#[derive(Debug, Clone)]
pub struct LexiconBuild {
    pub lexicon: NormalizationLexicon,
    /// Corpus tokens the lexicon does not know, most frequent first.
    pub uncovered: Vec<(String, usize)>,
}

/// Loads a seed variant map over an existing lexicon's other tables and lists
/// the corpus vocabulary it leaves uncovered.
pub fn build_lexicon(
    corpus: &[String],
    seed: Vec<(String, String)>,
    base: &NormalizationLexicon,
) -> Result<LexiconBuild, LexiconError> {
    let mut variants: Vec<(String, String)> = base
        .variants
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    variants.extend(seed);
    let lexicon = NormalizationLexicon::from_tables(
        variants,
        base.stopwords.iter().cloned(),
        base.lemmas.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        base.pos.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        base.protected.values().cloned(),
    )?;
    let mut freq: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        for tok in doc.split_whitespace() {
            if !lexicon.knows(tok) {
                *freq.entry(tok.to_lowercase()).or_default() += 1;
            }
        }
    }
    let mut uncovered: Vec<(String, usize)> = freq.into_iter().collect();
    uncovered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(LexiconBuild { lexicon, uncovered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(p: &[(&str, &str)]) -> Vec<(String, String)> {
        p.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    fn lex() -> NormalizationLexicon {
        NormalizationLexicon::from_tables(
            pairs(&[("mai", "main"), ("mein", "main"), ("mn", "main"), ("khubsurat", "khoobsurat"), ("plzz", "plz")]),
            ["hun".to_string()],
            pairs(&[("kutton", "kutta")]),
            pairs(&[("karachi", "NNP")]),
            ["CPEC".to_string()],
        )
        .unwrap()
    }

    #[test]
    fn standardizes_variant_with_case() {
        assert_eq!(standardize("Mai karachi ja raha hun", &lex()), "Main karachi ja raha hun");
        assert_eq!(standardize("MAI", &lex()), "MAIN");
    }

    #[test]
    fn uppercases_protected_abbreviation() {
        assert_eq!(
            standardize("hum cpec per amreeki khudshaat se muttafiq nahi hein", &lex()),
            "hum CPEC per amreeki khudshaat se muttafiq nahi hein"
        );
    }

    #[test]
    fn no_hits_is_identity() {
        assert_eq!(standardize("yeh sab theek hai", &lex()), "yeh sab theek hai");
    }

    #[test]
    fn exact_case_key_matches_only_that_surface() {
        let l = NormalizationLexicon::from_tables(pairs(&[("Meri", "meri")]), [], vec![], vec![], []).unwrap();
        assert_eq!(standardize("Meri meri MERI", &l), "meri meri MERI");
    }

    #[test]
    fn elongations_collapse_before_lookup() {
        assert_eq!(collapse_elongations("Plzzzzzzzz", 2), "Plzz");
        assert_eq!(collapse_elongations("1000 oo", 2), "1000 oo");
        assert_eq!(standardize("Plzzzzzzzz is", &lex()), "Plz is");
        let off = StandardizeOptions { collapse_repeats: None };
        assert_eq!(standardize_with("Plzzzzzzzz", &lex(), off), "Plzzzzzzzz");
    }

    #[test]
    fn preprocess_drops_stopwords() {
        let ts = preprocess("Main Karachi ja raha hun", &lex(), PreprocessConfig::default());
        assert_eq!(ts.surfaces(), vec!["main", "karachi", "ja", "raha"]);
    }

    #[test]
    fn preprocess_empty_and_lemma_fallback() {
        assert!(preprocess("", &lex(), PreprocessConfig::default()).is_empty());
        let cfg = PreprocessConfig { pos_tags: true, ..Default::default() };
        let ts = preprocess("amreeki kutton, Karachi!", &lex(), cfg);
        assert_eq!(ts.surfaces(), vec!["amreeki", "kutton", "karachi"]);
        assert_eq!(ts.lemmas(), vec!["amreeki", "kutta", "karachi"]);
        assert_eq!(ts.tokens[2].pos.as_deref(), Some("NNP"));
        assert_eq!(ts.tokens[0].pos, None);
    }

    #[test]
    fn preprocess_keeps_protected_casing() {
        let ts = preprocess("hum CPEC per", &lex(), PreprocessConfig::default());
        assert_eq!(ts.surfaces(), vec!["hum", "CPEC", "per"]);
    }

    #[test]
    fn seed_variants_settle() {
        let b = build_lexicon(&[], pairs(&[("mai", "main"), ("mein", "main")]), &NormalizationLexicon::default()).unwrap();
        assert_eq!(b.lexicon.variants().get("mai").map(String::as_str), Some("main"));
        assert_eq!(b.lexicon.variants().get("mein").map(String::as_str), Some("main"));
    }

    #[test]
    fn chains_resolve_and_cycles_fail() {
        let l = NormalizationLexicon::from_tables(pairs(&[("a", "b"), ("b", "c")]), [], vec![], vec![], []).unwrap();
        assert_eq!(l.variants().get("a").map(String::as_str), Some("c"));
        assert!(matches!(
            build_lexicon(&[], pairs(&[("a", "b"), ("b", "a")]), &NormalizationLexicon::default()),
            Err(LexiconError::Cycle(_))
        ));
    }

    #[test]
    fn reports_uncovered_tokens() {
        let corpus = vec!["mei aya".to_string(), "mei gaya".to_string()];
        let b = build_lexicon(&corpus, pairs(&[("mai", "main")]), &NormalizationLexicon::default()).unwrap();
        assert_eq!(b.uncovered[0], ("mei".to_string(), 2));
        assert!(b.uncovered.iter().any(|(t, _)| t == "aya"));
    }

    #[test]
    fn parse_pairs_rejects_bad_rows() {
        assert!(parse_pairs("# c\nmai\tmain\n\n", "v").is_ok());
        assert!(matches!(
            parse_pairs("mai\tmain\nbroken\n", "v"),
            Err(LexiconError::Format { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn standardize_idempotent_and_count_preserving(words in proptest::collection::vec(
            prop_oneof![Just("mai".to_string()), Just("Mai".to_string()), Just("MEIN".to_string()), Just("cpec".to_string()), Just("plzzzz".to_string()), Just("hun".to_string()), "[a-zA-Z]{1,6}"], 0..12)) {
            let text = words.join(" ");
            let l = lex();
            let once = standardize(&text, &l);
            prop_assert_eq!(standardize(&once, &l), once.clone());
            prop_assert_eq!(once.split_whitespace().count(), text.split_whitespace().count());
            let again = standardize(&text, &l);
            prop_assert_eq!(once.as_bytes(), again.as_bytes());
        }

        #[test]
        fn preprocess_never_adds_tokens(text in "[a-zA-Z ,.!]{0,50}") {
            let ts = preprocess(&text, &lex(), PreprocessConfig::default());
            let upper = text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).count();
            prop_assert!(ts.len() <= upper);
            prop_assert!(ts.tokens.iter().all(|t| !t.surface.is_empty() && !t.surface.contains(char::is_whitespace)));
        }
    }
}
