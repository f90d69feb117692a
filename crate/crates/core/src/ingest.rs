//! Tweet-dump ingestion, cleansing and candidate filtering.
//!
//! A dump is UTF-8 line-delimited JSON, one tweet object per line:
//!
//! ```text
//! {"id":"17","text":"...","media":[...],"urls":[...],"mentions":[...],
//!  "in_reply_to":"12","retweet":false,"sequence":{"part":1,"of":3}}
//! ```
//!
//! Only `id` and `text` are required. Unknown fields are ignored so raw
//! platform exports can be fed in directly.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::RangeInclusive;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::NormalizationLexicon;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate tweet id {id:?} on line {line}")]
    DuplicateId { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceMarker {
    pub part: u32,
    pub of: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
    pub has_media: bool,
    pub urls: Vec<String>,
    pub mentions: Vec<String>,
    pub in_reply_to: Option<String>,
    pub is_retweet: bool,
    pub sequence: Option<SequenceMarker>,
}

impl RawTweet {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawTweet {
            id: id.into(),
            text: text.into(),
            has_media: false,
            urls: Vec::new(),
            mentions: Vec::new(),
            in_reply_to: None,
            is_retweet: false,
            sequence: None,
        }
    }
}

#[derive(Deserialize)]
struct WireTweet {
    id: String,
    text: String,
    #[serde(default)]
    media: Vec<serde_json::Value>,
    #[serde(default)]
    urls: Vec<String>,
    #[serde(default)]
    mentions: Vec<String>,
    #[serde(default)]
    in_reply_to: Option<String>,
    #[serde(default)]
    retweet: bool,
    #[serde(default)]
    sequence: Option<SequenceMarker>,
}

/// Parses a line-delimited JSON dump. Blank lines are skipped; the first bad
/// line aborts with its 1-based line number.
pub fn parse_dump<R: BufRead>(mut reader: R) -> Result<Vec<RawTweet>, IngestError> {
    let mut tweets = Vec::new();
    let mut seen = HashSet::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|e| IngestError::MalformedLine {
            line: line_no,
            reason: format!("invalid UTF-8: {e}"),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let wire: WireTweet =
            serde_json::from_str(line).map_err(|e| IngestError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
        if wire.id.is_empty() {
            return Err(IngestError::MalformedLine {
                line: line_no,
                reason: "empty id".into(),
            });
        }
        if !seen.insert(wire.id.clone()) {
            return Err(IngestError::DuplicateId {
                line: line_no,
                id: wire.id,
            });
        }
        tweets.push(RawTweet {
            id: wire.id,
            text: wire.text,
            has_media: !wire.media.is_empty(),
            urls: wire.urls,
            mentions: wire.mentions,
            in_reply_to: wire.in_reply_to,
            is_retweet: wire.retweet,
            sequence: wire.sequence,
        });
    }
    Ok(tweets)
}

/// The five cleansing categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Removal {
    Imagery,
    Url,
    Mention,
    Emoji,
    SpecialChar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleansedText {
    pub id: String,
    pub text: String,
    pub removals: BTreeSet<Removal>,
}

/// Why a tweet left the pipeline, either during cleansing or candidate filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Imagery,
    UrlOnly,
    Empty,
    Reply,
    Retweet,
    Sequence,
    NotRomanUrdu,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Imagery => "imagery",
            DropReason::UrlOnly => "url_only",
            DropReason::Empty => "empty",
            DropReason::Reply => "reply",
            DropReason::Retweet => "retweet",
            DropReason::Sequence => "sequence",
            DropReason::NotRomanUrdu => "not_roman_urdu",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanseOutcome {
    Kept(CleansedText),
    Dropped(DropReason),
}

impl CleanseOutcome {
    pub fn kept(self) -> Option<CleansedText> {
        match self {
            CleanseOutcome::Kept(c) => Some(c),
            CleanseOutcome::Dropped(_) => None,
        }
    }
}

/// Default emoji blocks: pictographs, dingbats, misc technical symbols,
/// arrows/stars, variation selectors, joiners, keycaps and tag characters.
pub const DEFAULT_EMOJI_RANGES: &[RangeInclusive<u32>] = &[
    0x1F000..=0x1FAFF,
    0x2600..=0x27BF,
    0x2300..=0x23FF,
    0x2B00..=0x2BFF,
    0xFE00..=0xFE0F,
    0x200D..=0x200D,
    0x20E3..=0x20E3,
    0x3030..=0x3030,
    0x303D..=0x303D,
    0x3297..=0x3297,
    0x3299..=0x3299,
    0xE0020..=0xE007F,
];

#[derive(Debug, Clone)]
pub struct CleansingConfig {
    pub emoji_ranges: Vec<RangeInclusive<u32>>,
    /// Strip ASCII emoticons such as `:-(`, `:@`, `;)`, `<3`.
    pub strip_emoticons: bool,
}

impl Default for CleansingConfig {
    fn default() -> Self {
        CleansingConfig {
            emoji_ranges: DEFAULT_EMOJI_RANGES.to_vec(),
            strip_emoticons: true,
        }
    }
}

impl CleansingConfig {
    pub fn is_emoji(&self, c: char) -> bool {
        let cp = c as u32;
        self.emoji_ranges.iter().any(|r| r.contains(&cp))
    }
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@[\p{L}\p{N}_]+").unwrap())
}

fn emoticon_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"(?:>?[:;=][-'’^o]?[()\[\]{}|\\/@*$#<>]+)",
            r"|(?:[:;=][-'’^]?[DPpOo3]\b)",
            r"|(?:</?3)",
        ))
        .unwrap()
    })
}

/// Letters, digits, whitespace and apostrophes survive special-character removal.
pub fn is_allowed_char(c: char) -> bool {
    c.is_alphabetic() || c.is_numeric() || c.is_whitespace() || c == '\'' || c == '’'
}

fn replace_all(re: &Regex, text: &str) -> Option<String> {
    if re.is_match(text) {
        Some(re.replace_all(text, " ").into_owned())
    } else {
        None
    }
}

/// Applies the cleansing removals in order: imagery, URLs, mentions, emoji,
/// special characters. Deleted spans become spaces, whitespace is collapsed
/// and the result trimmed.
pub fn cleanse(tweet: &RawTweet, cfg: &CleansingConfig) -> CleanseOutcome {
    if tweet.has_media {
        return CleanseOutcome::Dropped(DropReason::Imagery);
    }
    let mut removals = BTreeSet::new();
    let mut text = tweet.text.clone();

    let mut url_hit = false;
    for url in tweet.urls.iter().filter(|u| !u.is_empty()) {
        if text.contains(url.as_str()) {
            text = text.replace(url.as_str(), " ");
            url_hit = true;
        }
    }
    if let Some(t) = replace_all(url_re(), &text) {
        text = t;
        url_hit = true;
    }
    if url_hit {
        removals.insert(Removal::Url);
        if text.trim().is_empty() {
            return CleanseOutcome::Dropped(DropReason::UrlOnly);
        }
    }

    if let Some(t) = replace_all(mention_re(), &text) {
        text = t;
        removals.insert(Removal::Mention);
    }

    if cfg.strip_emoticons {
        if let Some(t) = replace_all(emoticon_re(), &text) {
            text = t;
            removals.insert(Removal::Emoji);
        }
    }
    if text.chars().any(|c| cfg.is_emoji(c)) {
        text = text
            .chars()
            .map(|c| if cfg.is_emoji(c) { ' ' } else { c })
            .collect();
        removals.insert(Removal::Emoji);
    }

    if !text.chars().all(is_allowed_char) {
        text = text
            .chars()
            .map(|c| if is_allowed_char(c) { c } else { ' ' })
            .collect();
        removals.insert(Removal::SpecialChar);
    }

    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if text.is_empty() {
        return CleanseOutcome::Dropped(DropReason::Empty);
    }
    CleanseOutcome::Kept(CleansedText {
        id: tweet.id.clone(),
        text,
        removals,
    })
}

/// Fraction of whitespace tokens the lexicon recognises (case-insensitive).
pub fn lexicon_coverage(text: &str, lex: &NormalizationLexicon) -> f64 {
    let mut total = 0usize;
    let mut known = 0usize;
    for tok in text.split_whitespace() {
        total += 1;
        if lex.knows(tok) {
            known += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        known as f64 / total as f64
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<CleansedText>,
    pub dropped: Vec<(String, DropReason)>,
}

/// Drops replies, retweets, tweet-sequence members and texts whose lexicon
/// coverage falls below `threshold`. Texts without a matching raw record are
/// treated as independent tweets.
pub fn filter_candidates_logged(
    texts: &[CleansedText],
    raw: &[RawTweet],
    lex: &NormalizationLexicon,
    threshold: f64,
) -> FilterOutcome {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "threshold must lie in (0, 1]"
    );
    let by_id: HashMap<&str, &RawTweet> = raw.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut out = FilterOutcome::default();
    for t in texts {
        let reason = match by_id.get(t.id.as_str()) {
            Some(r) if r.in_reply_to.is_some() => Some(DropReason::Reply),
            Some(r) if r.is_retweet => Some(DropReason::Retweet),
            Some(r) if r.sequence.is_some() => Some(DropReason::Sequence),
            _ if lexicon_coverage(&t.text, lex) < threshold => Some(DropReason::NotRomanUrdu),
            _ => None,
        };
        match reason {
            Some(r) => out.dropped.push((t.id.clone(), r)),
            None => out.kept.push(t.clone()),
        }
    }
    out
}

pub fn filter_candidates(
    texts: &[CleansedText],
    raw: &[RawTweet],
    lex: &NormalizationLexicon,
    threshold: f64,
) -> Vec<CleansedText> {
    filter_candidates_logged(texts, raw, lex, threshold).kept
}

/// Per-reason attrition counts for a run over a dump.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Attrition {
    pub input: usize,
    pub kept: usize,
    pub dropped: BTreeMap<DropReason, usize>,
}

impl Attrition {
    pub fn record(&mut self, reason: DropReason) {
        *self.dropped.entry(reason).or_default() += 1;
    }

    pub fn log(&self) {
        log::info!("{} tweets in, {} kept", self.input, self.kept);
        for (reason, n) in &self.dropped {
            log::info!("dropped {n} ({reason})");
        }
    }
}

/// One output row: cleansed text for kept tweets, original text otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsvRow {
    pub id: String,
    pub text: String,
    pub dropped: Option<DropReason>,
}

fn tsv_safe(s: &str) -> String {
    s.split(['\t', '\n', '\r']).collect::<Vec<_>>().join(" ")
}

pub fn write_tsv<W: Write>(mut w: W, rows: &[TsvRow]) -> std::io::Result<()> {
    for row in rows {
        let reason = row.dropped.map(DropReason::as_str).unwrap_or("-");
        writeln!(w, "{}\t{}\t{}", tsv_safe(&row.id), tsv_safe(&row.text), reason)?;
    }
    Ok(())
}

/// Reads `id<TAB>text[<TAB>reason]` rows, returning only the kept ones.
pub fn read_kept_tsv<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(id), Some(text)) = (cols.next(), cols.next()) else {
            return Err(IngestError::MalformedLine {
                line: i + 1,
                reason: "expected id<TAB>text".into(),
            });
        };
        match cols.next() {
            None | Some("-") => out.push((id.to_string(), text.to_string())),
            Some(_) => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clean(text: &str) -> CleanseOutcome {
        cleanse(&RawTweet::new("1", text), &CleansingConfig::default())
    }

    fn clean_text(text: &str) -> String {
        clean(text).kept().expect("kept").text
    }

    #[test]
    fn parse_minimal_record() {
        let tweets = parse_dump(r#"{"id":"1","text":"salam"}"#.as_bytes()).unwrap();
        assert_eq!(tweets, vec![RawTweet::new("1", "salam")]);
    }

    #[test]
    fn parse_empty_stream() {
        assert!(parse_dump("".as_bytes()).unwrap().is_empty());
        assert!(parse_dump("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn parse_reports_missing_text_line() {
        let dump = "{\"id\":\"1\",\"text\":\"a\"}\n{\"id\":\"2\"}\n{\"id\":\"3\",\"text\":\"c\"}\n";
        match parse_dump(dump.as_bytes()) {
            Err(IngestError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_invalid_utf8() {
        let mut dump = b"{\"id\":\"1\",\"text\":\"a\"}\n{\"id\":\"2\",\"text\":\"".to_vec();
        dump.extend_from_slice(&[0xff, 0xfe]);
        dump.extend_from_slice(b"\"}\n");
        assert!(matches!(
            parse_dump(dump.as_slice()),
            Err(IngestError::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn parse_optional_fields_and_duplicates() {
        let dump = r#"{"id":"7","text":"x","media":[{"type":"photo"}],"retweet":true,"in_reply_to":"3","sequence":{"part":1,"of":2},"urls":["http://a"],"mentions":["b"],"lang":"ur"}"#;
        let t = &parse_dump(dump.as_bytes()).unwrap()[0];
        assert!(t.has_media && t.is_retweet);
        assert_eq!(t.in_reply_to.as_deref(), Some("3"));
        assert_eq!(t.sequence, Some(SequenceMarker { part: 1, of: 2 }));

        let dup = "{\"id\":\"1\",\"text\":\"a\"}\n{\"id\":\"1\",\"text\":\"b\"}\n";
        assert!(matches!(
            parse_dump(dup.as_bytes()),
            Err(IngestError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn strips_trailing_mention() {
        let out = clean("in amreeki kutton ko afghanistan se nikal jana chahiye @realDonaldTrump")
            .kept()
            .unwrap();
        assert_eq!(out.text, "in amreeki kutton ko afghanistan se nikal jana chahiye");
        assert_eq!(out.removals, BTreeSet::from([Removal::Mention]));
    }

    #[test]
    fn strips_punctuation_runs() {
        let out = clean("khabardar jo tum ne mery samney bakwas ki!!!!!!").kept().unwrap();
        assert_eq!(out.text, "khabardar jo tum ne mery samney bakwas ki");
        assert_eq!(out.removals, BTreeSet::from([Removal::SpecialChar]));
    }

    #[test]
    fn url_only_tweet_is_dropped() {
        assert_eq!(clean("http://x.example"), CleanseOutcome::Dropped(DropReason::UrlOnly));
        assert_eq!(clean("  www.example.com  "), CleanseOutcome::Dropped(DropReason::UrlOnly));
    }

    #[test]
    fn urls_are_removed_inline() {
        let out = clean("dekho https://t.co/abc yeh www.x.pk").kept().unwrap();
        assert_eq!(out.text, "dekho yeh");
        assert!(out.removals.contains(&Removal::Url));
    }

    #[test]
    fn media_tweet_is_dropped() {
        let mut t = RawTweet::new("1", "meme");
        t.has_media = true;
        assert_eq!(
            cleanse(&t, &CleansingConfig::default()),
            CleanseOutcome::Dropped(DropReason::Imagery)
        );
    }

    #[test]
    fn ascii_emoticons_and_emoji() {
        assert_eq!(
            clean_text("in hindu zalimon ko goli maar do :@ :@ :@"),
            "in hindu zalimon ko goli maar do"
        );
        let out = clean("mujhe hansi aa gayi 😂😂 :-)").kept().unwrap();
        assert_eq!(out.text, "mujhe hansi aa gayi");
        assert_eq!(out.removals, BTreeSet::from([Removal::Emoji]));
        assert_eq!(clean_text("dil <3 hai :P"), "dil hai");
        // letter mouths only match at a word boundary
        assert_eq!(clean_text("note:Dekho"), "note Dekho");
    }

    #[test]
    fn hashtag_word_is_kept() {
        assert_eq!(clean_text("#JamiaProtests zindabad"), "JamiaProtests zindabad");
    }

    #[test]
    fn emoji_only_tweet_is_empty() {
        assert_eq!(clean("😂 :-) !!!"), CleanseOutcome::Dropped(DropReason::Empty));
    }

    #[test]
    fn filter_drops_dependent_tweets() {
        let lex = NormalizationLexicon::default();
        let mut rt = RawTweet::new("1", "salam");
        rt.is_retweet = true;
        let mut reply = RawTweet::new("2", "salam");
        reply.in_reply_to = Some("9".into());
        let mut seq = RawTweet::new("3", "salam");
        seq.sequence = Some(SequenceMarker { part: 2, of: 3 });
        let raw = vec![rt, reply, seq];
        let texts: Vec<_> = raw
            .iter()
            .map(|r| cleanse(r, &CleansingConfig::default()).kept().unwrap())
            .collect();
        let out = filter_candidates_logged(&texts, &raw, &lex, 0.4);
        assert!(out.kept.is_empty());
        let reasons: Vec<_> = out.dropped.iter().map(|(_, r)| *r).collect();
        assert_eq!(
            reasons,
            vec![DropReason::Retweet, DropReason::Reply, DropReason::Sequence]
        );
    }

    #[test]
    fn filter_language_threshold() {
        let lex = NormalizationLexicon::from_tables(
            vec![],
            ["main", "karachi", "ja", "raha", "hun"].map(String::from),
            vec![],
            vec![],
            [],
        )
        .unwrap();
        let en = RawTweet::new("1", "the cat sat on mat");
        let ur = RawTweet::new("2", "main karachi ja raha hun");
        let raw = vec![en, ur];
        let texts: Vec<_> = raw
            .iter()
            .map(|r| cleanse(r, &CleansingConfig::default()).kept().unwrap())
            .collect();
        let kept = filter_candidates(&texts, &raw, &lex, 0.4);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "2");
    }

    #[test]
    fn tsv_output_and_readback() {
        let rows = vec![
            TsvRow { id: "1".into(), text: "a\tb".into(), dropped: None },
            TsvRow { id: "2".into(), text: "http://x".into(), dropped: Some(DropReason::UrlOnly) },
        ];
        let mut buf = Vec::new();
        write_tsv(&mut buf, &rows).unwrap();
        let s = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(s, "1\ta b\t-\n2\thttp://x\turl_only\n");
        let kept = read_kept_tsv(buf.as_slice()).unwrap();
        assert_eq!(kept, vec![("1".to_string(), "a b".to_string())]);
    }

    proptest! {
        #[test]
        fn cleanse_is_idempotent(text in "\\PC{0,60}") {
            let cfg = CleansingConfig::default();
            if let CleanseOutcome::Kept(once) = cleanse(&RawTweet::new("x", text), &cfg) {
                let twice = cleanse(&RawTweet::new("x", once.text.clone()), &cfg).kept().unwrap();
                prop_assert_eq!(twice.text, once.text);
                prop_assert!(twice.removals.is_empty());
            }
        }

        #[test]
        fn output_alphabet_is_closed(text in any::<String>()) {
            let cfg = CleansingConfig::default();
            if let CleanseOutcome::Kept(out) = cleanse(&RawTweet::new("x", text), &cfg) {
                prop_assert!(out.text.chars().all(|c| is_allowed_char(c) && !cfg.is_emoji(c)));
                prop_assert!(!url_re().is_match(&out.text));
                prop_assert!(!out.text.split_whitespace().any(|t| t.starts_with('@')));
                prop_assert_eq!(out.text.trim(), out.text.as_str());
                prop_assert!(!out.text.contains("  "));
            }
        }

        #[test]
        fn no_invented_tokens(text in "[a-z:@#!()😂 ]{0,40}") {
            if let CleanseOutcome::Kept(out) = cleanse(&RawTweet::new("x", text.clone()), &CleansingConfig::default()) {
                for tok in out.text.split_whitespace() {
                    prop_assert!(text.contains(tok), "{tok:?} not in {text:?}");
                }
            }
        }

        #[test]
        fn filter_output_is_subsequence(flags in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..20)) {
            let lex = NormalizationLexicon::from_tables(vec![], ["hai".to_string()], vec![], vec![], []).unwrap();
            let raw: Vec<RawTweet> = flags.iter().enumerate().map(|(i, (rt, ur))| {
                let mut t = RawTweet::new(i.to_string(), if *ur { "hai" } else { "is" });
                t.is_retweet = *rt;
                t
            }).collect();
            let texts: Vec<_> = raw.iter().map(|r| cleanse(r, &CleansingConfig::default()).kept().unwrap()).collect();
            let kept = filter_candidates(&texts, &raw, &lex, 0.4);
            let mut it = texts.iter();
            for k in &kept {
                prop_assert!(it.any(|t| t == k));
            }
        }
    }
}
