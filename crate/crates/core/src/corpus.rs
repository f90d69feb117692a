//! Labeled-corpus data model, TSV persistence and composition statistics.
//!
//! Corpus TSV columns (tab-separated, optional header line starting `id`):
//!
//! ```text
//! id  text  top(N|H)  structure(S|C|-)  fine(HATE|OFF|-)  rules(comma-joined|-)  annotator
//! ```

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TopLabel {
    Neutral,
    Hostile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Structure {
    Simple,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FineLabel {
    Hateful,
    Offensive,
}

/// The decision stage a guideline rule belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    TopLevel,
    Structure,
    SimpleFine,
    ComplexFine,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::TopLevel,
        Stage::Structure,
        Stage::SimpleFine,
        Stage::ComplexFine,
    ];

    /// Position in the decision procedure; both fine stages share step 2.
    pub fn step(self) -> u8 {
        match self {
            Stage::TopLevel => 0,
            Stage::Structure => 1,
            Stage::SimpleFine | Stage::ComplexFine => 2,
        }
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "TopLevel" => Ok(Stage::TopLevel),
            "Structure" => Ok(Stage::Structure),
            "SimpleFine" => Ok(Stage::SimpleFine),
            "ComplexFine" => Ok(Stage::ComplexFine),
            _ => Err(format!("unknown stage {s:?}")),
        }
    }
}

/// The seven guideline blocks, three rules each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleBlock {
    N,
    H,
    S,
    C,
    SH,
    SO,
    CH,
    CO,
}

impl RuleBlock {
    pub const ALL: [RuleBlock; 8] = [
        RuleBlock::N,
        RuleBlock::H,
        RuleBlock::S,
        RuleBlock::C,
        RuleBlock::SH,
        RuleBlock::SO,
        RuleBlock::CH,
        RuleBlock::CO,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            RuleBlock::N => "N",
            RuleBlock::H => "H",
            RuleBlock::S => "S",
            RuleBlock::C => "C",
            RuleBlock::SH => "SH",
            RuleBlock::SO => "SO",
            RuleBlock::CH => "CH",
            RuleBlock::CO => "CO",
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            RuleBlock::N | RuleBlock::H => Stage::TopLevel,
            RuleBlock::S | RuleBlock::C => Stage::Structure,
            RuleBlock::SH | RuleBlock::SO => Stage::SimpleFine,
            RuleBlock::CH | RuleBlock::CO => Stage::ComplexFine,
        }
    }
}

/// A guideline rule identifier such as `SH2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId {
    pub block: RuleBlock,
    pub number: u8,
}

impl RuleId {
    pub fn new(block: RuleBlock, number: u8) -> Option<Self> {
        (1..=3).contains(&number).then_some(RuleId { block, number })
    }

    pub fn stage(self) -> Stage {
        self.block.stage()
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.block.prefix(), self.number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rule id {0:?}")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (prefix, digits) = s.split_at(split);
        let block = RuleBlock::ALL
            .into_iter()
            .find(|b| b.prefix() == prefix)
            .ok_or_else(|| UnknownRule(s.to_string()))?;
        let number = match digits {
            "1" => 1,
            "2" => 2,
            "3" => 3,
            _ => return Err(UnknownRule(s.to_string())),
        };
        Ok(RuleId { block, number })
    }
}

impl Serialize for RuleId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RuleId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of the three-level annotation plus the rules that justified it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelPath {
    pub top: TopLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Structure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<FineLabel>,
    #[serde(default)]
    pub rules: Vec<RuleId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("neutral path carries a structure or fine label")]
    NeutralWithDetail,
    #[error("hostile path needs both a structure and a fine label")]
    HostileIncomplete,
    #[error("rules do not support this path: {0}")]
    Unsupported(String),
}

impl LabelPath {
    pub fn neutral() -> Self {
        LabelPath {
            top: TopLabel::Neutral,
            structure: None,
            fine: None,
            rules: Vec::new(),
        }
    }

    pub fn hostile(structure: Structure, fine: FineLabel) -> Self {
        LabelPath {
            top: TopLabel::Hostile,
            structure: Some(structure),
            fine: Some(fine),
            rules: Vec::new(),
        }
    }

    pub fn with_rules(mut self, rules: Vec<RuleId>) -> Self {
        self.rules = rules;
        self
    }

    /// Checks the shape invariants; when rules are recorded they must, run
    /// through the decision procedure, reproduce this exact path.
    pub fn validate(&self) -> Result<(), PathError> {
        match self.top {
            TopLabel::Neutral if self.structure.is_some() || self.fine.is_some() => {
                return Err(PathError::NeutralWithDetail)
            }
            TopLabel::Hostile if self.structure.is_none() || self.fine.is_none() => {
                return Err(PathError::HostileIncomplete)
            }
            _ => {}
        }
        if self.rules.is_empty() {
            return Ok(());
        }
        let decided = annotate::decide(&self.rules).map_err(|e| PathError::Unsupported(e.to_string()))?;
        if decided.top != self.top || decided.structure != self.structure || decided.fine != self.fine {
            return Err(PathError::Unsupported(format!(
                "rules {} yield {}",
                join_rules(&self.rules),
                decided.short()
            )));
        }
        Ok(())
    }

    /// `Neutral`, `Hostile/Simple/Offensive`, ...
    pub fn short(&self) -> String {
        match (self.top, self.structure, self.fine) {
            (TopLabel::Hostile, Some(s), Some(f)) => format!("Hostile/{s:?}/{f:?}"),
            (top, _, _) => format!("{top:?}"),
        }
    }
}

pub fn join_rules(rules: &[RuleId]) -> String {
    rules.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    pub id: String,
    pub text: String,
    pub path: LabelPath,
    pub annotator: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: &'static str,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn schema(line: usize, column: &'static str, message: impl Into<String>) -> CorpusError {
    CorpusError::Schema {
        line,
        column,
        message: message.into(),
    }
}

pub const TSV_HEADER: &str = "id\ttext\ttop\tstructure\tfine\trules\tannotator";

pub fn save_tsv<W: Write>(mut w: W, corpus: &[LabeledComment]) -> Result<(), CorpusError> {
    writeln!(w, "{TSV_HEADER}")?;
    for (i, c) in corpus.iter().enumerate() {
        let line = i + 2;
        for (col, val) in [("id", &c.id), ("text", &c.text), ("annotator", &c.annotator)] {
            if val.contains(['\t', '\n', '\r']) {
                return Err(schema(line, col, "value contains a tab or newline"));
            }
        }
        if c.text.trim().is_empty() {
            return Err(schema(line, "text", "empty text"));
        }
        c.path.validate().map_err(|e| schema(line, "rules", e.to_string()))?;
        let top = match c.path.top {
            TopLabel::Neutral => "N",
            TopLabel::Hostile => "H",
        };
        let structure = match c.path.structure {
            Some(Structure::Simple) => "S",
            Some(Structure::Complex) => "C",
            None => "-",
        };
        let fine = match c.path.fine {
            Some(FineLabel::Hateful) => "HATE",
            Some(FineLabel::Offensive) => "OFF",
            None => "-",
        };
        let rules = if c.path.rules.is_empty() {
            "-".to_string()
        } else {
            join_rules(&c.path.rules)
        };
        writeln!(
            w,
            "{}\t{}\t{top}\t{structure}\t{fine}\t{rules}\t{}",
            c.id, c.text, c.annotator
        )?;
    }
    Ok(())
}

pub fn parse_rules(s: &str) -> Result<Vec<RuleId>, UnknownRule> {
    if s == "-" || s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|r| r.trim().parse()).collect()
}

pub fn load_tsv<R: BufRead>(reader: R) -> Result<Vec<LabeledComment>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (line_no == 1 && line.starts_with("id\t")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(schema(line_no, "id", format!("expected 7 columns, found {}", cols.len())));
        }
        if cols[0].is_empty() {
            return Err(schema(line_no, "id", "empty id"));
        }
        if cols[1].trim().is_empty() {
            return Err(schema(line_no, "text", "empty text"));
        }
        let top = match cols[2] {
            "N" => TopLabel::Neutral,
            "H" => TopLabel::Hostile,
            other => return Err(schema(line_no, "top", format!("expected N or H, found {other:?}"))),
        };
        let structure = match cols[3] {
            "S" => Some(Structure::Simple),
            "C" => Some(Structure::Complex),
            "-" => None,
            other => return Err(schema(line_no, "structure", format!("expected S, C or -, found {other:?}"))),
        };
        let fine = match cols[4] {
            "HATE" => Some(FineLabel::Hateful),
            "OFF" => Some(FineLabel::Offensive),
            "-" => None,
            other => return Err(schema(line_no, "fine", format!("expected HATE, OFF or -, found {other:?}"))),
        };
        let rules = parse_rules(cols[5]).map_err(|e| schema(line_no, "rules", e.to_string()))?;
        let path = LabelPath {
            top,
            structure,
            fine,
            rules,
        };
        path.validate().map_err(|e| {
            let column = match e {
                PathError::NeutralWithDetail | PathError::HostileIncomplete => {
                    if top == TopLabel::Neutral && fine.is_some() {
                        "fine"
                    } else {
                        "structure"
                    }
                }
                PathError::Unsupported(_) => "rules",
            };
            schema(line_no, column, e.to_string())
        })?;
        out.push(LabeledComment {
            id: cols[0].to_string(),
            text: cols[1].to_string(),
            path,
            annotator: cols[6].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub neutral: usize,
    pub hostile: usize,
    pub simple: usize,
    pub complex: usize,
    pub hateful: usize,
    pub offensive: usize,
    pub simple_hateful: usize,
    pub simple_offensive: usize,
    pub complex_hateful: usize,
    pub complex_offensive: usize,
}

/// Integer percent, rounding halves up; zero when the whole is empty.
pub fn percent(part: usize, whole: usize) -> usize {
    if whole == 0 {
        0
    } else {
        (part * 200 + whole) / (2 * whole)
    }
}

pub fn stats(corpus: &[LabeledComment]) -> CorpusStats {
    let mut s = CorpusStats {
        total: corpus.len(),
        ..Default::default()
    };
    for c in corpus {
        match (c.path.top, c.path.structure, c.path.fine) {
            (TopLabel::Neutral, _, _) => s.neutral += 1,
            (TopLabel::Hostile, structure, fine) => {
                s.hostile += 1;
                match (structure, fine) {
                    (Some(Structure::Simple), Some(FineLabel::Hateful)) => s.simple_hateful += 1,
                    (Some(Structure::Simple), Some(FineLabel::Offensive)) => s.simple_offensive += 1,
                    (Some(Structure::Complex), Some(FineLabel::Hateful)) => s.complex_hateful += 1,
                    (Some(Structure::Complex), Some(FineLabel::Offensive)) => s.complex_offensive += 1,
                    _ => unreachable!("validated hostile path"),
                }
            }
        }
    }
    s.simple = s.simple_hateful + s.simple_offensive;
    s.complex = s.complex_hateful + s.complex_offensive;
    s.hateful = s.simple_hateful + s.complex_hateful;
    s.offensive = s.simple_offensive + s.complex_offensive;
    s
}

impl CorpusStats {
    /// Two-part plain-text summary: the top-level split, then the breakdown
    /// of the hostile subset.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Comments in Neutral/Hostile dataset: {}\n", self.total));
        out.push_str(&format!("{:<10} {:>7} {:>7}\n", "type", "percent", "count"));
        for (name, n) in [("Neutral", self.neutral), ("Hostile", self.hostile)] {
            out.push_str(&format!("{:<10} {:>6}% {:>7}\n", name, percent(n, self.total), n));
        }
        out.push('\n');
        out.push_str(&format!("Comments in Hateful/Offensive dataset: {}\n", self.hostile));
        out.push_str(&format!(
            "{:<10} {:>7} {:>7} {:>9} {:>9}\n",
            "type", "percent", "count", "hateful", "offensive"
        ));
        for (name, n, h, o) in [
            ("Simple", self.simple, self.simple_hateful, self.simple_offensive),
            ("Complex", self.complex, self.complex_hateful, self.complex_offensive),
        ] {
            out.push_str(&format!(
                "{:<10} {:>6}% {:>7} {:>9} {:>9}\n",
                name,
                percent(n, self.hostile),
                n,
                h,
                o
            ));
        }
        out.push_str(&format!(
            "{:<10} {:>6}% {:>7}\n{:<10} {:>6}% {:>7}\n",
            "Hateful",
            percent(self.hateful, self.hostile),
            self.hateful,
            "Offensive",
            percent(self.offensive, self.hostile),
            self.offensive
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rid(s: &str) -> RuleId {
        s.parse().unwrap()
    }

    fn comment(id: &str, path: LabelPath) -> LabeledComment {
        LabeledComment {
            id: id.into(),
            text: format!("text {id}"),
            path,
            annotator: "a1".into(),
        }
    }

    #[test]
    fn rule_ids_parse_and_print() {
        for s in ["N1", "H3", "S2", "C1", "SH1", "SO3", "CH2", "CO1"] {
            assert_eq!(rid(s).to_string(), s);
        }
        assert_eq!(rid("CH2").stage(), Stage::ComplexFine);
        for bad in ["Z9", "N4", "N0", "SH", "", "sh1", "N12"] {
            assert!(bad.parse::<RuleId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn rules_column_parses() {
        assert_eq!(parse_rules("H2,C1,CH1").unwrap(), vec![rid("H2"), rid("C1"), rid("CH1")]);
        assert!(parse_rules("-").unwrap().is_empty());
    }

    #[test]
    fn tsv_round_trip() {
        let corpus = vec![
            comment("1", LabelPath::neutral().with_rules(vec![rid("N3")])),
            comment(
                "2",
                LabelPath::hostile(Structure::Simple, FineLabel::Offensive)
                    .with_rules(vec![rid("H2"), rid("S1"), rid("SO3")]),
            ),
            comment("3", LabelPath::hostile(Structure::Complex, FineLabel::Hateful)),
        ];
        let mut buf = Vec::new();
        save_tsv(&mut buf, &corpus).unwrap();
        assert_eq!(load_tsv(buf.as_slice()).unwrap(), corpus);
    }

    #[test]
    fn neutral_with_fine_label_is_rejected() {
        let tsv = "1\tsome text\tN\t-\tHATE\t-\ta1\n";
        match load_tsv(tsv.as_bytes()) {
            Err(CorpusError::Schema { line, column, .. }) => {
                assert_eq!((line, column), (1, "fine"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_rule_and_inconsistent_rules_rejected() {
        let bad_rule = "1\tt\tN\t-\t-\tN9\ta\n";
        assert!(matches!(
            load_tsv(bad_rule.as_bytes()),
            Err(CorpusError::Schema { column: "rules", .. })
        ));
        let mismatch = "1\tt\tH\tS\tHATE\tH2,S1,SO3\ta\n";
        assert!(matches!(
            load_tsv(mismatch.as_bytes()),
            Err(CorpusError::Schema { column: "rules", .. })
        ));
        let short = "1\tt\tH\n";
        assert!(load_tsv(short.as_bytes()).is_err());
    }

    #[test]
    fn empty_corpus_stats() {
        assert_eq!(stats(&[]), CorpusStats::default());
        assert_eq!(percent(0, 0), 0);
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent(1430, 5000), 29);
        assert_eq!(percent(3570, 5000), 71);
        assert_eq!(percent(1, 8), 13);
        assert_eq!(percent(2737, 3570), 77);
    }

    fn arb_path() -> impl Strategy<Value = LabelPath> {
        prop_oneof![
            Just(LabelPath::neutral()),
            (any::<bool>(), any::<bool>()).prop_map(|(s, h)| LabelPath::hostile(
                if s { Structure::Simple } else { Structure::Complex },
                if h { FineLabel::Hateful } else { FineLabel::Offensive },
            )),
        ]
    }

    proptest! {
        #[test]
        fn stats_identities(paths in proptest::collection::vec(arb_path(), 0..200)) {
            let corpus: Vec<_> = paths.into_iter().enumerate().map(|(i, p)| comment(&i.to_string(), p)).collect();
            let s = stats(&corpus);
            prop_assert_eq!(s.neutral + s.hostile, s.total);
            prop_assert_eq!(s.simple + s.complex, s.hostile);
            prop_assert_eq!(s.hateful + s.offensive, s.hostile);
            prop_assert_eq!(s.simple_hateful + s.simple_offensive, s.simple);
            prop_assert_eq!(s.complex_hateful + s.complex_offensive, s.complex);
        }

        #[test]
        fn tsv_round_trip_identity(paths in proptest::collection::vec(arb_path(), 0..30)) {
            let corpus: Vec<_> = paths.into_iter().enumerate().map(|(i, p)| comment(&i.to_string(), p)).collect();
            let mut buf = Vec::new();
            save_tsv(&mut buf, &corpus).unwrap();
            prop_assert_eq!(load_tsv(buf.as_slice()).unwrap(), corpus);
        }
    }
}
