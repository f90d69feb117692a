//! Cohen's kappa over 2x2 dual-annotation tables.
//!
//! Rows are annotator 1, columns annotator 2, the first class listed first:
//!
//! ```text
//!            A2 first   A2 second
//! A1 first       a          b
//! A1 second      c          d
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::AnnotationSession;
use crate::corpus::{FineLabel, LabelPath, TopLabel};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl AgreementTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        AgreementTable { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// The same table with the annotators swapped.
    pub fn transposed(&self) -> Self {
        AgreementTable {
            a: self.a,
            b: self.c,
            c: self.b,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: u64,
    pub observed: f64,
    pub expected: f64,
    pub kappa: f64,
    /// Asymptotic standard error (Fleiss, Cohen & Everitt); drives the interval.
    pub se: f64,
    /// Large-sample approximation sqrt(po(1-po) / (n(1-pe)^2)).
    pub se_simple: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("empty agreement table")]
    EmptyTable,
    #[error("kappa undefined: both annotators put every item in one class")]
    DegenerateTable,
}

pub fn kappa(t: &AgreementTable) -> Result<AgreementReport, AgreementError> {
    let n = t.n();
    if n == 0 {
        return Err(AgreementError::EmptyTable);
    }
    let nf = n as f64;
    let p = [
        [t.a as f64 / nf, t.b as f64 / nf],
        [t.c as f64 / nf, t.d as f64 / nf],
    ];
    let row = [p[0][0] + p[0][1], p[1][0] + p[1][1]];
    let col = [p[0][0] + p[1][0], p[0][1] + p[1][1]];

    let po = (t.a + t.d) as f64 / nf;
    let pe = ((t.a + t.b) as f64 * (t.a + t.c) as f64 + (t.c + t.d) as f64 * (t.b + t.d) as f64)
        / (nf * nf);
    // pe == 1 exactly when one class holds every judgement of both annotators
    if (t.a == n) || (t.d == n) {
        return Err(AgreementError::DegenerateTable);
    }
    let k = (po - pe) / (1.0 - pe);

    let diag: f64 = (0..2)
        .map(|i| p[i][i] * (1.0 - (row[i] + col[i]) * (1.0 - k)).powi(2))
        .sum();
    let off = (1.0 - k).powi(2) * (p[0][1] * (col[0] + row[1]).powi(2) + p[1][0] * (col[1] + row[0]).powi(2));
    let corr = (k - pe * (1.0 - k)).powi(2);
    let se = (diag + off - corr).max(0.0).sqrt() / ((1.0 - pe) * nf.sqrt());
    let se_simple = (po * (1.0 - po) / (nf * (1.0 - pe).powi(2))).sqrt();

    Ok(AgreementReport {
        n,
        observed: po,
        expected: pe,
        kappa: k,
        se,
        se_simple,
        ci_low: k - Z_95 * se,
        ci_high: k + Z_95 * se,
    })
}

impl AgreementReport {
    pub fn render(&self, t: &AgreementTable) -> String {
        let agree = t.a + t.d;
        format!(
            "observed agreements: {} ({:.2}%)\n\
             agreements expected by chance: {:.1} ({:.2}%)\n\
             kappa = {:.3}\n\
             se = {:.3}\n\
             95% ci = [{:.3}, {:.3}]\n",
            agree,
            self.observed * 100.0,
            self.expected * self.n as f64,
            self.expected * 100.0,
            self.kappa,
            self.se,
            self.ci_low,
            self.ci_high
        )
    }
}

/// Which decision the table cross-tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Hostile (first class) vs Neutral.
    Top,
    /// Hateful (first class) vs Offensive, over items both marked Hostile.
    Fine,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top" | "TopLevel" => Ok(Level::Top),
            "fine" | "Fine" => Ok(Level::Fine),
            _ => Err(format!("unknown level {s:?} (expected top or fine)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("sessions cover different comments: {} only in first, {} only in second", only_first.len(), only_second.len())]
    CoverageMismatch {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },
    #[error("sessions share no decided comments")]
    Disjoint,
}

fn first_class(path: &LabelPath, level: Level) -> Option<bool> {
    match level {
        Level::Top => Some(path.top == TopLabel::Hostile),
        Level::Fine => match (path.top, path.fine) {
            (TopLabel::Hostile, Some(f)) => Some(f == FineLabel::Hateful),
            _ => None,
        },
    }
}

fn tabulate<'a>(
    ids: impl Iterator<Item = &'a String>,
    s1: &AnnotationSession,
    s2: &AnnotationSession,
    level: Level,
) -> AgreementTable {
    let mut t = AgreementTable::default();
    for id in ids {
        let (Some(x), Some(y)) = (
            first_class(&s1.decisions[id], level),
            first_class(&s2.decisions[id], level),
        ) else {
            continue;
        };
        match (x, y) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    t
}

/// Cross-tabulates two sessions that decided exactly the same comments.
pub fn table_from_sessions(
    s1: &AnnotationSession,
    s2: &AnnotationSession,
    level: Level,
) -> Result<AgreementTable, CoverageError> {
    let k1: BTreeSet<&String> = s1.decisions.keys().collect();
    let k2: BTreeSet<&String> = s2.decisions.keys().collect();
    if k1 != k2 {
        return Err(CoverageError::CoverageMismatch {
            only_first: k1.difference(&k2).map(|s| s.to_string()).collect(),
            only_second: k2.difference(&k1).map(|s| s.to_string()).collect(),
        });
    }
    Ok(tabulate(k1.into_iter(), s1, s2, level))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialTable {
    pub table: AgreementTable,
    /// Comments decided in both sessions.
    pub compared: usize,
    /// True when either session decided comments the other has not.
    pub partial: bool,
}

/// Cross-tabulates over the comments both sessions have decided.
pub fn table_over_intersection(
    s1: &AnnotationSession,
    s2: &AnnotationSession,
    level: Level,
) -> Result<PartialTable, CoverageError> {
    let k1: BTreeSet<&String> = s1.decisions.keys().collect();
    let k2: BTreeSet<&String> = s2.decisions.keys().collect();
    let both: Vec<&String> = k1.intersection(&k2).copied().collect();
    if both.is_empty() {
        return Err(CoverageError::Disjoint);
    }
    Ok(PartialTable {
        table: tabulate(both.iter().copied(), s1, s2, level),
        compared: both.len(),
        partial: k1 != k2,
    })
}
