//! Guideline catalog and the staged annotation procedure.
//!
//! An annotator answers stage by stage: Neutral or Hostile first, then (for
//! hostile comments) Simple or Complex, then the fine-grained rules of the
//! block matching that structure. [`decide`] turns the ordered list of rules
//! the annotator invoked into a [`LabelPath`].

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FineLabel, LabelPath, RuleBlock, RuleId, Stage, Structure, TopLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Neutral,
    Hostile,
    Simple,
    Complex,
    Hateful,
    Offensive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuidelineRule {
    pub id: RuleId,
    pub stage: Stage,
    pub verdict: Verdict,
    pub prompt: &'static str,
    pub example: &'static str,
    pub translation: &'static str,
    /// Judged against the main target of opinion of a complex comment.
    pub mto_based: bool,
}

pub const CATALOG_VERSION: &str = "refined-1";

const fn rule(
    block: RuleBlock,
    number: u8,
    verdict: Verdict,
    prompt: &'static str,
    example: &'static str,
    translation: &'static str,
) -> GuidelineRule {
    let stage = match block {
        RuleBlock::N | RuleBlock::H => Stage::TopLevel,
        RuleBlock::S | RuleBlock::C => Stage::Structure,
        RuleBlock::SH | RuleBlock::SO => Stage::SimpleFine,
        RuleBlock::CH | RuleBlock::CO => Stage::ComplexFine,
    };
    GuidelineRule {
        id: RuleId { block, number },
        stage,
        verdict,
        prompt,
        example,
        translation,
        mto_based: matches!(stage, Stage::ComplexFine),
    }
}

use RuleBlock as B;
use Verdict as V;

static CATALOG: [GuidelineRule; 24] = [
    rule(B::N, 1, V::Neutral,
        "An expression that does not ignite anger or leave a pleasant feeling for an unbiased reader.",
        "Aap ke daant sitaron ki tarah hain", "Your teeth are like the stars"),
    rule(B::N, 2, V::Neutral,
        "That shares information, knowledge, or a fact, about a subject.",
        "Ethiopia k log ghareeb hain", "Ethiopian people are poor"),
    rule(B::N, 3, V::Neutral,
        "A quotation from a religious scripture, Prophets, Saints, or Gurus.",
        "Dunya mein aman qaim karo", "Make the world peaceful"),
    rule(B::H, 1, V::Hostile,
        "A hostile expression that promotes hostility, ignites anger, or incites harm to an individual or a small group.",
        "Tum eik ehsan faramosh kutia ho", "You are an ungrateful bitch"),
    rule(B::H, 2, V::Hostile,
        "A hostile sentence or information that portrays negativity or hatred about a community.",
        "Afghani dehshat gard hotay hain.", "Afghans are terrorists"),
    rule(B::H, 3, V::Hostile,
        "A misquote from religious scripture having hostile or disrespectful content.",
        "Islam ghair muslim logon ke sath imteyazi sulooq ka hukum deta hai",
        "Islam commands to discriminate with non-Muslim people"),
    rule(B::S, 1, V::Simple,
        "A sentence having a single clause. Where clause is a sentence portion containing both subject and verb.",
        "Us k baad us kutia ne shower lia", "That bitch took shower after that"),
    rule(B::S, 2, V::Simple,
        "A direct speech expression.",
        "Mein usey apni kutia bulata hun", "I call him my bitch"),
    rule(B::S, 3, V::Simple,
        "Does not contain any kind of Sarcasm. Where sarcasm is a taunt in which the author implicitly says something and everyone knows they mean the opposite.",
        "Mein usy apni kutia bulata hun", "I call him my bitch"),
    rule(B::C, 1, V::Complex,
        "A sentence having more than one clauses.",
        "Wo kutia tung krti hai aur usey mernay ki zaroorat hai", "That bitch is annoying and she needs to die"),
    rule(B::C, 2, V::Complex,
        "A sentence with indirect speech, quotation or reference (including retweets and posts sharing).",
        "Usne kaha k mji us kutia se nafrat hai jo behas krti hai",
        "He said that he hates a bitch that likes to argue"),
    rule(B::C, 3, V::Complex,
        "Contains sarcasm, ridicule or mockery.",
        "Tumhara chehra gadhey se milta hai", "Your face resembles a donkey face"),
    rule(B::SH, 1, V::Hateful,
        "That shows a clear desire to ignite harm, or to encourage hatred, by targeting individuals by indirectly referring to a group on the basis of their characteristics.",
        "Jo b Mumtaz Qadri k khilaf bhonkay usey qatal ker do", "Kill anyone who barks against Mumtaz Qadri"),
    rule(B::SH, 2, V::Hateful,
        "It is a speech that sweepingly victimizes disadvantaged social groups in a way that is possibly unsafe and harmful to them.",
        "In andhon ko dhakky mar k bahir nikalo", "Push these blinds out"),
    rule(B::SH, 3, V::Hateful,
        "That shows a clear desire to be hurtful, to ignite harm, or to encourage hatred and attacks a group on the basis of attributes such as religion, race, sex, national origin, ethnic origin, disability, sexual orientation, gender originality, or politics and sometimes provokes them to take revenge.",
        "Yeh musalman panah guzeen chor hain", "These muslim refugees are thieves"),
    rule(B::SO, 1, V::Offensive,
        "It doesn't incite or inflict any direct harm to any individual person by indirectly referring to a group and doesn't target specifically on the basis of their characteristics.",
        "qanoon ka samna karo jahil patwariyo", "Face the law ignorant patwaris"),
    rule(B::SO, 2, V::Offensive,
        "It is a speech that degrades a community and results in someone getting angry, hurt, upset, insulting or rude without being harmful in actual.",
        "Afghani namak harami krtay hain", "Afghans are thankless by nature"),
    rule(B::SO, 3, V::Offensive,
        "It is a speech that often conveys the purpose of insulting groups, and can include disrespectful, hurtful and abusive language.",
        "Tamam sarkari hukmaran chor hain", "All government officials are thieves"),
    rule(B::CH, 1, V::Hateful,
        "Explicit or implicit clue in the text suggesting that the speaker or author is in a state of aggression, hostile, antipathetic etc.",
        "Maar do, Taliban ko bhi aur unke hamiyon ko b", "Kill Talibans and their supporters as well"),
    rule(B::CH, 2, V::Hateful,
        "Explicit or implicit clue in the text suggesting that the speaker’s attitude or judgment of the MTO is hateful i.e. speaker is frustrated, agitated, or very critical of the main entity.",
        "yahoodiyon ko qatal kerna sawab ka kaam hai!!", "It is an act of virtue to kill jews!!"),
    rule(B::CH, 3, V::Hateful,
        "The MTO is considered predominantly hateful.",
        "Usama Bin Laden ne 9/11 attacks ki zimmadari qabool ki",
        "Usama Bin Laden accepted the responsibility of 9/11 attacks"),
    rule(B::CO, 1, V::Offensive,
        "Explicit or implicit clue in the text suggesting that the speaker or author is in a state of anger, violent, irritated etc.",
        "aahh! Sb siyasatdan jhooty aur na-ahal hain", "aahh! All the politicians are liars and incompetent"),
    rule(B::CO, 2, V::Offensive,
        "Explicit or implicit clue in the text suggesting that the speaker’s attitude or judgment of the MTO is offensive i.e. speaker is angry, disappointed, pessimistic, expressing sarcasm about, or mocking the main entity.",
        "Musharraf k masoom logon ko qatal krny per awam mein ghussa hai",
        "People are angry on Musharraf for killing innocent people"),
    rule(B::CO, 3, V::Offensive,
        "The MTO is considered predominantly offensive.",
        "Jung k faislay ne lakhon logon ko be ghar kar diya", "The war decision made many people homeless"),
];

/// All guideline rules in block order (N, H, S, C, SH, SO, CH, CO).
pub fn rule_catalog() -> Vec<&'static GuidelineRule> {
    CATALOG.iter().collect()
}

pub fn lookup(id: &str) -> Option<&'static GuidelineRule> {
    let id: RuleId = id.parse().ok()?;
    lookup_id(id)
}

pub fn lookup_id(id: RuleId) -> Option<&'static GuidelineRule> {
    CATALOG.iter().find(|r| r.id == id)
}

/// Annotator-facing guidance shown alongside a stage's rules.
pub fn stage_guidance(stage: Stage) -> &'static str {
    match stage {
        Stage::TopLevel => {
            "Judge the sentence on its own, without surrounding tweets. If it only \
             reads as hostile through a reference to something outside the sentence, \
             mark it Neutral."
        }
        Stage::Structure => "Hostile comments only: pick Simple or Complex.",
        Stage::SimpleFine => {
            "Decide who the speech is about (an individual, a small group or a \
             community), then pick the hateful or offensive rule that applies."
        }
        Stage::ComplexFine => {
            "Judge the main target of opinion. If both hateful and offensive parts \
             are present the comment is hateful."
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    #[error("no {0:?} rule among the answers")]
    MissingStage(Stage),
    #[error("{rule} ({stage:?}) cannot follow a {after:?} answer")]
    StageOrder {
        rule: RuleId,
        stage: Stage,
        after: Stage,
    },
    #[error("{rule} is inapplicable: {reason}")]
    InapplicableRule { rule: RuleId, reason: &'static str },
    #[error("{0:?} answers disagree with each other")]
    ConflictingVerdicts(Stage),
}

/// Runs the staged procedure over the rules an annotator invoked, in the order
/// invoked. A hateful rule outranks any offensive rule.
pub fn decide(answers: &[RuleId]) -> Result<LabelPath, DecideError> {
    let mut last: Option<Stage> = None;
    for &r in answers {
        let stage = r.stage();
        let expected_next = last.map_or(0, |s| s.step() + 1);
        let current = last.map_or(0, |s| s.step());
        let ok = match last {
            None => stage == Stage::TopLevel,
            Some(_) => stage.step() == current || stage.step() == expected_next,
        };
        if !ok {
            return Err(DecideError::StageOrder {
                rule: r,
                stage,
                after: last.unwrap_or(Stage::TopLevel),
            });
        }
        last = Some(stage);
    }

    let of_stage = |pred: fn(Stage) -> bool| answers.iter().copied().filter(move |r| pred(r.stage()));

    let mut top = None;
    for r in of_stage(|s| s == Stage::TopLevel) {
        let v = if r.block == RuleBlock::N {
            TopLabel::Neutral
        } else {
            TopLabel::Hostile
        };
        if top.is_some_and(|t| t != v) {
            return Err(DecideError::ConflictingVerdicts(Stage::TopLevel));
        }
        top = Some(v);
    }
    let top = top.ok_or(DecideError::MissingStage(Stage::TopLevel))?;

    if top == TopLabel::Neutral {
        if let Some(r) = answers.iter().find(|r| r.stage() != Stage::TopLevel) {
            return Err(DecideError::InapplicableRule {
                rule: *r,
                reason: "neutral comments take no structure or fine rules",
            });
        }
        return Ok(LabelPath::neutral().with_rules(answers.to_vec()));
    }

    let mut structure = None;
    for r in of_stage(|s| s == Stage::Structure) {
        let v = if r.block == RuleBlock::S {
            Structure::Simple
        } else {
            Structure::Complex
        };
        if structure.is_some_and(|s| s != v) {
            return Err(DecideError::ConflictingVerdicts(Stage::Structure));
        }
        structure = Some(v);
    }
    let structure = structure.ok_or(DecideError::MissingStage(Stage::Structure))?;

    let fine_stage = match structure {
        Structure::Simple => Stage::SimpleFine,
        Structure::Complex => Stage::ComplexFine,
    };
    let mut fine = None;
    for &r in answers.iter().filter(|r| r.stage().step() == 2) {
        if r.stage() != fine_stage {
            return Err(DecideError::InapplicableRule {
                rule: r,
                reason: match structure {
                    Structure::Simple => "complex-comment rules do not apply to a simple comment",
                    Structure::Complex => "simple-comment rules do not apply to a complex comment",
                },
            });
        }
        let v = if matches!(r.block, RuleBlock::SH | RuleBlock::CH) {
            FineLabel::Hateful
        } else {
            FineLabel::Offensive
        };
        fine = Some(match fine {
            Some(FineLabel::Hateful) => FineLabel::Hateful,
            _ => v,
        });
    }
    let fine = fine.ok_or(DecideError::MissingStage(fine_stage))?;
    Ok(LabelPath::hostile(structure, fine).with_rules(answers.to_vec()))
}

/// Seeded uniform sample of `fraction` of the ids, returned in input order.
pub fn validation_sample(ids: &[String], fraction: f64, seed: u64) -> Vec<String> {
    let n = ((ids.len() as f64) * fraction).round() as usize;
    let n = n.min(ids.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, ids.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| ids[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub comment_id: String,
    pub path: LabelPath,
    pub at: DateTime<Utc>,
    pub amended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("comment {submitted:?} submitted out of order (expected {expected:?})")]
    OutOfOrder {
        submitted: String,
        expected: Option<String>,
    },
    #[error("comment {0:?} is not in this session's queue")]
    UnknownComment(String),
    #[error("invalid label path: {0}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub session_id: String,
    pub annotator: String,
    pub queue: Vec<String>,
    pub decisions: BTreeMap<String, LabelPath>,
    pub cursor: usize,
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Recorded,
    Amended,
}

impl AnnotationSession {
    pub fn new(session_id: impl Into<String>, annotator: impl Into<String>, queue: Vec<String>) -> Self {
        AnnotationSession {
            session_id: session_id.into(),
            annotator: annotator.into(),
            queue,
            decisions: BTreeMap::new(),
            cursor: 0,
            audit: Vec::new(),
        }
    }

    /// The comment awaiting a decision, if any.
    pub fn current(&self) -> Option<&str> {
        self.queue.get(self.cursor).map(String::as_str)
    }

    pub fn is_complete(&self) -> bool {
        self.cursor >= self.queue.len()
    }

    pub fn is_decided(&self, comment_id: &str) -> bool {
        self.decisions.contains_key(comment_id)
    }

    /// (decided, total)
    pub fn progress(&self) -> (usize, usize) {
        (self.decisions.len(), self.queue.len())
    }

    /// Records a decision for the current comment and advances the cursor. A
    /// comment that already has a decision is amended in place instead.
    pub fn submit(
        &mut self,
        comment_id: &str,
        path: LabelPath,
        at: DateTime<Utc>,
    ) -> Result<SubmitOutcome, SessionError> {
        path.validate()
            .map_err(|e| SessionError::InvalidPath(e.to_string()))?;
        let outcome = if self.decisions.contains_key(comment_id) {
            SubmitOutcome::Amended
        } else if self.current() == Some(comment_id) {
            self.cursor += 1;
            SubmitOutcome::Recorded
        } else if self.queue.iter().any(|q| q == comment_id) {
            return Err(SessionError::OutOfOrder {
                submitted: comment_id.to_string(),
                expected: self.current().map(String::from),
            });
        } else {
            return Err(SessionError::UnknownComment(comment_id.to_string()));
        };
        self.decisions.insert(comment_id.to_string(), path.clone());
        self.audit.push(AuditEntry {
            comment_id: comment_id.to_string(),
            path,
            at,
            amended: outcome == SubmitOutcome::Amended,
        });
        Ok(outcome)
    }

    /// Rebuilds a session from its event history.
    pub fn replay(events: &[SessionEvent]) -> Result<Self, EventLogError> {
        let mut iter = events.iter();
        let mut session = match iter.next() {
            Some(SessionEvent::Created {
                session_id,
                annotator,
                queue,
                ..
            }) => AnnotationSession::new(session_id.clone(), annotator.clone(), queue.clone()),
            _ => return Err(EventLogError::MissingCreate),
        };
        for (i, ev) in iter.enumerate() {
            match ev {
                SessionEvent::Submitted {
                    comment_id, path, at, ..
                } => {
                    session
                        .submit(comment_id, path.clone(), *at)
                        .map_err(|e| EventLogError::Replay { event: i + 2, source: e })?;
                }
                SessionEvent::Created { .. } => return Err(EventLogError::DuplicateCreate(i + 2)),
            }
        }
        Ok(session)
    }
}

/// One line of a session's append-only JSON-lines log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        annotator: String,
        queue: Vec<String>,
        at: DateTime<Utc>,
    },
    Submitted {
        comment_id: String,
        annotator: String,
        path: LabelPath,
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("event log does not start with a created event")]
    MissingCreate,
    #[error("event {0}: second created event")]
    DuplicateCreate(usize),
    #[error("event {event}: {source}")]
    Replay {
        event: usize,
        #[source]
        source: SessionError,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn append_event(path: &Path, event: &SessionEvent) -> Result<(), EventLogError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(event).expect("event serializes");
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>, EventLogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| EventLogError::Parse {
                line: i + 1,
                source: e,
            })?,
        );
    }
    Ok(out)
}
