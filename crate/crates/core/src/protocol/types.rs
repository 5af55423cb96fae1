use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{CryptoError, TraceLevel};
use crate::dsl::SyntaxDiagnostic;
use crate::interp::LiteralMode;
use crate::Party;

/// `(id_a, id_b)`.
pub type PairKey = (String, String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub content: String,
}

impl Record {
    pub fn new(id: impl Into<String>, content: impl Into<String>) -> Self {
        Record {
            id: id.into(),
            content: content.into(),
        }
    }
}

/// An owner's records. Ids are unique and contents ASCII.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Self {
        Dataset { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.id == id)
    }

    pub(crate) fn validate(&self, party: Party) -> Result<(), ProtocolError> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(ProtocolError::DuplicateId { party, id: r.id.clone() });
            }
            if !r.content.is_ascii() {
                return Err(ProtocolError::NonAsciiContent { party, id: r.id.clone() });
            }
        }
        Ok(())
    }
}

impl FromIterator<Record> for Dataset {
    fn from_iter<T: IntoIterator<Item = Record>>(iter: T) -> Self {
        Dataset::new(iter.into_iter().collect())
    }
}

/// How the coordinator decides whether two answers agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMode {
    /// Decrypt both answers and compare the plaintext Booleans.
    #[default]
    DecryptThenCompare,
    /// XNOR the encrypted answers and decrypt only that.
    Homomorphic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub max_rounds: u32,
    /// Records sampled from A and from B.
    pub sample_sizes: [usize; 2],
    pub security_param: u32,
    #[serde(default = "default_label_source")]
    pub label_source: Party,
    /// Master seed. Filled in at session start when absent so a saved
    /// session can regenerate its keys.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub agreement_mode: AgreementMode,
    #[serde(default)]
    pub literal_mode: LiteralMode,
    #[serde(default = "default_trace_level")]
    pub trace_level: TraceLevel,
    #[serde(default = "default_true")]
    pub parallel: bool,
    /// Keep encoded message bodies in the in-memory transcript.
    #[serde(default = "default_true")]
    pub capture_bodies: bool,
}

fn default_label_source() -> Party {
    Party::A
}

fn default_trace_level() -> TraceLevel {
    TraceLevel::Counts
}

fn default_true() -> bool {
    true
}

pub const DEFAULT_SECURITY_PARAM: u32 = 128;

impl SessionConfig {
    pub fn new(max_rounds: u32, sample_a: usize, sample_b: usize) -> Self {
        SessionConfig {
            max_rounds,
            sample_sizes: [sample_a, sample_b],
            security_param: DEFAULT_SECURITY_PARAM,
            label_source: Party::A,
            seed: None,
            agreement_mode: AgreementMode::default(),
            literal_mode: LiteralMode::default(),
            trace_level: default_trace_level(),
            parallel: true,
            capture_bodies: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub(crate) fn validate(&self) -> Result<(), ProtocolError> {
        if self.max_rounds == 0 {
            return Err(ProtocolError::InvalidConfig("max_rounds must be at least 1".into()));
        }
        if !self.label_source.is_owner() {
            return Err(ProtocolError::InvalidConfig("label_source must be A or B".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Match,
    NonMatch,
}

impl Label {
    pub fn from_answer(answer: bool) -> Self {
        if answer {
            Label::Match
        } else {
            Label::NonMatch
        }
    }

    pub fn as_digit(self) -> u8 {
        match self {
            Label::Match => 1,
            Label::NonMatch => 0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_digit())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub id_a: String,
    pub id_b: String,
    pub label: Label,
}

/// F for one round: agreement of every pair pending in that round.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgreementMap {
    pub round: u32,
    pub entries: BTreeMap<String, BTreeMap<String, bool>>,
}

impl AgreementMap {
    pub fn new(round: u32) -> Self {
        AgreementMap {
            round,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id_a: &str, id_b: &str, agree: bool) {
        self.entries.entry(id_a.to_string()).or_default().insert(id_b.to_string(), agree);
    }

    pub fn get(&self, id_a: &str, id_b: &str) -> Option<bool> {
        self.entries.get(id_a)?.get(id_b).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, bool)> {
        self.entries
            .iter()
            .flat_map(|(a, row)| row.iter().map(move |(b, v)| (a.as_str(), b.as_str(), *v)))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn agreed(&self) -> usize {
        self.iter().filter(|(_, _, v)| *v).count()
    }

    /// The same map with the roles of A and B swapped.
    pub fn transposed(&self) -> AgreementMap {
        let mut t = AgreementMap::new(self.round);
        for (a, b, v) in self.iter() {
            t.insert(b, a, v);
        }
        t
    }
}

/// G_h: pairs newly agreed in round `round`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelList {
    pub round: u32,
    pub triplets: Vec<Triplet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub triplets: Vec<Triplet>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Only the pairs labeled as matches.
    pub fn matches(&self) -> impl Iterator<Item = &Triplet> {
        self.triplets.iter().filter(|t| t.label == Label::Match)
    }

    pub fn label(&self, id_a: &str, id_b: &str) -> Option<Label> {
        self.triplets
            .iter()
            .find(|t| t.id_a == id_a && t.id_b == id_b)
            .map(|t| t.label)
    }

    /// `id_a,id_b,label` with label 1 or 0.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id_a", "id_b", "label"]).expect("in-memory write");
        for t in &self.triplets {
            w.write_record([t.id_a.as_str(), t.id_b.as_str(), &t.label.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 input")
    }

    pub fn from_csv(text: &str) -> Result<Self, ProtocolError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut triplets = Vec::new();
        for row in r.records() {
            let row = row.map_err(|e| ProtocolError::Document(e.to_string()))?;
            if row.len() != 3 {
                return Err(ProtocolError::Document(format!("expected 3 columns, found {}", row.len())));
            }
            let label = match &row[2] {
                "1" => Label::Match,
                "0" => Label::NonMatch,
                other => return Err(ProtocolError::Document(format!("bad label `{other}`"))),
            };
            triplets.push(Triplet {
                id_a: row[0].to_string(),
                id_b: row[1].to_string(),
                label,
            });
        }
        Ok(GroundTruth { triplets })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    /// Every pair agreed before the round limit.
    AllAgreed,
    /// The last allowed round finished with pairs still disagreeing.
    RoundLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Phase {
    /// Waiting for annotations of the current round.
    Annotating,
    /// End condition met; `finalize` may be called.
    Finished { reason: EndReason },
    /// Ground truth emitted.
    Finalized { reason: EndReason },
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Phase::Annotating)
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset {0} is empty")]
    EmptyDataset(Party),
    #[error("sample size for {0} must be positive")]
    EmptySample(Party),
    #[error("sample of {requested} exceeds the {available} records of {party}")]
    SampleTooLarge { party: Party, requested: usize, available: usize },
    #[error("duplicate record id `{id}` in dataset {party}")]
    DuplicateId { party: Party, id: String },
    #[error("record `{id}` of {party} is not ASCII")]
    NonAsciiContent { party: Party, id: String },
    #[error("{0} is not a data owner")]
    NotAnOwner(Party),
    #[error("session is in round {expected}, not {given}")]
    WrongRound { expected: u32, given: u32 },
    #[error("session no longer accepts annotations")]
    NotAnnotating,
    #[error("record `{id}` of {party} is not pending")]
    NotPending { party: Party, id: String },
    #[error("invalid program for record `{id}` of {party}: {}", join_diags(.diagnostics))]
    InvalidProgram {
        party: Party,
        id: String,
        diagnostics: Vec<SyntaxDiagnostic>,
    },
    #[error("missing annotations: {}", describe_missing(.0))]
    MissingAnnotations(BTreeMap<Party, Vec<String>>),
    #[error("evaluation failed at {party} for record `{record_id}` over `{foreign_id}`, line {line}: {message}")]
    Evaluation {
        party: Party,
        record_id: String,
        foreign_id: String,
        line: usize,
        message: String,
    },
    #[error("owners answered for different pair sets")]
    AnswerMismatch,
    #[error("session has not met its end condition")]
    NotFinished,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("session document: {0}")]
    Document(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_diags(d: &[SyntaxDiagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn describe_missing(m: &BTreeMap<Party, Vec<String>>) -> String {
    m.iter()
        .map(|(p, ids)| format!("{p}: {}", ids.join(", ")))
        .collect::<Vec<_>>()
        .join("; ")
}
