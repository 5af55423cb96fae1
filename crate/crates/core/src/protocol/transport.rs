//! Messages between parties, the transcript that records them and the
//! transport that carries them.

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::crypto::{CipherBool, CipherString, PublicKey};
use crate::Party;

/// An owner's record under the session key, as sent to the other owner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedRecord {
    pub id: String,
    pub content: CipherString,
}

/// One encrypted Boolean answer for the pair `(id_a, id_b)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedAnswer {
    pub id_a: String,
    pub id_b: String,
    pub answer: CipherBool,
}

/// Pairs still needing work after a round, sent by the coordinator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingNotice {
    /// The round the pairs belong to next, or the last round when `terminal`.
    pub round: u32,
    pub pairs: Vec<(String, String)>,
    /// When set, no further round follows and `pairs` are discarded.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    DatasetSize,
    SampledIds,
    PublicKey,
    EncryptedRecords,
    EncryptedAnswers,
    PendingNotice,
    PlainText,
}

#[derive(Debug, Clone)]
pub enum Payload {
    DatasetSize(usize),
    SampledIds(Vec<usize>),
    PublicKey(PublicKey),
    EncryptedRecords(Vec<EncryptedRecord>),
    EncryptedAnswers(Vec<EncryptedAnswer>),
    PendingNotice(PendingNotice),
    /// Free text. The protocol never sends it; the audit reports every one.
    PlainText(String),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::DatasetSize(_) => MessageKind::DatasetSize,
            Payload::SampledIds(_) => MessageKind::SampledIds,
            Payload::PublicKey(_) => MessageKind::PublicKey,
            Payload::EncryptedRecords(_) => MessageKind::EncryptedRecords,
            Payload::EncryptedAnswers(_) => MessageKind::EncryptedAnswers,
            Payload::PendingNotice(_) => MessageKind::PendingNotice,
            Payload::PlainText(_) => MessageKind::PlainText,
        }
    }

    pub fn is_plaintext(&self) -> bool {
        matches!(self, Payload::PlainText(_))
    }

    /// Wire form used for digests and captured bodies.
    pub fn encode(&self) -> Vec<u8> {
        let v = match self {
            Payload::DatasetSize(n) => json!({ "size": n }),
            Payload::SampledIds(ids) => json!({ "indices": ids }),
            Payload::PublicKey(pk) => json!({
                "fingerprint": pk.fingerprint().to_string(),
                "security_param": pk.security_param(),
            }),
            Payload::EncryptedRecords(r) => json!({ "records": r }),
            Payload::EncryptedAnswers(a) => json!({ "answers": a }),
            Payload::PendingNotice(n) => json!(n),
            Payload::PlainText(t) => json!({ "text": t }),
        };
        serde_json::to_vec(&v).expect("payload encodes")
    }
}

#[derive(Debug, Clone)]
pub struct Message {
    pub from: Party,
    pub to: Party,
    pub round: u32,
    pub payload: Payload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub round: u32,
    pub from: Party,
    pub to: Party,
    pub kind: MessageKind,
    /// SHA-256 of the encoded payload, hex.
    pub digest: String,
    pub size: usize,
    pub plaintext: bool,
    /// Encoded payload, kept only when body capture is on. Never persisted.
    #[serde(skip)]
    pub body: Option<Vec<u8>>,
}

/// Equality ignores the captured body.
impl PartialEq for TranscriptEntry {
    fn eq(&self, o: &Self) -> bool {
        (self.seq, self.round, self.from, self.to, self.kind, &self.digest, self.size, self.plaintext)
            == (o.seq, o.round, o.from, o.to, o.kind, &o.digest, o.size, o.plaintext)
    }
}

impl Eq for TranscriptEntry {}

/// Ordered log of every message sent in a session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
    #[serde(skip)]
    pub capture_bodies: bool,
}

impl Transcript {
    pub fn new(capture_bodies: bool) -> Self {
        Transcript {
            entries: Vec::new(),
            capture_bodies,
        }
    }

    pub fn record(&mut self, msg: &Message) -> &TranscriptEntry {
        let body = msg.payload.encode();
        let digest = hex::encode(Sha256::digest(&body));
        let entry = TranscriptEntry {
            seq: self.entries.len() as u64,
            round: msg.round,
            from: msg.from,
            to: msg.to,
            kind: msg.payload.kind(),
            digest,
            size: body.len(),
            plaintext: msg.payload.is_plaintext(),
            body: self.capture_bodies.then_some(body),
        };
        self.entries.push(entry);
        self.entries.last().expect("just pushed")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Carries a message to its recipient and returns what the recipient gets.
pub trait Transport: Send {
    fn carry(&mut self, msg: Message) -> Message;
}

/// Hands messages over unchanged within the process.
#[derive(Debug, Default, Clone, Copy)]
pub struct Loopback;

impl Transport for Loopback {
    fn carry(&mut self, msg: Message) -> Message {
        msg
    }
}

/// Loopback with an observer callback invoked on every message.
pub struct Observed<F: FnMut(&Message) + Send>(pub F);

impl<F: FnMut(&Message) + Send> Transport for Observed<F> {
    fn carry(&mut self, msg: Message) -> Message {
        (self.0)(&msg);
        msg
    }
}
