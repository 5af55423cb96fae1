//! The three-party annotation session: two data owners, A and B, and the
//! coordinator C that holds the secret key.
//!
//! Each round both owners write one program per pending record, exchange
//! their pending records encrypted, and evaluate their own programs over the
//! other side's ciphertexts. C decrypts the answers, freezes every pair on
//! which both answers are equal (a joint "no" is agreement too, labeled
//! non-match) and sends the remaining pairs back for another round.

mod audit;
mod document;
mod session;
mod transport;
mod types;

pub use audit::{audit, audit_with_sentinels, Finding, PrivacyReport, Rule};
pub use document::{SessionDocument, DOCUMENT_VERSION};
pub use session::{
    initialize, Annotation, Initialization, Progress, RecordCounts, RecordStatus, RecordView, RoundOutcome, Session,
};
pub use transport::{
    EncryptedAnswer, EncryptedRecord, Loopback, Message, MessageKind, Observed, Payload, PendingNotice, Transcript,
    TranscriptEntry, Transport,
};
pub use types::*;
