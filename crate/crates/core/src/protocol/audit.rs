//! Privacy checks over a transcript and an operation trace.

use serde::{Deserialize, Serialize};

use super::transport::{MessageKind, Transcript};
use crate::crypto::{OpKind, OperationTrace};
use crate::Party;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// A message carried plaintext or leaked a sentinel.
    PlaintextBoundary,
    /// Secret-key material was used outside the coordinator.
    SecretKeyUsage,
    /// A data owner decrypted something.
    OwnerDecryption,
    /// A message kind not allowed on its channel.
    Schema,
    /// The trace needed for the key checks is not available.
    TraceUnavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: Rule,
    /// Transcript sequence number, when the finding is about a message.
    pub seq: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub messages: usize,
    pub findings: Vec<Finding>,
}

impl PrivacyReport {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }

    fn holds(&self, rule: Rule) -> bool {
        !self.findings.iter().any(|f| f.rule == rule)
    }

    pub fn plaintext_boundary(&self) -> bool {
        self.holds(Rule::PlaintextBoundary)
    }

    pub fn secret_key_only_at_coordinator(&self) -> bool {
        self.holds(Rule::SecretKeyUsage) && self.holds(Rule::TraceUnavailable)
    }

    pub fn no_owner_decryption(&self) -> bool {
        self.holds(Rule::OwnerDecryption) && self.holds(Rule::TraceUnavailable)
    }

    pub fn schema(&self) -> bool {
        self.holds(Rule::Schema)
    }
}

fn allowed(from: Party, to: Party, kind: MessageKind) -> bool {
    use MessageKind::*;
    match (from, to) {
        (Party::A, Party::B) | (Party::B, Party::A) => kind == EncryptedRecords,
        (Party::A | Party::B, Party::C) => matches!(kind, DatasetSize | EncryptedAnswers),
        (Party::C, Party::A | Party::B) => matches!(kind, SampledIds | PublicKey | PendingNotice),
        _ => false,
    }
}

/// Checks that no plaintext crosses a party boundary, that every channel
/// carries only its expected message kinds, that key generation and
/// decryption happen only at the coordinator, and that owners never decrypt.
pub fn audit(transcript: &Transcript, trace: &OperationTrace) -> PrivacyReport {
    let mut findings = Vec::new();
    for e in &transcript.entries {
        if e.plaintext {
            findings.push(Finding {
                rule: Rule::PlaintextBoundary,
                seq: Some(e.seq),
                detail: format!("{} -> {} sent a plaintext message", e.from, e.to),
            });
        }
        if !allowed(e.from, e.to, e.kind) {
            findings.push(Finding {
                rule: Rule::Schema,
                seq: Some(e.seq),
                detail: format!("{:?} is not allowed from {} to {}", e.kind, e.from, e.to),
            });
        }
    }
    if !trace.enabled() {
        findings.push(Finding {
            rule: Rule::TraceUnavailable,
            seq: None,
            detail: "operation tracing is off".into(),
        });
    } else {
        for owner in [Party::A, Party::B] {
            let keygen = trace.count(owner, OpKind::KeyGen);
            let dec = trace.count(owner, OpKind::Dec);
            if keygen + dec > 0 {
                findings.push(Finding {
                    rule: Rule::SecretKeyUsage,
                    seq: None,
                    detail: format!("{owner} ran {keygen} keygen and {dec} dec operations"),
                });
            }
            if dec > 0 {
                findings.push(Finding {
                    rule: Rule::OwnerDecryption,
                    seq: None,
                    detail: format!("{owner} decrypted {dec} values"),
                });
            }
        }
    }
    PrivacyReport {
        messages: transcript.len(),
        findings,
    }
}

/// [`audit`] plus a scan of every captured message body for the given
/// sentinel strings. Messages without a captured body are reported.
pub fn audit_with_sentinels(transcript: &Transcript, trace: &OperationTrace, sentinels: &[&str]) -> PrivacyReport {
    let mut report = audit(transcript, trace);
    for e in &transcript.entries {
        let Some(body) = &e.body else {
            report.findings.push(Finding {
                rule: Rule::TraceUnavailable,
                seq: Some(e.seq),
                detail: "message body was not captured".into(),
            });
            continue;
        };
        for s in sentinels {
            if !s.is_empty() && contains(body, s.as_bytes()) {
                report.findings.push(Finding {
                    rule: Rule::PlaintextBoundary,
                    seq: Some(e.seq),
                    detail: format!("sentinel `{s}` found in {} -> {} message", e.from, e.to),
                });
            }
        }
    }
    report
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}
