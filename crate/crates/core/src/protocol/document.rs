//! Versioned JSON document holding everything needed to resume a session.
//! Keys are not stored: they are regenerated from the seed in the config.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::session::{Annotation, Session};
use super::transport::{PendingNotice, Transcript, TranscriptEntry, Transport};
use super::types::*;
use crate::crypto::OperationTrace;
use crate::Party;

pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub version: u32,
    pub config: SessionConfig,
    pub dataset_a: Dataset,
    pub dataset_b: Dataset,
    pub round: u32,
    pub phase: Phase,
    pub sampled_a: Vec<String>,
    pub sampled_b: Vec<String>,
    pub key_fingerprint: String,
    /// party -> round -> record id -> annotation source.
    pub programs: BTreeMap<Party, BTreeMap<u32, BTreeMap<String, String>>>,
    pub agreement_history: Vec<AgreementMap>,
    pub label_lists: Vec<LabelList>,
    #[serde(default)]
    pub ground_truth: Option<GroundTruth>,
    pub transcript: Vec<TranscriptEntry>,
    pub trace: OperationTrace,
}

impl SessionDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let doc: SessionDocument = serde_json::from_str(text).map_err(|e| ProtocolError::Document(e.to_string()))?;
        if doc.version != DOCUMENT_VERSION {
            return Err(ProtocolError::Document(format!("unsupported version {}", doc.version)));
        }
        Ok(doc)
    }
}

impl Session {
    pub fn to_document(&self) -> SessionDocument {
        let mut programs = BTreeMap::new();
        for owner in &self.owners {
            let rounds = owner
                .annotations
                .iter()
                .map(|(r, m)| (*r, m.iter().map(|(id, a)| (id.clone(), a.source.clone())).collect()))
                .collect();
            programs.insert(owner.party, rounds);
        }
        SessionDocument {
            version: DOCUMENT_VERSION,
            config: self.config.clone(),
            dataset_a: self.owners[0].dataset.clone(),
            dataset_b: self.owners[1].dataset.clone(),
            round: self.round,
            phase: self.phase,
            sampled_a: self.owners[0].sampled.clone(),
            sampled_b: self.owners[1].sampled.clone(),
            key_fingerprint: self.key_fingerprint(),
            programs,
            agreement_history: self.coordinator.history.clone(),
            label_lists: self.coordinator.label_lists.clone(),
            ground_truth: self.coordinator.ground_truth.clone(),
            transcript: self.transcript.entries.clone(),
            trace: self.trace.clone(),
        }
    }

    pub fn from_document(doc: SessionDocument) -> Result<Self, ProtocolError> {
        Self::from_document_with_transport(doc, Box::new(super::transport::Loopback))
    }

    pub fn from_document_with_transport(doc: SessionDocument, transport: Box<dyn Transport>) -> Result<Self, ProtocolError> {
        if doc.config.seed.is_none() {
            return Err(ProtocolError::Document("config has no seed".into()));
        }
        let mut s = Session::with_transport(doc.config.clone(), doc.dataset_a, doc.dataset_b, transport)?;
        let mismatch = |what: &str| ProtocolError::Document(format!("{what} does not match the regenerated session"));
        if s.owners[0].sampled != doc.sampled_a || s.owners[1].sampled != doc.sampled_b {
            return Err(mismatch("sample"));
        }
        if s.key_fingerprint() != doc.key_fingerprint {
            return Err(mismatch("key fingerprint"));
        }

        for (party, rounds) in doc.programs {
            let i = super::session::slot(party)?;
            for (round, m) in rounds {
                for (id, source) in m {
                    let program = s.compile(&source).map_err(|diagnostics| ProtocolError::InvalidProgram {
                        party,
                        id: id.clone(),
                        diagnostics,
                    })?;
                    s.owners[i]
                        .annotations
                        .entry(round)
                        .or_default()
                        .insert(id, Annotation { source, program });
                }
            }
        }

        let c = &mut s.coordinator;
        for list in &doc.label_lists {
            for t in &list.triplets {
                c.agreed.insert((t.id_a.clone(), t.id_b.clone()), t.label);
            }
        }
        if let Some(last) = doc.agreement_history.last() {
            let pending: Vec<PairKey> = last
                .iter()
                .filter(|(_, _, v)| !v)
                .map(|(a, b, _)| (a.to_string(), b.to_string()))
                .collect();
            let terminal = doc.phase.is_terminal();
            if terminal {
                c.discarded = pending.iter().cloned().collect();
                c.pending = Some(BTreeSet::new());
            } else {
                c.pending = Some(pending.iter().cloned().collect());
            }
            let notice = PendingNotice {
                round: doc.round,
                pairs: pending,
                terminal,
            };
            for owner in s.owners.iter_mut() {
                owner.apply_notice(&notice);
            }
        }
        c.history = doc.agreement_history;
        c.label_lists = doc.label_lists;
        c.ground_truth = doc.ground_truth;
        s.round = doc.round;
        s.phase = doc.phase;
        s.transcript = Transcript {
            entries: doc.transcript,
            capture_bodies: s.config.capture_bodies,
        };
        s.trace = doc.trace;
        Ok(s)
    }

    /// Writes the session document atomically: a temporary file in the same
    /// directory is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<(), ProtocolError> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("session.json");
        let tmp = dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, self.to_document().to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProtocolError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_document(SessionDocument::from_json(&text)?)
    }
}
