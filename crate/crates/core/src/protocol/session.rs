use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audit::{self, PrivacyReport};
use super::transport::{
    EncryptedAnswer, EncryptedRecord, Loopback, Message, PendingNotice, Payload, Transcript, Transport,
};
use super::types::*;
use crate::crypto::{
    enc_str, keygen_seeded, Backend, CipherBool, CipherString, Decryptor, Evaluator, KeyPair, OpKind, OperationTrace,
    PublicKey,
};
use crate::dsl::{self, pretty, Program, SyntaxDiagnostic};
use crate::interp::{evaluate_with, EvalOptions, FunctionRegistry};
use crate::{seed, Party};

/// Annotation source as written plus its parsed program.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub source: String,
    pub program: Program,
}

/// Output of the coordinator's initialization step.
#[derive(Debug)]
pub struct Initialization {
    /// Sorted sampled indices into A's and B's datasets.
    pub sampled: [Vec<usize>; 2],
    pub keys: KeyPair,
}

/// Samples record indices uniformly without replacement and generates the
/// session key pair, both derived from `seed`.
pub fn initialize(config: &SessionConfig, sizes: [usize; 2], seed: u64) -> Result<Initialization, ProtocolError> {
    config.validate()?;
    let mut sampled: [Vec<usize>; 2] = Default::default();
    for (i, party) in [Party::A, Party::B].into_iter().enumerate() {
        let (size, want) = (sizes[i], config.sample_sizes[i]);
        if size == 0 {
            return Err(ProtocolError::EmptyDataset(party));
        }
        if want == 0 {
            return Err(ProtocolError::EmptySample(party));
        }
        if want > size {
            return Err(ProtocolError::SampleTooLarge {
                party,
                requested: want,
                available: size,
            });
        }
        let mut rng = seed::rng_from(Some(seed::derive(seed, &format!("sample/{party}"))));
        let mut picked = index::sample(&mut rng, size, want).into_vec();
        picked.sort_unstable();
        sampled[i] = picked;
    }
    let keys = keygen_seeded(config.security_param, seed::derive(seed, "keygen"))?;
    Ok(Initialization { sampled, keys })
}

pub(super) fn slot(party: Party) -> Result<usize, ProtocolError> {
    match party {
        Party::A => Ok(0),
        Party::B => Ok(1),
        Party::C => Err(ProtocolError::NotAnOwner(party)),
    }
}

pub(super) struct Owner {
    pub(super) party: Party,
    pub(super) dataset: Dataset,
    pub(super) pk: Option<PublicKey>,
    pub(super) sampled: Vec<String>,
    pub(super) pending: BTreeSet<String>,
    /// `None` until the coordinator first names pending pairs: every pair is pending.
    pub(super) pending_pairs: Option<BTreeSet<PairKey>>,
    pub(super) discarded: BTreeSet<String>,
    pub(super) annotations: BTreeMap<u32, BTreeMap<String, Annotation>>,
}

impl Owner {
    fn new(party: Party, dataset: Dataset) -> Self {
        Owner {
            party,
            dataset,
            pk: None,
            sampled: Vec::new(),
            pending: BTreeSet::new(),
            pending_pairs: None,
            discarded: BTreeSet::new(),
            annotations: BTreeMap::new(),
        }
    }

    fn own_id<'a>(&self, pair: &'a PairKey) -> &'a str {
        if self.party == Party::A {
            &pair.0
        } else {
            &pair.1
        }
    }

    pub(super) fn apply_notice(&mut self, notice: &PendingNotice) {
        let pairs: BTreeSet<PairKey> = notice.pairs.iter().cloned().collect();
        let ids: BTreeSet<String> = pairs.iter().map(|p| self.own_id(p).to_string()).collect();
        if notice.terminal {
            self.discarded = ids;
            self.pending.clear();
        } else {
            self.pending = ids;
        }
        self.pending_pairs = Some(pairs);
    }
}

pub(super) struct Coordinator {
    pub(super) keys: KeyPair,
    pub(super) sampled: [Vec<usize>; 2],
    pub(super) pairs_total: usize,
    /// `None` before the first round: every pair is pending.
    pub(super) pending: Option<BTreeSet<PairKey>>,
    pub(super) agreed: BTreeMap<PairKey, Label>,
    pub(super) discarded: BTreeSet<PairKey>,
    pub(super) history: Vec<AgreementMap>,
    pub(super) label_lists: Vec<LabelList>,
    pub(super) ground_truth: Option<GroundTruth>,
}

/// What one call to [`Session::run_round`] produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: u32,
    pub agreement: AgreementMap,
    pub newly_agreed: Vec<Triplet>,
    pub pending: Vec<PairKey>,
    pub agreed_total: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Pending,
    Agreed,
    Discarded,
}

/// An owner's view of one of its sampled records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordView {
    pub id: String,
    pub content: String,
    pub status: RecordStatus,
    /// Source submitted for the current round, if any.
    pub program: Option<String>,
    /// Latest source from an earlier round.
    pub previous_program: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub sampled: usize,
    pub pending: usize,
    pub agreed: usize,
    pub discarded: usize,
    /// Pending records that already have a program this round.
    pub annotated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub round: u32,
    pub max_rounds: u32,
    pub phase: Phase,
    pub pairs_total: usize,
    pub pairs_agreed: usize,
    pub pairs_pending: usize,
    pub pairs_discarded: usize,
    pub records: BTreeMap<Party, RecordCounts>,
}

/// A complete three-party session run in one process.
pub struct Session {
    pub(super) config: SessionConfig,
    pub(super) round: u32,
    pub(super) phase: Phase,
    pub(super) coordinator: Coordinator,
    pub(super) owners: [Owner; 2],
    pub(super) transcript: Transcript,
    pub(super) trace: OperationTrace,
    pub(super) transport: Box<dyn Transport>,
    pub(super) registry: FunctionRegistry<Evaluator>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("config", &self.config)
            .field("round", &self.round)
            .field("phase", &self.phase)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(config: SessionConfig, a: Dataset, b: Dataset) -> Result<Self, ProtocolError> {
        Self::with_transport(config, a, b, Box::new(Loopback))
    }

    pub fn with_transport(
        mut config: SessionConfig,
        a: Dataset,
        b: Dataset,
        transport: Box<dyn Transport>,
    ) -> Result<Self, ProtocolError> {
        config.validate()?;
        a.validate(Party::A)?;
        b.validate(Party::B)?;
        let master = *config.seed.get_or_insert_with(seed::next_u64);

        let mut trace = OperationTrace::new(config.trace_level);
        let mut transcript = Transcript::new(config.capture_bodies);
        let mut transport = transport;
        let mut send = |from, to, payload| {
            let msg = Message {
                from,
                to,
                round: 0,
                payload,
            };
            transcript.record(&msg);
            transport.carry(msg).payload
        };

        let mut sizes = [0usize; 2];
        for (i, (party, ds)) in [(Party::A, &a), (Party::B, &b)].into_iter().enumerate() {
            if let Payload::DatasetSize(n) = send(party, Party::C, Payload::DatasetSize(ds.len())) {
                sizes[i] = n;
            }
        }
        let init = initialize(&config, sizes, master)?;
        trace.record(Party::C, OpKind::KeyGen, &[]);

        let mut owners = [Owner::new(Party::A, a), Owner::new(Party::B, b)];
        for owner in owners.iter_mut() {
            let i = slot(owner.party)?;
            if let Payload::SampledIds(idx) = send(Party::C, owner.party, Payload::SampledIds(init.sampled[i].clone())) {
                owner.sampled = idx.iter().map(|&k| owner.dataset.records[k].id.clone()).collect();
                owner.pending = owner.sampled.iter().cloned().collect();
            }
            if let Payload::PublicKey(pk) = send(Party::C, owner.party, Payload::PublicKey(init.keys.pk.clone())) {
                owner.pk = Some(pk);
            }
        }

        let pairs_total = init.sampled[0].len() * init.sampled[1].len();
        Ok(Session {
            config,
            round: 1,
            phase: Phase::Annotating,
            coordinator: Coordinator {
                keys: init.keys,
                sampled: init.sampled,
                pairs_total,
                pending: None,
                agreed: BTreeMap::new(),
                discarded: BTreeSet::new(),
                history: Vec::new(),
                label_lists: Vec::new(),
                ground_truth: None,
            },
            owners,
            transcript,
            trace,
            transport,
            registry: FunctionRegistry::builtins(),
        })
    }

    fn send(&mut self, from: Party, to: Party, payload: Payload) -> Payload {
        let msg = Message {
            from,
            to,
            round: self.round,
            payload,
        };
        self.transcript.record(&msg);
        self.transport.carry(msg).payload
    }

    /// Sends an arbitrary message outside the protocol flow. Exists for
    /// fault-injection tests of the audit.
    pub fn send_raw(&mut self, from: Party, to: Party, payload: Payload) {
        self.send(from, to, payload);
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.expect("seed is fixed at session start")
    }

    /// The round currently collecting annotations, or the last round run once terminal.
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn trace(&self) -> &OperationTrace {
        &self.trace
    }

    pub fn registry(&self) -> &FunctionRegistry<Evaluator> {
        &self.registry
    }

    pub fn key_fingerprint(&self) -> String {
        self.coordinator.keys.pk.fingerprint().to_string()
    }

    pub fn agreement_history(&self) -> &[AgreementMap] {
        &self.coordinator.history
    }

    pub fn label_lists(&self) -> &[LabelList] {
        &self.coordinator.label_lists
    }

    pub fn agreed_pairs(&self) -> &BTreeMap<PairKey, Label> {
        &self.coordinator.agreed
    }

    /// Pairs still awaiting agreement; `None` before the first round, empty once
    /// the session has ended.
    pub fn pending_pairs(&self) -> Option<&BTreeSet<PairKey>> {
        self.coordinator.pending.as_ref()
    }

    pub fn discarded_pairs(&self) -> &BTreeSet<PairKey> {
        &self.coordinator.discarded
    }

    pub fn pairs_total(&self) -> usize {
        self.coordinator.pairs_total
    }

    pub fn sampled_indices(&self, party: Party) -> Result<&[usize], ProtocolError> {
        Ok(&self.coordinator.sampled[slot(party)?])
    }

    pub fn sampled_ids(&self, party: Party) -> Result<&[String], ProtocolError> {
        Ok(&self.owners[slot(party)?].sampled)
    }

    pub fn dataset(&self, party: Party) -> Result<&Dataset, ProtocolError> {
        Ok(&self.owners[slot(party)?].dataset)
    }

    /// Record ids of `party` that need a program this round.
    pub fn pending_records(&self, party: Party) -> Result<&BTreeSet<String>, ProtocolError> {
        Ok(&self.owners[slot(party)?].pending)
    }

    pub fn annotation(&self, party: Party, round: u32, id: &str) -> Option<&Annotation> {
        self.owners[slot(party).ok()?].annotations.get(&round)?.get(id)
    }

    pub fn annotations(&self, party: Party, round: u32) -> Option<&BTreeMap<String, Annotation>> {
        self.owners[slot(party).ok()?].annotations.get(&round)
    }

    /// Latest annotation for `id` from a round before the current one.
    pub fn previous_annotation(&self, party: Party, id: &str) -> Option<&Annotation> {
        let owner = &self.owners[slot(party).ok()?];
        owner
            .annotations
            .range(..self.round)
            .rev()
            .find_map(|(_, m)| m.get(id))
    }

    /// Latest annotation for `id` from any round.
    pub fn latest_annotation(&self, party: Party, id: &str) -> Option<&Annotation> {
        let owner = &self.owners[slot(party).ok()?];
        owner.annotations.values().rev().find_map(|m| m.get(id))
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.coordinator.ground_truth.as_ref()
    }

    fn record_status(&self, owner: &Owner, id: &str) -> RecordStatus {
        if owner.pending.contains(id) {
            RecordStatus::Pending
        } else if owner.discarded.contains(id) {
            RecordStatus::Discarded
        } else {
            RecordStatus::Agreed
        }
    }

    /// The sampled records of `party` with their status and programs.
    pub fn records(&self, party: Party) -> Result<Vec<RecordView>, ProtocolError> {
        let owner = &self.owners[slot(party)?];
        Ok(owner
            .sampled
            .iter()
            .map(|id| {
                let content = owner.dataset.get(id).map(|r| r.content.clone()).unwrap_or_default();
                RecordView {
                    id: id.clone(),
                    content,
                    status: self.record_status(owner, id),
                    program: self.annotation(party, self.round, id).map(|a| a.source.clone()),
                    previous_program: self.previous_annotation(party, id).map(|a| a.source.clone()),
                }
            })
            .collect())
    }

    pub fn progress(&self) -> Progress {
        let c = &self.coordinator;
        let pairs_pending = match &c.pending {
            None => c.pairs_total,
            Some(p) => p.len(),
        };
        let mut records = BTreeMap::new();
        for owner in &self.owners {
            let current = owner.annotations.get(&self.round);
            let mut counts = RecordCounts {
                sampled: owner.sampled.len(),
                ..Default::default()
            };
            for id in &owner.sampled {
                match self.record_status(owner, id) {
                    RecordStatus::Pending => {
                        counts.pending += 1;
                        if current.is_some_and(|m| m.contains_key(id)) {
                            counts.annotated += 1;
                        }
                    }
                    RecordStatus::Agreed => counts.agreed += 1,
                    RecordStatus::Discarded => counts.discarded += 1,
                }
            }
            records.insert(owner.party, counts);
        }
        Progress {
            round: self.round,
            max_rounds: self.config.max_rounds,
            phase: self.phase,
            pairs_total: c.pairs_total,
            pairs_agreed: c.agreed.len(),
            pairs_pending,
            pairs_discarded: c.discarded.len(),
            records,
        }
    }

    fn check_can_annotate(&self, party: Party, round: u32, id: &str) -> Result<usize, ProtocolError> {
        let i = slot(party)?;
        if self.phase.is_terminal() {
            return Err(ProtocolError::NotAnnotating);
        }
        if round != self.round {
            return Err(ProtocolError::WrongRound {
                expected: self.round,
                given: round,
            });
        }
        if !self.owners[i].pending.contains(id) {
            return Err(ProtocolError::NotPending {
                party,
                id: id.to_string(),
            });
        }
        Ok(i)
    }

    /// Static checks a stored program must pass: the language checker and
    /// the function registry.
    pub fn validate_program(&self, program: &Program) -> Vec<SyntaxDiagnostic> {
        let mut errors: Vec<_> = dsl::check(program).into_iter().filter(SyntaxDiagnostic::is_error).collect();
        errors.extend(self.registry.check_program(program));
        errors
    }

    /// Parses `source` and runs every static check on it.
    pub fn compile(&self, source: &str) -> Result<Program, Vec<SyntaxDiagnostic>> {
        let program = dsl::parse(source)?;
        let errors = self.validate_program(&program);
        if errors.is_empty() {
            Ok(program)
        } else {
            Err(errors)
        }
    }

    fn prepare(&self, party: Party, round: u32, id: &str, source: Option<&str>, program: Option<Program>) -> Result<Annotation, ProtocolError> {
        self.check_can_annotate(party, round, id)?;
        let invalid = |diagnostics| ProtocolError::InvalidProgram {
            party,
            id: id.to_string(),
            diagnostics,
        };
        let (source, program) = match (source, program) {
            (Some(src), _) => (src.to_string(), self.compile(src).map_err(invalid)?),
            (None, Some(p)) => {
                let errors = self.validate_program(&p);
                if !errors.is_empty() {
                    return Err(invalid(errors));
                }
                (pretty(&p), p)
            }
            (None, None) => unreachable!("caller supplies source or program"),
        };
        Ok(Annotation { source, program })
    }

    fn store_batch(&mut self, party: Party, round: u32, batch: Vec<(String, Annotation)>) -> Result<(), ProtocolError> {
        let i = slot(party)?;
        let existing = self.owners[i].annotations.get(&round);
        let supplied: BTreeSet<&str> = batch.iter().map(|(id, _)| id.as_str()).collect();
        let missing: Vec<String> = self.owners[i]
            .pending
            .iter()
            .filter(|id| !supplied.contains(id.as_str()) && !existing.is_some_and(|m| m.contains_key(*id)))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(ProtocolError::MissingAnnotations(BTreeMap::from([(party, missing)])));
        }
        let slot_map = self.owners[i].annotations.entry(round).or_default();
        for (id, ann) in batch {
            slot_map.insert(id, ann);
        }
        Ok(())
    }

    /// Stores programs for round `round`. Together with programs already
    /// stored this round they must cover every pending record of `party`.
    /// Nothing is stored on error.
    pub fn submit_annotations(&mut self, party: Party, round: u32, programs: BTreeMap<String, Program>) -> Result<(), ProtocolError> {
        let batch = programs
            .into_iter()
            .map(|(id, p)| self.prepare(party, round, &id, None, Some(p)).map(|a| (id, a)))
            .collect::<Result<Vec<_>, _>>()?;
        self.store_batch(party, round, batch)
    }

    /// [`Session::submit_annotations`] for annotation sources.
    pub fn submit_sources(&mut self, party: Party, round: u32, sources: BTreeMap<String, String>) -> Result<(), ProtocolError> {
        let batch = sources
            .iter()
            .map(|(id, src)| self.prepare(party, round, id, Some(src), None).map(|a| (id.clone(), a)))
            .collect::<Result<Vec<_>, _>>()?;
        self.store_batch(party, round, batch)
    }

    /// Stores one annotation source, replacing any earlier one for the same
    /// record and round. Returns the checker's warnings.
    pub fn put_annotation(&mut self, party: Party, round: u32, id: &str, source: &str) -> Result<Vec<SyntaxDiagnostic>, ProtocolError> {
        let ann = self.prepare(party, round, id, Some(source), None)?;
        let warnings = dsl::check(&ann.program).into_iter().filter(|d| !d.is_error()).collect();
        let i = slot(party)?;
        self.owners[i].annotations.entry(round).or_default().insert(id.to_string(), ann);
        Ok(warnings)
    }

    /// Pending records of each owner still lacking a program this round.
    pub fn missing_annotations(&self) -> BTreeMap<Party, Vec<String>> {
        let mut out = BTreeMap::new();
        for owner in &self.owners {
            let current = owner.annotations.get(&self.round);
            let missing: Vec<String> = owner
                .pending
                .iter()
                .filter(|id| !current.is_some_and(|m| m.contains_key(*id)))
                .cloned()
                .collect();
            if !missing.is_empty() {
                out.insert(owner.party, missing);
            }
        }
        out
    }

    fn encrypt_pending(&self, i: usize) -> Result<Vec<EncryptedRecord>, ProtocolError> {
        let owner = &self.owners[i];
        let pk = owner.pk.as_ref().expect("owners hold pk after initialization");
        owner
            .pending
            .iter()
            .map(|id| {
                let r = owner.dataset.get(id).expect("sampled ids come from the dataset");
                Ok(EncryptedRecord {
                    id: id.clone(),
                    content: enc_str(&r.content, pk)?,
                })
            })
            .collect()
    }

    fn evaluate_owner(&self, i: usize, foreign: &[EncryptedRecord]) -> Result<(Vec<EncryptedAnswer>, OperationTrace), ProtocolError> {
        let owner = &self.owners[i];
        let party = owner.party;
        let foreign: BTreeMap<&str, &CipherString> = foreign.iter().map(|r| (r.id.as_str(), &r.content)).collect();
        let pairs: Vec<PairKey> = match &owner.pending_pairs {
            Some(p) => p.iter().cloned().collect(),
            None => owner
                .pending
                .iter()
                .flat_map(|own| {
                    foreign.keys().map(move |f| {
                        if party == Party::A {
                            (own.clone(), f.to_string())
                        } else {
                            (f.to_string(), own.clone())
                        }
                    })
                })
                .collect(),
        };
        let pk = owner.pk.as_ref().expect("owners hold pk after initialization");
        let programs = owner.annotations.get(&self.round);
        let registry = &self.registry;
        let options = EvalOptions {
            literal_mode: self.config.literal_mode,
        };
        let level = self.config.trace_level;
        let master = self.seed();
        let round = self.round;

        let eval_one = |pair: &PairKey| -> Result<(EncryptedAnswer, OperationTrace), ProtocolError> {
            let (own, other) = if party == Party::A { (&pair.0, &pair.1) } else { (&pair.1, &pair.0) };
            let program = &programs
                .and_then(|m| m.get(own))
                .expect("completeness is checked before evaluation")
                .program;
            let record = foreign.get(other.as_str()).ok_or(ProtocolError::AnswerMismatch)?;
            let nonce_seed = seed::derive(master, &format!("eval/{party}/{round}/{own}/{other}"));
            let mut ev = Evaluator::with_nonce_seed(pk, party, nonce_seed).with_trace(level);
            let answer = evaluate_with(program, record.chars().to_vec(), &mut ev, registry, options).map_err(|e| {
                ProtocolError::Evaluation {
                    party,
                    record_id: own.clone(),
                    foreign_id: other.clone(),
                    line: e.line,
                    message: e.kind.to_string(),
                }
            })?;
            Ok((
                EncryptedAnswer {
                    id_a: pair.0.clone(),
                    id_b: pair.1.clone(),
                    answer,
                },
                ev.take_trace(),
            ))
        };

        let results: Vec<_> = if self.config.parallel {
            pairs.par_iter().map(eval_one).collect::<Result<_, _>>()?
        } else {
            pairs.iter().map(eval_one).collect::<Result<_, _>>()?
        };
        let mut trace = OperationTrace::new(level);
        let mut answers = Vec::with_capacity(results.len());
        for (a, t) in results {
            answers.push(a);
            trace.merge(t);
        }
        Ok((answers, trace))
    }

    /// Runs the current round: record exchange, blind evaluation on both
    /// sides and the coordinator's agreement check.
    pub fn run_round(&mut self) -> Result<RoundOutcome, ProtocolError> {
        if self.phase.is_terminal() {
            return Err(ProtocolError::NotAnnotating);
        }
        let missing = self.missing_annotations();
        if !missing.is_empty() {
            return Err(ProtocolError::MissingAnnotations(missing));
        }

        // Each owner sends its pending records, encrypted, to the other.
        let mut inbox: [Vec<EncryptedRecord>; 2] = Default::default();
        for (i, from, to) in [(0, Party::A, Party::B), (1, Party::B, Party::A)] {
            let records = self.encrypt_pending(i)?;
            if let Payload::EncryptedRecords(r) = self.send(from, to, Payload::EncryptedRecords(records)) {
                inbox[1 - i] = r;
            }
        }

        let (answers_a, trace_a) = self.evaluate_owner(0, &inbox[0])?;
        let (answers_b, trace_b) = self.evaluate_owner(1, &inbox[1])?;

        let mut received: [BTreeMap<PairKey, CipherBool>; 2] = Default::default();
        for (i, party, answers) in [(0, Party::A, answers_a), (1, Party::B, answers_b)] {
            if let Payload::EncryptedAnswers(a) = self.send(party, Party::C, Payload::EncryptedAnswers(answers)) {
                received[i] = a.into_iter().map(|x| ((x.id_a, x.id_b), x.answer)).collect();
            }
        }
        let decided = self.coordinator_decide(&received)?;

        self.trace.merge(trace_a);
        self.trace.merge(trace_b);
        self.trace.merge(decided.trace);
        self.commit_round(decided.agreement, decided.labels)
    }

    fn coordinator_decide(&self, received: &[BTreeMap<PairKey, CipherBool>; 2]) -> Result<Decision, ProtocolError> {
        let c = &self.coordinator;
        let keys_a: BTreeSet<&PairKey> = received[0].keys().collect();
        let keys_b: BTreeSet<&PairKey> = received[1].keys().collect();
        if keys_a != keys_b {
            return Err(ProtocolError::AnswerMismatch);
        }
        match &c.pending {
            None if keys_a.len() != c.pairs_total => return Err(ProtocolError::AnswerMismatch),
            Some(p) if p.iter().collect::<BTreeSet<_>>() != keys_a => return Err(ProtocolError::AnswerMismatch),
            _ => {}
        }

        let level = self.config.trace_level;
        let mut dec = Decryptor::new(&c.keys.sk, Party::C, level);
        let mut xnor_ev = Evaluator::with_nonce_seed(&c.keys.pk, Party::C, seed::derive(self.seed(), &format!("agree/{}", self.round)))
            .with_trace(level);
        let source = slot(self.config.label_source)?;
        let mut agreement = AgreementMap::new(self.round);
        let mut labels = Vec::new();
        for (key, a) in &received[0] {
            let b = &received[1][key];
            let answers = [a, b];
            let (agree, label) = match self.config.agreement_mode {
                AgreementMode::DecryptThenCompare => {
                    let va = dec.dec_bool(a)?;
                    let vb = dec.dec_bool(b)?;
                    let v = [va, vb][source];
                    (va == vb, Label::from_answer(v))
                }
                AgreementMode::Homomorphic => {
                    let same = xnor_ev.xnor(a, b)?;
                    if dec.dec_bool(&same)? {
                        (true, Label::from_answer(dec.dec_bool(answers[source])?))
                    } else {
                        (false, Label::NonMatch)
                    }
                }
            };
            agreement.insert(&key.0, &key.1, agree);
            if agree {
                labels.push(Triplet {
                    id_a: key.0.clone(),
                    id_b: key.1.clone(),
                    label,
                });
            }
        }
        let mut trace = dec.take_trace();
        trace.merge(xnor_ev.take_trace());
        Ok(Decision {
            agreement,
            labels,
            trace,
        })
    }

    fn commit_round(&mut self, agreement: AgreementMap, labels: Vec<Triplet>) -> Result<RoundOutcome, ProtocolError> {
        let round = self.round;
        let pending: BTreeSet<PairKey> = agreement
            .iter()
            .filter(|(_, _, v)| !v)
            .map(|(a, b, _)| (a.to_string(), b.to_string()))
            .collect();
        let c = &mut self.coordinator;
        for t in &labels {
            c.agreed.insert((t.id_a.clone(), t.id_b.clone()), t.label);
        }
        c.history.push(agreement.clone());
        c.label_lists.push(LabelList {
            round,
            triplets: labels.clone(),
        });
        c.pending = Some(pending.clone());

        let terminal = if pending.is_empty() {
            self.phase = Phase::Finished {
                reason: EndReason::AllAgreed,
            };
            true
        } else if round >= self.config.max_rounds {
            self.coordinator.discarded = pending.clone();
            self.coordinator.pending = Some(BTreeSet::new());
            self.phase = Phase::Finished {
                reason: EndReason::RoundLimit,
            };
            true
        } else {
            false
        };

        let notice = PendingNotice {
            round: if terminal { round } else { round + 1 },
            pairs: pending.iter().cloned().collect(),
            terminal,
        };
        for party in [Party::A, Party::B] {
            if let Payload::PendingNotice(n) = self.send(Party::C, party, Payload::PendingNotice(notice.clone())) {
                self.owners[slot(party)?].apply_notice(&n);
            }
        }
        if !terminal {
            self.round += 1;
        }
        Ok(RoundOutcome {
            round,
            agreement,
            newly_agreed: labels,
            pending: pending.into_iter().collect(),
            agreed_total: self.coordinator.agreed.len(),
            phase: self.phase,
        })
    }

    /// Emits G once the end condition is met: every pair agreed at the
    /// round in which it first agreed, sorted by pair. Idempotent.
    pub fn finalize(&mut self) -> Result<GroundTruth, ProtocolError> {
        match self.phase {
            Phase::Annotating => Err(ProtocolError::NotFinished),
            Phase::Finalized { .. } => Ok(self.coordinator.ground_truth.clone().expect("stored when finalized")),
            Phase::Finished { reason } => {
                let mut triplets: Vec<Triplet> = self
                    .coordinator
                    .label_lists
                    .iter()
                    .flat_map(|l| l.triplets.iter().cloned())
                    .collect();
                triplets.sort();
                let g = GroundTruth { triplets };
                self.coordinator.ground_truth = Some(g.clone());
                self.phase = Phase::Finalized { reason };
                Ok(g)
            }
        }
    }

    /// Privacy audit over this session's transcript and operation trace.
    pub fn audit(&self) -> PrivacyReport {
        audit::audit(&self.transcript, &self.trace)
    }
}

struct Decision {
    agreement: AgreementMap,
    labels: Vec<Triplet>,
    trace: OperationTrace,
}
