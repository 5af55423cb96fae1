use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ingest::BenchmarkDataset;
use super::metrics::{score, token_usage_report, Scores, TokenUsage};
use super::oracle::{ScriptedOracle, Strategy};
use super::sample::{sample_self_contained, GoldStandard};
use super::BenchError;
use crate::crypto::TraceLevel;
use crate::protocol::{
    Dataset, EndReason, GroundTruth, Phase, RoundOutcome, Session, SessionConfig, DEFAULT_SECURITY_PARAM,
};
use crate::Party;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub matches: usize,
    pub rounds: u32,
    pub seed: u64,
    pub security_param: u32,
    pub label_source: Party,
    pub strategy_a: Strategy,
    pub strategy_b: Strategy,
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            matches: 50,
            rounds: 3,
            seed: 0,
            security_param: DEFAULT_SECURITY_PARAM,
            label_source: Party::A,
            strategy_a: Strategy::RelaxOnDisagreement,
            strategy_b: Strategy::RelaxOnDisagreement,
            parallel: true,
        }
    }
}

/// Metrics of the labels accumulated through one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub agreed_total: usize,
    pub newly_agreed: usize,
    pub pending_pairs: usize,
    /// Records each owner annotated this round.
    pub workload_a: usize,
    pub workload_b: usize,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset_a: String,
    pub dataset_b: String,
    pub records_a: usize,
    pub records_b: usize,
    pub pairs_total: usize,
    pub gold_matches: usize,
    pub scores: Scores,
    pub rounds: Vec<RoundMetrics>,
    pub end_reason: Option<EndReason>,
    pub token_histogram: Vec<TokenUsage>,
    pub privacy_audit_passed: bool,
    pub elapsed_seconds: f64,
    pub config: BenchConfig,
}

impl MetricsReport {
    pub fn precision(&self) -> Option<f64> {
        self.scores.precision
    }

    pub fn recall(&self) -> Option<f64> {
        self.scores.recall
    }

    pub fn f_measure(&self) -> Option<f64> {
        self.scores.f_measure
    }

    /// Per-round series as CSV.
    pub fn rounds_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = String::from("round,agreed_total,newly_agreed,pending_pairs,workload_a,workload_b,precision,recall,f_measure\n");
        for r in &self.rounds {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.round,
                r.agreed_total,
                r.newly_agreed,
                r.pending_pairs,
                r.workload_a,
                r.workload_b,
                opt(r.scores.precision),
                opt(r.scores.recall),
                opt(r.scores.f_measure)
            ));
        }
        out
    }

    /// Token histogram as CSV.
    pub fn tokens_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["token", "corpus", "is_in"]).expect("in-memory write");
        for t in &self.token_histogram {
            w.write_record([t.token.clone(), t.corpus.to_string(), t.is_in.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii tokens")
    }
}

/// Runs the session to its end with one scripted oracle per owner.
pub fn drive(session: &mut Session, oracles: [&ScriptedOracle; 2]) -> Result<Vec<RoundOutcome>, BenchError> {
    let mut outcomes = Vec::new();
    while session.phase() == Phase::Annotating {
        let round = session.round();
        for (party, oracle) in [(Party::A, oracles[0]), (Party::B, oracles[1])] {
            let mut sources = BTreeMap::new();
            for id in session.pending_records(party)? {
                let record = session.dataset(party)?.get(id).expect("pending ids are sampled records");
                let previous = session.previous_annotation(party, id).map(|a| &a.program);
                sources.insert(id.clone(), oracle.annotate(round, record, previous)?);
            }
            session.submit_sources(party, round, sources)?;
        }
        outcomes.push(session.run_round()?);
    }
    Ok(outcomes)
}

fn ground_truth_through(session: &Session, round: u32) -> GroundTruth {
    GroundTruth {
        triplets: session
            .label_lists()
            .iter()
            .filter(|l| l.round <= round)
            .flat_map(|l| l.triplets.iter().cloned())
            .collect(),
    }
}

/// Samples a self-contained subset, runs a full session over it with
/// scripted oracles and scores the result against the gold subset.
pub fn run_benchmark(
    a: &BenchmarkDataset,
    b: &BenchmarkDataset,
    gold: &GoldStandard,
    config: &BenchConfig,
) -> Result<MetricsReport, BenchError> {
    let started = Instant::now();
    let sample = sample_self_contained(a, b, gold, config.matches, config.seed)?;
    let mut cfg = SessionConfig::new(config.rounds, sample.a.len(), sample.b.len()).with_seed(config.seed);
    cfg.security_param = config.security_param;
    cfg.label_source = config.label_source;
    cfg.parallel = config.parallel;
    cfg.trace_level = TraceLevel::Counts;
    cfg.capture_bodies = false;
    let mut session = Session::new(cfg, Dataset::new(sample.a.clone()), Dataset::new(sample.b.clone()))?;

    let oracle_a = ScriptedOracle::new(config.strategy_a.clone(), crate::seed::derive(config.seed, "oracle/A"), &a.records);
    let oracle_b = ScriptedOracle::new(config.strategy_b.clone(), crate::seed::derive(config.seed, "oracle/B"), &b.records);

    let mut rounds = Vec::new();
    let mut workload = [sample.a.len(), sample.b.len()];
    for out in drive(&mut session, [&oracle_a, &oracle_b])? {
        rounds.push(RoundMetrics {
            round: out.round,
            agreed_total: out.agreed_total,
            newly_agreed: out.newly_agreed.len(),
            pending_pairs: out.pending.len(),
            workload_a: workload[0],
            workload_b: workload[1],
            scores: score(&ground_truth_through(&session, out.round), &sample.gold),
        });
        let mut ids: [std::collections::BTreeSet<&str>; 2] = Default::default();
        for (x, y) in &out.pending {
            ids[0].insert(x);
            ids[1].insert(y);
        }
        workload = [ids[0].len(), ids[1].len()];
    }
    let g = session.finalize()?;
    let end_reason = match session.phase() {
        Phase::Finalized { reason } | Phase::Finished { reason } => Some(reason),
        Phase::Annotating => None,
    };
    Ok(MetricsReport {
        dataset_a: a.name.clone(),
        dataset_b: b.name.clone(),
        records_a: sample.a.len(),
        records_b: sample.b.len(),
        pairs_total: session.pairs_total(),
        gold_matches: sample.gold.len(),
        scores: score(&g, &sample.gold),
        rounds,
        end_reason,
        token_histogram: token_usage_report(&[&session]),
        privacy_audit_passed: session.audit().passed(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
        config: config.clone(),
    })
}
