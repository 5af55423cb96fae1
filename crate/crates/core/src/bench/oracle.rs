//! Scripted stand-ins for the human annotators.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::dsl::{self, quote, Expr, Program, Statement, RECORD_VAR};
use crate::protocol::Record;
use crate::seed;

/// Lowercased whitespace tokens, in order, duplicates kept.
pub fn tokens(content: &str) -> Vec<String> {
    content.split_whitespace().map(str::to_ascii_lowercase).collect()
}

const CHAIN_VAR: &str = "c";

/// Source of the token-chain program for `tokens`: lower the record, then
/// require every token as a substring.
pub fn token_chain_source(tokens: &[String]) -> String {
    let mut out = String::from("$r = lower($r)\n");
    for (i, t) in tokens.iter().enumerate() {
        if i == 0 {
            out.push_str(&format!("$c = is_in({}, $r)\n", quote(t)));
        } else {
            out.push_str(&format!("$c = $c & is_in({}, $r)\n", quote(t)));
        }
    }
    out.push_str("ret $c\n");
    out
}

/// The generated annotation for a record: one condition per token.
pub fn auto_annotation_source(record: &Record) -> Result<String, BenchError> {
    let toks = tokens(&record.content);
    if toks.is_empty() {
        return Err(BenchError::EmptyContent(record.id.clone()));
    }
    Ok(token_chain_source(&toks))
}

pub fn auto_annotation(record: &Record) -> Result<Program, BenchError> {
    let src = auto_annotation_source(record)?;
    dsl::parse(&src).map_err(BenchError::Dsl)
}

fn is_in_token(e: &Expr) -> Option<&str> {
    match e {
        Expr::Call(name, args) if name == "is_in" && args.len() == 2 => match (&args[0], &args[1]) {
            (Expr::StringLit(t), Expr::VarRef(v)) if v == RECORD_VAR => Some(t),
            _ => None,
        },
        _ => None,
    }
}

/// The tokens of a program in token-chain shape, or `None` for any other shape.
pub fn token_chain(program: &Program) -> Option<Vec<String>> {
    let s = &program.statements;
    if s.len() < 3 {
        return None;
    }
    let lower = Statement::Assign(RECORD_VAR.into(), Expr::call("lower", vec![Expr::var(RECORD_VAR)]));
    if s[0] != lower || s[s.len() - 1] != Statement::Ret(Expr::var(CHAIN_VAR)) {
        return None;
    }
    let mut out = Vec::new();
    for (i, stmt) in s[1..s.len() - 1].iter().enumerate() {
        let Statement::Assign(v, e) = stmt else { return None };
        if v != CHAIN_VAR {
            return None;
        }
        let tok = if i == 0 {
            is_in_token(e)?
        } else {
            match e {
                Expr::And(l, r) if **l == Expr::var(CHAIN_VAR) => is_in_token(r)?,
                _ => return None,
            }
        };
        out.push(tok.to_string());
    }
    Some(out)
}

/// Document frequency of lowercased tokens over one party's corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFrequency {
    pub documents: usize,
    pub counts: HashMap<String, usize>,
}

impl TokenFrequency {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a Record>) -> Self {
        let mut f = TokenFrequency::default();
        for r in records {
            f.documents += 1;
            for t in tokens(&r.content).into_iter().collect::<BTreeSet<_>>() {
                *f.counts.entry(t).or_default() += 1;
            }
        }
        f
    }

    pub fn get(&self, token: &str) -> usize {
        self.counts.get(token).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub program: Program,
    /// False when nothing could be dropped and `program` is the input.
    pub changed: bool,
}

/// Keeps `max(1, n / 2)` of `n` tokens, dropping the most frequent first.
/// Ties are broken by a shuffle seeded with `seed`; survivors keep their order.
pub fn relax_tokens(toks: &[String], freq: &TokenFrequency, seed_value: u64) -> (Vec<String>, bool) {
    let n = toks.len();
    let keep = (n / 2).max(1);
    if n <= keep {
        return (toks.to_vec(), false);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng_from(Some(seed_value)));
    order.sort_by_key(|&i| std::cmp::Reverse(freq.get(&toks[i])));
    let dropped: BTreeSet<usize> = order[..n - keep].iter().copied().collect();
    let kept = (0..n).filter(|i| !dropped.contains(i)).map(|i| toks[i].clone()).collect();
    (kept, true)
}

/// A strictly weaker token-chain program, or the input flagged unchanged
/// when only one condition is left.
pub fn relax(program: &Program, freq: &TokenFrequency, seed_value: u64) -> Result<Relaxed, BenchError> {
    let toks = token_chain(program).ok_or(BenchError::NotTokenChain)?;
    let (kept, changed) = relax_tokens(&toks, freq, seed_value);
    if !changed {
        return Ok(Relaxed {
            program: program.clone(),
            changed,
        });
    }
    let program = dsl::parse(&token_chain_source(&kept)).map_err(BenchError::Dsl)?;
    Ok(Relaxed { program, changed })
}

/// Programs to replay: record id, then round, then source. A round without
/// an entry reuses the latest earlier one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replay {
    pub programs: BTreeMap<String, BTreeMap<u32, String>>,
}

impl Replay {
    pub fn source(&self, id: &str, round: u32) -> Option<&str> {
        self.programs.get(id)?.range(..=round).next_back().map(|(_, s)| s.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The generated annotation every round.
    AutoTokens,
    /// The generated annotation first, then a relaxation of the previous
    /// program each round the record is still pending.
    RelaxOnDisagreement,
    Replay(Replay),
}

#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    pub strategy: Strategy,
    pub seed: u64,
    frequency: TokenFrequency,
}

impl ScriptedOracle {
    /// `corpus` is the annotator's own dataset, used for token frequencies.
    pub fn new<'a>(strategy: Strategy, seed_value: u64, corpus: impl IntoIterator<Item = &'a Record>) -> Self {
        ScriptedOracle {
            strategy,
            seed: seed_value,
            frequency: TokenFrequency::from_records(corpus),
        }
    }

    pub fn frequency(&self) -> &TokenFrequency {
        &self.frequency
    }

    /// Annotation source for `record` in `round`, given the record's latest
    /// earlier program.
    pub fn annotate(&self, round: u32, record: &Record, previous: Option<&Program>) -> Result<String, BenchError> {
        match (&self.strategy, previous) {
            (Strategy::AutoTokens, _) | (Strategy::RelaxOnDisagreement, None) => auto_annotation_source(record),
            (Strategy::RelaxOnDisagreement, Some(prev)) => {
                let s = seed::derive(self.seed, &format!("relax/{}/{round}", record.id));
                let relaxed = relax(prev, &self.frequency, s)?;
                let toks = token_chain(&relaxed.program).ok_or(BenchError::NotTokenChain)?;
                Ok(token_chain_source(&toks))
            }
            (Strategy::Replay(r), _) => r
                .source(&record.id, round)
                .map(str::to_string)
                .ok_or_else(|| BenchError::MissingReplay {
                    id: record.id.clone(),
                    round,
                }),
        }
    }
}
