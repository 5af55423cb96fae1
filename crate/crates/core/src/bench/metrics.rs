use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::oracle::tokens;
use super::sample::GoldStandard;
use crate::dsl::{Expr, Statement};
use crate::protocol::{GroundTruth, Label, Session};
use crate::Party;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Absent when nothing was labeled a match.
    pub precision: Option<f64>,
    /// Absent when the gold set is empty.
    pub recall: Option<f64>,
    /// Absent unless both precision and recall are present; 0 when both are 0.
    pub f_measure: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Precision, recall and F of the match-labeled pairs of `g` against `gold`.
pub fn score(g: &GroundTruth, gold: &GoldStandard) -> Scores {
    let predicted: BTreeSet<(String, String)> = g
        .triplets
        .iter()
        .filter(|t| t.label == Label::Match)
        .map(|t| (t.id_a.clone(), t.id_b.clone()))
        .collect();
    let tp = predicted.intersection(&gold.pairs).count();
    let fp = predicted.len() - tp;
    let fn_ = gold.pairs.len() - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f_measure = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Scores {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        f_measure,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub token: String,
    /// Occurrences among the sampled records.
    pub corpus: usize,
    /// `is_in` literals equal to the token in the final programs.
    pub is_in: usize,
}

/// `is_in` literals of a program, lowercased, in source order.
pub fn is_in_literals(stmts: &[Statement]) -> Vec<String> {
    let mut out = Vec::new();
    for s in stmts {
        let (Statement::Assign(_, e) | Statement::Ret(e)) = s;
        e.walk(&mut |x| {
            if let Expr::Call(name, args) = x {
                if let (true, Some(Expr::StringLit(t))) = (name == "is_in", args.first()) {
                    out.push(t.to_ascii_lowercase());
                }
            }
        });
    }
    out
}

/// Token histogram over the sampled records of both owners: how often each
/// original token occurs and how many `is_in` literals of each record's final
/// program equal it. Literals that are not original tokens are dropped.
pub fn token_usage_report(sessions: &[&Session]) -> Vec<TokenUsage> {
    let mut table: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in sessions {
        for party in [Party::A, Party::B] {
            let (Ok(ds), Ok(ids)) = (s.dataset(party), s.sampled_ids(party)) else { continue };
            for id in ids {
                if let Some(r) = ds.get(id) {
                    for t in tokens(&r.content) {
                        table.entry(t).or_default().0 += 1;
                    }
                }
            }
        }
    }
    for s in sessions {
        for party in [Party::A, Party::B] {
            let Ok(ids) = s.sampled_ids(party) else { continue };
            for id in ids {
                let Some(ann) = s.latest_annotation(party, id) else { continue };
                for lit in is_in_literals(&ann.program.statements) {
                    if let Some(e) = table.get_mut(&lit) {
                        e.1 += 1;
                    }
                }
            }
        }
    }
    let mut rows: Vec<TokenUsage> = table
        .into_iter()
        .map(|(token, (corpus, is_in))| TokenUsage { token, corpus, is_in })
        .collect();
    rows.sort_by(|x, y| y.corpus.cmp(&x.corpus).then_with(|| x.token.cmp(&y.token)));
    rows
}
