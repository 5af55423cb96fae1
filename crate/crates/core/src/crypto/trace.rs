use serde::{Deserialize, Serialize};

use crate::party::Party;

/// Primitive operations that show up in an operation trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum OpKind {
    KeyGen,
    Enc,
    Dec,
    Add,
    Sub,
    Mul,
    Eq,
    Gt,
    Lt,
    And,
    Or,
    Not,
    Xnor,
}

impl OpKind {
    pub const ALL: [OpKind; 13] = [
        OpKind::KeyGen,
        OpKind::Enc,
        OpKind::Dec,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Eq,
        OpKind::Gt,
        OpKind::Lt,
        OpKind::And,
        OpKind::Or,
        OpKind::Not,
        OpKind::Xnor,
    ];
}

const PARTIES: [Party; 3] = [Party::A, Party::B, Party::C];

fn party_index(p: Party) -> usize {
    match p {
        Party::A => 0,
        Party::B => 1,
        Party::C => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperandKind {
    Cipher,
    Plain,
}

/// One primitive op: who ran it and what kinds of operands it took. Operand
/// values are never recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub party: Party,
    pub op: OpKind,
    pub operands: Vec<OperandKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    #[default]
    Off,
    /// Per-(party, op) counters only.
    Counts,
    /// Full ordered event log plus counters.
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationTrace {
    pub level: TraceLevel,
    pub events: Vec<TraceEvent>,
    /// Indexed by party (A, B, C) then by `OpKind` discriminant.
    counts: [[u64; 13]; 3],
}

impl OperationTrace {
    pub fn new(level: TraceLevel) -> Self {
        OperationTrace {
            level,
            ..Default::default()
        }
    }

    pub fn enabled(&self) -> bool {
        self.level != TraceLevel::Off
    }

    #[inline]
    pub fn record(&mut self, party: Party, op: OpKind, operands: &[OperandKind]) {
        match self.level {
            TraceLevel::Off => return,
            TraceLevel::Counts => {}
            TraceLevel::Full => self.events.push(TraceEvent {
                party,
                op,
                operands: operands.to_vec(),
            }),
        }
        self.counts[party_index(party)][op as usize] += 1;
    }

    pub fn count(&self, party: Party, op: OpKind) -> u64 {
        self.counts[party_index(party)][op as usize]
    }

    pub fn count_op(&self, op: OpKind) -> u64 {
        self.counts.iter().map(|row| row[op as usize]).sum()
    }

    /// Non-zero counters as (party, op, count).
    pub fn nonzero_counts(&self) -> Vec<(Party, OpKind, u64)> {
        PARTIES
            .iter()
            .flat_map(|&p| OpKind::ALL.iter().map(move |&op| (p, op)))
            .map(|(p, op)| (p, op, self.count(p, op)))
            .filter(|(_, _, n)| *n > 0)
            .collect()
    }

    /// Appends another trace, keeping this trace's level.
    pub fn merge(&mut self, other: OperationTrace) {
        if self.level == TraceLevel::Full {
            self.events.extend(other.events);
        }
        if self.level != TraceLevel::Off {
            for (mine, theirs) in self.counts.iter_mut().zip(other.counts.iter()) {
                for (m, t) in mine.iter_mut().zip(theirs) {
                    *m += t;
                }
            }
        }
    }

    /// The op sequence without parties, for comparing trace shapes.
    pub fn shape(&self) -> Vec<(OpKind, Vec<OperandKind>)> {
        self.events.iter().map(|e| (e.op, e.operands.clone())).collect()
    }
}
