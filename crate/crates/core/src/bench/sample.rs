use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::ingest::{decode, BenchmarkDataset};
use super::BenchError;
use crate::protocol::Record;
use crate::seed;

/// Known matching pairs `(id_a, id_b)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub pairs: BTreeSet<(String, String)>,
}

impl GoldStandard {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, id_a: &str, id_b: &str) -> bool {
        self.pairs.contains(&(id_a.to_string(), id_b.to_string()))
    }

    /// Two-column CSV with a header row: A's id, then B's id.
    pub fn from_csv_str(text: &str) -> Result<Self, BenchError> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let mut pairs = BTreeSet::new();
        for row in reader.records() {
            let row = row.map_err(|e| BenchError::Csv(e.to_string()))?;
            if row.len() < 2 {
                return Err(BenchError::Csv(format!("gold row has {} column(s), expected 2", row.len())));
            }
            pairs.insert((row[0].trim().to_string(), row[1].trim().to_string()));
        }
        Ok(GoldStandard { pairs })
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let bytes = std::fs::read(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&decode(bytes))
    }

    /// Fails on the first id that resolves in neither dataset.
    pub fn validate(&self, a: &BenchmarkDataset, b: &BenchmarkDataset) -> Result<(), BenchError> {
        let (ia, ib) = (a.ids(), b.ids());
        for (x, y) in &self.pairs {
            if !ia.contains(x.as_str()) {
                return Err(BenchError::UnknownGoldId(x.clone()));
            }
            if !ib.contains(y.as_str()) {
                return Err(BenchError::UnknownGoldId(y.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfContainedSample {
    pub a: Vec<Record>,
    pub b: Vec<Record>,
    pub gold: GoldStandard,
}

/// Samples `n_matches` gold pairs and closes the record sets under the gold
/// mapping: any record matched to an included record is included too.
/// Records keep their dataset order.
pub fn sample_self_contained(
    a: &BenchmarkDataset,
    b: &BenchmarkDataset,
    gold: &GoldStandard,
    n_matches: usize,
    seed_value: u64,
) -> Result<SelfContainedSample, BenchError> {
    if gold.is_empty() {
        return Err(BenchError::NotEnoughMatches {
            requested: n_matches,
            available: 0,
        });
    }
    if n_matches > gold.len() {
        return Err(BenchError::NotEnoughMatches {
            requested: n_matches,
            available: gold.len(),
        });
    }
    gold.validate(a, b)?;
    let all: Vec<&(String, String)> = gold.pairs.iter().collect();
    let mut rng = seed::rng_from(Some(seed::derive(seed_value, "bench/sample")));
    let mut ids_a = BTreeSet::new();
    let mut ids_b = BTreeSet::new();
    for k in index::sample(&mut rng, all.len(), n_matches) {
        ids_a.insert(all[k].0.as_str());
        ids_b.insert(all[k].1.as_str());
    }
    loop {
        let before = ids_a.len() + ids_b.len();
        for (x, y) in &gold.pairs {
            if ids_a.contains(x.as_str()) || ids_b.contains(y.as_str()) {
                ids_a.insert(x.as_str());
                ids_b.insert(y.as_str());
            }
        }
        if ids_a.len() + ids_b.len() == before {
            break;
        }
    }
    let pairs = gold
        .pairs
        .iter()
        .filter(|(x, y)| ids_a.contains(x.as_str()) && ids_b.contains(y.as_str()))
        .cloned()
        .collect();
    Ok(SelfContainedSample {
        a: a.records.iter().filter(|r| ids_a.contains(r.id.as_str())).cloned().collect(),
        b: b.records.iter().filter(|r| ids_b.contains(r.id.as_str())).cloned().collect(),
        gold: GoldStandard { pairs },
    })
}
