use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::BenchError;
use crate::protocol::{Dataset, Record};

pub const DEFAULT_SEPARATOR: &str = " | ";
pub const DEFAULT_ID_COLUMN: &str = "id";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub separator: String,
    pub id_column: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            separator: DEFAULT_SEPARATOR.into(),
            id_column: DEFAULT_ID_COLUMN.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkDataset {
    pub name: String,
    pub attributes: Vec<String>,
    pub selected: Vec<String>,
    pub records: Vec<Record>,
}

impl BenchmarkDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn to_dataset(&self) -> Dataset {
        Dataset::new(self.records.clone())
    }
}

/// Folds text into ASCII: compatibility decomposition, then every non-ASCII
/// code point (combining marks included) is dropped. Whitespace runs become
/// one space and the ends are trimmed.
pub fn normalize_ascii(text: &str) -> String {
    let folded: String = text.nfkd().filter(char::is_ascii).collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// UTF-8 when valid, otherwise Latin-1.
pub(super) fn decode(bytes: Vec<u8>) -> String {
    match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().iter().map(|&b| b as char).collect(),
    }
}

pub fn ingest(path: &Path, attributes: &[String], options: &IngestOptions) -> Result<BenchmarkDataset, BenchError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    ingest_str(&name, &decode(bytes), attributes, options)
}

/// Reads CSV text with a header row. Content is the selected attribute
/// values, normalized, joined with the separator; empty values stay as
/// empty segments.
pub fn ingest_str(name: &str, text: &str, attributes: &[String], options: &IngestOptions) -> Result<BenchmarkDataset, BenchError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| BenchError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let column = |name: &str| header.iter().position(|h| h == name);
    let id_col = column(&options.id_column).ok_or_else(|| BenchError::UnknownAttribute {
        attribute: options.id_column.clone(),
        available: header.clone(),
    })?;
    let selected = attributes
        .iter()
        .map(|a| {
            column(a).ok_or_else(|| BenchError::UnknownAttribute {
                attribute: a.clone(),
                available: header.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| BenchError::Csv(e.to_string()))?;
        let id = row.get(id_col).unwrap_or("").trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(BenchError::DuplicateId(id));
        }
        let content = selected
            .iter()
            .map(|&c| normalize_ascii(row.get(c).unwrap_or("")))
            .collect::<Vec<_>>()
            .join(&options.separator);
        records.push(Record { id, content });
    }
    Ok(BenchmarkDataset {
        name: name.to_string(),
        attributes: header,
        selected: attributes.to_vec(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(a: &[&str]) -> Vec<String> {
        a.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn joins_selected_attributes() {
        let csv = "id,title,authors,venue,year\n\
                   p1,\"\"\"Honey, I Shrunk the DBMS\"\": Footprint, Mobility, and Beyond (Panel)\",Praveen Seshadri,SIGMOD Conference,1999\n";
        let ds = ingest_str("dblp", csv, &attrs(&["title", "authors", "venue", "year"]), &IngestOptions::default()).unwrap();
        assert_eq!(
            ds.records[0].content,
            "\"Honey, I Shrunk the DBMS\": Footprint, Mobility, and Beyond (Panel) | Praveen Seshadri | SIGMOD Conference | 1999"
        );
    }

    #[test]
    fn folds_diacritics_and_keeps_empty_segments() {
        let csv = "id,title,authors\n1,Caf\u{e9} \u{fb01}les,\n2,\u{65e5}\u{672c} x,J\u{f6}rg  M\u{fc}ller\n";
        let ds = ingest_str("t", csv, &attrs(&["title", "authors"]), &IngestOptions::default()).unwrap();
        assert_eq!(ds.records[0].content, "Cafe files | ");
        assert_eq!(ds.records[1].content, "x | Jorg Muller");
        assert!(ds.records.iter().all(|r| r.content.is_ascii()));
    }

    #[test]
    fn unknown_attribute_is_an_error() {
        let csv = "id,title,authors,venue,year\n";
        let err = ingest_str("dblp", csv, &attrs(&["price"]), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, BenchError::UnknownAttribute { ref attribute, .. } if attribute == "price"));
    }

    #[test]
    fn latin1_fallback() {
        assert_eq!(decode(vec![b'J', 0xf6, b'r', b'g']), "J\u{f6}rg");
        assert_eq!(normalize_ascii(&decode(vec![b'J', 0xf6, b'r', b'g'])), "Jorg");
    }
}
