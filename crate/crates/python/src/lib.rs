//! Python bindings. The module is importable as `blindanno`.
//!
//! Structured results (progress, round outcomes, reports) cross the boundary
//! as JSON text; callers decode them with `json.loads`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;

use blindanno::bench::{self, BenchConfig, GoldStandard, IngestOptions};
use blindanno::crypto::{dec_bool, enc_str, keygen_seeded, Evaluator};
use blindanno::dsl;
use blindanno::interp::{evaluate_with, EvalOptions, FunctionRegistry};
use blindanno::protocol::{self, Dataset, Record, SessionConfig};
use blindanno::Party;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn party(s: &str) -> PyResult<Party> {
    s.parse().map_err(value_err)
}

fn diagnostics_text(d: &[dsl::SyntaxDiagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// Parses a program and returns its canonical text. Raises ValueError with
/// `line:column` diagnostics on failure.
#[pyfunction]
fn parse(source: &str) -> PyResult<String> {
    dsl::parse(source).map(|p| dsl::pretty(&p)).map_err(|d| value_err(diagnostics_text(&d)))
}

/// All diagnostics for `source` as `(line, column, severity, message)` tuples.
#[pyfunction]
fn check(source: &str) -> Vec<(usize, usize, String, String)> {
    let diags = match dsl::parse_with_warnings(source) {
        Ok((_, warnings)) => warnings,
        Err(errors) => errors,
    };
    diags
        .into_iter()
        .map(|d| {
            let sev = if d.is_error() { "error" } else { "warning" };
            (d.line, d.column, sev.to_string(), d.message)
        })
        .collect()
}

/// Encrypts `record` under a key derived from `seed`, evaluates `source` on
/// the ciphertext and decrypts the answer.
#[pyfunction]
#[pyo3(signature = (source, record, seed = 0))]
fn evaluate(source: &str, record: &str, seed: u64) -> PyResult<bool> {
    let program = dsl::parse(source).map_err(|d| value_err(diagnostics_text(&d)))?;
    let keys = keygen_seeded(protocol::DEFAULT_SECURITY_PARAM, seed).map_err(value_err)?;
    let cipher = enc_str(record, &keys.pk).map_err(value_err)?;
    let mut ev = Evaluator::new(&keys.pk, Party::A);
    let out = evaluate_with(
        &program,
        cipher.into_chars(),
        &mut ev,
        &FunctionRegistry::builtins(),
        EvalOptions::default(),
    )
    .map_err(value_err)?;
    dec_bool(&out, &keys.sk).map_err(value_err)
}

/// The generated token-chain annotation for a record's content.
#[pyfunction]
fn auto_annotation(content: &str) -> PyResult<String> {
    bench::auto_annotation_source(&Record::new("record", content)).map_err(value_err)
}

/// Runs a scripted benchmark and returns the metrics report as JSON.
#[pyfunction]
#[pyo3(signature = (dataset_a, dataset_b, gold, attrs_a, attrs_b, matches = 50, rounds = 3, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_benchmark(
    dataset_a: PathBuf,
    dataset_b: PathBuf,
    gold: PathBuf,
    attrs_a: Vec<String>,
    attrs_b: Vec<String>,
    matches: usize,
    rounds: u32,
    seed: u64,
) -> PyResult<String> {
    let opts = IngestOptions::default();
    let a = bench::ingest(&dataset_a, &attrs_a, &opts).map_err(value_err)?;
    let b = bench::ingest(&dataset_b, &attrs_b, &opts).map_err(value_err)?;
    let g = GoldStandard::load(&gold).map_err(value_err)?;
    let cfg = BenchConfig {
        matches,
        rounds,
        seed,
        ..Default::default()
    };
    let report = bench::run_benchmark(&a, &b, &g, &cfg).map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

/// A three-party annotation session hosted in this process.
#[pyclass]
struct Session {
    inner: Mutex<protocol::Session>,
}

impl Session {
    fn with<T>(&self, f: impl FnOnce(&mut protocol::Session) -> Result<T, protocol::ProtocolError>) -> PyResult<T> {
        let mut s = self.inner.lock().map_err(|_| PyRuntimeError::new_err("session lock poisoned"))?;
        f(&mut s).map_err(value_err)
    }
}

fn dataset(rows: Vec<(String, String)>) -> Dataset {
    rows.into_iter().map(|(id, content)| Record::new(id, content)).collect()
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (records_a, records_b, max_rounds = 3, sample_a = None, sample_b = None, seed = None))]
    fn new(
        records_a: Vec<(String, String)>,
        records_b: Vec<(String, String)>,
        max_rounds: u32,
        sample_a: Option<usize>,
        sample_b: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let sizes = [sample_a.unwrap_or(records_a.len()), sample_b.unwrap_or(records_b.len())];
        let mut config = SessionConfig::new(max_rounds, sizes[0], sizes[1]);
        config.seed = seed;
        let s = protocol::Session::new(config, dataset(records_a), dataset(records_b)).map_err(value_err)?;
        Ok(Session { inner: Mutex::new(s) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let s = protocol::Session::load(&path).map_err(value_err)?;
        Ok(Session { inner: Mutex::new(s) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.with(|s| s.save(&path))
    }

    #[getter]
    fn round(&self) -> PyResult<u32> {
        self.with(|s| Ok(s.round()))
    }

    #[getter]
    fn terminal(&self) -> PyResult<bool> {
        self.with(|s| Ok(s.phase().is_terminal()))
    }

    #[getter]
    fn key_fingerprint(&self) -> PyResult<String> {
        self.with(|s| Ok(s.key_fingerprint()))
    }

    fn sampled_ids(&self, party_name: &str) -> PyResult<Vec<String>> {
        let p = party(party_name)?;
        self.with(|s| s.sampled_ids(p).map(<[String]>::to_vec))
    }

    fn pending_records(&self, party_name: &str) -> PyResult<Vec<String>> {
        let p = party(party_name)?;
        self.with(|s| Ok(s.pending_records(p)?.iter().cloned().collect()))
    }

    /// Own records of an owner as `(id, content)` pairs.
    fn records(&self, party_name: &str) -> PyResult<Vec<(String, String)>> {
        let p = party(party_name)?;
        self.with(|s| Ok(s.records(p)?.into_iter().map(|v| (v.id, v.content)).collect()))
    }

    /// Stores an annotation for the current round; returns warning messages.
    fn annotate(&self, party_name: &str, record_id: &str, source: &str) -> PyResult<Vec<String>> {
        let p = party(party_name)?;
        self.with(|s| {
            let round = s.round();
            Ok(s.put_annotation(p, round, record_id, source)?.into_iter().map(|d| d.to_string()).collect())
        })
    }

    /// Pending record ids still lacking an annotation, keyed by party name.
    fn missing(&self) -> PyResult<BTreeMap<String, Vec<String>>> {
        self.with(|s| Ok(s.missing_annotations().into_iter().map(|(p, ids)| (p.to_string(), ids)).collect()))
    }

    /// Runs one round; returns the outcome as JSON.
    fn run_round(&self) -> PyResult<String> {
        let out = self.with(|s| s.run_round())?;
        serde_json::to_string(&out).map_err(value_err)
    }

    /// Ends the session and returns the ground truth as `(id_a, id_b, label)`.
    fn finalize(&self) -> PyResult<Vec<(String, String, u8)>> {
        let g = self.with(|s| s.finalize())?;
        Ok(g.triplets.into_iter().map(|t| (t.id_a, t.id_b, t.label.as_digit())).collect())
    }

    fn ground_truth_csv(&self) -> PyResult<Option<String>> {
        self.with(|s| Ok(s.ground_truth().map(|g| g.to_csv())))
    }

    fn progress(&self) -> PyResult<String> {
        let p = self.with(|s| Ok(s.progress()))?;
        serde_json::to_string(&p).map_err(value_err)
    }

    /// Whether the message transcript and operation trace pass the privacy audit.
    fn audit_passed(&self) -> PyResult<bool> {
        self.with(|s| Ok(s.audit().passed()))
    }
}

#[pymodule(name = "blindanno")]
fn blindanno_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(auto_annotation, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_class::<Session>()?;
    m.add("GRAMMAR_EBNF", dsl::GRAMMAR_EBNF)?;
    Ok(())
}
