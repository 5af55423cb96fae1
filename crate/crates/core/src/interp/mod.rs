//! Oblivious evaluation of annotation programs over an encrypted record.
//!
//! Evaluation is total over ciphertexts: statements run in order until the
//! first `ret`, both sides of every `&` and `|` are always evaluated, and the
//! built-ins never branch on encrypted values. Types are checked dynamically.

pub mod builtins;
mod registry;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Backend, CipherBool, CipherString, CryptoError, Evaluator, PublicKey};
use crate::dsl::{Expr, Program, Statement, RECORD_VAR};
use crate::Party;
pub use builtins::Pattern;
pub use registry::{Builtin, BuiltinFn, CallError, DuplicateFunction, FunctionManifestEntry, FunctionRegistry, Signature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    CipherString,
    CipherBool,
    PlainString,
    PlainNumber,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::CipherString => "encrypted string",
            ValueKind::CipherBool => "encrypted boolean",
            ValueKind::PlainString => "string",
            ValueKind::PlainNumber => "number",
        };
        f.write_str(s)
    }
}

pub enum Value<B: Backend> {
    CipherString(Vec<B::Cipher>),
    CipherBool(B::Bool),
    PlainString(String),
    PlainNumber(u64),
}

impl<B: Backend> Clone for Value<B> {
    fn clone(&self) -> Self {
        match self {
            Value::CipherString(s) => Value::CipherString(s.clone()),
            Value::CipherBool(b) => Value::CipherBool(b.clone()),
            Value::PlainString(s) => Value::PlainString(s.clone()),
            Value::PlainNumber(n) => Value::PlainNumber(*n),
        }
    }
}

impl<B: Backend> fmt::Debug for Value<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::CipherString(s) => write!(f, "CipherString(len={})", s.len()),
            Value::CipherBool(_) => f.write_str("CipherBool"),
            Value::PlainString(s) => write!(f, "PlainString({s:?})"),
            Value::PlainNumber(n) => write!(f, "PlainNumber({n})"),
        }
    }
}

impl<B: Backend> Value<B> {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::CipherString(_) => ValueKind::CipherString,
            Value::CipherBool(_) => ValueKind::CipherBool,
            Value::PlainString(_) => ValueKind::PlainString,
            Value::PlainNumber(_) => ValueKind::PlainNumber,
        }
    }
}

/// Variable bindings during one evaluation.
pub struct Env<B: Backend> {
    bindings: HashMap<String, Value<B>>,
}

impl<B: Backend> Env<B> {
    /// An environment with `$r` bound to the record.
    pub fn with_record(record: Vec<B::Cipher>) -> Self {
        let mut bindings = HashMap::new();
        bindings.insert(RECORD_VAR.to_string(), Value::CipherString(record));
        Env { bindings }
    }

    pub fn get(&self, name: &str) -> Option<&Value<B>> {
        self.bindings.get(name)
    }

    pub fn set(&mut self, name: &str, value: Value<B>) {
        self.bindings.insert(name.to_string(), value);
    }
}

/// How string literals enter ciphertext operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralMode {
    /// Literals stay plaintext operands on the evaluator's side.
    #[default]
    Plain,
    /// Literals are encrypted under the session key before use.
    Encrypt,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub literal_mode: LiteralMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalErrorKind {
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` takes {expected} argument(s), {given} given")]
    Arity { name: String, expected: usize, given: usize },
    #[error("unbound variable `${0}`")]
    UnboundVariable(String),
    #[error("program has no return statement")]
    NoReturn,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct EvalError {
    pub line: usize,
    pub kind: EvalErrorKind,
}

struct Interpreter<'r, B: Backend> {
    registry: &'r FunctionRegistry<B>,
    options: EvalOptions,
}

impl<B: Backend> Interpreter<'_, B> {
    fn eval(&self, backend: &mut B, env: &Env<B>, expr: &Expr) -> Result<Value<B>, EvalErrorKind> {
        match expr {
            Expr::StringLit(s) => match self.options.literal_mode {
                LiteralMode::Plain => Ok(Value::PlainString(s.clone())),
                LiteralMode::Encrypt => Ok(Value::CipherString(s.bytes().map(|b| backend.encrypt_byte(b)).collect())),
            },
            Expr::NumberLit(n) => Ok(Value::PlainNumber(*n)),
            Expr::VarRef(v) => env
                .get(v)
                .cloned()
                .ok_or_else(|| EvalErrorKind::UnboundVariable(v.clone())),
            Expr::Paren(e) => self.eval(backend, env, e),
            Expr::Not(e) => {
                let v = self.eval(backend, env, e)?;
                let b = expect_bool(v, "!")?;
                Ok(Value::CipherBool(backend.not(&b)?))
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                let op = if matches!(expr, Expr::And(..)) { "&" } else { "|" };
                // both operands always run: short-circuiting would leak the left value
                let lv = self.eval(backend, env, l)?;
                let rv = self.eval(backend, env, r)?;
                let lb = expect_bool(lv, op)?;
                let rb = expect_bool(rv, op)?;
                let out = if op == "&" { backend.and(&lb, &rb)? } else { backend.or(&lb, &rb)? };
                Ok(Value::CipherBool(out))
            }
            Expr::Call(name, args) => {
                let f = self
                    .registry
                    .get(name)
                    .ok_or_else(|| EvalErrorKind::UnknownFunction(name.clone()))?;
                if f.signature.arity() != args.len() {
                    return Err(EvalErrorKind::Arity {
                        name: name.clone(),
                        expected: f.signature.arity(),
                        given: args.len(),
                    });
                }
                let mut values = Vec::with_capacity(args.len());
                for (i, a) in args.iter().enumerate() {
                    let v = self.eval(backend, env, a)?;
                    if !f.signature.params[i].contains(&v.kind()) {
                        return Err(EvalErrorKind::Type(format!(
                            "argument {} of `{name}` cannot be {}",
                            i + 1,
                            v.kind()
                        )));
                    }
                    values.push(v);
                }
                (f.implementation)(backend, values, &self.options).map_err(|e| match e {
                    CallError::Type(m) => EvalErrorKind::Type(m),
                    CallError::Crypto(c) => EvalErrorKind::Crypto(c),
                })
            }
        }
    }
}

fn expect_bool<B: Backend>(v: Value<B>, op: &str) -> Result<B::Bool, EvalErrorKind> {
    match v {
        Value::CipherBool(b) => Ok(b),
        other => Err(EvalErrorKind::Type(format!("`{op}` needs a boolean operand, found {}", other.kind()))),
    }
}

/// Runs `program` with `$r` bound to `record` on any backend.
pub fn evaluate_with<B: Backend>(
    program: &Program,
    record: Vec<B::Cipher>,
    backend: &mut B,
    registry: &FunctionRegistry<B>,
    options: EvalOptions,
) -> Result<B::Bool, EvalError> {
    let interp = Interpreter { registry, options };
    let mut env = Env::with_record(record);
    for (i, stmt) in program.statements.iter().enumerate() {
        let line = program.line_of(i);
        let wrap = |kind| EvalError { line, kind };
        match stmt {
            Statement::Assign(name, e) => {
                let v = interp.eval(backend, &env, e).map_err(wrap)?;
                env.set(name, v);
            }
            Statement::Ret(e) => {
                let v = interp.eval(backend, &env, e).map_err(wrap)?;
                return match v {
                    Value::CipherBool(b) => Ok(b),
                    other => Err(wrap(EvalErrorKind::Type(format!(
                        "`ret` needs a boolean, found {}",
                        other.kind()
                    )))),
                };
            }
        }
    }
    Err(EvalError {
        line: program.line_of(program.statements.len().saturating_sub(1)),
        kind: EvalErrorKind::NoReturn,
    })
}

/// Evaluates `program` over an encrypted record with the reference backend and
/// the built-in library.
pub fn evaluate(program: &Program, record: &CipherString, pk: &PublicKey) -> Result<CipherBool, EvalError> {
    let mut ev = Evaluator::new(pk, Party::A);
    evaluate_with(
        program,
        record.chars().to_vec(),
        &mut ev,
        &FunctionRegistry::builtins(),
        EvalOptions::default(),
    )
}

fn library<B: Backend>() -> Vec<(&'static str, Signature, BuiltinFn<B>)> {
    use ValueKind::*;
    vec![
        (
            "lower",
            Signature {
                params: vec![vec![CipherString, PlainString]],
                returns: vec![CipherString, PlainString],
                doc: "ASCII lower-casing; characters outside A-Z pass through",
            },
            |backend, mut args, _| match args.remove(0) {
                Value::CipherString(s) => Ok(Value::CipherString(builtins::lower(backend, &s)?)),
                Value::PlainString(s) => Ok(Value::PlainString(s.to_ascii_lowercase())),
                other => Err(CallError::Type(format!("`lower` cannot take {}", other.kind()))),
            },
        ),
        (
            "upper",
            Signature {
                params: vec![vec![CipherString, PlainString]],
                returns: vec![CipherString, PlainString],
                doc: "ASCII upper-casing; characters outside a-z pass through",
            },
            |backend, mut args, _| match args.remove(0) {
                Value::CipherString(s) => Ok(Value::CipherString(builtins::upper(backend, &s)?)),
                Value::PlainString(s) => Ok(Value::PlainString(s.to_ascii_uppercase())),
                other => Err(CallError::Type(format!("`upper` cannot take {}", other.kind()))),
            },
        ),
        (
            "is_in",
            Signature {
                params: vec![vec![PlainString, CipherString], vec![CipherString]],
                returns: vec![CipherBool],
                doc: "true iff the first argument is a contiguous substring of the second",
            },
            |backend, args, _| {
                let text = match &args[1] {
                    Value::CipherString(t) => t,
                    other => return Err(CallError::Type(format!("`is_in` searches an encrypted string, not {}", other.kind()))),
                };
                let found = match &args[0] {
                    Value::PlainString(p) => builtins::is_in(backend, Pattern::Plain(p.as_bytes()), text)?,
                    Value::CipherString(p) => builtins::is_in(backend, Pattern::Cipher(p), text)?,
                    other => return Err(CallError::Type(format!("`is_in` cannot search for {}", other.kind()))),
                };
                Ok(Value::CipherBool(found))
            },
        ),
    ]
}
