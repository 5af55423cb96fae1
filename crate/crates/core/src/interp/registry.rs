use std::collections::BTreeMap;

use serde::Serialize;

use super::{EvalOptions, Value, ValueKind};
use crate::crypto::{Backend, CryptoError};
use crate::dsl::{Expr, Program, Statement, SyntaxDiagnostic};

/// Why a built-in rejected its call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallError {
    Type(String),
    Crypto(CryptoError),
}

impl From<CryptoError> for CallError {
    fn from(e: CryptoError) -> Self {
        CallError::Crypto(e)
    }
}

pub type BuiltinFn<B> = fn(&mut B, Vec<Value<B>>, &EvalOptions) -> Result<Value<B>, CallError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Signature {
    /// Accepted kinds for each positional parameter.
    pub params: Vec<Vec<ValueKind>>,
    pub returns: Vec<ValueKind>,
    pub doc: &'static str,
}

impl Signature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

pub struct Builtin<B: Backend> {
    pub signature: Signature,
    pub implementation: BuiltinFn<B>,
}

/// Name-indexed function table consulted by the evaluator.
pub struct FunctionRegistry<B: Backend> {
    entries: BTreeMap<String, Builtin<B>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("function `{0}` is already registered")]
pub struct DuplicateFunction(pub String);

/// One entry of the machine-readable function manifest.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionManifestEntry {
    pub name: String,
    pub arity: usize,
    #[serde(flatten)]
    pub signature: Signature,
}

impl<B: Backend> Default for FunctionRegistry<B> {
    fn default() -> Self {
        FunctionRegistry {
            entries: BTreeMap::new(),
        }
    }
}

impl<B: Backend> FunctionRegistry<B> {
    /// `lower`, `upper` and `is_in`.
    pub fn builtins() -> Self {
        let mut reg = Self::default();
        for (name, signature, implementation) in super::library::<B>() {
            reg.register(name, signature, implementation).expect("built-in names are distinct");
        }
        reg
    }

    pub fn register(&mut self, name: &str, signature: Signature, implementation: BuiltinFn<B>) -> Result<(), DuplicateFunction> {
        if self.entries.contains_key(name) {
            return Err(DuplicateFunction(name.to_string()));
        }
        self.entries.insert(
            name.to_string(),
            Builtin {
                signature,
                implementation,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Builtin<B>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn manifest(&self) -> Vec<FunctionManifestEntry> {
        self.entries
            .iter()
            .map(|(name, b)| FunctionManifestEntry {
                name: name.clone(),
                arity: b.signature.arity(),
                signature: b.signature.clone(),
            })
            .collect()
    }

    /// Flags calls to unknown functions and calls with the wrong number of
    /// arguments. Argument kinds are only known at evaluation time.
    pub fn check_program(&self, program: &Program) -> Vec<SyntaxDiagnostic> {
        let mut diags = Vec::new();
        for (i, stmt) in program.statements.iter().enumerate() {
            let expr = match stmt {
                Statement::Assign(_, e) | Statement::Ret(e) => e,
            };
            expr.walk(&mut |e| {
                if let Expr::Call(name, args) = e {
                    match self.get(name) {
                        None => diags.push(SyntaxDiagnostic::error(
                            program.line_of(i),
                            1,
                            format!("unknown function `{name}`"),
                        )),
                        Some(b) if b.signature.arity() != args.len() => diags.push(SyntaxDiagnostic::error(
                            program.line_of(i),
                            1,
                            format!(
                                "`{name}` takes {} argument(s), {} given",
                                b.signature.arity(),
                                args.len()
                            ),
                        )),
                        Some(_) => {}
                    }
                }
            });
        }
        diags
    }
}
