use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Name of the preset variable bound to the record under evaluation.
pub const RECORD_VAR: &str = "r";

/// A parsed annotation: the combined feature-question set of one record.
///
/// Equality is structural over the statements. Source positions are kept for
/// diagnostics but do not take part in comparisons, so a program and the
/// re-parse of its pretty-printed form compare equal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Program {
    pub statements: Vec<Statement>,
    /// 1-based source line of each statement, parallel to `statements`.
    #[serde(default)]
    pub lines: Vec<usize>,
    /// Hex SHA-256 of the canonical (pretty-printed) form.
    pub source_hash: String,
}

impl Program {
    pub fn new(statements: Vec<Statement>, lines: Vec<usize>) -> Self {
        let mut program = Program {
            statements,
            lines,
            source_hash: String::new(),
        };
        program.source_hash = canonical_hash(&program);
        program
    }

    /// Builds a program from statements alone, numbering them one per line.
    pub fn from_statements(statements: Vec<Statement>) -> Self {
        let lines = (1..=statements.len()).collect();
        Program::new(statements, lines)
    }

    pub fn line_of(&self, index: usize) -> usize {
        self.lines.get(index).copied().unwrap_or(index + 1)
    }

    /// The expression of the first `ret`, which is the one that terminates evaluation.
    pub fn first_return(&self) -> Option<(usize, &Expr)> {
        self.statements.iter().enumerate().find_map(|(i, s)| match s {
            Statement::Ret(e) => Some((i, e)),
            _ => None,
        })
    }
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl Eq for Program {}

fn canonical_hash(program: &Program) -> String {
    let text = super::pretty(program);
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    /// `$name = expr`; the name is stored without the `$` sigil.
    Assign(String, Expr),
    Ret(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    StringLit(String),
    NumberLit(u64),
    /// Variable reference, stored without the `$` sigil.
    VarRef(String),
    Call(String, Vec<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Paren(Box<Expr>),
}

impl Expr {
    pub fn string(text: impl Into<String>) -> Self {
        Expr::StringLit(text.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::VarRef(name.into())
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Self {
        Expr::Call(name.into(), args)
    }

    pub fn and(l: Expr, r: Expr) -> Self {
        Expr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Expr, r: Expr) -> Self {
        Expr::Or(Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Expr::Not(Box::new(e))
    }

    pub fn paren(e: Expr) -> Self {
        Expr::Paren(Box::new(e))
    }

    /// Removes every `Paren` node, leaving the bare operator tree.
    pub fn strip_parens(&self) -> Expr {
        match self {
            Expr::Paren(e) => e.strip_parens(),
            Expr::And(l, r) => Expr::and(l.strip_parens(), r.strip_parens()),
            Expr::Or(l, r) => Expr::or(l.strip_parens(), r.strip_parens()),
            Expr::Not(e) => Expr::not(e.strip_parens()),
            Expr::Call(n, args) => Expr::call(n.clone(), args.iter().map(Expr::strip_parens).collect()),
            other => other.clone(),
        }
    }

    /// Visits this expression and all of its sub-expressions, pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            Expr::And(l, r) | Expr::Or(l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::Not(e) | Expr::Paren(e) => e.walk(f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl SyntaxDiagnostic {
    pub fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        SyntaxDiagnostic {
            line,
            column,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    pub fn warning(line: usize, column: usize, message: impl Into<String>) -> Self {
        SyntaxDiagnostic {
            line,
            column,
            message: message.into(),
            severity: Severity::Warning,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl std::fmt::Display for SyntaxDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.column, sev, self.message)
    }
}
