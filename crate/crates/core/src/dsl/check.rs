use std::collections::HashSet;

use super::ast::{Expr, Program, Statement, SyntaxDiagnostic, RECORD_VAR};
use super::parser::StatementPositions;

pub const MISSING_RETURN: &str = "missing return statement";
pub const UNASSIGNED_VARIABLE: &str = "use of unassigned variable";
pub const UNREACHABLE: &str = "unreachable statement after the first `ret`";

/// Static checks over a parsed program. Returns an empty list iff the program
/// has a `ret`, only references variables assigned earlier, and has no dead code.
pub fn check(program: &Program) -> Vec<SyntaxDiagnostic> {
    let end = program.statements.len().max(1);
    check_with_positions(program, None, (program.line_of(end - 1), 1))
}

pub(crate) fn check_with_positions(
    program: &Program,
    positions: Option<&[StatementPositions]>,
    eof: (usize, usize),
) -> Vec<SyntaxDiagnostic> {
    let mut diags = Vec::new();
    let mut assigned: HashSet<&str> = HashSet::from([RECORD_VAR]);
    let mut seen_ret = false;

    for (i, stmt) in program.statements.iter().enumerate() {
        let line = program.line_of(i);
        let column = positions.and_then(|p| p.get(i)).map_or(1, |p| p.column);
        if seen_ret {
            diags.push(SyntaxDiagnostic::warning(line, column, UNREACHABLE));
        }

        let expr = match stmt {
            Statement::Assign(_, e) | Statement::Ret(e) => e,
        };
        let mut refs: Vec<&str> = Vec::new();
        expr.walk(&mut |e| {
            if let Expr::VarRef(v) = e {
                refs.push(v);
            }
        });
        for (k, name) in refs.into_iter().enumerate() {
            if !assigned.contains(name) {
                let (l, c) = positions
                    .and_then(|p| p.get(i))
                    .and_then(|p| p.var_refs.get(k))
                    .map_or((line, column), |(_, l, c)| (*l, *c));
                diags.push(SyntaxDiagnostic::error(l, c, format!("{UNASSIGNED_VARIABLE} `${name}`")));
            }
        }

        match stmt {
            Statement::Assign(name, _) => {
                assigned.insert(name);
            }
            Statement::Ret(_) => seen_ret = true,
        }
    }

    if !seen_ret {
        diags.push(SyntaxDiagnostic::error(eof.0, eof.1, MISSING_RETURN));
    }
    diags
}
