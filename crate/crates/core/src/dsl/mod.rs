//! The annotation language: lexer, parser, static checker and printer.
//!
//! A program is a sequence of statements, each either `$name = expr` or
//! `ret expr`. Expressions combine string and number literals, variables and
//! function calls with `!`, `&` and `|` (tightest first, all left-associative).
//! `$r` is preset to the record being evaluated; `#` starts a comment.
//! Statement boundaries need no separator, so an expression may continue on the
//! next line. The normative grammar lives in `docs/grammar.ebnf`.

mod ast;
mod check;
mod lexer;
mod parser;
mod pretty;

pub use ast::{Expr, Program, Severity, Statement, SyntaxDiagnostic, RECORD_VAR};
pub use check::{check, MISSING_RETURN, UNASSIGNED_VARIABLE, UNREACHABLE};
pub use lexer::{token_manifest, tokenize, Token, TokenClass, TokenKind};
pub use pretty::{pretty, pretty_expr, quote};

/// The published EBNF grammar.
pub const GRAMMAR_EBNF: &str = include_str!("../../../../docs/grammar.ebnf");

/// Parses and statically checks annotation source.
///
/// Fails with every lexical error, or the first syntax error, or the checker's
/// errors. Checker warnings do not fail the parse; call [`check`] to see them.
pub fn parse(source: &str) -> Result<Program, Vec<SyntaxDiagnostic>> {
    let tokens = tokenize(source)?;
    let eof = tokens.last().map_or((1, 1), |t| (t.line, t.column));
    let parsed = parser::parse_tokens(tokens).map_err(|d| vec![d])?;
    let errors: Vec<_> = check::check_with_positions(&parsed.program, Some(&parsed.positions), eof)
        .into_iter()
        .filter(SyntaxDiagnostic::is_error)
        .collect();
    if errors.is_empty() {
        Ok(parsed.program)
    } else {
        Err(errors)
    }
}

/// Parses and returns the program together with its warnings.
pub fn parse_with_warnings(source: &str) -> Result<(Program, Vec<SyntaxDiagnostic>), Vec<SyntaxDiagnostic>> {
    let program = parse(source)?;
    let warnings = check(&program);
    Ok((program, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CANON: &str = r#"$r = lower($r)
$c1 = is_in("canon", $r)    # condition 1
$c2 = is_in("24-70", $r)
    | is_in("2470", $r)     # condition 2
$c3 = !is_in("24-105", $r)  # condition 3
ret $c1 & $c2 & $c3
"#;

    #[test]
    fn minimal_program() {
        let p = parse(r#"ret is_in("a", $r)"#).unwrap();
        assert_eq!(p.statements.len(), 1);
        assert!(matches!(p.statements[0], Statement::Ret(Expr::Call(..))));
    }

    #[test]
    fn canon_lens_program_shape() {
        let p = parse(CANON).unwrap();
        let assigned: Vec<_> = p
            .statements
            .iter()
            .filter_map(|s| match s {
                Statement::Assign(n, _) => Some(n.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(assigned, ["r", "c1", "c2", "c3"]);
        assert_eq!(
            p.statements[4],
            Statement::Ret(Expr::and(
                Expr::and(Expr::var("c1"), Expr::var("c2")),
                Expr::var("c3")
            ))
        );
        assert_eq!(p.lines, vec![1, 2, 3, 5, 6]);
        assert!(check(&p).is_empty());
    }

    #[test]
    fn missing_return() {
        let err = parse(r#"$c = is_in("x", $r)"#).unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].message, MISSING_RETURN);
    }

    #[test]
    fn unassigned_variable() {
        let err = parse("ret $undefined").unwrap_err();
        assert!(err[0].message.starts_with(UNASSIGNED_VARIABLE));
        assert_eq!((err[0].line, err[0].column), (1, 5));
    }

    #[test]
    fn use_before_assignment_is_error() {
        let err = parse("$c1 = $c2\n$c2 = lower($r)\nret $c1").unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!((err[0].line, err[0].column), (1, 7));
    }

    #[test]
    fn second_ret_is_warning() {
        let (p, warnings) = parse_with_warnings("ret is_in(\"a\", $r)\nret is_in(\"b\", $r)").unwrap();
        assert_eq!(p.statements.len(), 2);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].severity, Severity::Warning);
        assert_eq!(warnings[0].line, 2);
    }

    #[test]
    fn malformed_assignment() {
        let err = parse("$c is_in(\"a\", $r)\nret $c").unwrap_err();
        assert!(err[0].message.contains("malformed assignment"), "{:?}", err);
        let err = parse("$c = \nret $c").unwrap_err();
        assert!(err[0].message.contains("expected an expression"));
    }

    #[test]
    fn precedence_examples() {
        let p = parse("$a = lower($r)\n$b = $a\n$c = $a\nret !$a & $b | $c").unwrap();
        let Statement::Ret(e) = &p.statements[3] else { panic!() };
        assert!(matches!(e, Expr::Or(l, _) if matches!(**l, Expr::And(..))));
        let p = parse("$a = $r\n$b = $r\n$c = $r\nret ($a | $b) & $c").unwrap();
        let Statement::Ret(e) = &p.statements[3] else { panic!() };
        assert!(matches!(e, Expr::And(..)));
    }

    #[test]
    fn pretty_round_trips_canon() {
        let p = parse(CANON).unwrap();
        let text = pretty(&p);
        assert!(!text.contains('#'));
        assert_eq!(parse(&text).unwrap(), p);
        assert_eq!(parse(&text).unwrap().source_hash, p.source_hash);
    }

    #[test]
    fn comments_do_not_change_ast() {
        let a = parse("ret is_in(\"a\", $r)").unwrap();
        let b = parse("# header\n\nret   is_in( # inline\n \"a\" ,\n$r)  # trailing\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pretty_adds_parens_for_bare_trees() {
        let e = Expr::and(Expr::or(Expr::var("r"), Expr::var("r")), Expr::var("r"));
        let p = Program::from_statements(vec![Statement::Ret(e.clone())]);
        let text = pretty(&p);
        assert_eq!(text, "ret ($r | $r) & $r\n");
        let Statement::Ret(back) = &parse(&text).unwrap().statements[0] else { panic!() };
        assert_eq!(back.strip_parens(), e);
    }

    #[test]
    fn grammar_mentions_every_production() {
        for rule in ["program", "statement", "assignment", "return", "or_expr", "and_expr", "unary", "primary", "call", "variable", "string", "number", "comment"] {
            assert!(GRAMMAR_EBNF.contains(&format!("{rule} ")), "missing {rule}");
        }
    }

    #[test]
    fn parse_is_deterministic() {
        assert_eq!(parse(CANON), parse(CANON));
        assert_eq!(parse("ret $x & ("), parse("ret $x & ("));
    }
}
