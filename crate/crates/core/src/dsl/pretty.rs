use super::ast::{Expr, Program, Statement};

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_NOT: u8 = 3;
const PREC_ATOM: u8 = 4;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => PREC_OR,
        Expr::And(..) => PREC_AND,
        Expr::Not(..) => PREC_NOT,
        _ => PREC_ATOM,
    }
}

/// Renders a program in canonical form: one statement per line, no comments,
/// parentheses exactly where the AST has `Paren` nodes (plus any the operator
/// tree needs to survive a re-parse).
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for stmt in &program.statements {
        match stmt {
            Statement::Assign(name, e) => {
                out.push('$');
                out.push_str(name);
                out.push_str(" = ");
                write_expr(&mut out, e);
            }
            Statement::Ret(e) => {
                out.push_str("ret ");
                write_expr(&mut out, e);
            }
        }
        out.push('\n');
    }
    out
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

/// Quotes text as a string literal, escaping `"` and `\`.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn write_operand(out: &mut String, e: &Expr, min_prec: u8) {
    if precedence(e) < min_prec {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::StringLit(s) => out.push_str(&quote(s)),
        Expr::NumberLit(n) => out.push_str(&n.to_string()),
        Expr::VarRef(v) => {
            out.push('$');
            out.push_str(v);
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
        // Left-associative: the right operand needs strictly higher precedence.
        Expr::Or(l, r) => {
            write_operand(out, l, PREC_OR);
            out.push_str(" | ");
            write_operand(out, r, PREC_OR + 1);
        }
        Expr::And(l, r) => {
            write_operand(out, l, PREC_AND);
            out.push_str(" & ");
            write_operand(out, r, PREC_AND + 1);
        }
        Expr::Not(inner) => {
            out.push('!');
            write_operand(out, inner, PREC_NOT);
        }
        Expr::Paren(inner) => {
            out.push('(');
            write_expr(out, inner);
            out.push(')');
        }
    }
}
