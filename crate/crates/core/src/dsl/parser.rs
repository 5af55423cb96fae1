use super::ast::{Expr, Program, Statement, SyntaxDiagnostic};
use super::lexer::{Token, TokenKind};

/// Where each variable reference of a statement appeared in the source.
#[derive(Debug, Default, Clone)]
pub(crate) struct StatementPositions {
    pub column: usize,
    pub var_refs: Vec<(String, usize, usize)>,
}

pub(crate) struct Parsed {
    pub program: Program,
    pub positions: Vec<StatementPositions>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    refs: Vec<(String, usize, usize)>,
}

type PResult<T> = Result<T, SyntaxDiagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn error_here(&self, msg: impl Into<String>) -> SyntaxDiagnostic {
        let t = self.peek();
        SyntaxDiagnostic::error(t.line, t.column, msg)
    }

    fn expect(&mut self, kind: TokenKind, context: &str) -> PResult<Token> {
        if self.peek().kind == kind {
            Ok(self.advance())
        } else {
            Err(self.error_here(format!(
                "expected {} {context}, found {}",
                kind.describe(),
                self.peek().kind.describe()
            )))
        }
    }

    fn statement(&mut self) -> PResult<(Statement, usize, usize)> {
        let start = self.peek().clone();
        match start.kind {
            TokenKind::Ret => {
                self.advance();
                let e = self.expr()?;
                Ok((Statement::Ret(e), start.line, start.column))
            }
            TokenKind::Variable(name) => {
                self.advance();
                if self.peek().kind != TokenKind::Assign {
                    return Err(self.error_here(format!(
                        "malformed assignment: expected `=` after `${name}`, found {}",
                        self.peek().kind.describe()
                    )));
                }
                self.advance();
                let e = self.expr()?;
                Ok((Statement::Assign(name, e), start.line, start.column))
            }
            ref other => Err(SyntaxDiagnostic::error(
                start.line,
                start.column,
                format!("expected a statement (`$var = ...` or `ret ...`), found {}", other.describe()),
            )),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.peek().kind == TokenKind::Or {
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while self.peek().kind == TokenKind::And {
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.peek().kind == TokenKind::Not {
            self.advance();
            Ok(Expr::not(self.unary()?))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::StringLit(s))
            }
            TokenKind::Number(n) => {
                self.advance();
                Ok(Expr::NumberLit(n))
            }
            TokenKind::Variable(v) => {
                self.advance();
                self.refs.push((v.clone(), tok.line, tok.column));
                Ok(Expr::VarRef(v))
            }
            TokenKind::Ident(name) => {
                self.advance();
                self.expect(TokenKind::LParen, &format!("after function name `{name}`"))?;
                let mut args = Vec::new();
                if self.peek().kind != TokenKind::RParen {
                    args.push(self.expr()?);
                    while self.peek().kind == TokenKind::Comma {
                        self.advance();
                        args.push(self.expr()?);
                    }
                }
                self.expect(TokenKind::RParen, &format!("to close the call to `{name}`"))?;
                Ok(Expr::Call(name, args))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "to close `(`")?;
                Ok(Expr::paren(inner))
            }
            ref other => Err(SyntaxDiagnostic::error(
                tok.line,
                tok.column,
                format!("expected an expression, found {}", other.describe()),
            )),
        }
    }
}

pub(crate) fn parse_tokens(tokens: Vec<Token>) -> Result<Parsed, SyntaxDiagnostic> {
    let mut p = Parser {
        tokens,
        pos: 0,
        refs: Vec::new(),
    };
    let mut statements = Vec::new();
    let mut lines = Vec::new();
    let mut positions = Vec::new();
    while p.peek().kind != TokenKind::Eof {
        let (stmt, line, column) = p.statement()?;
        statements.push(stmt);
        lines.push(line);
        positions.push(StatementPositions {
            column,
            var_refs: std::mem::take(&mut p.refs),
        });
        // A statement must be followed by the start of another one.
        match p.peek().kind {
            TokenKind::Eof | TokenKind::Ret => {}
            TokenKind::Variable(_) if p.peek_at(1).kind == TokenKind::Assign => {}
            TokenKind::Variable(_) => {
                let next = p.peek_at(1);
                return Err(SyntaxDiagnostic::error(
                    next.line,
                    next.column,
                    format!("malformed assignment: expected `=`, found {}", next.kind.describe()),
                ));
            }
            ref other => {
                return Err(p.error_here(format!(
                    "unexpected {} after the end of a statement",
                    other.describe()
                )))
            }
        }
    }
    Ok(Parsed {
        program: Program::new(statements, lines),
        positions,
    })
}
