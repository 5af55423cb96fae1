use serde::Serialize;

use super::ast::SyntaxDiagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// `$name`, sigil stripped.
    Variable(String),
    Ident(String),
    Ret,
    Str(String),
    Number(u64),
    Assign,
    And,
    Or,
    Not,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Variable(v) => format!("variable `${v}`"),
            TokenKind::Ident(i) => format!("identifier `{i}`"),
            TokenKind::Ret => "`ret`".into(),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::Number(_) => "number".into(),
            TokenKind::Assign => "`=`".into(),
            TokenKind::And => "`&`".into(),
            TokenKind::Or => "`|`".into(),
            TokenKind::Not => "`!`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

/// One lexical class, as consumed by editors for highlighting.
#[derive(Debug, Clone, Serialize)]
pub struct TokenClass {
    pub name: &'static str,
    pub pattern: &'static str,
}

/// The lexer's token classes with equivalent regular expressions.
pub fn token_manifest() -> Vec<TokenClass> {
    vec![
        TokenClass { name: "comment", pattern: r"#[^\n]*" },
        TokenClass { name: "keyword", pattern: r"\bret\b" },
        TokenClass { name: "variable", pattern: r"\$[A-Za-z_][A-Za-z0-9_]*" },
        TokenClass { name: "string", pattern: r#""(?:[^"\\\n]|\\["\\])*""# },
        TokenClass { name: "number", pattern: r"[0-9]+" },
        TokenClass { name: "function", pattern: r"[A-Za-z_][A-Za-z0-9_]*" },
        TokenClass { name: "operator", pattern: r"[=&|!]" },
        TokenClass { name: "punctuation", pattern: r"[(),]" },
    ]
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn take_ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !is_ident_continue(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }
}

/// Splits source text into tokens. Comments and whitespace are dropped. Lexing
/// continues past errors so that every bad token is reported at once.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Vec<SyntaxDiagnostic>> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    let mut errors = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        let push = |tokens: &mut Vec<Token>, kind| tokens.push(Token { kind, line, column });
        match c {
            c if c.is_whitespace() => {
                cur.bump();
            }
            '#' => {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            }
            '=' | '&' | '|' | '!' | '(' | ')' | ',' => {
                cur.bump();
                let kind = match c {
                    '=' => TokenKind::Assign,
                    '&' => TokenKind::And,
                    '|' => TokenKind::Or,
                    '!' => TokenKind::Not,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    _ => TokenKind::Comma,
                };
                push(&mut tokens, kind);
            }
            '$' => {
                cur.bump();
                match cur.peek() {
                    Some(n) if is_ident_start(n) => {
                        let name = cur.take_ident();
                        push(&mut tokens, TokenKind::Variable(name));
                    }
                    _ => errors.push(SyntaxDiagnostic::error(
                        line,
                        column,
                        "malformed variable name: expected identifier after `$`",
                    )),
                }
            }
            '"' => {
                cur.bump();
                match lex_string(&mut cur) {
                    Ok(text) => push(&mut tokens, TokenKind::Str(text)),
                    Err(msg) => errors.push(SyntaxDiagnostic::error(line, column, msg)),
                }
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(d) = cur.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    digits.push(d);
                    cur.bump();
                }
                match digits.parse::<u64>() {
                    Ok(n) => push(&mut tokens, TokenKind::Number(n)),
                    Err(_) => errors.push(SyntaxDiagnostic::error(line, column, "number literal out of range")),
                }
            }
            c if is_ident_start(c) => {
                let name = cur.take_ident();
                let kind = if name == "ret" { TokenKind::Ret } else { TokenKind::Ident(name) };
                push(&mut tokens, kind);
            }
            other => {
                cur.bump();
                errors.push(SyntaxDiagnostic::error(line, column, format!("unknown token `{other}`")));
            }
        }
    }

    if errors.is_empty() {
        tokens.push(Token {
            kind: TokenKind::Eof,
            line: cur.line,
            column: cur.column,
        });
        Ok(tokens)
    } else {
        Err(errors)
    }
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<String, String> {
    let mut text = String::new();
    let mut bad: Option<String> = None;
    loop {
        match cur.peek() {
            None | Some('\n') => return Err("unterminated string literal".into()),
            Some('"') => {
                cur.bump();
                break;
            }
            Some('\\') => {
                cur.bump();
                match cur.peek() {
                    Some(e @ ('"' | '\\')) => {
                        cur.bump();
                        text.push(e);
                    }
                    None | Some('\n') => return Err("unterminated string literal".into()),
                    Some(e) => {
                        cur.bump();
                        bad.get_or_insert_with(|| format!("unsupported escape sequence `\\{e}`"));
                    }
                }
            }
            Some(c) => {
                cur.bump();
                if !c.is_ascii() {
                    bad.get_or_insert_with(|| format!("non-ASCII character `{c}` in string literal"));
                }
                text.push(c);
            }
        }
    }
    match bad {
        Some(msg) => Err(msg),
        None => Ok(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_assignment_with_comment() {
        assert_eq!(
            kinds("$c1 = is_in(\"canon\", $r)    # condition 1\n"),
            vec![
                TokenKind::Variable("c1".into()),
                TokenKind::Assign,
                TokenKind::Ident("is_in".into()),
                TokenKind::LParen,
                TokenKind::Str("canon".into()),
                TokenKind::Comma,
                TokenKind::Variable("r".into()),
                TokenKind::RParen,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn string_escapes() {
        assert_eq!(kinds(r#""a\"b\\c""#)[0], TokenKind::Str("a\"b\\c".into()));
        let err = tokenize(r#""a\nb""#).unwrap_err();
        assert!(err[0].message.contains("unsupported escape"));
    }

    #[test]
    fn unterminated_string_points_at_quote() {
        let err = tokenize("ret is_in(\"abc, $r)").unwrap_err();
        assert_eq!((err[0].line, err[0].column), (1, 11));
        assert!(err[0].message.contains("unterminated"));
    }

    #[test]
    fn unknown_tokens_all_reported() {
        let err = tokenize("ret @ ~").unwrap_err();
        assert_eq!(err.len(), 2);
        assert_eq!(err[1].column, 7);
    }

    #[test]
    fn positions_track_lines() {
        let toks = tokenize("\n\n  ret $x").unwrap();
        assert_eq!((toks[0].line, toks[0].column), (3, 3));
        assert_eq!((toks[1].line, toks[1].column), (3, 7));
    }
}
