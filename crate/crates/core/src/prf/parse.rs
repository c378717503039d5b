//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! program  := { binding } expr? ;
//! binding  := NAME "=" expr ";"? ;
//! expr     := "zero" | "succ" | "proj" "(" INT "," INT ")"
//!           | "compose" "(" expr "," "[" expr { "," expr } "]" ")"
//!           | "primrec" "(" expr "," expr ")" | NAME ;
//! ```
//!
//! Whitespace and `#`-to-end-of-line comments are ignored. Bindings are
//! single-assignment and may reference earlier names; referencing a name
//! splices in the bound expression.

use super::{ExprError, PrfExpr};
use std::collections::BTreeMap;
use thiserror::Error;

const KEYWORDS: [&str; 5] = ["zero", "succ", "proj", "compose", "primrec"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Unexpected {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: unknown name `{name}`")]
    UnknownName { line: u32, col: u32, name: String },
    #[error("{line}:{col}: `{name}` is already bound (bindings are single-assignment)")]
    DuplicateName { line: u32, col: u32, name: String },
    #[error("{line}:{col}: `{name}` is a reserved word and cannot be bound")]
    ReservedName { line: u32, col: u32, name: String },
    #[error("{line}:{col}: {source}")]
    Invalid {
        line: u32,
        col: u32,
        source: ExprError,
    },
    #[error("{line}:{col}: integer literal out of range")]
    IntOutOfRange { line: u32, col: u32 },
    #[error("program has no expression to return")]
    Empty,
}

/// A parsed DSL program: bindings in definition order plus an optional
/// trailing expression.
#[derive(Debug, Clone)]
pub struct Program {
    pub bindings: Vec<(String, PrfExpr)>,
    pub main: Option<PrfExpr>,
}

impl Program {
    /// Looks up a bound name.
    pub fn get(&self, name: &str) -> Option<&PrfExpr> {
        self.bindings
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
    }

    /// The program's result: the trailing expression if present, otherwise
    /// the last binding.
    pub fn result(&self) -> Option<&PrfExpr> {
        self.main
            .as_ref()
            .or_else(|| self.bindings.last().map(|(_, e)| e))
    }
}

/// Parses a whole program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    Parser::new(text).program()
}

/// Parses a program and returns its result expression (trailing expression,
/// or the last binding's value).
pub fn parse_prf(text: &str) -> Result<PrfExpr, ParseError> {
    let program = parse_program(text)?;
    program.result().cloned().ok_or(ParseError::Empty)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Int(u64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Equals,
    Semi,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, u32, u32)>,
    pos: usize,
    env: BTreeMap<String, PrfExpr>,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser {
            toks: lex(text),
            pos: 0,
            env: BTreeMap::new(),
        }
    }

    fn peek(&self) -> &(Tok, u32, u32) {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> (Tok, u32, u32) {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(u32, u32), ParseError> {
        let (tok, line, col) = self.bump();
        if tok == want {
            Ok((line, col))
        } else {
            Err(ParseError::Unexpected {
                line,
                col,
                expected: want.describe(),
                found: tok.describe(),
            })
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut bindings = Vec::new();
        let mut main = None;
        loop {
            match (&self.peek().0, self.peek2()) {
                (Tok::Eof, _) => break,
                (Tok::Name(_), Tok::Equals) => {
                    let (tok, line, col) = self.bump();
                    let name = match tok {
                        Tok::Name(n) => n,
                        _ => unreachable!(),
                    };
                    if KEYWORDS.contains(&name.as_str()) {
                        return Err(ParseError::ReservedName { line, col, name });
                    }
                    if self.env.contains_key(&name) {
                        return Err(ParseError::DuplicateName { line, col, name });
                    }
                    self.expect(Tok::Equals)?;
                    let expr = self.expr()?;
                    if self.peek().0 == Tok::Semi {
                        self.bump();
                    }
                    self.env.insert(name.clone(), expr.clone());
                    bindings.push((name, expr));
                }
                _ => {
                    let expr = self.expr()?;
                    if self.peek().0 == Tok::Semi {
                        self.bump();
                    }
                    let (tok, line, col) = self.bump();
                    if tok != Tok::Eof {
                        return Err(ParseError::Unexpected {
                            line,
                            col,
                            expected: "end of input".into(),
                            found: tok.describe(),
                        });
                    }
                    main = Some(expr);
                    break;
                }
            }
        }
        Ok(Program { bindings, main })
    }

    fn expr(&mut self) -> Result<PrfExpr, ParseError> {
        let (tok, line, col) = self.bump();
        match tok {
            Tok::Name(name) => match name.as_str() {
                "zero" => Ok(PrfExpr::Zero),
                "succ" => Ok(PrfExpr::Succ),
                "proj" => {
                    self.expect(Tok::LParen)?;
                    let k = self.int()?;
                    self.expect(Tok::Comma)?;
                    let i = self.int()?;
                    self.expect(Tok::RParen)?;
                    PrfExpr::proj(k, i).map_err(|source| ParseError::Invalid { line, col, source })
                }
                "compose" => {
                    self.expect(Tok::LParen)?;
                    let g = self.expr()?;
                    self.expect(Tok::Comma)?;
                    self.expect(Tok::LBracket)?;
                    let mut hs = vec![self.expr()?];
                    while self.peek().0 == Tok::Comma {
                        self.bump();
                        hs.push(self.expr()?);
                    }
                    self.expect(Tok::RBracket)?;
                    self.expect(Tok::RParen)?;
                    PrfExpr::compose(g, hs)
                        .map_err(|source| ParseError::Invalid { line, col, source })
                }
                "primrec" => {
                    self.expect(Tok::LParen)?;
                    let h = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let g = self.expr()?;
                    self.expect(Tok::RParen)?;
                    PrfExpr::primrec(h, g)
                        .map_err(|source| ParseError::Invalid { line, col, source })
                }
                _ => self
                    .env
                    .get(&name)
                    .cloned()
                    .ok_or(ParseError::UnknownName { line, col, name }),
            },
            other => Err(ParseError::Unexpected {
                line,
                col,
                expected: "an expression".into(),
                found: other.describe(),
            }),
        }
    }

    fn int(&mut self) -> Result<u32, ParseError> {
        let (tok, line, col) = self.bump();
        match tok {
            Tok::Int(v) => u32::try_from(v).map_err(|_| ParseError::IntOutOfRange { line, col }),
            other => Err(ParseError::Unexpected {
                line,
                col,
                expected: "an integer".into(),
                found: other.describe(),
            }),
        }
    }
}

fn lex(text: &str) -> Vec<(Tok, u32, u32)> {
    let mut out = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' | ')' | '[' | ']' | ',' | '=' | ';' => {
                chars.next();
                col += 1;
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    '=' => Tok::Equals,
                    _ => Tok::Semi,
                };
                out.push((tok, tl, tc));
            }
            c if c.is_ascii_digit() => {
                let mut v: u64 = 0;
                while let Some(&d) = chars.peek() {
                    if let Some(digit) = d.to_digit(10) {
                        v = v.saturating_mul(10).saturating_add(digit as u64);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push((Tok::Int(v), tl, tc));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push((Tok::Name(name), tl, tc));
            }
            other => {
                // An unknown character lexes as a zero-length "name" so the
                // parser reports it with its position.
                chars.next();
                col += 1;
                out.push((Tok::Name(other.to_string()), tl, tc));
            }
        }
    }
    out.push((Tok::Eof, line, col));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_constructor() {
        assert_eq!(parse_prf("zero").unwrap(), PrfExpr::Zero);
    }

    #[test]
    fn add_binding_parses_to_expected_ast() {
        let got = parse_prf("add = primrec(proj(1,1), compose(succ, [proj(3,3)]))").unwrap();
        let want = PrfExpr::primrec(
            PrfExpr::proj(1, 1).unwrap(),
            PrfExpr::compose(PrfExpr::Succ, vec![PrfExpr::proj(3, 3).unwrap()]).unwrap(),
        )
        .unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn compose_arity_mismatch_reports_both_arities() {
        let err = parse_prf("compose(succ, [proj(2,1), proj(2,2)])").unwrap_err();
        match err {
            ParseError::Invalid {
                source: ExprError::ComposeArity { expected, found },
                ..
            } => {
                assert_eq!((expected, found), (1, 2));
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn names_resolve_to_earlier_bindings() {
        let text = "pred2 = primrec(zero, proj(3,2))\npred = compose(pred2, [proj(1,1), proj(1,1)])\npred";
        let program = parse_program(text).unwrap();
        assert_eq!(program.bindings.len(), 2);
        let main = program.main.unwrap();
        assert_eq!(main.arity(), 1);
    }

    #[test]
    fn unknown_name_has_position() {
        let err = parse_prf("compose(succ, [mystery])").unwrap_err();
        match err {
            ParseError::UnknownName { name, line, col } => {
                assert_eq!(name, "mystery");
                assert_eq!(line, 1);
                assert_eq!(col, 16);
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn duplicate_binding_rejected() {
        let err = parse_program("a = zero\na = succ").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateName { .. }));
    }

    #[test]
    fn reserved_names_rejected() {
        let err = parse_program("zero = succ").unwrap_err();
        assert!(matches!(err, ParseError::ReservedName { .. }));
    }

    #[test]
    fn comments_and_semicolons_ignored() {
        let text = "# the two-argument adder\nadd = primrec(proj(1,1), compose(succ, [proj(3,3)]));\nadd # use it\n";
        assert_eq!(parse_prf(text).unwrap().arity(), 2);
    }

    #[test]
    fn binding_alone_returns_its_value() {
        let e = parse_prf("f = compose(succ, [succ])").unwrap();
        assert_eq!(
            e,
            PrfExpr::compose(PrfExpr::Succ, vec![PrfExpr::Succ]).unwrap()
        );
    }

    #[test]
    fn syntax_error_positions() {
        let err = parse_prf("proj(2 2)").unwrap_err();
        match err {
            ParseError::Unexpected { line, col, .. } => {
                assert_eq!(line, 1);
                assert_eq!(col, 8);
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }
}
