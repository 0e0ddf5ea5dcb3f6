//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | power
//! power  := atom ['^' factor]
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x1^2`
//! parses as `-(x1^2)` and `x1^-2` is accepted. Identifiers are `t`, `x1`,
//! `x2`, `pi` and the function names. Numbers are decimal with an optional
//! exponent.

use super::{BinOp, Expr, Func, Var};
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let start = self.pos;
            match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    self.pos += 1;
                }
                b'+' => {
                    out.push((Tok::Plus, start));
                    self.pos += 1;
                }
                b'-' => {
                    out.push((Tok::Minus, start));
                    self.pos += 1;
                }
                b'*' => {
                    out.push((Tok::Star, start));
                    self.pos += 1;
                }
                b'/' => {
                    out.push((Tok::Slash, start));
                    self.pos += 1;
                }
                b'^' => {
                    out.push((Tok::Caret, start));
                    self.pos += 1;
                }
                b'(' => {
                    out.push((Tok::LParen, start));
                    self.pos += 1;
                }
                b')' => {
                    out.push((Tok::RParen, start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'.' => {
                    out.push((self.number(start)?, start));
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    let name = std::str::from_utf8(&self.src[start..self.pos])
                        .unwrap()
                        .to_string();
                    out.push((Tok::Ident(name), start));
                }
                other => {
                    return Err(ParseError::Syntax {
                        offset: start,
                        msg: format!("unexpected character `{}`", other as char),
                    })
                }
            }
        }
        Ok(out)
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // `e` belongs to something else (there are no identifiers
                // starting mid-number, so this is an error)
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Tok::Num).map_err(|_| ParseError::Syntax {
            offset: start,
            msg: format!("invalid number literal `{text}`"),
        })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.idx)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        match self.bump() {
            Some((t, _)) if t == tok => Ok(()),
            Some((_, o)) => Err(ParseError::Syntax {
                offset: o,
                msg: format!("expected {what}"),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end,
                msg: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some((Tok::Plus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::bin(BinOp::Add, lhs, rhs);
                }
                Some((Tok::Minus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::bin(BinOp::Sub, lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some((Tok::Star, _)) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::bin(BinOp::Mul, lhs, rhs);
                }
                Some((Tok::Slash, _)) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::bin(BinOp::Div, lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some((Tok::Minus, _))) {
            self.bump();
            // fold a negated literal so that `-2` and the constant-folded
            // Num(-2.0) share one canonical AST
            return Ok(match self.factor()? {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::neg(other),
            });
        }
        let base = self.atom()?;
        if matches!(self.peek(), Some((Tok::Caret, _))) {
            self.bump();
            let expo = self.factor()?;
            return Ok(Expr::bin(BinOp::Pow, base, expo));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Some((Tok::Num(v), _)) => Ok(Expr::Num(v)),
            Some((Tok::LParen, _)) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some((Tok::Ident(name), off)) => match name.as_str() {
                "t" => Ok(Expr::Var(Var::T)),
                "x1" => Ok(Expr::Var(Var::X1)),
                "x2" => Ok(Expr::Var(Var::X2)),
                "pi" => Ok(Expr::Pi),
                other => {
                    if let Some(f) = Func::from_name(other) {
                        if !matches!(self.peek(), Some((Tok::LParen, _))) {
                            return Err(ParseError::Arity { name, offset: off });
                        }
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::fun(f, arg))
                    } else {
                        Err(ParseError::UnknownIdentifier { name, offset: off })
                    }
                }
            },
            Some((_, o)) => Err(ParseError::Syntax {
                offset: o,
                msg: "expected a number, identifier or `(`".into(),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end,
                msg: "expected a number, identifier or `(`, found end of input".into(),
            }),
        }
    }
}

/// Parse expression text into an AST.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            msg: "empty expression".into(),
        });
    }
    let toks = Lexer::new(source).tokens()?;
    let mut parser = Parser {
        toks,
        idx: 0,
        end: source.len(),
    };
    let e = parser.expr()?;
    if let Some((_, o)) = parser.peek() {
        return Err(ParseError::Syntax {
            offset: *o,
            msg: "trailing input".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_function_call_reports_offset() {
        match parse_expr("log(") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_offset() {
        match parse_expr("2*foo+1") {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn function_without_parens_is_arity_error() {
        assert!(matches!(parse_expr("sin+1"), Err(ParseError::Arity { .. })));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(parse_expr("   ").is_err());
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(parse_expr("2.5e-3").unwrap(), Expr::Num(0.0025));
        assert_eq!(parse_expr("1E+2").unwrap(), Expr::Num(100.0));
    }
}
