//! Infix ASCII polynomial syntax: `-9 + 5/16*x`, `x^2 - 2*x*w`, `x >= 2`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::poly::{ParamPoly, Rational, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("column {column}: {message}")]
pub struct ExprError {
    /// 1-based column inside the expression text.
    pub column: usize,
    pub message: String,
}

/// Comparison operator of a polynomial inequality `lhs op rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Ge,
    Gt,
    Le,
    Lt,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
        }
    }

    pub fn holds(self, lhs: &Rational) -> bool {
        match self {
            Cmp::Ge => *lhs >= Rational::zero(),
            Cmp::Gt => *lhs > Rational::zero(),
            Cmp::Le => *lhs <= Rational::zero(),
            Cmp::Lt => *lhs < Rational::zero(),
        }
    }

    pub fn holds_f64(self, lhs: f64) -> bool {
        match self {
            Cmp::Ge => lhs >= 0.0,
            Cmp::Gt => lhs > 0.0,
            Cmp::Le => lhs <= 0.0,
            Cmp::Lt => lhs < 0.0,
        }
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational, bool),
    Ident(String),
    Op(char),
    Cmp(Cmp),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_whitespace() {
                lx.pos += 1;
            }
            let start = lx.pos;
            let Some(&c) = lx.src.get(lx.pos) else {
                out.push((Tok::End, start + 1));
                return Ok(out);
            };
            let tok = if c.is_ascii_digit() || c == b'.' {
                lx.number()?
            } else if c.is_ascii_alphabetic() || c == b'_' {
                while lx.pos < lx.src.len()
                    && (lx.src[lx.pos].is_ascii_alphanumeric() || lx.src[lx.pos] == b'_')
                {
                    lx.pos += 1;
                }
                Tok::Ident(String::from_utf8_lossy(&lx.src[start..lx.pos]).into_owned())
            } else if c == b'>' || c == b'<' {
                lx.pos += 1;
                let eq = lx.src.get(lx.pos) == Some(&b'=');
                if eq {
                    lx.pos += 1;
                }
                Tok::Cmp(match (c, eq) {
                    (b'>', true) => Cmp::Ge,
                    (b'>', false) => Cmp::Gt,
                    (_, true) => Cmp::Le,
                    _ => Cmp::Lt,
                })
            } else if b"+-*/^()".contains(&c) {
                lx.pos += 1;
                Tok::Op(c as char)
            } else {
                return Err(ExprError {
                    column: start + 1,
                    message: format!("unexpected character `{}`", c as char),
                });
            };
            out.push((tok, start + 1));
        }
    }

    fn number(&mut self) -> Result<Tok, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let fs = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let frac = std::str::from_utf8(&self.src[fs..self.pos]).unwrap_or("");
            if int_part.is_empty() && frac.is_empty() {
                return Err(ExprError {
                    column: start + 1,
                    message: "malformed number".into(),
                });
            }
            let digits: BigInt = format!("{int_part}{frac}0").parse().unwrap_or_default();
            let scale = num_traits::pow(BigInt::from(10), frac.len() + 1);
            return Ok(Tok::Num(Rational::new(digits, scale), true));
        }
        let n: BigInt = int_part.parse().map_err(|_| ExprError {
            column: start + 1,
            message: "malformed number".into(),
        })?;
        Ok(Tok::Num(Rational::from_integer(n), false))
    }
}

/// Recursive-descent parser producing a [`ParamPoly`].
pub struct ExprParser<'r> {
    resolve: &'r dyn Fn(&str) -> Option<Var>,
    allow_decimals: bool,
}

struct Cursor {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Cursor {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }
    fn col(&self) -> usize {
        self.toks[self.i].1
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.col(),
            message: msg.into(),
        })
    }
}

impl<'r> ExprParser<'r> {
    pub fn new(resolve: &'r dyn Fn(&str) -> Option<Var>) -> Self {
        ExprParser {
            resolve,
            allow_decimals: true,
        }
    }

    /// Reject decimal literals such as `0.5` (exact rational inputs only).
    pub fn exact_only(mut self) -> Self {
        self.allow_decimals = false;
        self
    }

    pub fn parse_poly(&self, src: &str) -> Result<ParamPoly, ExprError> {
        let mut cur = Cursor {
            toks: Lexer::tokens(src)?,
            i: 0,
        };
        let p = self.expr(&mut cur)?;
        if *cur.peek() != Tok::End {
            return cur.err("unexpected trailing input");
        }
        Ok(p)
    }

    /// Parse `lhs op rhs` into `(lhs - rhs, op)`.
    pub fn parse_ineq(&self, src: &str) -> Result<(ParamPoly, Cmp), ExprError> {
        let mut cur = Cursor {
            toks: Lexer::tokens(src)?,
            i: 0,
        };
        let lhs = self.expr(&mut cur)?;
        let op = match cur.bump() {
            Tok::Cmp(c) => c,
            _ => {
                cur.i = cur.i.saturating_sub(1);
                return cur.err("expected a comparison (>=, >, <=, <)");
            }
        };
        let rhs = self.expr(&mut cur)?;
        if *cur.peek() != Tok::End {
            return cur.err("unexpected trailing input");
        }
        Ok((&lhs - &rhs, op))
    }

    fn expr(&self, cur: &mut Cursor) -> Result<ParamPoly, ExprError> {
        let mut acc = self.term(cur)?;
        loop {
            match cur.peek() {
                Tok::Op('+') => {
                    cur.bump();
                    acc = &acc + &self.term(cur)?;
                }
                Tok::Op('-') => {
                    cur.bump();
                    acc = &acc - &self.term(cur)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&self, cur: &mut Cursor) -> Result<ParamPoly, ExprError> {
        let mut acc = self.unary(cur)?;
        loop {
            match cur.peek() {
                Tok::Op('*') => {
                    cur.bump();
                    acc = &acc * &self.unary(cur)?;
                }
                Tok::Op('/') => {
                    cur.bump();
                    let col = cur.col();
                    let d = self.unary(cur)?;
                    let k = match d.to_concrete() {
                        Some(c) if c.is_constant() && !c.constant_term().is_zero() => {
                            c.constant_term()
                        }
                        _ => {
                            return Err(ExprError {
                                column: col,
                                message: "division only by a nonzero constant".into(),
                            })
                        }
                    };
                    acc = acc.scale(&crate::poly::Coeff::constant(Rational::one() / k));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&self, cur: &mut Cursor) -> Result<ParamPoly, ExprError> {
        match cur.peek() {
            Tok::Op('-') => {
                cur.bump();
                Ok(-&self.unary(cur)?)
            }
            Tok::Op('+') => {
                cur.bump();
                self.unary(cur)
            }
            _ => self.power(cur),
        }
    }

    fn power(&self, cur: &mut Cursor) -> Result<ParamPoly, ExprError> {
        let base = self.atom(cur)?;
        if *cur.peek() == Tok::Op('^') {
            cur.bump();
            match cur.bump() {
                Tok::Num(n, false) if n.is_integer() => {
                    let e: u32 = n.numer().try_into().map_err(|_| ExprError {
                        column: cur.col(),
                        message: "exponent too large".into(),
                    })?;
                    if e > 64 {
                        return cur.err("exponent too large");
                    }
                    Ok(base.pow(e))
                }
                _ => {
                    cur.i = cur.i.saturating_sub(1);
                    cur.err("exponent must be a non-negative integer literal")
                }
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&self, cur: &mut Cursor) -> Result<ParamPoly, ExprError> {
        let col = cur.col();
        match cur.bump() {
            Tok::Num(n, decimal) => {
                if decimal && !self.allow_decimals {
                    return Err(ExprError {
                        column: col,
                        message: "floating-point literal not allowed; write an exact rational such as 1/2".into(),
                    });
                }
                Ok(ParamPoly::rational(n))
            }
            Tok::Ident(name) => match (self.resolve)(&name) {
                Some(v) => Ok(ParamPoly::var(v)),
                None => Err(ExprError {
                    column: col,
                    message: format!("unknown variable `{name}`"),
                }),
            },
            Tok::Op('(') => {
                let inner = self.expr(cur)?;
                if *cur.peek() != Tok::Op(')') {
                    return cur.err("expected `)`");
                }
                cur.bump();
                Ok(inner)
            }
            Tok::End => Err(ExprError {
                column: col,
                message: "unexpected end of expression".into(),
            }),
            _ => Err(ExprError {
                column: col,
                message: "expected a number, variable or `(`".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, rat};

    fn resolve(name: &str) -> Option<Var> {
        match name {
            "x" => Some(Var::State(0)),
            "y" => Some(Var::State(1)),
            "w" => Some(Var::Noise(0)),
            "u" => Some(Var::Input(0)),
            _ => None,
        }
    }

    fn parse(s: &str) -> ParamPoly {
        ExprParser::new(&resolve).parse_poly(s).unwrap()
    }

    #[test]
    fn parses_rational_linear() {
        let p = parse("-9 + 5/16*x");
        let x = ParamPoly::var(Var::State(0));
        assert_eq!(p, &ParamPoly::int(-9) + &(&ParamPoly::rational(rat(5, 16)) * &x));
    }

    #[test]
    fn precedence_and_powers() {
        let p = parse("2*x^2 - (x + w)*(x - w) + -3");
        assert_eq!(p.to_string(), "-3 + x1^2 + w1^2");
    }

    #[test]
    fn decimals_exact_or_rejected() {
        assert_eq!(parse("0.25*x"), parse("1/4*x"));
        let err = ExprParser::new(&resolve).exact_only().parse_poly("1 + 0.5*x").unwrap_err();
        assert_eq!(err.column, 5);
    }

    #[test]
    fn inequality_forms() {
        let (p, op) = ExprParser::new(&resolve).parse_ineq("x >= 2").unwrap();
        assert_eq!(op, Cmp::Ge);
        assert_eq!(p, parse("x - 2"));
        let (p, op) = ExprParser::new(&resolve).parse_ineq("x > 100").unwrap();
        assert_eq!((p, op), (parse("x - 100"), Cmp::Gt));
        assert!(Cmp::Lt.holds(&int(-1)));
    }

    #[test]
    fn errors_carry_columns() {
        let e = ExprParser::new(&resolve).parse_poly("x + z").unwrap_err();
        assert_eq!(e.column, 5);
        assert!(e.message.contains("`z`"));
        let e = ExprParser::new(&resolve).parse_poly("x / x").unwrap_err();
        assert_eq!(e.column, 5);
        let e = ExprParser::new(&resolve).parse_poly("(x + 1").unwrap_err();
        assert_eq!(e.column, 7);
        let e = ExprParser::new(&resolve).parse_poly("x $").unwrap_err();
        assert_eq!(e.column, 3);
    }
}
