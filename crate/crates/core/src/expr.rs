//! Expression language for constraint functions and objectives.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?            right associative
//! atom    := number | 'e' | 'x' index | func '(' args ')' | '(' expr ')'
//! func    := exp | log | step | pow | min | max
//! ```
//!
//! Coordinates are written `x1 .. xn` (1-based). `^` binds tighter than a
//! leading minus, so `-x1^2` is `-(x1^2)`. `step(t)` is 1 for `t >= 0` and 0
//! otherwise. Numbers accept scientific notation (`1.5e-3`).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("coordinate x{index} at byte {offset} is out of range for dimension {dim}")]
    CoordinateOutOfRange {
        offset: usize,
        index: usize,
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogDomain(f64),
    #[error("non-integer power of non-positive base {0}")]
    PowDomain(f64),
    #[error("non-finite intermediate result")]
    NonFinite,
    #[error("point has dimension {got}, expected at least {expected}")]
    Dimension { got: usize, expected: usize },
}

/// Abstract syntax tree of a real-valued function on R^n.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Step(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Largest coordinate index referenced plus one (0 for constants).
    pub fn arity(&self) -> usize {
        use Expr::*;
        match self {
            Const(_) => 0,
            Var(i) => i + 1,
            Neg(a) | Exp(a) | Log(a) | Step(a) => a.arity(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) | Min(a, b) | Max(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        use Expr::*;
        let v = match self {
            Const(c) => *c,
            Var(i) => *point.get(*i).ok_or(EvalError::Dimension {
                got: point.len(),
                expected: i + 1,
            })?,
            Neg(a) => -a.eval(point)?,
            Add(a, b) => a.eval(point)? + b.eval(point)?,
            Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Div(a, b) => {
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(point)? / den
            }
            Pow(a, b) => pow(a.eval(point)?, b.eval(point)?)?,
            Exp(a) => a.eval(point)?.exp(),
            Log(a) => {
                let x = a.eval(point)?;
                if x <= 0.0 {
                    return Err(EvalError::LogDomain(x));
                }
                x.ln()
            }
            Step(a) => {
                if a.eval(point)? >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Min(a, b) => a.eval(point)?.min(b.eval(point)?),
            Max(a, b) => a.eval(point)?.max(b.eval(point)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(base.powi(exponent as i32))
    } else if base > 0.0 {
        Ok(base.powf(exponent))
    } else {
        Err(EvalError::PowDomain(base))
    }
}

/// Prints a fully parenthesised form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Const(c) => {
                if *c < 0.0 {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Var(i) => write!(f, "x{}", i + 1),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "pow({a}, {b})"),
            Exp(a) => write!(f, "exp({a})"),
            Log(a) => write!(f, "log({a})"),
            Step(a) => write!(f, "step({a})"),
            Min(a, b) => write!(f, "min({a}, {b})"),
            Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

/// Parses `text` into an expression over `dim` coordinates.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        dim,
        len: text.len(),
    };
    let e = parser.expr()?;
    match parser.peek() {
        None => Ok(e),
        Some((off, tok)) => Err(ParseError::Syntax {
            offset: off,
            message: format!("unexpected {tok:?}"),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only when followed by digits, so `2*e` stays a constant
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("bad number `{lit}`"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((start, tok));
        i += c.len_utf8();
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    dim: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<(usize, &Tok)> {
        self.tokens.get(self.pos).map(|(o, t)| (*o, t))
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.len, |(o, _)| o)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if let Some((_, Tok::Op(c))) = self.peek() {
            if *c == op {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some((_, t)) if *t == tok => {
                self.pos += 1;
                Ok(())
            }
            other => Err(ParseError::Syntax {
                offset: self.offset(),
                message: format!("expected {tok:?}, found {:?}", other.map(|(_, t)| t)),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn args(&mut self, n: usize) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                self.expect(Tok::Comma)?;
            }
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (off, tok) = match self.peek() {
            Some((o, t)) => (o, t.clone()),
            None => {
                return Err(ParseError::Syntax {
                    offset: self.len,
                    message: "unexpected end of input".into(),
                })
            }
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(off, &name),
            other => Err(ParseError::Syntax {
                offset: off,
                message: format!("unexpected {other:?}"),
            }),
        }
    }

    fn ident(&mut self, off: usize, name: &str) -> Result<Expr, ParseError> {
        let unary = |f: fn(Box<Expr>) -> Expr, p: &mut Parser| -> Result<Expr, ParseError> {
            let mut a = p.args(1)?;
            Ok(f(Box::new(a.remove(0))))
        };
        let binary =
            |f: fn(Box<Expr>, Box<Expr>) -> Expr, p: &mut Parser| -> Result<Expr, ParseError> {
                let mut a = p.args(2)?;
                let rhs = a.pop().expect("two args");
                let lhs = a.pop().expect("two args");
                Ok(f(Box::new(lhs), Box::new(rhs)))
            };
        match name {
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            "exp" => unary(Expr::Exp, self),
            "log" => unary(Expr::Log, self),
            "step" => unary(Expr::Step, self),
            "pow" => binary(Expr::Pow, self),
            "min" => binary(Expr::Min, self),
            "max" => binary(Expr::Max, self),
            _ => {
                if let Some(digits) = name.strip_prefix('x') {
                    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                        let index: usize = digits.parse().unwrap_or(usize::MAX);
                        if index == 0 || index > self.dim {
                            return Err(ParseError::CoordinateOutOfRange {
                                offset: off,
                                index,
                                dim: self.dim,
                            });
                        }
                        return Ok(Expr::Var(index - 1));
                    }
                }
                Err(ParseError::UnknownIdentifier {
                    offset: off,
                    name: name.to_string(),
                })
            }
        }
    }
}
