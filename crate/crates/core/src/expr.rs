//! Polynomial expressions: a recursive-descent parser, an evaluator and
//! symbolic differentiation.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (("+" | "-") product)*
//! product := unary ("*" unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" ["-"] integer)?
//! atom    := number | variable | "(" sum ")"
//! ```
//!
//! Variables are `x1..xn`; for `n <= 4` the aliases `x, y, z, w` are accepted.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("exponent at byte {offset} is not an integer literal")]
    NonIntegerExponent { offset: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Pow(a, n) => a.eval(x).powi(*n),
        }
    }

    /// Symbolic partial derivative in variable `var`, lightly simplified.
    pub fn derivative(&self, var: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Pow(a, n) => {
                let n = *n;
                if n == 0 {
                    return Num(0.0);
                }
                let inner = if n - 1 == 1 { (**a).clone() } else { pow((**a).clone(), n - 1) };
                mul(mul(Num(n as f64), inner), a.derivative(var))
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        use Expr::*;
        match self {
            Num(_) => None,
            Var(i) => Some(*i),
            Neg(a) | Pow(a, _) => a.max_var(),
            Add(a, b) | Sub(a, b) | Mul(a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(c) if *c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(c) if *c == 1.0)
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(p), Expr::Num(q)) => Expr::Num(p + q),
        (a, b) if a.is_zero() => b,
        (a, b) if b.is_zero() => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(p), Expr::Num(q)) => Expr::Num(p - q),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(p), Expr::Num(q)) => Expr::Num(p * q),
        (a, _) if a.is_zero() => Expr::Num(0.0),
        (_, b) if b.is_zero() => Expr::Num(0.0),
        (a, b) if a.is_one() => b,
        (a, b) if b.is_one() => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, n: i32) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(c.powi(n)),
        a if n == 1 => a,
        a => Expr::Pow(Box::new(a), n),
    }
}

const ALIASES: [&str; 4] = ["x", "y", "z", "w"];

/// Printed with the same variable naming the parser accepts for `dim`.
pub struct Display<'a> {
    expr: &'a Expr,
    dim: usize,
}

impl Expr {
    pub fn display(&self, dim: usize) -> Display<'_> {
        Display { expr: self, dim }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.dim, 0)
    }
}

// precedence levels: 0 sum, 1 product, 2 unary, 3 power, 4 atom
fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, dim: usize, min_prec: u8) -> fmt::Result {
    let prec = match e {
        Expr::Add(..) | Expr::Sub(..) => 0,
        Expr::Mul(..) => 1,
        Expr::Neg(_) => 2,
        Expr::Pow(..) => 3,
        Expr::Num(c) if *c < 0.0 => 2,
        Expr::Num(_) | Expr::Var(_) => 4,
    };
    let paren = prec < min_prec;
    if paren {
        f.write_str("(")?;
    }
    match e {
        Expr::Num(c) => write!(f, "{c}")?,
        Expr::Var(i) => {
            if dim <= 4 {
                f.write_str(ALIASES[*i])?
            } else {
                write!(f, "x{}", i + 1)?
            }
        }
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_expr(f, a, dim, 2)?;
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            write_expr(f, a, dim, 0)?;
            f.write_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " })?;
            write_expr(f, b, dim, 1)?;
        }
        Expr::Mul(a, b) => {
            write_expr(f, a, dim, 1)?;
            f.write_str("*")?;
            write_expr(f, b, dim, 2)?;
        }
        Expr::Pow(a, n) => {
            write_expr(f, a, dim, 4)?;
            write!(f, "^{n}")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num { value: f64, integral: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((i, Tok::Plus));
                i += 1
            }
            b'-' => {
                out.push((i, Tok::Minus));
                i += 1
            }
            b'*' => {
                out.push((i, Tok::Star));
                i += 1
            }
            b'^' => {
                out.push((i, Tok::Caret));
                i += 1
            }
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                let mut integral = true;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    integral = false;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let save = i;
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    if i < bytes.len() && bytes[i].is_ascii_digit() {
                        integral = false;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("bad number literal `{lit}`"),
                })?;
                out.push((start, Tok::Num { value, integral }));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                // U+2212 MINUS SIGN is accepted as '-'
                if text[i..].starts_with('\u{2212}') {
                    out.push((i, Tok::Minus));
                    i += '\u{2212}'.len_utf8();
                } else {
                    return Err(ParseError::Syntax {
                        offset: i,
                        message: format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                    });
                }
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    dim: usize,
    _text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { offset: self.offset(), message: message.into() }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.product()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.product()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let offset = self.offset();
            let negative = if let Some(Tok::Minus) = self.peek() {
                self.pos += 1;
                true
            } else {
                false
            };
            match self.peek().cloned() {
                Some(Tok::Num { value, integral: true }) if value <= i32::MAX as f64 => {
                    self.pos += 1;
                    let n = value as i32;
                    return Ok(Expr::Pow(Box::new(base), if negative { -n } else { n }));
                }
                Some(Tok::Num { .. }) | Some(Tok::Ident(_)) | Some(Tok::LParen) => {
                    return Err(ParseError::NonIntegerExponent { offset })
                }
                _ => return Err(self.err("expected integer exponent")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num { value, .. }) => {
                self.pos += 1;
                Ok(Expr::Num(value))
            }
            Some(Tok::Ident(name)) => {
                let offset = self.offset();
                let idx = variable_index(&name, self.dim).ok_or_else(|| ParseError::Syntax {
                    offset,
                    message: format!("unknown variable `{name}` for dimension {}", self.dim),
                })?;
                self.pos += 1;
                Ok(Expr::Var(idx))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.sum()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(_) => Err(self.err("expected number, variable or `(`")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

fn variable_index(name: &str, dim: usize) -> Option<usize> {
    if dim <= 4 {
        if let Some(i) = ALIASES.iter().position(|a| *a == name) {
            return (i < dim).then_some(i);
        }
    }
    let idx: usize = name.strip_prefix('x')?.parse().ok()?;
    (idx >= 1 && idx <= dim).then(|| idx - 1)
}

/// Parse `text` as a polynomial expression in `dim` variables.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), dim, _text: text };
    let e = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}
