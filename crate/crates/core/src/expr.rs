//! Scalar expression trees: parsing, evaluation, symbolic differentiation.
//!
//! Expressions are ASTs over f64 literals, coordinate symbols `x0..x{n+1}`,
//! the binary operators `+ - * / ^`, unary negation and the functions
//! `sin cos exp log sqrt`. The named constants `pi` and `e` fold to literals
//! at parse time. Trees are immutable and share subtrees through `Arc`, so
//! they are cheap to clone and safe to evaluate from any number of threads.
//!
//! Precedence is `^` over unary `-` over `* /` over `+ -`; `^` is
//! right-associative, everything else left-associative.

use crate::error::{Error, Result};
use crate::metric::Point;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// A scalar expression over the coordinates of an (n+2)-dimensional chart.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    /// Coordinate symbol by index, 0..=n+1.
    Coord(usize),
    Bin(BinOp, Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Arc<Expr> {
        Arc::new(Expr::Num(v))
    }

    pub fn coord(i: usize) -> Arc<Expr> {
        Arc::new(Expr::Coord(i))
    }

    pub fn zero() -> Arc<Expr> {
        Expr::num(0.0)
    }

    pub fn one() -> Arc<Expr> {
        Expr::num(1.0)
    }

    pub fn is_num(&self, v: f64) -> bool {
        matches!(self, Expr::Num(c) if *c == v)
    }

    /// Largest coordinate index referenced anywhere in the tree.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Bin(_, a, b) => match (a.max_coord(), b.max_coord()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Expr::Neg(a) | Expr::Call(_, a) => a.max_coord(),
        }
    }

    /// Whether the tree references the coordinate with the given index.
    pub fn depends_on(&self, k: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Coord(i) => *i == k,
            Expr::Bin(_, a, b) => a.depends_on(k) || b.depends_on(k),
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(k),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn apply_bin(op: BinOp, a: f64, b: f64) -> Result<f64> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(Error::Domain(format!("division by zero ({a} / 0)")))
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => pow(a, b),
    }
}

/// `a^b` with integer exponents routed through `powi` so that negative bases
/// stay exact; fractional powers of negative bases and negative powers of
/// zero are domain errors rather than silent NaN/inf.
fn pow(a: f64, b: f64) -> Result<f64> {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        let e = b as i32;
        if a == 0.0 && e < 0 {
            return Err(Error::Domain(format!("zero raised to negative power {e}")));
        }
        return Ok(a.powi(e));
    }
    if a < 0.0 {
        return Err(Error::Domain(format!(
            "negative base {a} raised to non-integer power {b}"
        )));
    }
    if a == 0.0 && b < 0.0 {
        return Err(Error::Domain(format!("zero raised to negative power {b}")));
    }
    Ok(a.powf(b))
}

fn apply_func(f: Func, x: f64) -> Result<f64> {
    match f {
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Exp => Ok(x.exp()),
        Func::Log => {
            if x <= 0.0 {
                Err(Error::Domain(format!("log of non-positive value {x}")))
            } else {
                Ok(x.ln())
            }
        }
        Func::Sqrt => {
            if x < 0.0 {
                Err(Error::Domain(format!("sqrt of negative value {x}")))
            } else {
                Ok(x.sqrt())
            }
        }
    }
}

/// Evaluate at a point. Domain violations (division by zero, `log` of a
/// non-positive argument, ...) are reported as errors, never as NaN.
pub fn eval_expr(e: &Expr, p: &Point) -> Result<f64> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Coord(i) => p
            .coords
            .get(*i)
            .copied()
            .ok_or_else(|| Error::Point(format!("point has no coordinate x{i}"))),
        Expr::Bin(op, a, b) => apply_bin(*op, eval_expr(a, p)?, eval_expr(b, p)?),
        Expr::Neg(a) => Ok(-eval_expr(a, p)?),
        Expr::Call(f, a) => apply_func(*f, eval_expr(a, p)?),
    }
}

/// Evaluation with a per-call memo keyed on shared subtrees. The symbolic
/// Christoffel tables share their inverse-metric factors through `Arc`, so
/// memoizing on node identity avoids re-walking those factors for every
/// tensor slot.
pub fn eval_memo(e: &Arc<Expr>, p: &Point, cache: &mut HashMap<usize, f64>) -> Result<f64> {
    let key = Arc::as_ptr(e) as usize;
    if let Some(v) = cache.get(&key) {
        return Ok(*v);
    }
    let v = match &**e {
        Expr::Num(v) => *v,
        Expr::Coord(i) => p
            .coords
            .get(*i)
            .copied()
            .ok_or_else(|| Error::Point(format!("point has no coordinate x{i}")))?,
        Expr::Bin(op, a, b) => apply_bin(*op, eval_memo(a, p, cache)?, eval_memo(b, p, cache)?)?,
        Expr::Neg(a) => -eval_memo(a, p, cache)?,
        Expr::Call(f, a) => apply_func(*f, eval_memo(a, p, cache)?)?,
    };
    cache.insert(key, v);
    Ok(v)
}

// ---------------------------------------------------------------------------
// Differentiation and simplification
// ---------------------------------------------------------------------------

fn bin(op: BinOp, a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    Arc::new(Expr::Bin(op, a, b))
}

fn add(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    bin(BinOp::Add, a, b)
}

fn sub(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    bin(BinOp::Sub, a, b)
}

fn mul(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    bin(BinOp::Mul, a, b)
}

fn div(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    bin(BinOp::Div, a, b)
}

fn powe(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    bin(BinOp::Pow, a, b)
}

fn neg(a: Arc<Expr>) -> Arc<Expr> {
    Arc::new(Expr::Neg(a))
}

fn call(f: Func, a: Arc<Expr>) -> Arc<Expr> {
    Arc::new(Expr::Call(f, a))
}

/// Exact symbolic partial derivative with respect to coordinate `k`.
///
/// The result is passed through [`simplify`]; simplification is best-effort
/// (constant folding plus 0/1 absorption), correctness is by evaluation.
pub fn diff_expr(e: &Arc<Expr>, k: usize) -> Arc<Expr> {
    simplify(&diff_raw(e, k))
}

fn diff_raw(e: &Arc<Expr>, k: usize) -> Arc<Expr> {
    match &**e {
        Expr::Num(_) => Expr::zero(),
        Expr::Coord(i) => {
            if *i == k {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Bin(BinOp::Add, a, b) => add(diff_raw(a, k), diff_raw(b, k)),
        Expr::Bin(BinOp::Sub, a, b) => sub(diff_raw(a, k), diff_raw(b, k)),
        Expr::Bin(BinOp::Mul, a, b) => add(
            mul(diff_raw(a, k), b.clone()),
            mul(a.clone(), diff_raw(b, k)),
        ),
        Expr::Bin(BinOp::Div, a, b) => div(
            sub(
                mul(diff_raw(a, k), b.clone()),
                mul(a.clone(), diff_raw(b, k)),
            ),
            powe(b.clone(), Expr::num(2.0)),
        ),
        Expr::Bin(BinOp::Pow, a, b) => match &**b {
            // d(u^c) = c * u^(c-1) * u'
            Expr::Num(c) => mul(
                mul(Expr::num(*c), powe(a.clone(), Expr::num(c - 1.0))),
                diff_raw(a, k),
            ),
            // d(u^v) = u^v * (v' * log u + v * u' / u)
            _ => mul(
                e.clone(),
                add(
                    mul(diff_raw(b, k), call(Func::Log, a.clone())),
                    div(mul(b.clone(), diff_raw(a, k)), a.clone()),
                ),
            ),
        },
        Expr::Neg(a) => neg(diff_raw(a, k)),
        Expr::Call(f, a) => {
            let da = diff_raw(a, k);
            let outer = match f {
                Func::Sin => call(Func::Cos, a.clone()),
                Func::Cos => neg(call(Func::Sin, a.clone())),
                Func::Exp => call(Func::Exp, a.clone()),
                Func::Log => div(Expr::one(), a.clone()),
                Func::Sqrt => div(Expr::one(), mul(Expr::num(2.0), call(Func::Sqrt, a.clone()))),
            };
            mul(outer, da)
        }
    }
}

/// Constant folding and additive/multiplicative identity elimination.
/// No canonical form is attempted.
pub fn simplify(e: &Arc<Expr>) -> Arc<Expr> {
    match &**e {
        Expr::Num(_) | Expr::Coord(_) => e.clone(),
        Expr::Neg(a) => {
            let a = simplify(a);
            match &*a {
                Expr::Num(v) => Expr::num(-v),
                Expr::Neg(inner) => inner.clone(),
                _ => neg(a),
            }
        }
        Expr::Call(f, a) => {
            let a = simplify(a);
            if let Expr::Num(v) = &*a {
                if let Ok(folded) = apply_func(*f, *v) {
                    if folded.is_finite() {
                        return Expr::num(folded);
                    }
                }
            }
            call(*f, a)
        }
        Expr::Bin(op, a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            if let (Expr::Num(x), Expr::Num(y)) = (&*a, &*b) {
                if let Ok(folded) = apply_bin(*op, *x, *y) {
                    if folded.is_finite() {
                        return Expr::num(folded);
                    }
                }
            }
            match op {
                BinOp::Add => {
                    if a.is_num(0.0) {
                        b
                    } else if b.is_num(0.0) {
                        a
                    } else {
                        add(a, b)
                    }
                }
                BinOp::Sub => {
                    if b.is_num(0.0) {
                        a
                    } else if a.is_num(0.0) {
                        simplify(&neg(b))
                    } else {
                        sub(a, b)
                    }
                }
                BinOp::Mul => {
                    if a.is_num(0.0) || b.is_num(0.0) {
                        Expr::zero()
                    } else if a.is_num(1.0) {
                        b
                    } else if b.is_num(1.0) {
                        a
                    } else {
                        mul(a, b)
                    }
                }
                BinOp::Div => {
                    if a.is_num(0.0) && !b.is_num(0.0) {
                        Expr::zero()
                    } else if b.is_num(1.0) {
                        a
                    } else {
                        div(a, b)
                    }
                }
                BinOp::Pow => {
                    if b.is_num(1.0) {
                        a
                    } else if b.is_num(0.0) {
                        Expr::one()
                    } else if a.is_num(1.0) {
                        Expr::one()
                    } else {
                        powe(a, b)
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn fmt_child(e: &Expr, parent: u8, tight: bool, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    // `tight` demands strictly higher precedence (non-associative side).
    let p = prec(e);
    let need = if tight { p <= parent } else { p < parent };
    if need {
        write!(out, "({e})")
    } else {
        write!(out, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(out, "{v}"),
            Expr::Coord(i) => write!(out, "x{i}"),
            Expr::Neg(a) => {
                write!(out, "-")?;
                fmt_child(a, 3, true, out)
            }
            Expr::Call(f, a) => write!(out, "{}({})", f.name(), a),
            Expr::Bin(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => (" + ", 1),
                    BinOp::Sub => (" - ", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    // right-associative: parenthesize an exponent-shaped lhs
                    fmt_child(a, p, true, out)?;
                    write!(out, "{sym}")?;
                    fmt_child(b, p, false, out)
                } else {
                    // right children of the left-associative operators keep
                    // their parens so reparsing reproduces the exact f64
                    // evaluation order, not just an equivalent one
                    fmt_child(a, p, false, out)?;
                    write!(out, "{sym}")?;
                    fmt_child(b, p, true, out)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

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

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let c = self.src[self.pos];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
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
                        .expect("ascii identifier")
                        .to_string();
                    out.push((Tok::Ident(name), start));
                }
                _ => {
                    return Err(Error::Syntax {
                        offset: start,
                        msg: format!("unexpected character `{}`", c as char),
                    })
                }
            }
        }
        Ok(out)
    }

    fn number(&mut self, start: usize) -> Result<Tok> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
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
                // not an exponent after all (e.g. `2*e`): back off
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>().map(Tok::Num).map_err(|_| Error::Syntax {
            offset: start,
            msg: format!("malformed number `{text}`"),
        })
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    n: usize,
    aliases: &'a HashMap<String, usize>,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.idx)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map(|(_, o)| *o).unwrap_or(self.src_len)
    }

    fn expr(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.term()?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.next();
            let rhs = self.term()?;
            lhs = bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.unary()?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.next();
            let rhs = self.unary()?;
            lhs = bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Arc<Expr>> {
        if let Some((Tok::Minus, _)) = self.peek() {
            self.next();
            return Ok(neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Arc<Expr>> {
        let base = self.atom()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.next();
            // exponent admits unary minus and chains right-associatively
            let exp = self.unary()?;
            return Ok(powe(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Arc<Expr>> {
        let offset = self.here();
        match self.next() {
            Some((Tok::Num(v), _)) => Ok(Expr::num(v)),
            Some((Tok::LParen, open)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    _ => Err(Error::Syntax {
                        offset: open,
                        msg: "unclosed parenthesis".into(),
                    }),
                }
            }
            Some((Tok::Ident(name), off)) => self.ident(name, off),
            Some((tok, off)) => Err(Error::Syntax {
                offset: off,
                msg: format!("expected a value, found `{tok:?}`"),
            }),
            None => Err(Error::Syntax {
                offset,
                msg: "unexpected end of expression".into(),
            }),
        }
    }

    fn ident(&mut self, name: String, off: usize) -> Result<Arc<Expr>> {
        if let Some(f) = Func::from_name(&name) {
            return match self.next() {
                Some((Tok::LParen, open)) => {
                    let arg = self.expr()?;
                    match self.next() {
                        Some((Tok::RParen, _)) => Ok(call(f, arg)),
                        _ => Err(Error::Syntax {
                            offset: open,
                            msg: format!("unclosed argument list of `{name}`"),
                        }),
                    }
                }
                _ => Err(Error::Syntax {
                    offset: off,
                    msg: format!("function `{name}` requires parentheses"),
                }),
            };
        }
        if name == "pi" {
            return Ok(Expr::num(std::f64::consts::PI));
        }
        if name == "e" {
            return Ok(Expr::num(std::f64::consts::E));
        }
        if let Some(idx) = self.aliases.get(&name) {
            return Ok(Expr::coord(*idx));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest.parse().map_err(|_| Error::Syntax {
                    offset: off,
                    msg: format!("coordinate index too large in `{name}`"),
                })?;
                if idx > self.n + 1 {
                    return Err(Error::CoordOutOfRange {
                        name,
                        offset: off,
                        max: self.n + 1,
                    });
                }
                return Ok(Expr::coord(idx));
            }
        }
        Err(Error::UnknownSymbol { name, offset: off })
    }
}

/// Parse an expression over the coordinates `x0..x{n+1}`.
pub fn parse_expr(text: &str, n: usize) -> Result<Arc<Expr>> {
    parse_expr_with_aliases(text, n, &HashMap::new())
}

/// Parse with additional coordinate aliases (e.g. `u` for `x0`).
pub fn parse_expr_with_aliases(
    text: &str,
    n: usize,
    aliases: &HashMap<String, usize>,
) -> Result<Arc<Expr>> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            msg: "empty expression".into(),
        });
    }
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser {
        toks,
        idx: 0,
        n,
        aliases,
        src_len: text.len(),
    };
    let e = parser.expr()?;
    if let Some((tok, off)) = parser.peek() {
        return Err(Error::Syntax {
            offset: *off,
            msg: format!("trailing input starting at `{tok:?}`"),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Point;
    use proptest::prelude::*;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn ev(text: &str, n: usize, coords: &[f64]) -> f64 {
        let e = parse_expr(text, n).unwrap();
        eval_expr(&e, &pt(coords)).unwrap()
    }

    #[test]
    fn parses_with_standard_precedence() {
        let e = parse_expr("x1^2 + x2^2", 2).unwrap();
        match &*e {
            Expr::Bin(BinOp::Add, a, b) => {
                assert!(matches!(&**a, Expr::Bin(BinOp::Pow, ..)));
                assert!(matches!(&**b, Expr::Bin(BinOp::Pow, ..)));
            }
            other => panic!("unexpected shape: {other:?}"),
        }
        let e = parse_expr("-(x0*x1)", 2).unwrap();
        match &*e {
            Expr::Neg(inner) => assert!(matches!(&**inner, Expr::Bin(BinOp::Mul, ..))),
            other => panic!("unexpected shape: {other:?}"),
        }
        // unary minus binds below ^ and above *
        assert_eq!(ev("-2^2", 1, &[0.0, 0.0, 0.0]), -4.0);
        assert_eq!(ev("2^-2", 1, &[0.0, 0.0, 0.0]), 0.25);
        assert_eq!(ev("2^3^2", 1, &[0.0, 0.0, 0.0]), 512.0);
        assert_eq!(ev("8-2-1", 1, &[0.0, 0.0, 0.0]), 5.0);
        assert_eq!(ev("8/2/2", 1, &[0.0, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn rejects_out_of_range_coordinate() {
        match parse_expr("x7", 2) {
            Err(Error::CoordOutOfRange { max, .. }) => assert_eq!(max, 3),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_symbols_with_offset() {
        match parse_expr("x1 + foo", 2) {
            Err(Error::UnknownSymbol { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 5);
            }
            other => panic!("expected unknown symbol, got {other:?}"),
        }
    }

    #[test]
    fn reports_syntax_error_offsets() {
        match parse_expr("x1 + * x2", 2) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(ev("x1^2+x2^2", 2, &[0.0, 1.0, 2.0, 0.0]), 5.0);
        assert_eq!(ev("0", 2, &[3.0, -1.0, 7.0, 2.0]), 0.0);
        assert_eq!(ev("exp(x0)*x1", 2, &[0.0, 3.0, 0.0, 0.0]), 3.0);
        assert!((ev("sin(pi)", 1, &[0.0, 0.0, 0.0])).abs() < 1e-15);
        assert!((ev("log(e)", 1, &[0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = parse_expr("1/x1", 2).unwrap();
        assert!(matches!(
            eval_expr(&e, &pt(&[0.0, 0.0, 1.0, 0.0])),
            Err(Error::Domain(_))
        ));
        let e = parse_expr("log(x1)", 2).unwrap();
        assert!(matches!(
            eval_expr(&e, &pt(&[0.0, -1.0, 0.0, 0.0])),
            Err(Error::Domain(_))
        ));
        let e = parse_expr("sqrt(x1)", 2).unwrap();
        assert!(matches!(
            eval_expr(&e, &pt(&[0.0, -4.0, 0.0, 0.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn differentiates_examples() {
        let p = pt(&[0.3, 1.7, -2.1, 0.9]);
        let e = parse_expr("x1^2+x2^2", 2).unwrap();
        let d1 = diff_expr(&e, 1);
        assert_eq!(format!("{d1}"), "2*x1");
        let d0 = diff_expr(&e, 0);
        assert!(d0.is_num(0.0));

        let e = parse_expr("sin(x1*x3)", 2).unwrap();
        let d = diff_expr(&e, 1);
        let expect = p.coords[3] * (p.coords[1] * p.coords[3]).cos();
        assert!((eval_expr(&d, &p).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn simplifier_folds_identities() {
        let z = parse_expr("0*x1 + x2*1 - 0", 2).unwrap();
        assert_eq!(format!("{}", simplify(&z)), "x2");
        let one = parse_expr("x1^0", 2).unwrap();
        assert!(simplify(&one).is_num(1.0));
        // non-finite folds are left alone so errors surface at evaluation
        let bad = parse_expr("1/0", 2).unwrap();
        assert!(matches!(&*simplify(&bad), Expr::Bin(BinOp::Div, ..)));
    }

    // Random polynomial trees over coordinates x0..x3 (n = 2).
    fn poly_expr() -> impl Strategy<Value = Arc<Expr>> {
        let leaf = prop_oneof![
            (-4..=4i32).prop_map(|v| Expr::num(v as f64)),
            (0usize..4).prop_map(Expr::coord),
        ];
        leaf.prop_recursive(4, 48, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| mul(a, b)),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| powe(a, Expr::num(k as f64))),
                inner.prop_map(neg),
            ]
        })
    }

    fn finite_points() -> impl Strategy<Value = Point> {
        proptest::collection::vec(-1.5f64..1.5, 4).prop_map(|c| Point::new(c).unwrap())
    }

    proptest! {
        // symbolic derivative matches a central finite difference
        #[test]
        fn derivative_matches_finite_difference(e in poly_expr(), k in 0usize..4, p in finite_points()) {
            let d = diff_expr(&e, k);
            let h = 1e-5 * (1.0 + p.coords[k].abs());
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp.coords[k] += h;
            pm.coords[k] -= h;
            let fd = (eval_expr(&e, &pp).unwrap() - eval_expr(&e, &pm).unwrap()) / (2.0 * h);
            let sym = eval_expr(&d, &p).unwrap();
            let scale = 1.0f64.max(sym.abs());
            // fd truncation for quartic-and-below polynomials on this box
            prop_assert!((sym - fd).abs() <= 1e-6 * scale.max(fd.abs()),
                "sym {sym} vs fd {fd} for {e}");
        }

        // print -> parse round-trips by value
        #[test]
        fn print_parse_round_trip(e in poly_expr(), p in finite_points()) {
            let text = format!("{e}");
            let back = parse_expr(&text, 2).unwrap();
            let v1 = eval_expr(&e, &p).unwrap();
            let v2 = eval_expr(&back, &p).unwrap();
            prop_assert_eq!(v1.to_bits(), v2.to_bits(), "{} reparsed as {}", text, back);
        }

        // mixed partials commute
        #[test]
        fn mixed_partials_commute(e in poly_expr(), p in finite_points(), j in 0usize..4, k in 0usize..4) {
            let djk = diff_expr(&diff_expr(&e, j), k);
            let dkj = diff_expr(&diff_expr(&e, k), j);
            let a = eval_expr(&djk, &p).unwrap();
            let b = eval_expr(&dkj, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * 1.0f64.max(a.abs().max(b.abs())));
        }
    }
}
