//! Arithmetic expressions in `t`, `x`, `y` describing carrying capacity,
//! growth rate and initial densities.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'pi' | 't' | 'x' | 'y' | func '(' expr ')' | '(' expr ')'
//! func   := 'cos' | 'sin' | 'exp'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2`
//! is `-4` and `2^3^2` is `512`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Cos,
    Sin,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::Exp => "exp",
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

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-integer power {exponent} of non-positive base {base}")]
    InvalidPower { base: f64, exponent: f64 },
    #[error("result is not finite")]
    NonFinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot evaluate `{expr}` at vertex ({i}, {j}), t = {t}: {source}")]
pub struct SampleError {
    pub expr: String,
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub source: EvalError,
}

/// A parsed coefficient expression.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffExpr {
    root: Expr,
}

impl CoeffExpr {
    pub fn new(root: Expr) -> Self {
        Self { root }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Expr::Num(value))
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// `factor · self`, used to build derived capacities such as `(1-μ)K`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(Expr::Binary(
            BinOp::Mul,
            Box::new(Expr::Num(factor)),
            Box::new(self.root.clone()),
        ))
    }

    /// True when the expression mentions the time variable.
    pub fn depends_on_t(&self) -> bool {
        fn walk(e: &Expr) -> bool {
            match e {
                Expr::Var(Var::T) => true,
                Expr::Num(_) | Expr::Pi | Expr::Var(_) => false,
                Expr::Neg(a) | Expr::Call(_, a) => walk(a),
                Expr::Binary(_, a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.root)
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> Result<f64, EvalError> {
        let v = eval_node(&self.root, t, x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

impl FromStr for CoeffExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

pub fn parse(src: &str) -> Result<CoeffExpr, ParseError> {
    let mut p = Parser::new(src)?;
    let root = p.expr()?;
    p.expect_end()?;
    Ok(CoeffExpr { root })
}

pub fn eval(e: &CoeffExpr, t: f64, x: f64, y: f64) -> Result<f64, EvalError> {
    e.eval(t, x, y)
}

/// Samples `e` at every vertex of `grid` at time `t`.
pub fn sample(e: &CoeffExpr, grid: Grid, t: f64) -> Result<ScalarField, SampleError> {
    let n = grid.n();
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            let (x, y) = grid.coords(i, j);
            let v = e.eval(t, x, y).map_err(|source| SampleError {
                expr: e.to_string(),
                i,
                j,
                t,
                source,
            })?;
            values.push(v);
        }
    }
    Ok(ScalarField::from_values(grid, values).expect("sampled values are finite"))
}

fn eval_node(e: &Expr, t: f64, x: f64, y: f64) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Num(v) => *v,
        Expr::Pi => std::f64::consts::PI,
        Expr::Var(Var::T) => t,
        Expr::Var(Var::X) => x,
        Expr::Var(Var::Y) => y,
        Expr::Neg(a) => -eval_node(a, t, x, y)?,
        Expr::Call(f, a) => {
            let v = eval_node(a, t, x, y)?;
            match f {
                Func::Cos => v.cos(),
                Func::Sin => v.sin(),
                Func::Exp => v.exp(),
            }
        }
        Expr::Binary(op, a, b) => {
            let a = eval_node(a, t, x, y)?;
            let b = eval_node(b, t, x, y)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => power(a, b)?,
            }
        }
    })
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        let k = exponent as i32;
        if base == 0.0 && k < 0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(base.powi(k))
    } else if base > 0.0 {
        Ok((exponent * base.ln()).exp())
    } else {
        Err(EvalError::InvalidPower { base, exponent })
    }
}

// Printing uses the minimal parentheses that re-parse to the same tree.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_SUM,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_PRODUCT,
        Expr::Neg(_) => PREC_UNARY,
        Expr::Binary(BinOp::Pow, ..) => 4,
        Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => PREC_UNARY,
        _ => PREC_ATOM,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    let wrap = precedence(e) < min_prec;
    if wrap {
        f.write_str("(")?;
    }
    match e {
        Expr::Num(v) => write!(f, "{v}")?,
        Expr::Pi => f.write_str("pi")?,
        Expr::Var(Var::T) => f.write_str("t")?,
        Expr::Var(Var::X) => f.write_str("x")?,
        Expr::Var(Var::Y) => f.write_str("y")?,
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_expr(f, a, PREC_UNARY)?;
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, 0)?;
            f.write_str(")")?;
        }
        Expr::Binary(op, a, b) => {
            let (lhs, rhs) = match op {
                BinOp::Add | BinOp::Sub => (PREC_SUM, PREC_PRODUCT),
                BinOp::Mul | BinOp::Div => (PREC_PRODUCT, PREC_UNARY),
                BinOp::Pow => (PREC_ATOM, PREC_UNARY),
            };
            write_expr(f, a, lhs)?;
            write!(f, "{}", op.symbol())?;
            write_expr(f, b, rhs)?;
        }
    }
    if wrap {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, &self.root, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut k = 0;
    while k < bytes.len() {
        let c = bytes[k];
        if c.is_ascii_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = k;
            while k < bytes.len() && (bytes[k].is_ascii_digit() || bytes[k] == b'.') {
                k += 1;
            }
            // optional exponent, only when digits follow
            if k < bytes.len() && (bytes[k] == b'e' || bytes[k] == b'E') {
                let mut m = k + 1;
                if m < bytes.len() && (bytes[m] == b'+' || bytes[m] == b'-') {
                    m += 1;
                }
                if m < bytes.len() && bytes[m].is_ascii_digit() {
                    while m < bytes.len() && bytes[m].is_ascii_digit() {
                        m += 1;
                    }
                    k = m;
                }
            }
            let text = &src[start..k];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                expected: vec!["number"],
                found: format!("`{text}`"),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = k;
            while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                k += 1;
            }
            out.push((Tok::Ident(src[start..k].to_string()), start));
        } else if b"+-*/^()".contains(&c) {
            out.push((Tok::Sym(c as char), k));
            k += 1;
        } else {
            let ch = src[k..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                offset: k,
                expected: vec!["number", "identifier", "operator", "`(`", "`)`"],
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

const ATOM_START: &[&str] = &["number", "`pi`", "`t`", "`x`", "`y`", "`cos`", "`sin`", "`exp`", "`(`", "`-`"];

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Self {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.to_vec(),
            found: self.peek().describe(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::End => Ok(()),
            _ => Err(self.error(&["operator", "end of input"])),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error(&["`)`", "operator"]));
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                let func = match name.as_str() {
                    "pi" => return Ok(Expr::Pi),
                    "t" => return Ok(Expr::Var(Var::T)),
                    "x" => return Ok(Expr::Var(Var::X)),
                    "y" => return Ok(Expr::Var(Var::Y)),
                    "cos" => Func::Cos,
                    "sin" => Func::Sin,
                    "exp" => Func::Exp,
                    _ => return Err(ParseError::UnknownIdentifier { name, offset }),
                };
                if !self.eat('(') {
                    return Err(self.error(&["`(`"]));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error(&["`)`", "operator"]));
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.error(ATOM_START)),
        }
    }
}

/// Which of the two competing species a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    U,
    V,
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Species::U => "u",
            Species::V => "v",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoefficientError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("carrying capacity must be positive; K = {value} at vertex ({i}, {j}), t = {t}")]
    NonPositiveCapacity { i: usize, j: usize, t: f64, value: f64 },
    #[error("growth rate must be non-negative; r = {value} at vertex ({i}, {j}), t = {t}")]
    NegativeGrowth { i: usize, j: usize, t: f64, value: f64 },
    #[error("initial density of {species} must be non-negative; got {value} at vertex ({i}, {j})")]
    NegativeInitial { species: Species, i: usize, j: usize, value: f64 },
}

/// Carrying capacity, growth rate and initial data of one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub k: CoeffExpr,
    pub r: CoeffExpr,
    pub u0: CoeffExpr,
    pub v0: CoeffExpr,
}

fn first_violation(f: &ScalarField, bad: impl Fn(f64) -> bool) -> Option<(usize, usize, f64)> {
    let n = f.grid().n();
    f.values()
        .iter()
        .enumerate()
        .find(|(_, &v)| bad(v))
        .map(|(k, &v)| (k % n, k / n, v))
}

impl CoefficientSet {
    /// Parses the four expressions.
    pub fn parse(k: &str, r: &str, u0: &str, v0: &str) -> Result<Self, ParseError> {
        Ok(Self {
            k: parse(k)?,
            r: parse(r)?,
            u0: parse(u0)?,
            v0: parse(v0)?,
        })
    }

    /// Neither K nor r depends on time.
    pub fn is_stationary(&self) -> bool {
        !self.k.depends_on_t() && !self.r.depends_on_t()
    }

    /// Samples K at time `t`, requiring it to be strictly positive.
    pub fn sample_capacity(&self, grid: Grid, t: f64) -> Result<ScalarField, CoefficientError> {
        let k = sample(&self.k, grid, t)?;
        if let Some((i, j, value)) = first_violation(&k, |v| v <= 0.0) {
            return Err(CoefficientError::NonPositiveCapacity { i, j, t, value });
        }
        Ok(k)
    }

    /// Samples r at time `t`, requiring it to be non-negative. A vanishing
    /// minimum is allowed but logged.
    pub fn sample_growth(&self, grid: Grid, t: f64) -> Result<ScalarField, CoefficientError> {
        let r = sample(&self.r, grid, t)?;
        if let Some((i, j, value)) = first_violation(&r, |v| v < 0.0) {
            return Err(CoefficientError::NegativeGrowth { i, j, t, value });
        }
        if r.min() == 0.0 {
            log::warn!("growth rate vanishes somewhere on the grid at t = {t}");
        }
        Ok(r)
    }

    /// Samples the initial densities `(u0, v0)`, requiring both to be non-negative.
    pub fn sample_initial(&self, grid: Grid) -> Result<(ScalarField, ScalarField), CoefficientError> {
        let u0 = sample(&self.u0, grid, 0.0)?;
        let v0 = sample(&self.v0, grid, 0.0)?;
        for (species, f) in [(Species::U, &u0), (Species::V, &v0)] {
            if let Some((i, j, value)) = first_violation(f, |v| v < 0.0) {
                return Err(CoefficientError::NegativeInitial { species, i, j, value });
            }
        }
        Ok((u0, v0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ev(s: &str, t: f64, x: f64, y: f64) -> f64 {
        parse(s).unwrap().eval(t, x, y).unwrap()
    }

    #[test]
    fn experiment_expressions() {
        assert!((ev("2.1 + cos(pi*x)*cos(pi*y)", 0.0, 0.0, 0.0) - 3.1).abs() < 1e-15);
        assert!((ev("(1.1+cos(t))", 0.0, 0.3, 0.7) - 2.1).abs() < 1e-15);
        let peak = ev("1.2 + 2.5*pi^2*exp(-(x-0.5)^2-(y-0.5)^2)", 0.0, 0.5, 0.5);
        assert!((peak - (1.2 + 2.5 * PI * PI)).abs() < 1e-12);
        assert!((peak - 25.874_011).abs() < 1e-6);
        assert_eq!(ev("1.5+sin(x)*sin(y)", 42.0, 0.0, 0.0), 1.5);
    }

    #[test]
    fn simple_evaluation() {
        assert_eq!(ev("x", 9.0, 0.25, 3.0), 0.25);
        assert_eq!(ev("2^3", 0.0, 0.0, 0.0), 8.0);
        assert_eq!(ev("2+3*4^2", 0.0, 0.0, 0.0), 50.0);
        assert_eq!(ev("-2^2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0, 0.0), 512.0);
        assert_eq!(ev("2^-1", 0.0, 0.0, 0.0), 0.5);
        assert_eq!(ev("8-3-2", 0.0, 0.0, 0.0), 3.0);
        assert_eq!(ev("8/4/2", 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ev("--3", 0.0, 0.0, 0.0), 3.0);
        assert_eq!(ev("  1.5e-3 *\t2 ", 0.0, 0.0, 0.0), 3e-3);
        assert!((ev("2^0.5", 0.0, 0.0, 0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(ev("(-2)^3", 0.0, 0.0, 0.0), -8.0);
    }

    #[test]
    fn domain_errors() {
        let e = parse("1/x").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), Err(EvalError::DivisionByZero));
        let e = parse("(x-1)^0.5").unwrap();
        assert!(matches!(e.eval(0.0, 0.0, 0.0), Err(EvalError::InvalidPower { .. })));
        let e = parse("0^-1").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), Err(EvalError::DivisionByZero));
        let e = parse("exp(1000)").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), Err(EvalError::NonFinite));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("2 + * 3") {
            Err(ParseError::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 4);
                assert!(expected.contains(&"number"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            parse("1 + foo(x)"),
            Err(ParseError::UnknownIdentifier { name: "foo".into(), offset: 4 })
        );
        assert_eq!(parse("cos x").unwrap_err().offset(), 4);
        assert_eq!(parse("(1+2").unwrap_err().offset(), 4);
        assert_eq!(parse("1 2").unwrap_err().offset(), 2);
        assert_eq!(parse("").unwrap_err().offset(), 0);
        assert_eq!(parse("1 # 2").unwrap_err().offset(), 2);
    }

    #[test]
    fn depends_on_t() {
        assert!(parse("(2.1+cos(pi*x)*cos(pi*y))*(1.1+cos(t))").unwrap().depends_on_t());
        assert!(!parse("2.5+sin(x)*sin(y)").unwrap().depends_on_t());
    }

    #[test]
    fn sample_layout() {
        let g = Grid::new(3).unwrap();
        let f = sample(&parse("x+y").unwrap(), g, 0.0).unwrap();
        assert_eq!(f.values(), &[0.0, 0.5, 1.0, 0.5, 1.0, 1.5, 1.0, 1.5, 2.0]);
        let z = sample(&parse("0").unwrap(), g, 3.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_reports_vertex() {
        let g = Grid::new(3).unwrap();
        let err = sample(&parse("1/(x-0.5)").unwrap(), g, 0.0).unwrap_err();
        assert_eq!((err.i, err.j), (1, 0));
        assert_eq!(err.source, EvalError::DivisionByZero);
    }

    #[test]
    fn capacity_positivity_checked_when_sampling() {
        let g = Grid::new(33).unwrap();
        let set = CoefficientSet::parse("2.1+cos(pi*x)*cos(pi*y)", "1.2", "1.8", "1.8").unwrap();
        let k = set.sample_capacity(g, 0.0).unwrap();
        assert!(k.min() >= 1.1 - 1e-12);
        let bad = CoefficientSet::parse("cos(t)", "1", "1", "1").unwrap();
        assert!(bad.sample_capacity(g, 0.0).is_ok());
        assert!(matches!(
            bad.sample_capacity(g, PI / 2.0 + 0.1),
            Err(CoefficientError::NonPositiveCapacity { i: 0, j: 0, .. })
        ));
        let neg_r = CoefficientSet::parse("1", "x-0.5", "1", "1").unwrap();
        assert!(matches!(neg_r.sample_growth(g, 0.0), Err(CoefficientError::NegativeGrowth { .. })));
        let neg_u = CoefficientSet::parse("1", "1", "1", "y-0.1").unwrap();
        assert!(matches!(
            neg_u.sample_initial(g),
            Err(CoefficientError::NegativeInitial { species: Species::V, .. })
        ));
    }

    #[test]
    fn printing_is_minimal() {
        let cases = [
            ("2.1 + cos(pi*x)*cos(pi*y)", "2.1+cos(pi*x)*cos(pi*y)"),
            ("(1+2)*3", "(1+2)*3"),
            ("1-(2-3)", "1-(2-3)"),
            ("(1-2)-3", "1-2-3"),
            ("-2^2", "-2^2"),
            ("(-2)^2", "(-2)^2"),
            ("2^3^2", "2^3^2"),
            ("(2^3)^2", "(2^3)^2"),
        ];
        for (src, want) in cases {
            assert_eq!(parse(src).unwrap().to_string(), want);
        }
        assert_eq!(parse("x").unwrap().scaled(0.5).to_string(), "0.5*x");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..10.0).prop_map(Expr::Num),
            Just(Expr::Pi),
            Just(Expr::Var(Var::T)),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::Y)),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), prop_oneof![Just(Func::Cos), Just(Func::Sin)])
                    .prop_map(|(e, f)| Expr::Call(f, Box::new(e))),
                (
                    inner.clone(),
                    inner.clone(),
                    prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)]
                )
                    .prop_map(|(a, b, op)| Expr::Binary(op, Box::new(a), Box::new(b))),
                (inner, 0u8..4).prop_map(|(a, k)| Expr::Binary(
                    BinOp::Pow,
                    Box::new(a),
                    Box::new(Expr::Num(k as f64))
                )),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(root in arb_expr()) {
            let e = CoeffExpr::new(root);
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            prop_assert_eq!(&back, &e);
            let mut rng_state = 0x9e37_79b9_7f4a_7c15_u64;
            let mut next = || {
                rng_state ^= rng_state << 13;
                rng_state ^= rng_state >> 7;
                rng_state ^= rng_state << 17;
                (rng_state >> 11) as f64 / (1u64 << 53) as f64
            };
            for _ in 0..100 {
                let (t, x, y) = (10.0 * next(), next(), next());
                let a = e.eval(t, x, y);
                let b = back.eval(t, x, y);
                match (a, b) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0)),
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
            }
        }

        #[test]
        fn sampling_is_deterministic(n in 3usize..12, t in 0.0f64..10.0) {
            let e = parse("(1.2+2.5*pi^2*exp(-(x-0.5)^2-(y-0.5)^2))*(1.0+0.3*cos(t))").unwrap();
            let g = Grid::new(n).unwrap();
            let a = sample(&e, g, t).unwrap();
            let b = sample(&e, g, t).unwrap();
            prop_assert!(a.values().iter().zip(b.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}
