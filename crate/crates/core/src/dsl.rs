//! A small expression language for target transformations `f: SU(d) → SU(d)`.
//!
//! ```text
//! expr := term | term "∘" expr | term "*" expr
//! term := "id" | "inv" | "T" | "conj" | "pow:" int
//!       | "lmul:" file | "rmul:" file | "sandwich:" file | "(" expr ")"
//! ```
//!
//! `∘` may be written `o`. Both operators associate to the right and share one
//! precedence level, so `inv * T o conj` reads as `inv * (T o conj)`.
//! `f ∘ g` is composition `f(g(U))`; `f * g` is the pointwise product `f(U) g(U)`.
//! File arguments name matrices in the shared JSON format and end at
//! whitespace, a parenthesis or an operator.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ensure_special_unitary, ensure_unitary, identity, load_unitary, ComplexMatrix, EXTERNAL_TOL};

/// Maximum nesting depth of an expression tree.
pub const MAX_DEPTH: usize = 32;

/// A fixed SU(d) matrix embedded in an expression, with the name it was given.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedMatrix {
    pub label: String,
    pub matrix: ComplexMatrix,
}

impl FixedMatrix {
    pub fn new(label: impl Into<String>, matrix: ComplexMatrix) -> Result<Arc<Self>> {
        ensure_special_unitary(&matrix, EXTERNAL_TOL)?;
        Ok(Arc::new(Self { label: label.into(), matrix }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FuncExpr {
    Id,
    Inverse,
    Transpose,
    Conjugate,
    /// `U^k`, `k ≠ 0`.
    Power(i32),
    /// `V U`.
    LeftMul(Arc<FixedMatrix>),
    /// `U V`.
    RightMul(Arc<FixedMatrix>),
    /// `V U V†`.
    Sandwich(Arc<FixedMatrix>),
    /// `outer(inner(U))`.
    Compose(Box<FuncExpr>, Box<FuncExpr>),
    /// `left(U) right(U)`.
    Product(Box<FuncExpr>, Box<FuncExpr>),
}

impl FuncExpr {
    pub fn compose(outer: FuncExpr, inner: FuncExpr) -> Self {
        FuncExpr::Compose(Box::new(outer), Box::new(inner))
    }

    pub fn product(left: FuncExpr, right: FuncExpr) -> Self {
        FuncExpr::Product(Box::new(left), Box::new(right))
    }

    /// `f * f * ... * f` with `n` factors, right-nested.
    pub fn repeated_product(f: &FuncExpr, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("product needs at least one factor".into()));
        }
        let mut acc = f.clone();
        for _ in 1..n {
            acc = FuncExpr::product(f.clone(), acc);
        }
        Ok(acc)
    }

    pub fn depth(&self) -> usize {
        match self {
            FuncExpr::Compose(a, b) | FuncExpr::Product(a, b) => 1 + a.depth().max(b.depth()),
            _ => 1,
        }
    }

    /// Checks depth and that every embedded matrix is `d × d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.depth() > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!("expression depth {} exceeds {MAX_DEPTH}", self.depth())));
        }
        self.check_dims(d)
    }

    fn check_dims(&self, d: usize) -> Result<()> {
        match self {
            FuncExpr::LeftMul(v) | FuncExpr::RightMul(v) | FuncExpr::Sandwich(v) => {
                if v.matrix.nrows() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: v.matrix.nrows() });
                }
                Ok(())
            }
            FuncExpr::Compose(a, b) | FuncExpr::Product(a, b) => {
                a.check_dims(d)?;
                b.check_dims(d)
            }
            FuncExpr::Power(0) => Err(Error::InvalidArgument("pow:0 is not allowed".into())),
            _ => Ok(()),
        }
    }

    /// Evaluates `f(U)` without any phase correction.
    pub fn evaluate_raw(&self, u: &ComplexMatrix) -> ComplexMatrix {
        match self {
            FuncExpr::Id => u.clone(),
            FuncExpr::Inverse => u.adjoint(),
            FuncExpr::Transpose => u.transpose(),
            FuncExpr::Conjugate => u.map(|z| z.conj()),
            FuncExpr::Power(k) => matrix_power(u, *k),
            FuncExpr::LeftMul(v) => &v.matrix * u,
            FuncExpr::RightMul(v) => u * &v.matrix,
            FuncExpr::Sandwich(v) => &v.matrix * u * v.matrix.adjoint(),
            FuncExpr::Compose(outer, inner) => outer.evaluate_raw(&inner.evaluate_raw(u)),
            FuncExpr::Product(left, right) => left.evaluate_raw(u) * right.evaluate_raw(u),
        }
    }

    /// Evaluates `f(U)` for unitary `U`.
    ///
    /// If the result's determinant drifts from 1 (possible when `U` is only
    /// unitary), the global phase is divided out and the correction logged.
    pub fn evaluate(&self, u: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = ensure_unitary(u, EXTERNAL_TOL)?;
        self.validate(d)?;
        let out = self.evaluate_raw(u);
        let det = out.determinant();
        if (det - crate::linalg::real(1.0)).norm() > 1e-10 {
            let phase = num_complex::Complex64::from_polar(1.0, -det.arg() / d as f64);
            log::debug!("normalizing global phase of f(U): det = {det:.6}");
            return Ok(out * phase);
        }
        Ok(out)
    }

    /// Whether the tree contains only the four built-in primitives and powers.
    pub fn is_frame_free(&self) -> bool {
        match self {
            FuncExpr::LeftMul(_) | FuncExpr::RightMul(_) | FuncExpr::Sandwich(_) => false,
            FuncExpr::Compose(a, b) | FuncExpr::Product(a, b) => a.is_frame_free() && b.is_frame_free(),
            _ => true,
        }
    }
}

pub(crate) fn matrix_power(u: &ComplexMatrix, k: i32) -> ComplexMatrix {
    let base = if k < 0 { u.adjoint() } else { u.clone() };
    let mut out = identity(u.nrows());
    for _ in 0..k.unsigned_abs() {
        out = &out * &base;
    }
    out
}

impl fmt::Display for FuncExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncExpr::Id => f.write_str("id"),
            FuncExpr::Inverse => f.write_str("inv"),
            FuncExpr::Transpose => f.write_str("T"),
            FuncExpr::Conjugate => f.write_str("conj"),
            FuncExpr::Power(k) => write!(f, "pow:{k}"),
            FuncExpr::LeftMul(v) => write!(f, "lmul:{}", v.label),
            FuncExpr::RightMul(v) => write!(f, "rmul:{}", v.label),
            FuncExpr::Sandwich(v) => write!(f, "sandwich:{}", v.label),
            FuncExpr::Compose(a, b) => {
                write_operand(f, a)?;
                write!(f, " o {b}")
            }
            FuncExpr::Product(a, b) => {
                write_operand(f, a)?;
                write!(f, " * {b}")
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &FuncExpr) -> fmt::Result {
    match e {
        FuncExpr::Compose(..) | FuncExpr::Product(..) => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

/// Parses `text`, loading embedded matrices from files and checking they are in SU(d).
pub fn parse(text: &str, d: usize) -> Result<FuncExpr> {
    parse_with(text, d, &mut |name| load_unitary(name))
}

/// Parses `text`, resolving embedded matrix names through `resolve`.
pub fn parse_with(text: &str, d: usize, resolve: &mut dyn FnMut(&str) -> Result<ComplexMatrix>) -> Result<FuncExpr> {
    let mut parser = Parser { chars: text.char_indices().collect(), pos: 0, d, resolve, text_len: text.len() };
    let expr = parser.expr(1)?;
    parser.skip_ws();
    if parser.pos < parser.chars.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    d: usize,
    resolve: &'a mut dyn FnMut(&str) -> Result<ComplexMatrix>,
    text_len: usize,
}

enum Op {
    Compose,
    Product,
}

impl Parser<'_> {
    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.text_len, |&(i, _)| i)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { position: self.offset(), message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, ch)| ch)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, word: &str) -> bool {
        let n = word.chars().count();
        let matches = self.chars.len() >= self.pos + n
            && self.chars[self.pos..self.pos + n].iter().map(|&(_, ch)| ch).eq(word.chars());
        if matches {
            self.pos += n;
        }
        matches
    }

    fn expr(&mut self, depth: usize) -> Result<FuncExpr> {
        if depth > MAX_DEPTH {
            return Err(self.error(format!("expression nested deeper than {MAX_DEPTH}")));
        }
        let left = self.term(depth)?;
        self.skip_ws();
        let op = match self.peek() {
            Some('∘') | Some('o') => Op::Compose,
            Some('*') => Op::Product,
            _ => return Ok(left),
        };
        self.pos += 1;
        let right = self.expr(depth + 1)?;
        Ok(match op {
            Op::Compose => FuncExpr::compose(left, right),
            Op::Product => FuncExpr::product(left, right),
        })
    }

    fn term(&mut self, depth: usize) -> Result<FuncExpr> {
        self.skip_ws();
        if self.eat("(") {
            let inner = self.expr(depth + 1)?;
            self.skip_ws();
            if !self.eat(")") {
                return Err(self.error("expected `)`"));
            }
            return Ok(inner);
        }
        if self.eat("pow:") {
            return self.power();
        }
        for (keyword, build) in [
            ("lmul:", FuncExpr::LeftMul as fn(Arc<FixedMatrix>) -> FuncExpr),
            ("rmul:", FuncExpr::RightMul),
            ("sandwich:", FuncExpr::Sandwich),
        ] {
            if self.eat(keyword) {
                return Ok(build(self.fixed_matrix()?));
            }
        }
        for (keyword, node) in
            [("inv", FuncExpr::Inverse), ("id", FuncExpr::Id), ("conj", FuncExpr::Conjugate), ("T", FuncExpr::Transpose)]
        {
            if self.eat(keyword) {
                return Ok(node);
            }
        }
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(ch) => Err(self.error(format!("unexpected `{ch}`"))),
        }
    }

    fn power(&mut self) -> Result<FuncExpr> {
        let start = self.pos;
        if self.peek() == Some('-') || self.peek() == Some('+') {
            self.pos += 1;
        }
        while self.peek().is_some_and(|ch| ch.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().map(|&(_, ch)| ch).collect();
        let at = self.chars.get(start).map_or(self.text_len, |&(i, _)| i);
        let k: i32 = digits
            .parse()
            .map_err(|_| Error::Parse { position: at, message: format!("expected an integer exponent, found `{digits}`") })?;
        if k == 0 {
            return Err(Error::Parse { position: at, message: "pow:0 is not allowed".into() });
        }
        Ok(FuncExpr::Power(k))
    }

    fn fixed_matrix(&mut self) -> Result<Arc<FixedMatrix>> {
        let start = self.pos;
        while self.peek().is_some_and(|ch| !(ch.is_whitespace() || matches!(ch, '(' | ')' | '*' | '∘'))) {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().map(|&(_, ch)| ch).collect();
        let at = self.chars.get(start).map_or(self.text_len, |&(i, _)| i);
        if name.is_empty() {
            return Err(Error::Parse { position: at, message: "expected a matrix file name".into() });
        }
        let wrap = |e: Error| Error::Parse { position: at, message: format!("matrix `{name}`: {e}") };
        let matrix = (self.resolve)(&name).map_err(wrap)?;
        if matrix.nrows() != self.d || matrix.ncols() != self.d {
            return Err(wrap(Error::DimensionMismatch { expected: self.d, found: matrix.nrows() }));
        }
        FixedMatrix::new(name.clone(), matrix).map_err(wrap)
    }
}
