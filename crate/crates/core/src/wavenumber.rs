//! Wave numbers: either an exact element of `Q(θ)` or a real literal that
//! can be evaluated to any precision.
//!
//! Text syntax is an arithmetic expression over rationals, decimals,
//! `theta`, `pi`, `e`, `sqrt(..)`, `+ - * / ^` and parentheses. Expressions
//! without `pi`, `e` or `sqrt` fold to field elements; a `real:` prefix
//! forces the real-literal kind.

use std::fmt;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::quadfield::{frac_and_dist, Embedding, Precision, QuadElem, RingParams};

#[derive(Clone, Debug, PartialEq)]
pub enum RealExpr {
    Rational(Rational),
    Theta(RingParams),
    Pi,
    E,
    Sqrt(Box<RealExpr>),
    Neg(Box<RealExpr>),
    Add(Box<RealExpr>, Box<RealExpr>),
    Sub(Box<RealExpr>, Box<RealExpr>),
    Mul(Box<RealExpr>, Box<RealExpr>),
    Div(Box<RealExpr>, Box<RealExpr>),
    Pow(Box<RealExpr>, i32),
}

impl RealExpr {
    pub fn sqrt_of(n: u32) -> RealExpr {
        RealExpr::Sqrt(Box::new(RealExpr::Rational(n.into())))
    }

    /// Evaluates to `prec` bits (computed with guard bits, then rounded).
    pub fn eval(&self, prec: u32) -> Float {
        Float::with_val(prec, self.eval_raw(prec + 64))
    }

    fn eval_raw(&self, wp: u32) -> Float {
        match self {
            RealExpr::Rational(r) => Float::with_val(wp, r),
            RealExpr::Theta(ring) => ring.theta(wp),
            RealExpr::Pi => Float::with_val(wp, Constant::Pi),
            RealExpr::E => Float::with_val(wp, 1).exp(),
            RealExpr::Sqrt(x) => x.eval_raw(wp).sqrt(),
            RealExpr::Neg(x) => -x.eval_raw(wp),
            RealExpr::Add(a, b) => a.eval_raw(wp) + b.eval_raw(wp),
            RealExpr::Sub(a, b) => a.eval_raw(wp) - b.eval_raw(wp),
            RealExpr::Mul(a, b) => a.eval_raw(wp) * b.eval_raw(wp),
            RealExpr::Div(a, b) => a.eval_raw(wp) / b.eval_raw(wp),
            RealExpr::Pow(a, k) => a.eval_raw(wp).pow(*k),
        }
    }

    /// Exact value when the expression stays inside `Q(θ)`.
    pub fn fold(&self, ring: RingParams) -> Option<QuadElem> {
        Some(match self {
            RealExpr::Rational(r) => QuadElem::new(ring, r.clone(), 0),
            RealExpr::Theta(_) => QuadElem::theta(ring),
            RealExpr::Pi | RealExpr::E => return None,
            RealExpr::Sqrt(x) => fold_sqrt(&x.fold(ring)?)?,
            RealExpr::Neg(x) => -&x.fold(ring)?,
            RealExpr::Add(a, b) => &a.fold(ring)? + &b.fold(ring)?,
            RealExpr::Sub(a, b) => &a.fold(ring)? - &b.fold(ring)?,
            RealExpr::Mul(a, b) => &a.fold(ring)? * &b.fold(ring)?,
            RealExpr::Div(a, b) => a.fold(ring)?.checked_div(&b.fold(ring)?).ok()?,
            RealExpr::Pow(a, k) => {
                let base = a.fold(ring)?;
                let base = if *k < 0 { base.inverse().ok()? } else { base };
                let mut acc = QuadElem::one(ring);
                for _ in 0..k.unsigned_abs() {
                    acc = &acc * &base;
                }
                acc
            }
        })
    }
}

/// `√x` for rational `x ≥ 0` when it lies in `Q(θ)`: either a rational
/// square, or `s²·D` with `√D = 2θ − p`.
fn fold_sqrt(x: &QuadElem) -> Option<QuadElem> {
    if !x.is_rational() || *x.u() < 0 {
        return None;
    }
    let ring = x.ring();
    if let Some(r) = rational_sqrt(x.u()) {
        return Some(QuadElem::new(ring, r, 0));
    }
    let d = Rational::from(ring.discriminant());
    let s = rational_sqrt(&Rational::from(x.u() / &d))?;
    let sqrt_d = QuadElem::new(ring, -Rational::from(ring.p()), 2);
    Some(sqrt_d.scale(&s))
}

fn rational_sqrt(r: &Rational) -> Option<Rational> {
    let (n, d) = (r.numer(), r.denom());
    (n.is_perfect_square() && d.is_perfect_square())
        .then(|| Rational::from((n.clone().sqrt(), d.clone().sqrt())))
}

impl fmt::Display for RealExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealExpr::Rational(r) => write!(f, "{r}"),
            RealExpr::Theta(_) => write!(f, "theta"),
            RealExpr::Pi => write!(f, "pi"),
            RealExpr::E => write!(f, "e"),
            RealExpr::Sqrt(x) => write!(f, "sqrt({x})"),
            RealExpr::Neg(x) => write!(f, "-({x})"),
            RealExpr::Add(a, b) => write!(f, "({a}+{b})"),
            RealExpr::Sub(a, b) => write!(f, "({a}-{b})"),
            RealExpr::Mul(a, b) => write!(f, "({a}*{b})"),
            RealExpr::Div(a, b) => write!(f, "({a}/{b})"),
            RealExpr::Pow(a, k) => write!(f, "({a})^{k}"),
        }
    }
}

/// A wave number `k`.
#[derive(Clone, Debug, PartialEq)]
pub enum WaveNumber {
    /// A real number given by a closed-form expression.
    Real(RealExpr),
    /// An exact element `u + vθ` of `Q(θ)`.
    Field(QuadElem),
}

impl WaveNumber {
    pub fn real(expr: RealExpr) -> Self {
        WaveNumber::Real(expr)
    }

    pub fn real_rational(r: impl Into<Rational>) -> Self {
        WaveNumber::Real(RealExpr::Rational(r.into()))
    }

    pub fn field(x: QuadElem) -> Self {
        WaveNumber::Field(x)
    }

    pub fn zero(ring: RingParams) -> Self {
        WaveNumber::Field(QuadElem::zero(ring))
    }

    pub fn is_field(&self) -> bool {
        matches!(self, WaveNumber::Field(_))
    }

    /// Parses `s` in the context of `ring` (which fixes `theta`).
    pub fn parse(s: &str, ring: RingParams) -> Result<Self> {
        let (force_real, body, offset) = match s.strip_prefix("real:") {
            Some(rest) => (true, rest, 5),
            None => (false, s, 0),
        };
        let expr = Parser::new(body, ring, offset).parse()?;
        if !force_real {
            if let Some(x) = expr.fold(ring) {
                return Ok(WaveNumber::Field(x));
            }
        }
        Ok(WaveNumber::Real(expr))
    }

    pub fn to_f64(&self) -> f64 {
        self.value(Precision::new(64).expect("64 bits")).to_f64()
    }

    /// Real value to `prec` bits.
    pub fn value(&self, prec: Precision) -> Float {
        match self {
            WaveNumber::Real(e) => e.eval(prec.bits()),
            WaveNumber::Field(x) => x.embed(prec.bits(), Embedding::Principal),
        }
    }

    pub(crate) fn check_ring(&self, ring: RingParams) -> Result<()> {
        match self {
            WaveNumber::Field(x) if x.ring() != ring => Err(Error::RingMismatch(x.ring(), ring)),
            _ => Ok(()),
        }
    }

    /// Phase `{k·x}` for `x ∈ Q(θ)` at `prec` bits of absolute accuracy.
    ///
    /// Field-element wave numbers multiply exactly first; real literals are
    /// evaluated with enough guard bits to absorb the integer part of `k·x`.
    pub fn phase(&self, x: &QuadElem, prec: Precision) -> Result<Float> {
        match self {
            WaveNumber::Field(k) => {
                let prod = k.checked_mul(x)?;
                let mut bits = prec.bits() + magnitude_bits(&prod) + 32;
                loop {
                    match frac_and_dist(&prod, Precision::new(bits)?) {
                        Ok((frac, _)) => return Ok(Float::with_val(prec.bits(), frac)),
                        Err(Error::PrecisionExhausted { .. }) if bits < 1 << 16 => bits *= 2,
                        Err(e) => return Err(e),
                    }
                }
            }
            WaveNumber::Real(e) => {
                let wp = prec.bits() + magnitude_bits(x) + 64;
                let k = e.eval(wp);
                let val = k * x.embed(wp, Embedding::Principal);
                let (frac, _) = crate::quadfield::frac_and_dist_real(&val);
                Ok(Float::with_val(prec.bits(), frac))
            }
        }
    }
}

/// Rough bit size of the integer part of an element (both coordinates).
pub(crate) fn magnitude_bits(x: &QuadElem) -> u32 {
    let bits = |r: &Rational| {
        (i64::from(r.numer().significant_bits()) - i64::from(r.denom().significant_bits()) + 2)
            .max(0) as u32
    };
    bits(x.u()).max(bits(x.v()) + 3)
}

impl fmt::Display for WaveNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveNumber::Real(e) => write!(f, "real:{e}"),
            WaveNumber::Field(x) => {
                if x.is_rational() {
                    write!(f, "{}", x.u())
                } else {
                    write!(f, "{}+{}*theta", x.u(), x.v())
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    offset: usize,
    ring: RingParams,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, ring: RingParams, offset: usize) -> Self {
        Parser { src, pos: 0, offset, ring }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.pos + self.offset, msg)
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<RealExpr> {
        if self.peek().is_none() {
            return Err(self.err("empty wave number"));
        }
        let e = self.expr()?;
        if self.peek().is_some() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<RealExpr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = RealExpr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = RealExpr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<RealExpr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = RealExpr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = RealExpr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<RealExpr> {
        if self.eat('-') {
            return Ok(RealExpr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            let neg = self.eat('-');
            self.skip_ws();
            let start = self.pos;
            while self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let k: i32 = self.src[start..self.pos].parse().map_err(|_| self.err("expected integer exponent"))?;
            return Ok(RealExpr::Pow(Box::new(base), if neg { -k } else { k }));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<RealExpr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.src[self.pos..].starts_with(|c: char| c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                let ident = &self.src[start..self.pos];
                match ident {
                    "pi" => Ok(RealExpr::Pi),
                    "e" => Ok(RealExpr::E),
                    "theta" | "t" => Ok(RealExpr::Theta(self.ring)),
                    "sqrt" => {
                        if !self.eat('(') {
                            return Err(self.err("expected '(' after sqrt"));
                        }
                        let e = self.expr()?;
                        if !self.eat(')') {
                            return Err(self.err("expected ')'"));
                        }
                        Ok(RealExpr::Sqrt(Box::new(e)))
                    }
                    _ if ident.starts_with("sqrt") && ident[4..].chars().all(|c| c.is_ascii_digit()) => {
                        let n: u32 = ident[4..].parse().map_err(|_| self.err("bad sqrt literal"))?;
                        Ok(RealExpr::sqrt_of(n))
                    }
                    _ => {
                        self.pos = start;
                        Err(self.err(format!("unknown identifier {ident:?}")))
                    }
                }
            }
            Some(c) => Err(self.err(format!("unexpected character {c:?}"))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<RealExpr> {
        let start = self.pos;
        while self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        let lit = &self.src[start..self.pos];
        let value = match lit.split_once('.') {
            None => Rational::from(lit.parse::<rug::Integer>().map_err(|_| self.err("bad number"))?),
            Some((int, frac)) => {
                if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
                    return Err(Error::parse(start + self.offset, format!("bad number {lit:?}")));
                }
                let digits = format!("{int}{frac}");
                let num: rug::Integer = digits.parse().map_err(|_| self.err("bad number"))?;
                let den = rug::Integer::from(10).pow(frac.len() as u32);
                Rational::from((num, den))
            }
        };
        Ok(RealExpr::Rational(value))
    }
}
