//! Exact arithmetic in `Z[θ]` / `Q(θ)` for `θ² = pθ + q`, together with
//! arbitrary-precision real embeddings and fractional-part evaluation.
//!
//! `θ = (p + √D)/2` and `θ' = (p − √D)/2` with discriminant `D = p² + 4q`.
//! Coordinates are exact rationals, so nothing overflows regardless of how
//! far the powers of `θ` are pushed.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::float::Round;
use rug::ops::AssignRound;
use rug::{Assign, Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters `(p, q)` of the defining relation `θ² = pθ + q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingParams {
    p: u32,
    q: u32,
}

impl RingParams {
    /// Ring of the Pisot class: `1 ≤ q ≤ p`.
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if q > p {
            return Err(Error::InvalidRing { p, q, reason: "q > p leaves the Pisot class" });
        }
        Self::unchecked_class(p, q)
    }

    /// Validates positivity and irrationality only. Rings built this way may
    /// fail the PV property; used for negative controls.
    pub fn unchecked_class(p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidRing { p, q, reason: "p and q must be positive" });
        }
        let d = u64::from(p) * u64::from(p) + 4 * u64::from(q);
        let s = d.isqrt();
        if s * s == d {
            return Err(Error::InvalidRing { p, q, reason: "discriminant is a perfect square" });
        }
        Ok(RingParams { p, q })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// `D = p² + 4q`.
    pub fn discriminant(&self) -> u64 {
        u64::from(self.p) * u64::from(self.p) + 4 * u64::from(self.q)
    }

    pub fn sqrt_discriminant(&self, prec: u32) -> Float {
        Float::with_val(prec, self.discriminant()).sqrt()
    }

    /// Principal root `θ` rounded to `prec` bits.
    pub fn theta(&self, prec: u32) -> Float {
        let s = self.sqrt_discriminant(prec + 16);
        Float::with_val(prec, (s + self.p) / 2u32)
    }

    /// Conjugate root `θ'` rounded to `prec` bits.
    pub fn theta_conj(&self, prec: u32) -> Float {
        let s = self.sqrt_discriminant(prec + 16);
        Float::with_val(prec, (Float::with_val(prec + 16, self.p) - s) / 2u32)
    }

    pub fn log2_theta(&self) -> f64 {
        let d = self.discriminant() as f64;
        ((f64::from(self.p) + d.sqrt()) / 2.0).log2()
    }

    pub fn is_pisot_class(&self) -> bool {
        self.q <= self.p
    }
}

impl fmt::Display for RingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "θ²={}θ+{}", self.p, self.q)
    }
}

/// Working precision in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Precision {
    bits: u32,
}

impl Precision {
    pub const MIN_BITS: u32 = 64;

    pub fn new(bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::InvalidPrecision(bits));
        }
        Ok(Precision { bits })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// Default precision for phase-critical work up to level `n_max`:
    /// `ceil(n_max·log₂θ) + 128`. Positions at level `n` are of size `θ^n`,
    /// so that many leading bits go to the integer part of `k·x`.
    pub fn scaled(ring: RingParams, n_max: u32) -> Self {
        let lost = (f64::from(n_max) * ring.log2_theta()).ceil() as u32;
        Precision { bits: lost + 128 }
    }

    pub fn max(self, other: Precision) -> Precision {
        if self.bits >= other.bits {
            self
        } else {
            other
        }
    }
}

impl TryFrom<u32> for Precision {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        Precision::new(bits)
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.bits
    }
}

/// Which real embedding of `Q(θ)` to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedding {
    Principal,
    Conjugate,
}

/// An element `u + vθ` of `Q(θ)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadElem {
    u: Rational,
    v: Rational,
    ring: RingParams,
}

impl QuadElem {
    pub fn new(ring: RingParams, u: impl Into<Rational>, v: impl Into<Rational>) -> Self {
        QuadElem { u: u.into(), v: v.into(), ring }
    }

    pub fn zero(ring: RingParams) -> Self {
        Self::new(ring, 0, 0)
    }

    pub fn one(ring: RingParams) -> Self {
        Self::new(ring, 1, 0)
    }

    pub fn theta(ring: RingParams) -> Self {
        Self::new(ring, 0, 1)
    }

    pub fn u(&self) -> &Rational {
        &self.u
    }

    pub fn v(&self) -> &Rational {
        &self.v
    }

    pub fn ring(&self) -> RingParams {
        self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.u.cmp0().is_eq() && self.v.cmp0().is_eq()
    }

    /// True when `v = 0`, i.e. the element is a rational number.
    pub fn is_rational(&self) -> bool {
        self.v.cmp0().is_eq()
    }

    /// True when both coordinates are integers (element of `Z[θ]`).
    pub fn is_integral(&self) -> bool {
        *self.u.denom() == 1 && *self.v.denom() == 1
    }

    fn same_ring(&self, other: &QuadElem) -> Result<()> {
        if self.ring != other.ring {
            return Err(Error::RingMismatch(self.ring, other.ring));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &QuadElem) -> Result<QuadElem> {
        self.same_ring(other)?;
        Ok(QuadElem {
            u: Rational::from(&self.u + &other.u),
            v: Rational::from(&self.v + &other.v),
            ring: self.ring,
        })
    }

    pub fn checked_sub(&self, other: &QuadElem) -> Result<QuadElem> {
        self.same_ring(other)?;
        Ok(QuadElem {
            u: Rational::from(&self.u - &other.u),
            v: Rational::from(&self.v - &other.v),
            ring: self.ring,
        })
    }

    /// Exact product, reducing `θ²` to `pθ + q`.
    pub fn checked_mul(&self, other: &QuadElem) -> Result<QuadElem> {
        self.same_ring(other)?;
        let (p, q) = (self.ring.p, self.ring.q);
        let vv = Rational::from(&self.v * &other.v);
        let u = Rational::from(&self.u * &other.u) + Rational::from(&vv * q);
        let v = Rational::from(&self.u * &other.v) + Rational::from(&self.v * &other.u) + vv * p;
        Ok(QuadElem { u, v, ring: self.ring })
    }

    pub fn checked_div(&self, other: &QuadElem) -> Result<QuadElem> {
        self.same_ring(other)?;
        self.checked_mul(&other.inverse()?)
    }

    pub fn scale(&self, factor: &Rational) -> QuadElem {
        QuadElem {
            u: Rational::from(&self.u * factor),
            v: Rational::from(&self.v * factor),
            ring: self.ring,
        }
    }

    /// Multiplication by `θ`: `(u + vθ)θ = qv + (u + pv)θ`.
    pub fn mul_theta(&self) -> QuadElem {
        let u = Rational::from(&self.v * self.ring.q);
        let v = Rational::from(&self.v * self.ring.p) + &self.u;
        QuadElem { u, v, ring: self.ring }
    }

    /// Galois conjugate `u + vθ'`, written back in the `(1, θ)` basis via
    /// `θ' = p − θ`.
    pub fn conjugate(&self) -> QuadElem {
        let u = Rational::from(&self.v * self.ring.p) + &self.u;
        let v = Rational::from(-&self.v);
        QuadElem { u, v, ring: self.ring }
    }

    /// `x + x' = 2u + pv`.
    pub fn trace(&self) -> Rational {
        Rational::from(&self.u * 2u32) + Rational::from(&self.v * self.ring.p)
    }

    /// `x·x' = u² + puv − qv²`.
    pub fn norm(&self) -> Rational {
        let uu = Rational::from(self.u.square_ref());
        let uv = Rational::from(&self.u * &self.v) * self.ring.p;
        let vv = Rational::from(self.v.square_ref()) * self.ring.q;
        uu + uv - vv
    }

    pub fn inverse(&self) -> Result<QuadElem> {
        let n = self.norm();
        if n.cmp0().is_eq() {
            return Err(Error::Domain("inverse of zero".into()));
        }
        let inv = Rational::from(n.recip_ref());
        Ok(self.conjugate().scale(&inv))
    }

    /// Real value under the chosen embedding, to `prec` bits.
    ///
    /// Cancellation between `u` and `vθ'` is detected and the working
    /// precision raised until the result carries `prec` significant bits.
    pub fn embed(&self, prec: u32, which: Embedding) -> Float {
        if self.v.cmp0().is_eq() {
            return Float::with_val(prec, &self.u);
        }
        let magnitude = rational_log2(&self.u).max(rational_log2(&self.v) + 3);
        let mut extra = 32u32;
        loop {
            let wp = prec + extra + magnitude.max(0) as u32;
            let root = match which {
                Embedding::Principal => self.ring.theta(wp),
                Embedding::Conjugate => self.ring.theta_conj(wp),
            };
            let mut val = Float::with_val(wp, &self.v) * root;
            val += &self.u;
            // bits lost to cancellation: term magnitude minus result magnitude
            let lost = match val.get_exp() {
                Some(e) => magnitude + 1 - i64::from(e),
                None => i64::MAX,
            };
            if lost < i64::from(extra) - 8 {
                return Float::with_val(prec, val);
            }
            extra = extra.saturating_mul(2).max(64);
            if extra > 1 << 20 {
                // only an exactly-zero value can cancel this far, and v != 0 rules that out
                return Float::with_val(prec, val);
            }
        }
    }
}

/// Approximate `log₂|x|` of a rational (0 for zero).
fn rational_log2(x: &Rational) -> i64 {
    if x.cmp0().is_eq() {
        return 0;
    }
    i64::from(x.numer().significant_bits()) - i64::from(x.denom().significant_bits()) + 1
}

impl fmt::Display for QuadElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})+({})θ", self.u, self.v)
    }
}

impl Add for &QuadElem {
    type Output = QuadElem;

    fn add(self, rhs: &QuadElem) -> QuadElem {
        self.checked_add(rhs).expect("QuadElem ring mismatch in +")
    }
}

impl Sub for &QuadElem {
    type Output = QuadElem;

    fn sub(self, rhs: &QuadElem) -> QuadElem {
        self.checked_sub(rhs).expect("QuadElem ring mismatch in -")
    }
}

impl Mul for &QuadElem {
    type Output = QuadElem;

    fn mul(self, rhs: &QuadElem) -> QuadElem {
        self.checked_mul(rhs).expect("QuadElem ring mismatch in *")
    }
}

impl Neg for &QuadElem {
    type Output = QuadElem;

    fn neg(self) -> QuadElem {
        QuadElem { u: Rational::from(-&self.u), v: Rational::from(-&self.v), ring: self.ring }
    }
}

/// Iterator over the integer coordinates `(u_n, v_n)` of `θ^n = u_n + v_n θ`,
/// starting at `n = 0`.
#[derive(Clone, Debug)]
pub struct ThetaPowers {
    ring: RingParams,
    u: Integer,
    v: Integer,
}

impl ThetaPowers {
    pub fn new(ring: RingParams) -> Self {
        ThetaPowers { ring, u: Integer::from(1), v: Integer::new() }
    }
}

impl Iterator for ThetaPowers {
    type Item = (Integer, Integer);

    fn next(&mut self) -> Option<Self::Item> {
        let out = (self.u.clone(), self.v.clone());
        let next_u = Integer::from(&self.v * self.ring.q);
        let mut next_v = Integer::from(&self.v * self.ring.p);
        next_v += &self.u;
        self.u = next_u;
        self.v = next_v;
        Some(out)
    }
}

/// `F_n` of the recursion `F_n = pF_{n−1} + qF_{n−2}`, `F_0 = 0`, `F_1 = 1`.
pub fn recurrence_f(ring: RingParams, n: u32) -> Integer {
    recurrence_pair(ring, n).1
}

/// `(F_{n−1}, F_n)`, with `F_{−1} = 1/q·(F_1 − pF_0)` never needed: for
/// `n = 0` the first entry is reported as 0.
fn recurrence_pair(ring: RingParams, n: u32) -> (Integer, Integer) {
    let mut prev = Integer::new();
    let mut cur = Integer::new();
    if n == 0 {
        return (prev, cur);
    }
    cur.assign(1);
    for _ in 1..n {
        let next = Integer::from(&cur * ring.p) + Integer::from(&prev * ring.q);
        prev = std::mem::replace(&mut cur, next);
    }
    (prev, cur)
}

/// `θ^n` as an exact element: `qF_{n−1} + F_nθ` for `n ≥ 1`, and `1` for `n = 0`.
pub fn theta_power(ring: RingParams, n: u32) -> QuadElem {
    if n == 0 {
        return QuadElem::one(ring);
    }
    let (prev, cur) = recurrence_pair(ring, n);
    QuadElem::new(ring, prev * ring.q, cur)
}

/// Fractional part `{x}` and distance to the nearest integer `‖x‖` of a
/// value taken as exact.
///
/// The fractional part is rounded toward zero to the input's precision so
/// it always lies in `[0, 1)`; the distance is rounded to nearest.
pub fn frac_and_dist_real(x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let floor = x.clone().floor();
    // x − ⌊x⌋ can need more bits than x itself when x is slightly below an integer
    let deficit = x.get_exp().map(|e| (-e).max(0) as u32).unwrap_or(0);
    let wp = prec + deficit + 4;
    let frac = Float::with_val(wp, x - &floor);
    let half = Float::with_val(8, 0.5);
    let dist = if frac <= half { frac.clone() } else { Float::with_val(wp, 1u32 - &frac) };
    let mut frac_out = Float::new(prec);
    frac_out.assign_round(&frac, Round::Down);
    (frac_out, Float::with_val(prec, dist))
}

fn rational_frac_and_dist(u: &Rational, prec: u32) -> (Float, Float) {
    let fl = Rational::from(u.floor_ref());
    let frac = Rational::from(u - &fl);
    let half = Rational::from((1, 2));
    let dist = if frac <= half { frac.clone() } else { Rational::from(1u32 - &frac) };
    let mut frac_out = Float::new(prec);
    frac_out.assign_round(&frac, Round::Down);
    (frac_out, Float::with_val(prec, &dist))
}

/// `({x}, ‖x‖)` of a field element by embedding at `prec` bits.
///
/// Fails with [`Error::PrecisionExhausted`] when the embedded value cannot be
/// separated from an integer at this precision.
pub fn frac_and_dist(x: &QuadElem, prec: Precision) -> Result<(Float, Float)> {
    let bits = prec.bits();
    if x.is_rational() {
        return Ok(rational_frac_and_dist(x.u(), bits));
    }
    let val = x.embed(bits, Embedding::Principal);
    let exp = i64::from(val.get_exp().unwrap_or(0));
    if exp >= i64::from(bits) - 4 {
        return Err(Error::exhausted(bits, format!("value {x} has no fractional bits left")));
    }
    let (frac, dist) = frac_and_dist_real(&val);
    // embedding is accurate to a couple of ulps of the value
    let tol = Float::with_val(16, 1) << (exp - i64::from(bits) + 2) as i32;
    if dist <= tol {
        return Err(Error::exhausted(bits, format!("separating {x} from an integer")));
    }
    Ok((frac, dist))
}

/// Same result as [`frac_and_dist`] computed through `x = tr(x) − x'`.
///
/// The integer part of the trace is exact and the conjugate is small for
/// high powers, so this never runs out of precision on non-rational input.
pub fn frac_and_dist_via_trace(x: &QuadElem, prec: Precision) -> (Float, Float) {
    let bits = prec.bits();
    if x.is_rational() {
        return rational_frac_and_dist(x.u(), bits);
    }
    let tr = x.trace();
    let tr_frac = &tr - Rational::from(tr.floor_ref());
    let conj = x.embed(bits + 8, Embedding::Conjugate);
    let conj_exp = i64::from(conj.get_exp().unwrap_or(0));
    // enough bits to hold both the O(1) trace remainder and the conjugate exactly
    let wp = bits + 16 + conj_exp.unsigned_abs() as u32;
    let mut y = Float::with_val(wp, &tr_frac);
    y -= &conj;
    let (frac, dist) = frac_and_dist_real(&y);
    let mut frac_out = Float::new(bits);
    frac_out.assign_round(&frac, Round::Down);
    (frac_out, Float::with_val(bits, dist))
}
