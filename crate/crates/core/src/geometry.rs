//! Geometric realization of words: tiles of length `θ` for `a` and `1` for
//! `b`, with control points at the left endpoints starting from 0.

use std::io::Write;

use rug::Float;

use crate::error::Result;
use crate::quadfield::{Embedding, Precision, QuadElem, RingParams};
use crate::substitution::{iterate, BinaryPisotRule, Letter, Word};

/// Integer coordinates of `u + vθ ∈ Z[θ]` (`u` counts `b` tiles, `v` counts
/// `a` tiles).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct LatticePoint {
    pub u: u64,
    pub v: u64,
}

impl LatticePoint {
    pub fn to_quad(self, ring: RingParams) -> QuadElem {
        QuadElem::new(ring, self.u, self.v)
    }

    fn step(self, letter: Letter) -> LatticePoint {
        match letter {
            Letter::A => LatticePoint { u: self.u, v: self.v + 1 },
            Letter::B => LatticePoint { u: self.u + 1, v: self.v },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Patch {
    letters: Word,
    positions: Vec<LatticePoint>,
    ring: RingParams,
}

/// Left endpoints as cumulative exact sums of tile lengths.
pub fn realize(word: &Word, ring: RingParams) -> Patch {
    let mut positions = Vec::with_capacity(word.len());
    let mut at = LatticePoint::default();
    for letter in word.iter() {
        positions.push(at);
        at = at.step(letter);
    }
    Patch { letters: word.clone(), positions, ring }
}

impl Patch {
    pub fn letters(&self) -> &Word {
        &self.letters
    }

    pub fn positions(&self) -> &[LatticePoint] {
        &self.positions
    }

    pub fn ring(&self) -> RingParams {
        self.ring
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> QuadElem {
        self.positions[i].to_quad(self.ring)
    }

    /// Right endpoint of the last tile.
    pub fn end(&self) -> LatticePoint {
        match (self.positions.last(), self.letters.get(self.len().wrapping_sub(1))) {
            (Some(p), Some(l)) => p.step(l),
            _ => LatticePoint::default(),
        }
    }

    pub fn total_length(&self) -> QuadElem {
        self.end().to_quad(self.ring)
    }

    /// Images `u + vθ'` of all control points in internal space.
    pub fn star_points(&self, prec: Precision) -> Vec<Float> {
        let end = self.end();
        let guard = 64 - end.u.max(end.v).leading_zeros() + 16;
        let wp = prec.bits() + guard;
        let conj = self.ring.theta_conj(wp);
        self.positions
            .iter()
            .map(|pt| {
                let mut x = Float::with_val(wp, &conj * pt.v);
                x += pt.u;
                Float::with_val(prec.bits(), x)
            })
            .collect()
    }

    /// Writes `index,letter,u,v,position_float,star_float`.
    pub fn write_csv<W: Write>(&self, out: W, prec: Precision, digits: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["index", "letter", "u", "v", "position_float", "star_float"])?;
        let stars = self.star_points(prec);
        for (i, (pt, star)) in self.positions.iter().zip(&stars).enumerate() {
            let pos = pt.to_quad(self.ring).embed(prec.bits(), Embedding::Principal);
            let letter = self.letters.get(i).expect("letter per point").as_char();
            wtr.write_record([
                i.to_string(),
                letter.to_string(),
                pt.u.to_string(),
                pt.v.to_string(),
                format_float(&pos, digits),
                format_float(star, digits),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Decimal rendering with `digits` significant digits; zero prints as `0`.
pub fn format_float(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    x.to_string_radix(10, Some(digits))
}

/// Internal-space hull `[lo, hi]` of a patch's star images.
#[derive(Clone, Debug)]
pub struct WindowEstimate {
    pub lo: Float,
    pub hi: Float,
    /// Only `q = 1` rules have interval windows; for `q ≥ 2` the window may
    /// be fractal and the hull is advisory.
    pub certified: bool,
    pub level: u32,
}

impl WindowEstimate {
    pub fn width(&self) -> Float {
        Float::with_val(self.lo.prec(), &self.hi - &self.lo)
    }
}

pub fn window_estimate(rule: &BinaryPisotRule, n: u32, prec: Precision) -> Result<WindowEstimate> {
    let patch = realize(&iterate(rule, n)?, rule.ring());
    let stars = patch.star_points(prec);
    let mut lo = stars[0].clone();
    let mut hi = stars[0].clone();
    for s in &stars[1..] {
        if *s < lo {
            lo.clone_from(s);
        }
        if *s > hi {
            hi.clone_from(s);
        }
    }
    Ok(WindowEstimate { lo, hi, certified: rule.q() == 1, level: n })
}

/// Points per unit length under the principal embedding.
pub fn density(patch: &Patch, prec: Precision) -> Float {
    assert!(!patch.is_empty(), "density of an empty patch");
    let len = patch.total_length().embed(prec.bits(), Embedding::Principal);
    Float::with_val(prec.bits(), patch.len() as u64) / len
}

/// Limit `(1 + q/θ)/√D` of the density of `w^(n)`.
pub fn limit_density(ring: RingParams, prec: Precision) -> Float {
    let wp = prec.bits() + 16;
    let theta = ring.theta(wp);
    let d = (Float::with_val(wp, ring.q()) / theta + 1u32) / ring.sqrt_discriminant(wp);
    Float::with_val(prec.bits(), d)
}
