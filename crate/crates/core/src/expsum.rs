//! Exponential sums `Σ_j exp(−2πi φ_j)` along a tiling.
//!
//! Consecutive control points differ by one tile, so `φ_{j+1} = φ_j + α`
//! after a `b` and `φ_j + β` after an `a` (all mod 1). Terms are advanced by
//! one complex multiplication in multi-limb fixed point; every
//! [`ANCHOR_EVERY`] points the term is recomputed from the phase reduced mod
//! 1 at full MPFR precision, which bounds the accumulated rounding drift.

use rug::integer::Order;
use rug::{Float, Integer};

use crate::complex::BigComplex;
use crate::quadfield::frac_and_dist_real;
use crate::substitution::{Letter, Word};

pub(crate) const ANCHOR_EVERY: usize = 1024;
const MAX_LIMBS: usize = 16;

/// Per-step phases of a realized word.
#[derive(Clone, Debug)]
pub(crate) struct PhaseSteps {
    /// `{k}`, the phase advance across a `b` tile.
    pub alpha: Float,
    /// `{kθ}`, the phase advance across an `a` tile.
    pub beta: Float,
    /// Phase of the first control point.
    pub gamma: Float,
}

/// Sum over all control points of `letters`, accurate to about
/// `2^{-target_bits}` in absolute terms, rounded to `out_prec` bits.
pub(crate) fn chain_exp_sum(letters: &Word, steps: &PhaseSteps, target_bits: u32, out_prec: u32) -> BigComplex {
    let n = letters.len().max(1) as u64;
    let log_n = 64 - n.leading_zeros();
    let log_r = ANCHOR_EVERY.trailing_zeros();
    let frac_bits = target_bits + log_n + log_r + 8;
    let limbs = ((frac_bits + 3) as usize).div_ceil(64).max(2);
    macro_rules! dispatch {
        ($($l:literal),*) => {
            match limbs {
                $($l => run::<$l>(letters, steps, out_prec),)*
                _ => mpfr_chain(letters, steps, frac_bits, out_prec),
            }
        };
    }
    dispatch!(2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16)
}

fn anchor_phase(steps: &PhaseSteps, u: u64, v: u64, wp: u32) -> Float {
    let mut phi = Float::with_val(wp, &steps.alpha * u);
    phi += Float::with_val(wp, &steps.beta * v);
    phi += &steps.gamma;
    frac_and_dist_real(&phi).0
}

fn run<const L: usize>(letters: &Word, steps: &PhaseSteps, out_prec: u32) -> BigComplex {
    let bits = Fx::<L>::FRAC;
    let wp = bits + 160;
    let step_a = Cx::<L>::from_big(&BigComplex::unit_phase(&steps.beta, bits + 16));
    let step_b = Cx::<L>::from_big(&BigComplex::unit_phase(&steps.alpha, bits + 16));
    let mut acc_re = Acc::<L>::default();
    let mut acc_im = Acc::<L>::default();
    let (mut u, mut v) = (0u64, 0u64);
    let mut z = Cx::<L>::default();
    for (j, letter) in letters.iter().enumerate() {
        if j % ANCHOR_EVERY == 0 {
            let phi = anchor_phase(steps, u, v, wp);
            z = Cx::from_big(&BigComplex::unit_phase(&phi, bits + 16));
        }
        acc_re.add(&z.re);
        acc_im.add(&z.im);
        match letter {
            Letter::A => {
                v += 1;
                z = z.mul(&step_a);
            }
            Letter::B => {
                u += 1;
                z = z.mul(&step_b);
            }
        }
    }
    BigComplex::new(acc_re.to_float(out_prec), acc_im.to_float(out_prec))
}

/// Same recurrence in MPFR, for precisions beyond the fixed-point kernels.
fn mpfr_chain(letters: &Word, steps: &PhaseSteps, frac_bits: u32, out_prec: u32) -> BigComplex {
    let bits = frac_bits + 8;
    let wp = bits + 160;
    let step_a = BigComplex::unit_phase(&steps.beta, bits);
    let step_b = BigComplex::unit_phase(&steps.alpha, bits);
    let mut acc = BigComplex::zero(bits + 64);
    let (mut u, mut v) = (0u64, 0u64);
    let mut z = BigComplex::zero(bits);
    for (j, letter) in letters.iter().enumerate() {
        if j % ANCHOR_EVERY == 0 {
            z = BigComplex::unit_phase(&anchor_phase(steps, u, v, wp), bits);
        }
        acc.re += &z.re;
        acc.im += &z.im;
        match letter {
            Letter::A => {
                v += 1;
                z = z.mul(&step_a);
            }
            Letter::B => {
                u += 1;
                z = z.mul(&step_b);
            }
        }
    }
    BigComplex::new(Float::with_val(out_prec, &acc.re), Float::with_val(out_prec, &acc.im))
}

/// Signed fixed-point number in two's complement, little-endian limbs,
/// `64L − 3` fractional bits (range `[-4, 4)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Fx<const L: usize>([u64; L]);

impl<const L: usize> Default for Fx<L> {
    fn default() -> Self {
        Fx([0; L])
    }
}

impl<const L: usize> Fx<L> {
    const FRAC: u32 = 64 * L as u32 - 3;

    fn from_float(x: &Float) -> Self {
        let scaled = Float::with_val(x.prec() + Self::FRAC + 8, x << Self::FRAC);
        let mut i = scaled.to_integer().expect("finite fixed-point input");
        if i < 0 {
            i += Integer::from(1) << (64 * L as u32);
        }
        let digits = i.to_digits::<u64>(Order::Lsf);
        let mut limbs = [0u64; L];
        limbs[..digits.len()].copy_from_slice(&digits);
        Fx(limbs)
    }

    #[cfg(test)]
    fn to_float(self, prec: u32) -> Float {
        let mut i = Integer::from_digits(&self.0, Order::Lsf);
        if self.is_neg() {
            i -= Integer::from(1) << (64 * L as u32);
        }
        Float::with_val(prec, i) >> Self::FRAC
    }

    #[inline]
    fn is_neg(&self) -> bool {
        self.0[L - 1] >> 63 == 1
    }

    #[inline]
    #[allow(clippy::needless_range_loop)]
    fn add(&self, rhs: &Self) -> Self {
        let mut out = [0u64; L];
        let mut carry = false;
        for i in 0..L {
            let (s1, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            out[i] = s2;
            carry = c1 | c2;
        }
        Fx(out)
    }

    #[inline]
    #[allow(clippy::needless_range_loop)]
    fn sub(&self, rhs: &Self) -> Self {
        let mut out = [0u64; L];
        let mut borrow = false;
        for i in 0..L {
            let (d1, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            out[i] = d2;
            borrow = b1 | b2;
        }
        Fx(out)
    }

    /// Signed product, truncated toward −∞.
    #[inline]
    fn mul(&self, rhs: &Self) -> Self {
        let mut prod = [0u64; 2 * MAX_LIMBS];
        for i in 0..L {
            let mut carry: u128 = 0;
            for j in 0..L {
                let t = u128::from(self.0[i]) * u128::from(rhs.0[j]) + u128::from(prod[i + j]) + carry;
                prod[i + j] = t as u64;
                carry = t >> 64;
            }
            prod[i + L] = carry as u64;
        }
        // unsigned → signed: subtract the other operand from the high half
        if self.is_neg() {
            sub_in_place::<L>(&mut prod[L..2 * L], &rhs.0);
        }
        if rhs.is_neg() {
            sub_in_place::<L>(&mut prod[L..2 * L], &self.0);
        }
        let mut out = [0u64; L];
        for i in 0..L {
            out[i] = (prod[L - 1 + i] >> 61) | (prod[L + i] << 3);
        }
        Fx(out)
    }
}

#[inline]
fn sub_in_place<const L: usize>(dst: &mut [u64], rhs: &[u64; L]) {
    let mut borrow = false;
    for i in 0..L {
        let (d1, b1) = dst[i].overflowing_sub(rhs[i]);
        let (d2, b2) = d1.overflowing_sub(borrow as u64);
        dst[i] = d2;
        borrow = b1 | b2;
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Cx<const L: usize> {
    re: Fx<L>,
    im: Fx<L>,
}

impl<const L: usize> Cx<L> {
    fn from_big(z: &BigComplex) -> Self {
        Cx { re: Fx::from_float(&z.re), im: Fx::from_float(&z.im) }
    }

    #[inline]
    fn mul(&self, rhs: &Self) -> Self {
        let ac = self.re.mul(&rhs.re);
        let bd = self.im.mul(&rhs.im);
        let ad = self.re.mul(&rhs.im);
        let bc = self.im.mul(&rhs.re);
        Cx { re: ac.sub(&bd), im: ad.add(&bc) }
    }
}

/// Wide accumulator: `L` fractional limbs plus a signed 64-bit top limb.
#[derive(Clone, Copy, Debug)]
struct Acc<const L: usize> {
    lo: [u64; L],
    hi: i64,
}

impl<const L: usize> Default for Acc<L> {
    fn default() -> Self {
        Acc { lo: [0; L], hi: 0 }
    }
}

impl<const L: usize> Acc<L> {
    #[inline]
    fn add(&mut self, x: &Fx<L>) {
        let mut carry = false;
        for i in 0..L {
            let (s1, c1) = self.lo[i].overflowing_add(x.0[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            self.lo[i] = s2;
            carry = c1 | c2;
        }
        let ext: i64 = if x.is_neg() { -1 } else { 0 };
        self.hi = self.hi.wrapping_add(ext).wrapping_add(carry as i64);
    }

    fn to_float(self, prec: u32) -> Float {
        let mut i = Integer::from_digits(&self.lo, Order::Lsf);
        i += Integer::from(self.hi) << (64 * L as u32);
        Float::with_val(prec.max(64 * L as u32 + 64), i) >> Fx::<L>::FRAC
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn float(x: f64) -> Float {
        Float::with_val(256, x)
    }

    #[test]
    fn fixed_roundtrip_and_sign() {
        for x in [0.0, 1.0, -1.0, 0.5, -0.75, 3.25, -3.999] {
            let fx = Fx::<3>::from_float(&float(x));
            assert_eq!(fx.to_float(256), x, "{x}");
            assert_eq!(fx.is_neg(), x < 0.0);
        }
    }

    proptest! {
        #[test]
        fn fixed_mul_matches_mpfr(a in -1.9f64..1.9, b in -1.9f64..1.9) {
            let fa = Fx::<2>::from_float(&float(a));
            let fb = Fx::<2>::from_float(&float(b));
            let got = fa.mul(&fb).to_float(256);
            let want = Float::with_val(256, float(a) * float(b));
            let err = Float::with_val(256, got - want).abs();
            prop_assert!(err <= Float::with_val(64, 1) >> (Fx::<2>::FRAC - 1));
        }

        #[test]
        fn fixed_add_sub_are_exact(a in -1.9f64..1.9, b in -1.9f64..1.9) {
            let fa = Fx::<4>::from_float(&float(a));
            let fb = Fx::<4>::from_float(&float(b));
            prop_assert_eq!(fa.add(&fb).to_float(256), Float::with_val(256, float(a) + float(b)));
            prop_assert_eq!(fa.sub(&fb).to_float(256), Float::with_val(256, float(a) - float(b)));
        }
    }

    #[test]
    fn accumulator_handles_signs() {
        let mut acc = Acc::<2>::default();
        for x in [0.5, -1.25, -0.25, 3.0, -3.5] {
            acc.add(&Fx::<2>::from_float(&float(x)));
        }
        assert_eq!(acc.to_float(128), -1.5);
        let mut acc = Acc::<2>::default();
        for _ in 0..100_000 {
            acc.add(&Fx::<2>::from_float(&float(-0.75)));
        }
        assert_eq!(acc.to_float(128), -75_000.0);
    }

    /// Per-point MPFR evaluation as oracle.
    fn naive(letters: &Word, steps: &PhaseSteps, prec: u32) -> BigComplex {
        let mut acc = BigComplex::zero(prec);
        let (mut u, mut v) = (0u64, 0u64);
        for l in letters.iter() {
            let z = BigComplex::unit_phase(&anchor_phase(steps, u, v, prec + 64), prec);
            acc = acc.add(&z);
            match l {
                Letter::A => v += 1,
                Letter::B => u += 1,
            }
        }
        acc
    }

    #[test]
    fn chain_matches_naive_sum() {
        let rule = crate::substitution::BinaryPisotRule::new("aab").unwrap();
        let w = crate::substitution::iterate(&rule, 10).unwrap();
        assert!(w.len() > 2 * ANCHOR_EVERY);
        let prec = 320;
        let steps = PhaseSteps {
            alpha: Float::with_val(prec, 2).sqrt() - 1u32,
            beta: Float::with_val(prec, std::f64::consts::FRAC_1_PI),
            gamma: Float::with_val(prec, 0.125),
        };
        let want = naive(&w, &steps, prec);
        for target in [64, 100, 200, 1100] {
            let got = chain_exp_sum(&w, &steps, target, prec);
            let err = got.dist(&want);
            assert!(err < Float::with_val(64, 1) >> target.min(280), "target {target}: err {err}");
        }
    }

    #[test]
    fn zero_phase_counts_points_exactly() {
        let w = Word::parse("abaababaabaab").unwrap();
        let steps = PhaseSteps { alpha: Float::new(128), beta: Float::new(128), gamma: Float::new(128) };
        let s = chain_exp_sum(&w, &steps, 64, 128);
        assert_eq!(s.re, 13);
        assert!(s.im.is_zero());
    }
}
