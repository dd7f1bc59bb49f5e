//! Binary Pisot substitutions `a ↦ w(a,b), b ↦ a` and the random noble
//! means family.

use std::fmt;
use std::str::FromStr;

use bitvec::prelude::*;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::quadfield::RingParams;

/// Default cap on materialized word length.
pub const DEFAULT_SIZE_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    A,
    B,
}

impl Letter {
    fn from_bit(bit: bool) -> Letter {
        if bit {
            Letter::B
        } else {
            Letter::A
        }
    }

    fn bit(self) -> bool {
        self == Letter::B
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::B => 'b',
        }
    }
}

/// A finite word over `{a, b}`, packed one bit per letter (`b` = 1).
#[derive(Clone, PartialEq, Eq)]
pub struct Word {
    bits: BitVec<u64, Lsb0>,
    level: Option<u32>,
}

impl Word {
    pub fn from_letters(letters: &[Letter]) -> Self {
        Word { bits: letters.iter().map(|l| l.bit()).collect(), level: None }
    }

    /// Parses a word such as `"abaab"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = BitVec::with_capacity(s.len());
        for (pos, ch) in s.chars().enumerate() {
            match ch {
                'a' => bits.push(false),
                'b' => bits.push(true),
                _ => return Err(Error::parse(pos, format!("unexpected letter {ch:?}"))),
            }
        }
        Ok(Word { bits, level: None })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Level `n` when the word is `w^(n)` produced by iteration.
    pub fn level(&self) -> Option<u32> {
        self.level
    }

    pub fn get(&self, i: usize) -> Option<Letter> {
        self.bits.get(i).map(|b| Letter::from_bit(*b))
    }

    pub fn iter(&self) -> impl Iterator<Item = Letter> + '_ {
        self.bits.iter().by_vals().map(Letter::from_bit)
    }

    /// `(#a, #b)`.
    pub fn letter_counts(&self) -> (usize, usize) {
        let b = self.bits.count_ones();
        (self.len() - b, b)
    }

    pub fn concat(words: &[&Word]) -> Word {
        let mut bits = BitVec::with_capacity(words.iter().map(|w| w.len()).sum());
        for w in words {
            bits.extend_from_bitslice(&w.bits);
        }
        Word { bits, level: None }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.iter() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 64 {
            write!(f, "Word({self})")
        } else {
            write!(f, "Word(len={})", self.len())
        }
    }
}

/// `σ: a ↦ w(a,b), b ↦ a` with `p = #a(w)`, `q = #b(w)` and `p ≥ q ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryPisotRule {
    image: Vec<Letter>,
    p: u32,
    q: u32,
}

impl BinaryPisotRule {
    pub fn new(image: &str) -> Result<Self> {
        let rule = Self::new_unchecked(image)?;
        if rule.q > rule.p {
            return Err(Error::InvalidRule(format!(
                "w={image} has p={} < q={}, outside the Pisot class",
                rule.p, rule.q
            )));
        }
        Ok(rule)
    }

    /// Skips the `q ≤ p` class check (still requires both letters present).
    pub fn new_unchecked(image: &str) -> Result<Self> {
        let word = Word::parse(image)?;
        let (p, q) = word.letter_counts();
        if p == 0 || q == 0 {
            return Err(Error::InvalidRule(format!("w={image} must contain both a and b")));
        }
        Ok(BinaryPisotRule { image: word.iter().collect(), p: p as u32, q: q as u32 })
    }

    pub fn fibonacci() -> Self {
        Self::new("ab").expect("valid rule")
    }

    pub fn image(&self) -> &[Letter] {
        &self.image
    }

    pub fn image_string(&self) -> String {
        self.image.iter().map(|l| l.as_char()).collect()
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn try_ring(&self) -> Result<RingParams> {
        RingParams::new(self.p, self.q)
    }

    /// Panics for rules built with [`BinaryPisotRule::new_unchecked`] outside
    /// the class.
    pub fn ring(&self) -> RingParams {
        self.try_ring().expect("rule is in the Pisot class")
    }

    /// `[[p, 1], [q, 0]]`.
    pub fn matrix(&self) -> [[u32; 2]; 2] {
        [[self.p, 1], [self.q, 0]]
    }

    /// All distinct image words with the given letter counts, in
    /// lexicographic order (`a < b`).
    pub fn all_with_counts(p: u32, q: u32) -> Vec<BinaryPisotRule> {
        let len = (p + q) as usize;
        let mut out = Vec::new();
        for mask in 0u32..(1 << len) {
            if mask.count_ones() != q {
                continue;
            }
            let s: String =
                (0..len).rev().map(|i| if mask >> i & 1 == 1 { 'b' } else { 'a' }).collect();
            if let Ok(rule) = BinaryPisotRule::new(&s) {
                out.push(rule);
            }
        }
        out.sort_by_key(|r| r.image_string());
        out
    }
}

impl fmt::Display for BinaryPisotRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w={}", self.image_string())
    }
}

/// Random noble means substitution `ζ_m`: `a ↦ a^i b a^{m−i}` with
/// probability `p_i`, `b ↦ a`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnmsRule {
    m: u32,
    probs: Vec<Rational>,
    weights: Vec<f64>,
}

impl RnmsRule {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(m: u32, probs: &[f64]) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidRule("m must be positive".into()));
        }
        if probs.len() != m as usize + 1 {
            return Err(Error::InvalidRule(format!(
                "m={m} needs {} probabilities, got {}",
                m + 1,
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidRule(format!("probability {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidRule(format!("probabilities sum to {sum}, not 1")));
        }
        let exact: Vec<Rational> =
            probs.iter().map(|&p| Rational::from_f64(p).expect("finite")).collect();
        let total: Rational = exact.iter().sum();
        let probs: Vec<Rational> = exact.into_iter().map(|p| p / &total).collect();
        let weights = probs.iter().map(|p| p.to_f64()).collect();
        Ok(RnmsRule { m, probs, weights })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Probabilities renormalized to sum to exactly 1.
    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn probs_f64(&self) -> &[f64] {
        &self.weights
    }

    pub fn ring(&self) -> RingParams {
        RingParams::new(self.m, 1).expect("noble means ring is always valid")
    }

    /// Image of `a` under variant `i`: `a^i b a^{m−i}`.
    pub fn variant(&self, i: usize) -> Vec<Letter> {
        assert!(i <= self.m as usize, "variant {i} out of range for m={}", self.m);
        let mut w = vec![Letter::A; self.m as usize + 1];
        w[i] = Letter::B;
        w
    }

    /// The deterministic rule of variant `i`.
    pub fn deterministic(&self, i: usize) -> BinaryPisotRule {
        let s: String = self.variant(i).iter().map(|l| l.as_char()).collect();
        BinaryPisotRule::new(&s).expect("variant is a class rule")
    }

    /// Index of the variant carrying all the probability, if any.
    pub fn degenerate_variant(&self) -> Option<usize> {
        self.probs.iter().position(|p| *p == 1)
    }
}

impl fmt::Display for RnmsRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let probs: Vec<String> = self.weights.iter().map(|p| p.to_string()).collect();
        write!(f, "m={};probs={}", self.m, probs.join(","))
    }
}

/// Parsed rule specification: `"w=<word>"` or `"m=<int>;probs=<list>"`.
#[derive(Clone, Debug, PartialEq)]
pub enum RuleSpec {
    Deterministic(BinaryPisotRule),
    Random(RnmsRule),
}

impl RuleSpec {
    pub fn ring(&self) -> RingParams {
        match self {
            RuleSpec::Deterministic(r) => r.ring(),
            RuleSpec::Random(r) => r.ring(),
        }
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::Deterministic(r) => r.fmt(f),
            RuleSpec::Random(r) => r.fmt(f),
        }
    }
}

impl FromStr for RuleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s_trim = s.trim_end();
        if let Some(word) = s_trim.strip_prefix("w=") {
            return match Word::parse(word) {
                Ok(_) => Ok(RuleSpec::Deterministic(BinaryPisotRule::new(word)?)),
                Err(Error::Parse { pos, msg }) => Err(Error::parse(pos + 2, msg)),
                Err(e) => Err(e),
            };
        }
        if !s_trim.starts_with("m=") {
            return Err(Error::parse(0, "expected \"w=<word>\" or \"m=<int>;probs=<list>\""));
        }
        let semi = s_trim.find(';').ok_or_else(|| Error::parse(s_trim.len(), "missing \";probs=\""))?;
        let m: u32 = s_trim[2..semi]
            .trim()
            .parse()
            .map_err(|_| Error::parse(2, format!("bad integer {:?}", &s_trim[2..semi])))?;
        let rest = &s_trim[semi + 1..];
        let list = rest
            .strip_prefix("probs=")
            .ok_or_else(|| Error::parse(semi + 1, "expected \"probs=\""))?;
        let mut pos = semi + 1 + "probs=".len();
        let mut probs = Vec::new();
        for item in list.split(',') {
            let value = parse_probability(item.trim()).ok_or_else(|| Error::parse(pos, format!("bad probability {item:?}")))?;
            probs.push(value);
            pos += item.len() + 1;
        }
        Ok(RuleSpec::Random(RnmsRule::new(m, &probs)?))
    }
}

/// Accepts decimals and simple fractions (`1/3`).
fn parse_probability(s: &str) -> Option<f64> {
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        (den != 0.0).then(|| num / den)
    } else {
        s.parse().ok()
    }
}

/// `(#a, #b)` of `w^(n)` by matrix iteration: `(a, b) ↦ (pa + b, qa)`.
pub fn counts(rule: &BinaryPisotRule, n: u32) -> (Integer, Integer) {
    counts_pq(rule.p, rule.q, n)
}

pub fn counts_pq(p: u32, q: u32, n: u32) -> (Integer, Integer) {
    let mut a = Integer::new();
    let mut b = Integer::from(1);
    for _ in 0..n {
        let next_a = Integer::from(&a * p) + &b;
        b = a * q;
        a = next_a;
    }
    (a, b)
}

fn check_cap(p: u32, q: u32, n: u32, cap: usize) -> Result<()> {
    let (a, b) = counts_pq(p, q, n);
    let total = a + b;
    if total > cap {
        return Err(Error::TooLarge { level: n, predicted: total.to_string(), cap });
    }
    Ok(())
}

/// `w^(n) = σ^n(b)` with the default size cap.
pub fn iterate(rule: &BinaryPisotRule, n: u32) -> Result<Word> {
    iterate_capped(rule, n, DEFAULT_SIZE_CAP)
}

pub fn iterate_capped(rule: &BinaryPisotRule, n: u32, cap: usize) -> Result<Word> {
    check_cap(rule.p, rule.q, n, cap)?;
    let image: BitVec<u64, Lsb0> = rule.image.iter().map(|l| l.bit()).collect();
    let mut word: BitVec<u64, Lsb0> = bitvec![u64, Lsb0; 1];
    for _ in 0..n {
        let mut next = BitVec::with_capacity(word.len() * (image.len() + 1) / 2 + 1);
        for bit in word.iter().by_vals() {
            if bit {
                next.push(false);
            } else {
                next.extend_from_bitslice(&image);
            }
        }
        word = next;
    }
    Ok(Word { bits: word, level: Some(n) })
}

/// Perron–Frobenius data of the substitution matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub theta: Float,
    pub theta_conj: Float,
    /// `θ > 1` and `|θ'| < 1`.
    pub is_pv: bool,
}

pub fn eigen(rule: &BinaryPisotRule) -> Eigen {
    const PREC: u32 = 256;
    let d = u64::from(rule.p) * u64::from(rule.p) + 4 * u64::from(rule.q);
    let s = Float::with_val(PREC, d).sqrt();
    let theta = Float::with_val(PREC, &s + rule.p) / 2u32;
    let theta_conj = (Float::with_val(PREC, rule.p) - s) / 2u32;
    let is_pv = theta > 1 && Float::with_val(PREC, theta_conj.abs_ref()) < 1;
    Eigen { theta, theta_conj, is_pv }
}

/// Concatenation rule: `w^(n) = w^(j_0) ⋯ w^(j_{L−1})` with `j_i = n−1` for
/// `a` and `n−2` for `b`.
pub fn blocks(rule: &BinaryPisotRule, n: u32) -> Result<Vec<(Letter, u32)>> {
    if n < 2 {
        return Err(Error::Domain(format!("blocks need n ≥ 2, got {n}")));
    }
    Ok(rule
        .image
        .iter()
        .map(|&l| match l {
            Letter::A => (l, n - 1),
            Letter::B => (l, n - 2),
        })
        .collect())
}

/// One realization of `ζ_m^n(b)`.
///
/// Inflation step `t` (0-based) draws from ChaCha8 seeded with `seed` on
/// stream `t`; every `a` of the current word draws its variant
/// independently, in left-to-right order.
pub fn sample_rnms(rule: &RnmsRule, n: u32, seed: u64) -> Result<Word> {
    sample_rnms_capped(rule, n, seed, DEFAULT_SIZE_CAP)
}

pub fn sample_rnms_capped(rule: &RnmsRule, n: u32, seed: u64, cap: usize) -> Result<Word> {
    check_cap(rule.m, 1, n, cap)?;
    let dist = WeightedIndex::new(&rule.weights)
        .map_err(|e| Error::InvalidRule(format!("probability vector: {e}")))?;
    let variants: Vec<BitVec<u64, Lsb0>> = (0..=rule.m as usize)
        .map(|i| rule.variant(i).iter().map(|l| l.bit()).collect())
        .collect();
    let mut word: BitVec<u64, Lsb0> = bitvec![u64, Lsb0; 1];
    for step in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(step));
        let mut next = BitVec::with_capacity(word.len() * 2);
        for bit in word.iter().by_vals() {
            if bit {
                next.push(false);
            } else {
                next.extend_from_bitslice(&variants[dist.sample(&mut rng)]);
            }
        }
        word = next;
    }
    Ok(Word { bits: word, level: Some(n) })
}

/// Expected substitution matrix `M_ij = Σ_q p_jq · #a_i(w^(j,q))`.
pub fn rnms_matrix(rule: &RnmsRule) -> [[f64; 2]; 2] {
    let mut m = [[Rational::new(), Rational::new()], [Rational::new(), Rational::new()]];
    for (i, prob) in rule.probs.iter().enumerate() {
        let w = Word::from_letters(&rule.variant(i));
        let (na, nb) = w.letter_counts();
        m[0][0] += Rational::from(prob * na as u32);
        m[1][0] += Rational::from(prob * nb as u32);
    }
    // b ↦ a deterministically
    m[0][1] = Rational::from(1);
    [[m[0][0].to_f64(), m[0][1].to_f64()], [m[1][0].to_f64(), m[1][1].to_f64()]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterate_examples() {
        let fib = BinaryPisotRule::fibonacci();
        assert_eq!(iterate(&fib, 0).unwrap().to_string(), "b");
        assert_eq!(iterate(&fib, 3).unwrap().to_string(), "aba");
        assert_eq!(iterate(&fib, 4).unwrap().to_string(), "abaab");
        let aab = BinaryPisotRule::new("aab").unwrap();
        assert_eq!(iterate(&aab, 2).unwrap().to_string(), "aab");
        // σ(aab) is one level above σ²(b) = σ(a)
        assert_eq!(iterate(&aab, 3).unwrap().to_string(), "aabaaba");
        assert_eq!(iterate(&aab, 3).unwrap().level(), Some(3));
    }

    #[test]
    fn iterate_respects_cap() {
        let rule = BinaryPisotRule::new("aaabbb").unwrap();
        match iterate(&rule, 14) {
            Err(Error::TooLarge { level: 14, predicted, cap }) => {
                assert_eq!(cap, DEFAULT_SIZE_CAP);
                assert!(predicted.parse::<u64>().unwrap() > DEFAULT_SIZE_CAP as u64);
            }
            other => panic!("expected TooLarge, got {other:?}"),
        }
        assert!(iterate_capped(&BinaryPisotRule::fibonacci(), 10, 10).is_err());
    }

    #[test]
    fn counts_examples() {
        let fib = BinaryPisotRule::fibonacci();
        assert_eq!(counts(&fib, 4), (Integer::from(3), Integer::from(2)));
        assert_eq!(counts(&fib, 0), (Integer::from(0), Integer::from(1)));
        let r = BinaryPisotRule::new("aab").unwrap();
        assert_eq!(counts(&r, 3), (Integer::from(5), Integer::from(2)));
    }

    #[test]
    fn eigen_examples() {
        let e = eigen(&BinaryPisotRule::fibonacci());
        assert!((e.theta.to_f64() - 1.6180339887).abs() < 1e-9);
        assert!((e.theta_conj.to_f64() + 0.6180339887).abs() < 1e-9);
        assert!(e.is_pv);
        let e = eigen(&BinaryPisotRule::new("aab").unwrap());
        assert!((e.theta.to_f64() - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        let e = eigen(&BinaryPisotRule::new("aaabbb").unwrap());
        assert!((e.theta.to_f64() - (3.0 + 21f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(e.theta_conj.to_f64().abs() < 1.0);
        assert!(e.is_pv);
    }

    #[test]
    fn pv_negative_control() {
        for p in 1..=4u32 {
            let word: String = "a".repeat(p as usize) + &"b".repeat(p as usize + 1);
            assert!(BinaryPisotRule::new(&word).is_err());
            let rule = BinaryPisotRule::new_unchecked(&word).unwrap();
            assert!(!eigen(&rule).is_pv, "p={p}");
        }
    }

    #[test]
    fn blocks_examples() {
        let fib = BinaryPisotRule::fibonacci();
        assert_eq!(blocks(&fib, 5).unwrap(), vec![(Letter::A, 4), (Letter::B, 3)]);
        let aab = BinaryPisotRule::new("aab").unwrap();
        assert_eq!(blocks(&aab, 2).unwrap(), vec![(Letter::A, 1), (Letter::A, 1), (Letter::B, 0)]);
        let ba = BinaryPisotRule::new("ba").unwrap();
        assert_eq!(blocks(&ba, 4).unwrap(), vec![(Letter::B, 2), (Letter::A, 3)]);
        assert!(matches!(blocks(&fib, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn rnms_examples() {
        let r = RnmsRule::new(1, &[1.0, 0.0]).unwrap();
        let ba = BinaryPisotRule::new("ba").unwrap();
        for seed in [0, 1, 99] {
            assert_eq!(sample_rnms(&r, 3, seed).unwrap(), {
                let mut w = iterate(&ba, 3).unwrap();
                w.level = Some(3);
                w
            });
        }
        assert_eq!(sample_rnms(&r, 3, 5).unwrap().to_string(), "aba");
        let r = RnmsRule::new(1, &[0.0, 1.0]).unwrap();
        assert_eq!(sample_rnms(&r, 4, 7).unwrap().to_string(), "abaab");
        let third = 1.0 / 3.0;
        let r = RnmsRule::new(2, &[third, third, third]).unwrap();
        assert_eq!(sample_rnms(&r, 2, 42).unwrap().len(), 3);
    }

    #[test]
    fn rnms_validation() {
        assert!(RnmsRule::new(1, &[0.5, 0.6]).is_err());
        assert!(RnmsRule::new(2, &[0.5, 0.5]).is_err());
        assert!(RnmsRule::new(1, &[-0.1, 1.1]).is_err());
        assert!(RnmsRule::new(0, &[1.0]).is_err());
        let r = RnmsRule::new(1, &[0.5 + 4e-13, 0.5]).unwrap();
        let total: Rational = r.probs().iter().sum();
        assert_eq!(total, 1);
    }

    #[test]
    fn rnms_matrix_is_probability_free() {
        let r = RnmsRule::new(1, &[0.3, 0.7]).unwrap();
        assert_eq!(rnms_matrix(&r), [[1.0, 1.0], [1.0, 0.0]]);
        let r = RnmsRule::new(4, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(rnms_matrix(&r), [[4.0, 1.0], [1.0, 0.0]]);
        let a = RnmsRule::new(2, &[0.1, 0.2, 0.7]).unwrap();
        let b = RnmsRule::new(2, &[0.6, 0.3, 0.1]).unwrap();
        assert_eq!(rnms_matrix(&a), rnms_matrix(&b));
    }

    #[test]
    fn rule_spec_parsing() {
        let spec: RuleSpec = "w=ab".parse().unwrap();
        assert_eq!(spec, RuleSpec::Deterministic(BinaryPisotRule::fibonacci()));
        let spec: RuleSpec = "m=2;probs=0.25,0.5,0.25".parse().unwrap();
        match spec {
            RuleSpec::Random(r) => assert_eq!(r.m(), 2),
            _ => panic!(),
        }
        let spec: RuleSpec = "m=1;probs=1/2,1/2".parse().unwrap();
        assert!(matches!(spec, RuleSpec::Random(_)));
        match "w=abx".parse::<RuleSpec>() {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!("w=abb".parse::<RuleSpec>(), Err(Error::InvalidRule(_))));
        match "m=1;probs=0.5,x".parse::<RuleSpec>() {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 14),
            other => panic!("{other:?}"),
        }
        assert!("z=1".parse::<RuleSpec>().is_err());
    }

    #[test]
    fn all_with_counts_enumerates_arrangements() {
        assert_eq!(BinaryPisotRule::all_with_counts(1, 1).len(), 2);
        assert_eq!(BinaryPisotRule::all_with_counts(3, 3).len(), 20);
        assert!(BinaryPisotRule::all_with_counts(2, 1).iter().all(|r| r.p() == 2 && r.q() == 1));
    }
}
