//! Fourier amplitudes `A_n(k) = Σ_j exp(−2πi k x_j)` of level-`n` patches,
//! computed directly and through the block recursion
//! `A_n = f_n A_{n−1} + g_n A_{n−2}`, plus intensity estimates and the
//! constructive `c/n` decay certificate for `k ∉ Q(θ)`.

use std::io::Write;

use rug::ops::Pow;
use rug::{Float, Integer};
use serde::Serialize;

use crate::complex::BigComplex;
use crate::error::{Error, Result};
use crate::expsum::{chain_exp_sum, PhaseSteps};
use crate::geometry::{format_float, realize, Patch};
use crate::orbits::{find_delta_r, orbit, DeltaSearch};
use crate::quadfield::{recurrence_f, theta_power, Precision, QuadElem, RingParams};
use crate::substitution::{blocks, sample_rnms, BinaryPisotRule, Letter, RnmsRule};
use crate::wavenumber::WaveNumber;

/// Tail length and threshold for declaring an intensity converged.
pub const CONVERGENCE_WINDOW: usize = 5;
pub const CONVERGENCE_TOL: f64 = 1e-4;
/// Upper end of the `r` search in [`certify_decay`].
pub const DEFAULT_R_MAX: u32 = 25;

fn wp(prec: Precision) -> u32 {
    prec.bits() + 32
}

/// `A(k)` over `patch` to about `prec` bits of absolute accuracy.
pub fn direct_amplitude(patch: &Patch, k: &WaveNumber, prec: Precision) -> Result<BigComplex> {
    direct_amplitude_to(patch, k, &QuadElem::zero(patch.ring()), prec, prec.bits())
}

/// Amplitude of the patch translated by `shift`, summed to an absolute
/// accuracy of about `2^{-accuracy_bits}`.
///
/// Phases of the two tile lengths and of the shift are reduced mod 1 at
/// full precision; every point phase is then an integer combination of
/// them, re-reduced exactly at regular anchors.
pub fn direct_amplitude_to(
    patch: &Patch,
    k: &WaveNumber,
    shift: &QuadElem,
    prec: Precision,
    accuracy_bits: u32,
) -> Result<BigComplex> {
    k.check_ring(patch.ring())?;
    let ring = patch.ring();
    let end = patch.end();
    let guard = 64 - end.u.max(end.v).max(1).leading_zeros() + 64;
    let step_prec = Precision::new(prec.bits().max(accuracy_bits) + guard)?;
    let steps = PhaseSteps {
        alpha: k.phase(&QuadElem::one(ring), step_prec)?,
        beta: k.phase(&QuadElem::theta(ring), step_prec)?,
        gamma: k.phase(shift, step_prec)?,
    };
    Ok(chain_exp_sum(patch.letters(), &steps, accuracy_bits, wp(prec)))
}

/// `f_n` and `g_n`: sums of `exp(−2πik·offset)` over the `a`- and
/// `b`-blocks of `w^(n)`, offsets taken exactly in `Z[θ]`.
pub fn fg_coefficients(
    rule: &BinaryPisotRule,
    n: u32,
    k: &WaveNumber,
    prec: Precision,
) -> Result<(BigComplex, BigComplex)> {
    let ring = rule.try_ring()?;
    k.check_ring(ring)?;
    let bl = blocks(rule, n)?;
    let bits = wp(prec);
    let mut f = BigComplex::zero(bits);
    let mut g = BigComplex::zero(bits);
    let mut offset = QuadElem::zero(ring);
    for (letter, level) in bl {
        let phase = k.phase(&offset, Precision::new(bits + 16)?)?;
        let term = BigComplex::unit_phase(&phase, bits);
        match letter {
            Letter::A => f = f.add(&term),
            Letter::B => g = g.add(&term),
        }
        offset = &offset + &theta_power(ring, level);
    }
    Ok((f, g))
}

#[derive(Clone, Debug)]
pub struct AmplitudeEntry {
    pub n: u32,
    pub amplitude: BigComplex,
    /// `A_n/θ^n`.
    pub normalized: BigComplex,
}

impl AmplitudeEntry {
    /// `|A_n|²/θ^{2n}`.
    pub fn intensity(&self) -> Float {
        self.normalized.norm_sqr()
    }

    /// `n·|A_n|²/θ^{2n}`.
    pub fn profile(&self) -> Float {
        self.intensity() * self.n
    }
}

#[derive(Clone, Debug)]
pub struct AmplitudeSeries {
    pub k: WaveNumber,
    pub ring: RingParams,
    pub entries: Vec<AmplitudeEntry>,
    pub prec: Precision,
}

impl AmplitudeSeries {
    /// Builds a series from raw `(n, A_n)` pairs.
    pub fn from_entries(
        k: WaveNumber,
        ring: RingParams,
        amplitudes: impl IntoIterator<Item = (u32, BigComplex)>,
        prec: Precision,
    ) -> Self {
        let theta = ring.theta(wp(prec));
        let entries = amplitudes
            .into_iter()
            .map(|(n, amplitude)| {
                let scale = Float::with_val(wp(prec), (&theta).pow(n));
                let normalized = amplitude.div_real(&scale);
                AmplitudeEntry { n, amplitude, normalized }
            })
            .collect();
        AmplitudeSeries { k, ring, entries, prec }
    }

    pub fn last(&self) -> Option<&AmplitudeEntry> {
        self.entries.last()
    }

    pub fn get(&self, n: u32) -> Option<&AmplitudeEntry> {
        self.entries.iter().find(|e| e.n == n)
    }

    /// Writes `n,re,im,abs_normalized,profile`.
    pub fn write_csv<W: Write>(&self, out: W, digits: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["n", "re", "im", "abs_normalized", "profile"])?;
        for e in &self.entries {
            wtr.write_record([
                e.n.to_string(),
                format_float(&e.amplitude.re, digits),
                format_float(&e.amplitude.im, digits),
                format_float(&e.normalized.abs(), digits),
                format_float(&e.profile(), digits),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `A_0 = A_1 = 1`, then the block recursion up to `n_max`.
pub fn recursive_amplitudes(
    rule: &BinaryPisotRule,
    k: &WaveNumber,
    n_max: u32,
    prec: Precision,
) -> Result<AmplitudeSeries> {
    if n_max < 2 {
        return Err(Error::Domain(format!("recursion needs n_max ≥ 2, got {n_max}")));
    }
    let ring = rule.try_ring()?;
    let bits = wp(prec);
    let one = BigComplex::from_real(Float::with_val(bits, 1));
    let mut amps = vec![one.clone(), one];
    for n in 2..=n_max {
        let (f, g) = fg_coefficients(rule, n, k, prec)?;
        let next = f.mul(&amps[n as usize - 1]).add(&g.mul(&amps[n as usize - 2]));
        amps.push(next);
    }
    Ok(AmplitudeSeries::from_entries(k.clone(), ring, (0..).zip(amps), prec))
}

#[derive(Clone, Debug, Serialize)]
pub struct IntensityEstimate {
    pub intensity: f64,
    pub converged: bool,
    pub tail_variation: f64,
}

/// `|A_n|²/θ^{2n}` at the last level, with the spread over the last
/// [`CONVERGENCE_WINDOW`] levels as convergence diagnostic.
pub fn intensity_estimate(series: &AmplitudeSeries) -> Result<IntensityEstimate> {
    let len = series.entries.len();
    if len < CONVERGENCE_WINDOW + 1 {
        return Err(Error::Domain(format!(
            "intensity estimate needs at least {} levels, got {len}",
            CONVERGENCE_WINDOW + 1
        )));
    }
    let tail: Vec<Float> = series.entries[len - CONVERGENCE_WINDOW..].iter().map(|e| e.intensity()).collect();
    let hi = tail.iter().max_by(|a, b| a.total_cmp(b)).expect("nonempty");
    let lo = tail.iter().min_by(|a, b| a.total_cmp(b)).expect("nonempty");
    let tail_variation = Float::with_val(hi.prec(), hi - lo).to_f64();
    Ok(IntensityEstimate {
        intensity: tail[CONVERGENCE_WINDOW - 1].to_f64(),
        converged: tail_variation < CONVERGENCE_TOL,
        tail_variation,
    })
}

#[derive(Clone, Debug)]
pub struct DecayProfile {
    /// `(n, n·|A_n|²/θ^{2n})`.
    pub points: Vec<(u32, Float)>,
    /// `max_{m ≤ n}` of the profile, aligned with `points`.
    pub running_max: Vec<Float>,
}

impl DecayProfile {
    /// Empirical `c`: the overall maximum.
    pub fn c(&self) -> Option<&Float> {
        self.running_max.last()
    }

    pub fn running_max_at(&self, n: u32) -> Option<&Float> {
        self.points.iter().position(|(m, _)| *m == n).map(|i| &self.running_max[i])
    }
}

pub fn decay_profile(series: &AmplitudeSeries) -> DecayProfile {
    let points: Vec<(u32, Float)> = series.entries.iter().map(|e| (e.n, e.profile())).collect();
    let mut running_max: Vec<Float> = Vec::with_capacity(points.len());
    for (_, v) in &points {
        let next = match running_max.last() {
            Some(m) if *m >= *v => m.clone(),
            _ => v.clone(),
        };
        running_max.push(next);
    }
    DecayProfile { points, running_max }
}

/// `θ^{2r+2}·((F_{r+2} − δ'') + qF_{r+1}/θ)^{−2} − 1`.
///
/// Since `F_{r+2} + qF_{r+1}/θ = θ^{r+1}`, the value is exactly `0` for
/// `δ'' = 0`; that case is evaluated in exact field arithmetic.
pub fn feasibility_epsilon(ring: RingParams, r: u32, delta2: &Float, prec: Precision) -> Result<Float> {
    let bits = wp(prec);
    let f1 = recurrence_f(ring, r + 1);
    let f2 = recurrence_f(ring, r + 2);
    if delta2.is_zero() {
        let base = QuadElem::new(ring, f2, 0)
            .checked_add(&QuadElem::new(ring, Integer::from(&f1 * ring.q()), 0).checked_div(&QuadElem::theta(ring))?)?;
        let eps = theta_power(ring, 2 * r + 2).checked_div(&base.checked_mul(&base)?)?;
        let eps = eps.checked_sub(&QuadElem::one(ring))?;
        return Ok(eps.embed(bits, crate::quadfield::Embedding::Principal));
    }
    let theta = ring.theta(bits);
    let mut base = Float::with_val(bits, &f2 - delta2);
    base += Float::with_val(bits, Float::with_val(bits, Integer::from(&f1 * ring.q())) / &theta);
    if base <= 0 {
        return Err(Error::Domain(format!("δ'' = {delta2} leaves no room at r = {r}")));
    }
    let num = Float::with_val(bits, (&theta).pow(2 * r + 2));
    let den = Float::with_val(bits, base.square_ref());
    Ok(num / den - 1u32)
}

/// `δ' = 2 − 2|cos πδ|`: the largest drop below 2 of `|1 + e^{−2πiz}|`
/// guaranteed by `‖z‖ ≥ δ`.
pub fn delta_prime(delta: &Float) -> Float {
    let bits = delta.prec();
    let pi = Float::with_val(bits, rug::float::Constant::Pi);
    let c = Float::with_val(bits, &pi * delta).cos().abs();
    Float::with_val(bits, 2u32 - c * 2u32)
}

/// Smallest `n₀ ≥ r + 2` with `(n₀+1)/(n₀−r−1) ≤ 1 + ε`.
pub fn smallest_n0(r: u32, epsilon: &Float) -> Result<u32> {
    if *epsilon <= 0 {
        return Err(Error::Domain("ε must be positive".into()));
    }
    let bits = epsilon.prec();
    let r1 = Float::with_val(bits, r + 1);
    let est = Float::with_val(bits, (Float::with_val(bits, epsilon + 1u32) * &r1 + 1u32) / epsilon).ceil();
    let mut n0 = est.to_u32_saturating().unwrap_or(u32::MAX).max(r + 2);
    let ok = |n: u32| {
        let lhs = Float::with_val(bits, n + 1) / Float::with_val(bits, n - r - 1);
        lhs <= Float::with_val(bits, epsilon + 1u32)
    };
    // guard the closed form against rounding at the boundary
    while n0 > r + 2 && ok(n0 - 1) {
        n0 -= 1;
    }
    while !ok(n0) {
        n0 += 1;
    }
    Ok(n0)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayCertificate {
    pub delta: f64,
    pub r: u32,
    pub delta_prime: f64,
    pub delta2: f64,
    pub epsilon: f64,
    pub n0: u32,
    pub c: f64,
    /// Orbit scan behind the `(δ, r)` witness.
    pub n_scan: u32,
    /// Levels where `n·|A_n|²/θ^{2n} ≤ c` was checked.
    pub verified_from: u32,
    pub verified_to: u32,
    /// Largest `n·|A_n|²/θ^{2n}/c` over the verified range.
    pub worst_ratio: f64,
    pub label: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFailure {
    pub reason: String,
    pub search: Option<DeltaSearch>,
    /// First level where the bound failed, with the profile value there.
    pub violation: Option<(u32, f64)>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecayOutcome {
    Certified(DecayCertificate),
    Failed(DecayFailure),
}

impl DecayOutcome {
    pub fn certificate(&self) -> Option<&DecayCertificate> {
        match self {
            DecayOutcome::Certified(c) => Some(c),
            DecayOutcome::Failed(_) => None,
        }
    }
}

/// Builds `(δ, r, δ'', ε, n₀, c)` and checks `|A_n|²/θ^{2n} ≤ c/n` over
/// `n₀ ≤ n ≤ max(n_scan, n₀ + 4r)`.
///
/// The `(δ, r)` recurrence on `‖kθ^n‖` is only observed for `n ≤ n_scan`,
/// hence the "empirical" label on the result.
pub fn certify_decay(
    rule: &BinaryPisotRule,
    k: &WaveNumber,
    n_scan: u32,
    grid_steps: u32,
    prec: Precision,
) -> Result<DecayOutcome> {
    certify_decay_bounded(rule, k, n_scan, grid_steps, DEFAULT_R_MAX, prec)
}

/// [`certify_decay`] with the witness search limited to `r ≤ r_max`.
pub fn certify_decay_bounded(
    rule: &BinaryPisotRule,
    k: &WaveNumber,
    n_scan: u32,
    grid_steps: u32,
    r_max: u32,
    prec: Precision,
) -> Result<DecayOutcome> {
    let ring = rule.try_ring()?;
    let in_field = match k {
        WaveNumber::Field(_) => true,
        WaveNumber::Real(e) => e.fold(ring).is_some(),
    };
    if in_field {
        return Err(Error::Refused(format!("k = {} lies in Q(θ); the c/n law needs k outside the field", display_k(k))));
    }
    let orbit_prec = Precision::new(prec.bits() + Precision::scaled(ring, n_scan).bits())?;
    let report = orbit(k, ring, n_scan, orbit_prec)?;
    let search = find_delta_r(&report, grid_steps, r_max)?;
    let Some((delta, r)) = search.witness else {
        return Ok(DecayOutcome::Failed(DecayFailure {
            reason: format!("no (δ, r) with r ≤ {r_max} on a grid of {grid_steps}"),
            search: Some(search),
            violation: None,
        }));
    };
    let bits = wp(prec);
    let dp = delta_prime(&Float::with_val(bits, delta));
    let delta2 = Float::with_val(bits, &dp * &recurrence_f(ring, r + 1));
    let epsilon = feasibility_epsilon(ring, r, &delta2, prec)?;
    let n0 = smallest_n0(r, &epsilon)?;
    let top = n_scan.max(n0 + 4 * r);
    let series = recursive_amplitudes(rule, k, top, Precision::new(prec.bits() + Precision::scaled(ring, top).bits())?)?;
    let profile = decay_profile(&series);
    let window = &profile.points[n0 as usize..=(n0 + 2 * r) as usize];
    let c = window.iter().map(|(_, v)| v).max_by(|a, b| a.total_cmp(b)).expect("nonempty window").clone();
    let mut worst = Float::new(bits);
    for (n, v) in &profile.points[n0 as usize..] {
        if *v > c {
            return Ok(DecayOutcome::Failed(DecayFailure {
                reason: format!("bound c/n fails at n = {n}"),
                search: Some(search),
                violation: Some((*n, v.to_f64())),
            }));
        }
        let ratio = Float::with_val(bits, v / &c);
        if ratio > worst {
            worst = ratio;
        }
    }
    Ok(DecayOutcome::Certified(DecayCertificate {
        delta,
        r,
        delta_prime: dp.to_f64(),
        delta2: delta2.to_f64(),
        epsilon: epsilon.to_f64(),
        n0,
        c: c.to_f64(),
        n_scan,
        verified_from: n0,
        verified_to: top,
        worst_ratio: worst.to_f64(),
        label: format!("empirical up to n_scan = {n_scan}"),
    }))
}

fn display_k(k: &WaveNumber) -> String {
    match k {
        WaveNumber::Real(e) => e.to_string(),
        WaveNumber::Field(x) => x.to_string(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RnmsIntensity {
    pub mean: f64,
    pub stderr: f64,
    /// Per-sample `|A|²/λ^{2n}`, in seed order.
    pub samples: Vec<f64>,
}

/// Mean and standard error of `|A_n|²/λ^{2n}` over `samples` realizations
/// with seeds `seed, seed+1, …`.
pub fn rnms_intensity(
    rule: &RnmsRule,
    k: &WaveNumber,
    n: u32,
    samples: u32,
    seed: u64,
    prec: Precision,
) -> Result<RnmsIntensity> {
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let ring = rule.ring();
    let bits = wp(prec) + 64;
    let scale = Float::with_val(bits, ring.theta(bits).pow(2 * n));
    let mut values = Vec::with_capacity(samples as usize);
    for s in 0..samples {
        let word = sample_rnms(rule, n, seed.wrapping_add(u64::from(s)))?;
        let amp = direct_amplitude(&realize(&word, ring), k, prec)?;
        values.push(Float::with_val(bits, amp.norm_sqr()) / &scale);
    }
    let (mean, stderr) = mean_stderr(&values);
    Ok(RnmsIntensity { mean: mean.to_f64(), stderr: stderr.to_f64(), samples: values.iter().map(Float::to_f64).collect() })
}

/// Identical inputs give a standard error of exactly 0.
fn mean_stderr(values: &[Float]) -> (Float, Float) {
    let bits = values[0].prec() + 64;
    let count = values.len() as u32;
    let mut sum = Float::new(bits);
    for v in values {
        sum += v;
    }
    let mean = sum / count;
    if count < 2 {
        return (mean, Float::new(bits));
    }
    let mut ss = Float::new(bits);
    for v in values {
        let d = Float::with_val(bits, v - &mean);
        ss += d.square();
    }
    let var = ss / (count - 1);
    (mean, (var / count).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substitution::{counts, iterate, Word};
    use crate::wavenumber::RealExpr;
    use proptest::prelude::*;
    use rug::Rational;

    fn prec(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn fib() -> BinaryPisotRule {
        BinaryPisotRule::fibonacci()
    }

    fn close(a: &BigComplex, b: &BigComplex, bits: u32) -> bool {
        a.dist(b) < Float::with_val(64, 1) >> bits
    }

    #[test]
    fn direct_examples() {
        let r = fib().ring();
        let p = prec(256);
        let w = iterate(&fib(), 7).unwrap();
        let a = direct_amplitude(&realize(&w, r), &WaveNumber::zero(r), p).unwrap();
        assert_eq!(a.re, w.len() as u64);
        assert!(a.im.is_zero());
        // "ab" at k = 1/2: 1 + e^{−πiθ}
        let ab = realize(&Word::parse("ab").unwrap(), r);
        let got = direct_amplitude(&ab, &WaveNumber::real_rational(Rational::from((1, 2))), p).unwrap();
        let theta = r.theta(300);
        let want = BigComplex::from_real(Float::with_val(300, 1))
            .add(&BigComplex::unit_phase(&Float::with_val(300, &theta / 2u32), 300));
        assert!(close(&got, &want, 250));
        let b = realize(&Word::parse("b").unwrap(), r);
        let one = direct_amplitude(&b, &WaveNumber::real(RealExpr::Pi), p).unwrap();
        assert_eq!(one.re, 1);
    }

    #[test]
    fn fg_examples() {
        let p = prec(256);
        for img in ["ab", "aab", "aabb", "abab", "aaabbb"] {
            let rule = BinaryPisotRule::new(img).unwrap();
            let (f, g) = fg_coefficients(&rule, 5, &WaveNumber::zero(rule.ring()), p).unwrap();
            assert_eq!(f.re, rule.p());
            assert_eq!(g.re, rule.q());
            assert!(f.im.is_zero() && g.im.is_zero());
        }
        let k = WaveNumber::real(RealExpr::sqrt_of(3));
        let r = fib().ring();
        for n in 2..10 {
            let (f, g) = fg_coefficients(&fib(), n, &k, p).unwrap();
            assert_eq!(f.re, 1);
            let phase = k.phase(&theta_power(r, n - 1), p).unwrap();
            assert!(close(&g, &BigComplex::unit_phase(&phase, 288), 250));
        }
        assert!(matches!(fg_coefficients(&fib(), 1, &k, p), Err(Error::Domain(_))));
    }

    #[test]
    fn fg_half_phase_has_unit_modulus() {
        // ‖kθ^{n−1}‖ = 1/2 for k = 1/(2θ^{n−1})
        let r = fib().ring();
        let n = 6;
        let k = theta_power(r, n - 1).inverse().unwrap().scale(&Rational::from((1, 2)));
        let (_, g) = fg_coefficients(&fib(), n, &WaveNumber::field(k), prec(256)).unwrap();
        assert!((g.re.to_f64() + 1.0).abs() < 1e-30);
        assert!((g.abs().to_f64() - 1.0).abs() < 1e-30);
    }

    #[test]
    fn recursion_examples() {
        let p = prec(256);
        for img in ["ab", "aab", "aba", "abaab"] {
            let rule = BinaryPisotRule::new(img).unwrap();
            let s = recursive_amplitudes(&rule, &WaveNumber::zero(rule.ring()), 20, p).unwrap();
            for e in &s.entries {
                let (a, b) = counts(&rule, e.n);
                assert_eq!(e.amplitude.re, a + b);
            }
        }
        let k = WaveNumber::real_rational(Rational::from((1, 4)));
        let s = recursive_amplitudes(&fib(), &k, 6, p).unwrap();
        let d = direct_amplitude(&realize(&iterate(&fib(), 6).unwrap(), fib().ring()), &k, p).unwrap();
        assert!(close(&s.get(6).unwrap().amplitude, &d, 64));
        let s2 = recursive_amplitudes(&fib(), &k, 2, p).unwrap();
        let (f, g) = fg_coefficients(&fib(), 2, &k, p).unwrap();
        assert_eq!(s2.entries[2].amplitude, f.add(&g));
        assert!(recursive_amplitudes(&fib(), &k, 1, p).is_err());
    }

    #[test]
    fn intensity_examples() {
        let p = prec(256);
        let r = fib().ring();
        let s = recursive_amplitudes(&fib(), &WaveNumber::zero(r), 30, p).unwrap();
        let est = intensity_estimate(&s).unwrap();
        let tau = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(est.converged);
        assert!((est.intensity - tau * tau / 5.0).abs() < 1e-4);
        let s = recursive_amplitudes(&fib(), &WaveNumber::real(RealExpr::sqrt_of(2)), 40, p).unwrap();
        assert!(intensity_estimate(&s).unwrap().intensity < 1e-2);
        let theta = r.theta(256);
        let flat = AmplitudeSeries::from_entries(
            WaveNumber::zero(r),
            r,
            (0..8).map(|n| (n, BigComplex::from_real(Float::with_val(256, (&theta).pow(n))))),
            p,
        );
        let est = intensity_estimate(&flat).unwrap();
        assert!((est.intensity - 1.0).abs() < 1e-60);
        assert!(est.tail_variation < 1e-60);
        let short = AmplitudeSeries::from_entries(WaveNumber::zero(r), r, [(0, BigComplex::zero(64))], p);
        assert!(intensity_estimate(&short).is_err());
    }

    #[test]
    fn decay_profile_examples() {
        let p = prec(512);
        let r = fib().ring();
        let zero = decay_profile(&recursive_amplitudes(&fib(), &WaveNumber::zero(r), 40, p).unwrap());
        assert!(zero.points[40].1 > Float::with_val(64, &zero.points[20].1 * 1.9f64));
        let pi = decay_profile(&recursive_amplitudes(&fib(), &WaveNumber::real(RealExpr::Pi), 40, p).unwrap());
        let at30 = pi.running_max_at(30).unwrap();
        assert!(pi.running_max_at(40).unwrap() <= &Float::with_val(64, at30 * 1.05f64));
        let one = AmplitudeSeries::from_entries(WaveNumber::zero(r), r, [(3, BigComplex::zero(64))], p);
        assert_eq!(decay_profile(&one).points.len(), 1);
    }

    #[test]
    fn feasibility_examples() {
        let p = prec(256);
        for (pp, q) in [(1, 1), (2, 1), (3, 2)] {
            let ring = RingParams::new(pp, q).unwrap();
            for r in [1, 3, 7] {
                assert!(feasibility_epsilon(ring, r, &Float::new(256), p).unwrap().is_zero());
            }
        }
        // ε = (θ^{r+1}/(θ^{r+1} − δ''))² − 1, a rearrangement of the same formula
        let ring = RingParams::new(1, 1).unwrap();
        let tau = (1.0 + 5f64.sqrt()) / 2.0;
        let eps = feasibility_epsilon(ring, 4, &Float::with_val(256, 1.5), p).unwrap().to_f64();
        let t5 = tau.powi(5);
        assert!((eps - ((t5 / (t5 - 1.5)).powi(2) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn n0_examples() {
        for (r, eps) in [(1u32, 0.5f64), (3, 0.1), (10, 15.0), (2, 0.91)] {
            let e = Float::with_val(128, eps);
            let n0 = smallest_n0(r, &e).unwrap();
            let ok = |n: u32| f64::from(n + 1) / f64::from(n - r - 1) <= 1.0 + eps;
            assert!(ok(n0));
            assert!(n0 == r + 2 || !ok(n0 - 1));
        }
    }

    #[test]
    fn delta_prime_is_exact_modulus() {
        for d in [0.05, 0.2, 0.45] {
            let dp = delta_prime(&Float::with_val(128, d)).to_f64();
            let z = 2.0 * std::f64::consts::PI * d;
            let modulus = ((1.0 + z.cos()).powi(2) + z.sin().powi(2)).sqrt();
            assert!((dp - (2.0 - modulus)).abs() < 1e-14);
        }
    }

    #[test]
    fn certify_examples() {
        let p = prec(256);
        let k = WaveNumber::real(RealExpr::sqrt_of(2));
        let out = certify_decay(&fib(), &k, 60, 20, p).unwrap();
        let cert = out.certificate().expect("certificate");
        assert!(cert.delta > 0.0 && cert.delta < 1.0);
        assert!(cert.r <= DEFAULT_R_MAX);
        let tight = certify_decay_bounded(&fib(), &k, 60, 20, 10, p).unwrap();
        let tight = tight.certificate().expect("certificate with r ≤ 10");
        assert!(tight.r <= 10 && tight.delta <= cert.delta);
        assert!(cert.epsilon > 0.0);
        assert!(cert.worst_ratio <= 1.0);
        let r = fib().ring();
        assert!(matches!(certify_decay(&fib(), &WaveNumber::field(QuadElem::one(r)), 60, 20, p), Err(Error::Refused(_))));
        let lit = WaveNumber::parse("real:1/3", r).unwrap();
        assert!(matches!(certify_decay(&fib(), &lit, 60, 20, p), Err(Error::Refused(_))));
    }

    #[test]
    fn rnms_examples() {
        let p = prec(128);
        let degenerate = RnmsRule::new(1, &[0.0, 1.0]).unwrap();
        let k = WaveNumber::real(RealExpr::sqrt_of(2));
        let got = rnms_intensity(&degenerate, &k, 12, 3, 7, p).unwrap();
        assert_eq!(got.stderr, 0.0);
        let s = recursive_amplitudes(&fib(), &k, 12, p).unwrap();
        assert!((got.mean - s.last().unwrap().intensity().to_f64()).abs() < 1e-20);
        let half = RnmsRule::new(1, &[0.5, 0.5]).unwrap();
        let z = rnms_intensity(&half, &WaveNumber::zero(half.ring()), 10, 5, 1, p).unwrap();
        assert_eq!(z.stderr, 0.0);
        let (a, b) = counts(&fib(), 10);
        let tau = fib().ring().theta(256);
        let want = Float::with_val(256, (a + b).square()) / Float::with_val(256, tau.pow(20u32));
        assert!((z.mean - want.to_f64()).abs() < 1e-15);
        assert!(rnms_intensity(&half, &k, 5, 0, 1, p).is_err());
    }

    fn rand_k(ring: RingParams, pick: u8, num: i32, den: u32) -> WaveNumber {
        match pick % 3 {
            0 => WaveNumber::real(RealExpr::Div(Box::new(RealExpr::sqrt_of(den + 1)), Box::new(RealExpr::Rational(Rational::from(num.abs() + 1))))),
            1 => WaveNumber::field(QuadElem::new(ring, Rational::from((num, den)), Rational::from((1, den + 2)))),
            _ => WaveNumber::real_rational(Rational::from((num, den))),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fg_bound_law(img in prop::sample::select(vec!["ab", "ba", "aab", "aba", "aabb", "abab", "aaab", "abba"]),
                        n in 2u32..40, pick in 0u8..3, num in -50i32..50, den in 1u32..40) {
            let rule = BinaryPisotRule::new(img).unwrap();
            let k = rand_k(rule.ring(), pick, num, den);
            let (f, g) = fg_coefficients(&rule, n, &k, prec(128)).unwrap();
            prop_assert!(f.abs().to_f64() <= f64::from(rule.p()) + 1e-12);
            prop_assert!(g.abs().to_f64() <= f64::from(rule.q()) + 1e-12);
        }

        #[test]
        fn recursion_matches_direct(img in prop::sample::select(vec!["ab", "ba", "aab", "aba", "baa", "aabb", "abab"]),
                                    n in 2u32..9, pick in 0u8..3, num in -50i32..50, den in 1u32..40) {
            let rule = BinaryPisotRule::new(img).unwrap();
            let k = rand_k(rule.ring(), pick, num, den);
            let p = prec(256);
            let rec = recursive_amplitudes(&rule, &k, n, p).unwrap();
            let dir = direct_amplitude(&realize(&iterate(&rule, n).unwrap(), rule.ring()), &k, p).unwrap();
            prop_assert!(close(&rec.entries[n as usize].amplitude, &dir, 64));
        }

        #[test]
        fn translation_only_rotates(n in 2u32..10, su in -20i32..20, sv in -20i32..20, den in 1u32..9, num in 1i32..30) {
            let rule = fib();
            let ring = rule.ring();
            let k = WaveNumber::real(RealExpr::Div(Box::new(RealExpr::Pi), Box::new(RealExpr::Rational(Rational::from(num)))));
            let patch = realize(&iterate(&rule, n).unwrap(), ring);
            let p = prec(256);
            let plain = direct_amplitude(&patch, &k, p).unwrap();
            let shift = QuadElem::new(ring, Rational::from((su, den)), Rational::from((sv, den)));
            let moved = direct_amplitude_to(&patch, &k, &shift, p, 256).unwrap();
            let diff = Float::with_val(256, plain.abs() - moved.abs()).abs();
            prop_assert!(diff < Float::with_val(64, 1) >> 64u32);
        }

        #[test]
        fn amplitude_bounded_by_point_count(n in 2u32..16, num in 1i32..100) {
            let rule = BinaryPisotRule::new("aab").unwrap();
            let k = WaveNumber::real(RealExpr::Div(Box::new(RealExpr::E), Box::new(RealExpr::Rational(Rational::from(num)))));
            let s = recursive_amplitudes(&rule, &k, n, prec(128)).unwrap();
            for e in &s.entries {
                let (a, b) = counts(&rule, e.n);
                prop_assert!(e.amplitude.abs().to_f64() <= (a + b).to_f64() * (1.0 + 1e-12));
            }
        }
    }
}
