//! Fourier module and closed-form Bragg amplitudes of the noble-means
//! model sets (`θ² = mθ + 1`, written `λ` below).
//!
//! A module point `(c, d)` stands for `k = (c + dλ)/√(m²+4)`; its star image
//! is the Galois conjugate `k* = (c + dλ')/(−√(m²+4))`. With that
//! convention `exp(−2πikx) = exp(2πik*x*)` for every `x ∈ Z[λ]`, so the
//! amplitude is `dens/|W| · ∫_W exp(2πik*y) dy`.

use std::io::Write;

use rug::float::Constant;
use rug::{Float, Rational};
use serde::Serialize;

use crate::complex::BigComplex;
use crate::error::{Error, Result};
use crate::geometry::{density, format_float, realize, window_estimate};
use crate::quadfield::{Embedding, Precision, QuadElem, RingParams};
use crate::substitution::{counts_pq, iterate, BinaryPisotRule};
use crate::wavenumber::WaveNumber;

/// Level at which window and density are estimated.
pub const DEFAULT_ESTIMATE_LEVEL: u32 = 24;
/// Largest patch used for those estimates.
pub const ESTIMATE_SIZE_LIMIT: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ModulePoint {
    pub c: i64,
    pub d: i64,
    pub m: u32,
}

pub fn noble_ring(m: u32) -> Result<RingParams> {
    if m == 0 {
        return Err(Error::Domain("noble means need m ≥ 1".into()));
    }
    RingParams::new(m, 1)
}

/// `a ↦ a^m b, b ↦ a`; `m = 1` is Fibonacci.
pub fn noble_rule(m: u32) -> Result<BinaryPisotRule> {
    noble_ring(m)?;
    BinaryPisotRule::new(&format!("{}b", "a".repeat(m as usize)))
}

impl ModulePoint {
    pub fn new(c: i64, d: i64, m: u32) -> Self {
        ModulePoint { c, d, m }
    }

    fn sqrt_d(m: u32) -> QuadElem {
        // √(m²+4) = 2λ − m
        QuadElem::new(RingParams::new(m, 1).expect("noble ring"), -i64::from(m), 2)
    }

    /// `k` as an exact field element.
    pub fn to_quad(self) -> QuadElem {
        let ring = RingParams::new(self.m, 1).expect("noble ring");
        QuadElem::new(ring, self.c, self.d).checked_div(&Self::sqrt_d(self.m)).expect("√D is invertible")
    }

    pub fn to_wave_number(self) -> WaveNumber {
        WaveNumber::field(self.to_quad())
    }

    pub fn value(self, prec: Precision) -> Float {
        self.to_quad().embed(prec.bits(), Embedding::Principal)
    }

    /// `k* = (c + dλ')/(−√(m²+4))`.
    pub fn star(self, prec: Precision) -> Float {
        self.to_quad().embed(prec.bits(), Embedding::Conjugate)
    }

    pub fn checked_add(self, other: ModulePoint) -> Result<ModulePoint> {
        self.same_m(other)?;
        Ok(ModulePoint::new(self.c + other.c, self.d + other.d, self.m))
    }

    pub fn checked_sub(self, other: ModulePoint) -> Result<ModulePoint> {
        self.same_m(other)?;
        Ok(ModulePoint::new(self.c - other.c, self.d - other.d, self.m))
    }

    fn same_m(self, other: ModulePoint) -> Result<()> {
        if self.m != other.m {
            return Err(Error::Domain(format!("module points for m = {} and m = {}", self.m, other.m)));
        }
        Ok(())
    }
}

/// Module coordinates `(c, d)` of `k`, if integral.
pub fn module_coordinates(k: &WaveNumber, m: u32) -> Result<Option<(i64, i64)>> {
    let ring = noble_ring(m)?;
    let x = match k {
        WaveNumber::Field(x) => x,
        WaveNumber::Real(_) => {
            return Err(Error::Refused("membership of a real literal cannot be decided numerically".into()))
        }
    };
    if x.ring() != ring {
        return Err(Error::RingMismatch(x.ring(), ring));
    }
    let mm = Rational::from(m);
    let c = Rational::from(x.v() * 2u32) - Rational::from(&mm * x.u());
    let d = Rational::from(x.u() * 2u32) + Rational::from(&mm * x.v());
    if !c.is_integer() || !d.is_integer() {
        return Ok(None);
    }
    let to_i64 = |r: &Rational| r.numer().to_i64().ok_or_else(|| Error::Domain("module coordinate overflows i64".into()));
    Ok(Some((to_i64(&c)?, to_i64(&d)?)))
}

pub fn is_in_module(k: &WaveNumber, m: u32) -> Result<bool> {
    Ok(module_coordinates(k, m)?.is_some())
}

/// All `(c, d)` with `|c|, |d| ≤ coeff_bound` and `0 ≤ k ≤ k_max`, sorted
/// by `k`.
pub fn enumerate_module(m: u32, k_max: f64, coeff_bound: u32) -> Result<Vec<ModulePoint>> {
    noble_ring(m)?;
    if k_max.is_nan() || k_max < 0.0 || coeff_bound == 0 {
        return Err(Error::Domain(format!("need k_max ≥ 0 and coeff_bound ≥ 1, got {k_max}, {coeff_bound}")));
    }
    let prec = Precision::new(128).expect("128 bits");
    let b = i64::from(coeff_bound);
    let mut pts: Vec<(Float, ModulePoint)> = Vec::new();
    for c in -b..=b {
        for d in -b..=b {
            let pt = ModulePoint::new(c, d, m);
            let v = pt.value(prec);
            if v >= 0 && v <= k_max {
                pts.push((v, pt));
            }
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1.c, a.1.d).cmp(&(b.1.c, b.1.d))));
    pts.dedup_by(|a, b| a.1 == b.1);
    Ok(pts.into_iter().map(|(_, p)| p).collect())
}

#[derive(Clone, Debug)]
pub struct WindowSpec {
    pub lo: Float,
    pub hi: Float,
    pub certified: bool,
}

/// Window hull and density of the `a^m b` model set, from the largest
/// patch up to [`DEFAULT_ESTIMATE_LEVEL`] that stays below
/// [`ESTIMATE_SIZE_LIMIT`] points.
pub fn estimate_window_and_density(m: u32, prec: Precision) -> Result<(WindowSpec, Float)> {
    let rule = noble_rule(m)?;
    let level = (2..=DEFAULT_ESTIMATE_LEVEL)
        .take_while(|&n| {
            let (a, b) = counts_pq(m, 1, n);
            (a + b) <= ESTIMATE_SIZE_LIMIT
        })
        .last()
        .unwrap_or(2);
    let w = window_estimate(&rule, level, prec)?;
    let dens = density(&realize(&iterate(&rule, level)?, rule.ring()), prec);
    Ok((WindowSpec { lo: w.lo, hi: w.hi, certified: w.certified }, dens))
}

/// `dens/|W| · ∫_W exp(2πik*y) dy` for an interval window.
pub fn modelset_amplitude(pt: ModulePoint, window: &WindowSpec, dens: &Float, prec: Precision) -> Result<BigComplex> {
    if !window.certified {
        return Err(Error::Refused("closed-form amplitudes need an interval window".into()));
    }
    let bits = prec.bits() + 32;
    let width = Float::with_val(bits, &window.hi - &window.lo);
    if width <= 0 {
        return Err(Error::Domain("window has zero measure".into()));
    }
    let scale = Float::with_val(bits, dens / &width);
    let s = pt.star(Precision::new(bits)?);
    if s.is_zero() {
        return Ok(BigComplex::from_real(Float::with_val(prec.bits(), dens)));
    }
    // ∫ e^{2πisy} dy = (e^{2πis·hi} − e^{2πis·lo}) / (2πis)
    let at = |y: &Float| BigComplex::unit_phase(&Float::with_val(bits, -(Float::with_val(bits, &s * y))), bits);
    let diff = at(&window.hi).sub(&at(&window.lo));
    let two_pi_s = Float::with_val(bits, Float::with_val(bits, Constant::Pi) * &s) * 2u32;
    // divide by i·2πs: (x + iy)/(i t) = (y − ix)/t
    let quotient = BigComplex::new(
        Float::with_val(bits, &diff.im / &two_pi_s),
        Float::with_val(bits, -(Float::with_val(bits, &diff.re / &two_pi_s))),
    );
    let out = quotient.scale(&scale);
    Ok(BigComplex::new(Float::with_val(prec.bits(), &out.re), Float::with_val(prec.bits(), &out.im)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumRow {
    pub c: i64,
    pub d: i64,
    pub k_value: f64,
    pub intensity_formula: f64,
    pub intensity_expsum: f64,
    pub rel_error: f64,
    pub converged: bool,
}

/// Formula intensities next to the exponential-sum limits at `n_max`.
pub fn spectrum(m: u32, points: &[ModulePoint], n_max: u32, prec: Precision) -> Result<Vec<SpectrumRow>> {
    let rule = noble_rule(m)?;
    let (window, dens) = estimate_window_and_density(m, prec)?;
    points
        .iter()
        .map(|&pt| {
            let formula = modelset_amplitude(pt, &window, &dens, prec)?.norm_sqr().to_f64();
            let series = crate::amplitude::recursive_amplitudes(&rule, &pt.to_wave_number(), n_max, prec)?;
            let est = crate::amplitude::intensity_estimate(&series)?;
            let diff = (formula - est.intensity).abs();
            let rel_error = if est.intensity == 0.0 { diff } else { diff / est.intensity.abs() };
            Ok(SpectrumRow {
                c: pt.c,
                d: pt.d,
                k_value: pt.value(prec).to_f64(),
                intensity_formula: formula,
                intensity_expsum: est.intensity,
                rel_error,
                converged: est.converged,
            })
        })
        .collect()
}

/// Writes `c,d,k_value,intensity_formula,intensity_expsum,rel_error`.
pub fn write_spectrum_csv<W: Write>(rows: &[SpectrumRow], out: W, digits: usize) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["c", "d", "k_value", "intensity_formula", "intensity_expsum", "rel_error"])?;
    let fmt = |x: f64| format_float(&Float::with_val(64, x), digits);
    for r in rows {
        wtr.write_record([
            r.c.to_string(),
            r.d.to_string(),
            fmt(r.k_value),
            fmt(r.intensity_formula),
            fmt(r.intensity_expsum),
            fmt(r.rel_error),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
