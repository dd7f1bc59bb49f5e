//! Fractional parts `{ξθ^n}` of scaled powers of a Pisot number: gap
//! statistics, limit-point clustering and `(δ, r)` recurrence witnesses.

use std::io::Write;

use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::format_float;
use crate::quadfield::{frac_and_dist_real, frac_and_dist_via_trace, Precision, RingParams, ThetaPowers};
use crate::wavenumber::WaveNumber;

/// Default cluster resolution for reports.
pub const DEFAULT_CLUSTER_EPS: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub center: f64,
    pub count: usize,
}

#[derive(Clone, Debug)]
pub struct OrbitReport {
    pub xi: WaveNumber,
    pub ring: RingParams,
    /// `fracs[i] = {ξθ^(i+1)}`.
    pub fracs: Vec<Float>,
    /// `dists[i] = ‖ξθ^(i+1)‖`.
    pub dists: Vec<Float>,
    pub tail_start: u32,
    /// Spread of the tail, `max − min` of the fractional parts.
    pub gap: Float,
    pub clusters: Vec<Cluster>,
    pub prec: Precision,
}

impl OrbitReport {
    pub fn len(&self) -> u32 {
        self.fracs.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.fracs.is_empty()
    }

    /// Writes `n,frac,dist_to_int`.
    pub fn write_csv<W: Write>(&self, out: W, digits: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["n", "frac", "dist_to_int"])?;
        for (i, (f, d)) in self.fracs.iter().zip(&self.dists).enumerate() {
            wtr.write_record([(i + 1).to_string(), format_float(f, digits), format_float(d, digits)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn default_tail_start(n: u32) -> u32 {
    (n / 5).max(1)
}

/// `{ξθ^n}` for `n = 1..=count`.
///
/// Field-element `ξ` is multiplied by exact powers and reduced through the
/// trace, so no precision is lost to the integer part. Real `ξ` is evaluated
/// at `prec` bits and fails once `ξθ^n` leaves fewer than 32 fractional bits.
pub fn orbit(xi: &WaveNumber, ring: RingParams, count: u32, prec: Precision) -> Result<OrbitReport> {
    let mut fracs = Vec::with_capacity(count as usize);
    let mut dists = Vec::with_capacity(count as usize);
    match xi {
        WaveNumber::Field(x) => {
            if x.ring() != ring {
                return Err(Error::RingMismatch(x.ring(), ring));
            }
            let mut y = x.clone();
            for _ in 0..count {
                y = y.mul_theta();
                let (f, d) = frac_and_dist_via_trace(&y, prec);
                fracs.push(f);
                dists.push(d);
            }
        }
        WaveNumber::Real(expr) => {
            let bits = prec.bits();
            let value = expr.eval(bits + 16);
            let theta = ring.theta(bits + 16);
            for (n, (u, v)) in ThetaPowers::new(ring).enumerate().skip(1).take(count as usize) {
                let mut pow = Float::with_val(bits, &theta * &v);
                pow += &u;
                let y = Float::with_val(bits, &pow * &value);
                let exp = y.get_exp().unwrap_or(0);
                if exp > bits as i32 - 32 {
                    return Err(Error::exhausted(bits, format!("orbit term n = {n} needs more than {bits} bits")));
                }
                let (f, d) = frac_and_dist_real(&y);
                fracs.push(f);
                dists.push(d);
            }
        }
    }
    let tail_start = default_tail_start(count);
    let mut report = OrbitReport {
        xi: xi.clone(),
        ring,
        fracs,
        dists,
        tail_start,
        gap: Float::new(prec.bits()),
        clusters: Vec::new(),
        prec,
    };
    if count > 0 {
        report.gap = gap_estimate(&report, tail_start).gap;
        report.clusters = clusters(&report, DEFAULT_CLUSTER_EPS, tail_start);
    }
    Ok(report)
}

/// Precision at which [`orbit`] reaches `count` terms for real `ξ` of
/// modest size: the scaled precision for `count` plus headroom.
pub fn orbit_precision(ring: RingParams, count: u32) -> Precision {
    Precision::new(Precision::scaled(ring, count).bits() + 64).expect("above minimum")
}

#[derive(Clone, Debug)]
pub struct GapEstimate {
    pub gap: Float,
    /// `1/(1+θ)`.
    pub bound: Float,
    pub satisfied: bool,
}

fn tail(report: &OrbitReport, tail_start: u32) -> &[Float] {
    let skip = (tail_start.max(1) - 1) as usize;
    &report.fracs[skip.min(report.fracs.len())..]
}

/// Spread of `{ξθ^n}` over `n ≥ tail_start` against the lower bound
/// `1/(1+θ)` that holds for `ξ ∉ Q(θ)`.
pub fn gap_estimate(report: &OrbitReport, tail_start: u32) -> GapEstimate {
    let bits = report.prec.bits();
    let t = tail(report, tail_start);
    let gap = match (t.iter().min_by(|a, b| a.total_cmp(b)), t.iter().max_by(|a, b| a.total_cmp(b))) {
        (Some(lo), Some(hi)) => Float::with_val(bits, hi - lo),
        _ => Float::new(bits),
    };
    let bound = Float::with_val(bits, 1u32 + report.ring.theta(bits + 8)).recip();
    let satisfied = gap >= Float::with_val(bits, &bound - 1e-6);
    GapEstimate { gap, bound, satisfied }
}

/// Greedy cover of the tail by arcs of length `eps` on the circle `R/Z`.
///
/// The sweep starts just after the widest empty arc, so a cluster that
/// straddles `0 ≡ 1` is never split.
pub fn clusters(report: &OrbitReport, eps: f64, tail_start: u32) -> Vec<Cluster> {
    let mut pts: Vec<f64> = tail(report, tail_start).iter().map(Float::to_f64).collect();
    if pts.is_empty() {
        return Vec::new();
    }
    pts.sort_by(f64::total_cmp);
    let n = pts.len();
    let mut widest = (0, pts[0] + 1.0 - pts[n - 1]);
    for i in 1..n {
        let g = pts[i] - pts[i - 1];
        if g > widest.1 {
            widest = (i, g);
        }
    }
    let unrolled: Vec<f64> = (0..n)
        .map(|j| {
            let i = (widest.0 + j) % n;
            if i < widest.0 { pts[i] + 1.0 } else { pts[i] }
        })
        .collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && unrolled[end + 1] - unrolled[start] <= eps {
            end += 1;
        }
        let center = (unrolled[start] + unrolled[end]) / 2.0;
        out.push(Cluster { center: center - center.floor(), count: end - start + 1 });
        start = end + 1;
    }
    out
}

pub fn cluster_count(report: &OrbitReport, eps: f64, tail_start: u32) -> Result<usize> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::Domain(format!("cluster resolution must lie in (0, 1/4), got {eps}")));
    }
    Ok(clusters(report, eps, tail_start).len())
}

/// Outcome of the `(δ, r)` search.
#[derive(Clone, Debug, Serialize)]
pub struct DeltaSearch {
    /// Largest grid `δ` whose best `r` is within bounds, with that `r`.
    pub witness: Option<(f64, u32)>,
    /// Smallest working `r` for every grid `δ`, scanned in descending order.
    pub table: Vec<(f64, u32)>,
}

/// Smallest `r` such that every `n ≤ N − r` with `‖y_n‖ < δ` is followed by
/// some `‖y_j‖ ≥ δ`, `j ∈ n+1..=n+r`. That is the longest run of
/// consecutive sub-`δ` terms (at least 1).
pub fn smallest_r(dists: &[Float], delta: f64) -> u32 {
    let mut longest = 0u32;
    let mut run = 0u32;
    for d in dists {
        if d.to_f64() < delta {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    longest.max(1)
}

/// Grid search for recurrence witnesses `(δ, r)` on `‖ξθ^n‖`.
///
/// `δ` runs over `{i/grid}` in descending order and the first `δ` with
/// `r ≤ r_max` wins.
pub fn find_delta_r(report: &OrbitReport, grid: u32, r_max: u32) -> Result<DeltaSearch> {
    if report.xi.is_field() {
        return Err(Error::Refused("recurrence witnesses need ξ outside Q(θ)".into()));
    }
    if grid < 2 {
        return Err(Error::Domain(format!("δ grid needs at least 2 steps, got {grid}")));
    }
    let mut table = Vec::new();
    let mut witness = None;
    for i in (1..grid).rev() {
        let delta = f64::from(i) / f64::from(grid);
        let r = smallest_r(&report.dists, delta);
        table.push((delta, r));
        if witness.is_none() && r <= r_max {
            witness = Some((delta, r));
        }
    }
    Ok(DeltaSearch { witness, table })
}
