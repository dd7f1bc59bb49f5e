use std::io::Write;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use pisot_diffraction::amplitude::{
    certify_decay, decay_profile, intensity_estimate, recursive_amplitudes, rnms_intensity, DecayOutcome,
};
use pisot_diffraction::geometry::{format_float, realize};
use pisot_diffraction::modelset::{
    enumerate_module, estimate_window_and_density, modelset_amplitude, module_coordinates, noble_rule, ModulePoint,
};
use pisot_diffraction::orbits::{cluster_count, clusters, find_delta_r, gap_estimate, orbit as orbit_report, orbit_precision};
use pisot_diffraction::quadfield::recurrence_f;
use pisot_diffraction::substitution::{counts_pq, eigen, iterate, rnms_matrix, sample_rnms};
use pisot_diffraction::{BinaryPisotRule, Precision, RingParams, RnmsRule, RuleSpec, WaveNumber};

use crate::config::{Format, RunConfig};
use crate::CliError;

const DEFAULT_PREC_BITS: u32 = 256;
const DEFAULT_DIGITS: usize = 20;
const F_TABLE_MAX: u32 = 20;

fn prec(cfg: &RunConfig) -> Result<Precision, CliError> {
    Ok(Precision::new(cfg.prec_bits.unwrap_or(DEFAULT_PREC_BITS))?)
}

fn digits(cfg: &RunConfig) -> usize {
    cfg.digits.unwrap_or(DEFAULT_DIGITS)
}

fn rule_spec(cfg: &RunConfig) -> Result<RuleSpec, CliError> {
    let text = cfg.rule.as_deref().unwrap_or("w=ab");
    RuleSpec::from_str(text).map_err(|e| CliError::Config(format!("rule {text:?}: {e}")))
}

fn deterministic(cfg: &RunConfig) -> Result<BinaryPisotRule, CliError> {
    match rule_spec(cfg)? {
        RuleSpec::Deterministic(r) => Ok(r),
        RuleSpec::Random(r) => Err(CliError::Config(format!("this command needs a deterministic rule \"w=...\", got {r}"))),
    }
}

fn random(cfg: &RunConfig) -> Result<RnmsRule, CliError> {
    match rule_spec(cfg)? {
        RuleSpec::Random(r) => Ok(r),
        RuleSpec::Deterministic(r) => Err(CliError::Config(format!("this command needs a rule \"m=...;probs=...\", got {r}"))),
    }
}

fn wave_numbers(cfg: &RunConfig, ring: RingParams) -> Result<Vec<(String, WaveNumber)>, CliError> {
    cfg.k
        .iter()
        .flatten()
        .map(|s| {
            WaveNumber::parse(s, ring)
                .map(|k| (s.clone(), k))
                .map_err(|e| CliError::Config(format!("wave number {s:?}: {e}")))
        })
        .collect()
}

fn single_k(cfg: &RunConfig, ring: RingParams) -> Result<(String, WaveNumber), CliError> {
    let mut ks = wave_numbers(cfg, ring)?;
    if ks.len() != 1 {
        return Err(CliError::Config(format!("exactly one --k is required, got {}", ks.len())));
    }
    Ok(ks.remove(0))
}

/// Stable order by value, then by the text as given.
fn sort_by_value(ks: &mut [(String, WaveNumber)]) {
    ks.sort_by(|a, b| a.1.to_f64().total_cmp(&b.1.to_f64()).then_with(|| a.0.cmp(&b.0)));
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn csv_preamble(cfg: &RunConfig, command: &str, extra: &[String]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    if cfg.timestamp() {
        writeln!(buf, "# generated_at_unix={}", unix_now())?;
    }
    writeln!(
        buf,
        "# pisotdiff {command} prec_bits={} digits={}",
        cfg.prec_bits.unwrap_or(DEFAULT_PREC_BITS),
        digits(cfg)
    )?;
    for line in extra {
        writeln!(buf, "# {line}")?;
    }
    Ok(buf)
}

fn json_document(cfg: &RunConfig, command: &str, data: Value) -> Result<Vec<u8>, CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("command".into(), json!(command));
    if cfg.timestamp() {
        doc.insert("generated_at_unix".into(), json!(unix_now()));
    }
    doc.insert("prec_bits".into(), json!(cfg.prec_bits.unwrap_or(DEFAULT_PREC_BITS)));
    doc.insert("data".into(), data);
    let mut out = serde_json::to_vec_pretty(&Value::Object(doc))?;
    out.push(b'\n');
    Ok(out)
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn f_table(ring: RingParams) -> Vec<(u32, String, String, String)> {
    (0..=F_TABLE_MAX)
        .map(|n| {
            let (a, b) = counts_pq(ring.p(), ring.q(), n);
            (n, recurrence_f(ring, n).to_string(), a.to_string(), b.to_string())
        })
        .collect()
}

pub fn inspect(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = rule_spec(cfg)?;
    let p = prec(cfg)?;
    let d = digits(cfg);
    let ring = spec.ring();
    let (matrix, is_pv, kind): ([[f64; 2]; 2], bool, &str) = match &spec {
        RuleSpec::Deterministic(r) => {
            let m = r.matrix();
            let pv = eigen(r).is_pv;
            ([[f64::from(m[0][0]), f64::from(m[0][1])], [f64::from(m[1][0]), f64::from(m[1][1])]], pv, "deterministic")
        }
        RuleSpec::Random(r) => (rnms_matrix(r), eigen(&noble_rule(r.m())?).is_pv, "random"),
    };
    let theta = format_float(&ring.theta(p.bits()), d);
    let theta_conj = format_float(&ring.theta_conj(p.bits()), d);
    let table = f_table(ring);
    let bytes = match cfg.format {
        Some(Format::Json) => json_document(
            cfg,
            "inspect",
            json!({
                "rule": spec.to_string(),
                "kind": kind,
                "p": ring.p(),
                "q": ring.q(),
                "matrix": matrix,
                "theta": theta,
                "theta_conj": theta_conj,
                "pv": is_pv,
                "recurrence": table.iter().map(|(n, f, a, b)| json!({"n": n, "F": f, "a_count": a, "b_count": b})).collect::<Vec<_>>(),
            }),
        )?,
        Some(Format::Csv) => {
            let mut buf = csv_preamble(
                cfg,
                "inspect",
                &[format!("rule={spec} theta={theta} theta_conj={theta_conj} pv={is_pv}")],
            )?;
            let mut wtr = csv::Writer::from_writer(&mut buf);
            wtr.write_record(["n", "F_n", "a_count", "b_count"])?;
            for (n, f, a, b) in &table {
                wtr.write_record([n.to_string(), f.clone(), a.clone(), b.clone()])?;
            }
            wtr.flush()?;
            drop(wtr);
            buf
        }
        None => {
            let mut buf = Vec::new();
            writeln!(buf, "rule        {spec} ({kind})")?;
            writeln!(buf, "ring        θ² = {}θ + {}", ring.p(), ring.q())?;
            writeln!(buf, "matrix      [[{}, {}], [{}, {}]]", matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1])?;
            writeln!(buf, "θ           {theta}")?;
            writeln!(buf, "θ'          {theta_conj}")?;
            writeln!(buf, "PV          {is_pv}")?;
            let fs: Vec<&str> = table.iter().map(|t| t.1.as_str()).collect();
            writeln!(buf, "F_0..F_{F_TABLE_MAX}   {}", fs.join(", "))?;
            buf
        }
    };
    emit(cfg, &bytes)
}

pub fn patch(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = rule_spec(cfg)?;
    let n = cfg.n_max.unwrap_or(10);
    let word = match &spec {
        RuleSpec::Deterministic(r) => iterate(r, n)?,
        RuleSpec::Random(r) => sample_rnms(r, n, cfg.seed.unwrap_or(0))?,
    };
    let patch = realize(&word, spec.ring());
    let p = prec(cfg)?;
    let bytes = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = csv_preamble(cfg, "patch", &[format!("rule={spec} level={n} points={}", patch.len())])?;
            patch.write_csv(&mut buf, p, digits(cfg))?;
            buf
        }
        Format::Json => {
            let stars = patch.star_points(p);
            let rows: Vec<Value> = patch
                .positions()
                .iter()
                .zip(&stars)
                .enumerate()
                .map(|(i, (pt, s))| {
                    json!({
                        "index": i,
                        "letter": patch.letters().get(i).map(|l| l.as_char().to_string()),
                        "u": pt.u,
                        "v": pt.v,
                        "star": format_float(s, digits(cfg)),
                    })
                })
                .collect();
            json_document(cfg, "patch", json!({"rule": spec.to_string(), "level": n, "points": rows}))?
        }
    };
    emit(cfg, &bytes)
}

struct SpectrumLine {
    k: String,
    k_value: f64,
    intensity: Option<f64>,
    converged: Option<bool>,
    tail_variation: Option<f64>,
    in_module: Option<bool>,
    module: Option<(i64, i64)>,
    formula: Option<f64>,
    rel_error: Option<f64>,
    status: String,
}

pub fn spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let rule = deterministic(cfg)?;
    let ring = rule.ring();
    let p = prec(cfg)?;
    let n_max = cfg.n_max.unwrap_or(30);
    let mut ks = wave_numbers(cfg, ring)?;
    let noble = rule.q() == 1 && noble_rule(rule.p())? == rule;
    if let Some(kmax) = cfg.module_kmax {
        if !noble {
            return Err(CliError::Config(format!("module sweeps need a noble means rule a^m b, got {rule}")));
        }
        for pt in enumerate_module(rule.p(), kmax, cfg.coeff_bound.unwrap_or(3))? {
            ks.push((format!("module:{},{}", pt.c, pt.d), pt.to_wave_number()));
        }
    }
    sort_by_value(&mut ks);
    let model = if noble && !ks.is_empty() { Some(estimate_window_and_density(rule.p(), p)?) } else { None };
    let mut numeric_failure = false;
    let mut lines = Vec::new();
    for (label, k) in &ks {
        let mut line = SpectrumLine {
            k: label.clone(),
            k_value: k.to_f64(),
            intensity: None,
            converged: None,
            tail_variation: None,
            in_module: None,
            module: None,
            formula: None,
            rel_error: None,
            status: "ok".into(),
        };
        match recursive_amplitudes(&rule, k, n_max, p).and_then(|s| intensity_estimate(&s)) {
            Ok(est) => {
                line.intensity = Some(est.intensity);
                line.converged = Some(est.converged);
                line.tail_variation = Some(est.tail_variation);
            }
            Err(e) => {
                numeric_failure |= e.is_numeric();
                line.status = format!("error: {e}");
            }
        }
        if let (Some((window, dens)), WaveNumber::Field(_)) = (&model, k) {
            let coords = module_coordinates(k, rule.p())?;
            line.in_module = Some(coords.is_some());
            if let Some((c, d)) = coords {
                line.module = Some((c, d));
                let formula = modelset_amplitude(ModulePoint::new(c, d, rule.p()), window, dens, p)?.norm_sqr().to_f64();
                line.formula = Some(formula);
                if let Some(i) = line.intensity {
                    let diff = (formula - i).abs();
                    line.rel_error = Some(if i == 0.0 { diff } else { diff / i.abs() });
                }
            }
        }
        lines.push(line);
    }
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let bytes = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = csv_preamble(cfg, "spectrum", &[format!("rule={rule} n_max={n_max}")])?;
            let mut wtr = csv::Writer::from_writer(&mut buf);
            wtr.write_record([
                "k", "k_value", "intensity", "converged", "tail_variation", "in_module", "c", "d", "intensity_formula",
                "rel_error", "status",
            ])?;
            for l in &lines {
                wtr.write_record([
                    l.k.clone(),
                    l.k_value.to_string(),
                    opt(l.intensity),
                    l.converged.map(|b| b.to_string()).unwrap_or_default(),
                    opt(l.tail_variation),
                    l.in_module.map(|b| b.to_string()).unwrap_or_default(),
                    l.module.map(|m| m.0.to_string()).unwrap_or_default(),
                    l.module.map(|m| m.1.to_string()).unwrap_or_default(),
                    opt(l.formula),
                    opt(l.rel_error),
                    l.status.clone(),
                ])?;
            }
            wtr.flush()?;
            drop(wtr);
            buf
        }
        Format::Json => {
            let rows: Vec<Value> = lines
                .iter()
                .map(|l| {
                    json!({
                        "k": l.k, "k_value": l.k_value, "intensity": l.intensity, "converged": l.converged,
                        "tail_variation": l.tail_variation, "in_module": l.in_module,
                        "c": l.module.map(|m| m.0), "d": l.module.map(|m| m.1),
                        "intensity_formula": l.formula, "rel_error": l.rel_error, "status": l.status,
                    })
                })
                .collect();
            json_document(cfg, "spectrum", json!({"rule": rule.to_string(), "n_max": n_max, "rows": rows}))?
        }
    };
    emit(cfg, &bytes)?;
    if numeric_failure {
        return Err(CliError::Numeric("some rows failed; see the status column".into()));
    }
    Ok(())
}

pub fn amplitude(cfg: &RunConfig) -> Result<(), CliError> {
    let rule = deterministic(cfg)?;
    let (label, k) = single_k(cfg, rule.ring())?;
    let n_max = cfg.n_max.unwrap_or(30);
    let p = prec(cfg)?;
    let series = recursive_amplitudes(&rule, &k, n_max, p)?;
    let d = digits(cfg);
    let bytes = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = csv_preamble(cfg, "amplitude", &[format!("rule={rule} k={label}")])?;
            series.write_csv(&mut buf, d)?;
            buf
        }
        Format::Json => {
            let est = intensity_estimate(&series).ok();
            let rows: Vec<Value> = series
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "n": e.n,
                        "re": format_float(&e.amplitude.re, d),
                        "im": format_float(&e.amplitude.im, d),
                        "abs_normalized": format_float(&e.normalized.abs(), d),
                        "profile": format_float(&e.profile(), d),
                    })
                })
                .collect();
            json_document(cfg, "amplitude", json!({"rule": rule.to_string(), "k": label, "series": rows, "intensity": est}))?
        }
    };
    emit(cfg, &bytes)
}

pub fn decay(cfg: &RunConfig) -> Result<(), CliError> {
    let rule = deterministic(cfg)?;
    let (label, k) = single_k(cfg, rule.ring())?;
    let n_scan = cfg.n_scan.or(cfg.n_max).unwrap_or(60);
    let grid = cfg.grid.unwrap_or(20);
    let p = prec(cfg)?;
    let outcome = certify_decay(&rule, &k, n_scan, grid, p)?;
    let top = match &outcome {
        DecayOutcome::Certified(c) => c.verified_to,
        DecayOutcome::Failed(_) => n_scan,
    };
    let scaled = Precision::new(p.bits() + Precision::scaled(rule.ring(), top).bits())?;
    let profile = decay_profile(&recursive_amplitudes(&rule, &k, top.max(2), scaled)?);
    let d = digits(cfg);
    let bytes = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => {
            let rows: Vec<Value> = profile
                .points
                .iter()
                .zip(&profile.running_max)
                .map(|((n, v), m)| json!({"n": n, "profile": format_float(v, d), "running_max": format_float(m, d)}))
                .collect();
            json_document(
                cfg,
                "decay",
                json!({"rule": rule.to_string(), "k": label, "n_scan": n_scan, "grid": grid, "certificate": outcome, "profile": rows}),
            )?
        }
        Format::Csv => {
            let cert = serde_json::to_string(&outcome)?;
            let mut buf = csv_preamble(cfg, "decay", &[format!("rule={rule} k={label}"), format!("certificate={cert}")])?;
            let mut wtr = csv::Writer::from_writer(&mut buf);
            wtr.write_record(["n", "profile", "running_max"])?;
            for ((n, v), m) in profile.points.iter().zip(&profile.running_max) {
                wtr.write_record([n.to_string(), format_float(v, d), format_float(m, d)])?;
            }
            wtr.flush()?;
            drop(wtr);
            buf
        }
    };
    emit(cfg, &bytes)?;
    match outcome {
        DecayOutcome::Certified(_) => Ok(()),
        DecayOutcome::Failed(f) => Err(CliError::Numeric(format!("no certificate: {}", f.reason))),
    }
}

pub fn orbit(cfg: &RunConfig) -> Result<(), CliError> {
    let ring = rule_spec(cfg)?.ring();
    let (label, xi) = single_k(cfg, ring)?;
    let n = cfg.n_max.unwrap_or(1000);
    // Real seeds get a length-scaled precision unless the user pins one.
    let p = match (&xi, cfg.prec_bits) {
        (WaveNumber::Real(_), None) => orbit_precision(ring, n),
        _ => prec(cfg)?,
    };
    let report = orbit_report(&xi, ring, n, p)?;
    let tail = cfg.tail_start.unwrap_or(report.tail_start);
    let eps = cfg.eps.unwrap_or(pisot_diffraction::orbits::DEFAULT_CLUSTER_EPS);
    let gap = gap_estimate(&report, tail);
    let count = cluster_count(&report, eps, tail)?;
    let witness = if xi.is_field() { None } else { Some(find_delta_r(&report, cfg.grid.unwrap_or(20), 25)?) };
    let d = digits(cfg);
    let bytes = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut extra = vec![
                format!("xi={label} N={n} orbit_prec_bits={} tail_start={tail}", p.bits()),
                format!(
                    "gap={} bound={} satisfied={} clusters={count} eps={eps}",
                    format_float(&gap.gap, d),
                    format_float(&gap.bound, d),
                    gap.satisfied
                ),
            ];
            if let Some(w) = &witness {
                extra.push(format!("delta_r={}", serde_json::to_string(&w.witness)?));
            }
            let mut buf = csv_preamble(cfg, "orbit", &extra)?;
            report.write_csv(&mut buf, d)?;
            buf
        }
        Format::Json => json_document(
            cfg,
            "orbit",
            json!({
                "xi": label,
                "ring": {"p": ring.p(), "q": ring.q()},
                "N": n,
                "orbit_prec_bits": p.bits(),
                "tail_start": tail,
                "gap": format_float(&gap.gap, d),
                "bound": format_float(&gap.bound, d),
                "gap_satisfied": gap.satisfied,
                "eps": eps,
                "clusters": count,
                "cluster_list": clusters(&report, eps, tail),
                "delta_r": witness,
                "fracs": report.fracs.iter().map(|f| format_float(f, d)).collect::<Vec<_>>(),
            }),
        )?,
    };
    emit(cfg, &bytes)
}

pub fn rnms(cfg: &RunConfig) -> Result<(), CliError> {
    let rule = random(cfg)?;
    let mut ks = wave_numbers(cfg, rule.ring())?;
    sort_by_value(&mut ks);
    let n = cfg.n_max.unwrap_or(18);
    let samples = cfg.samples.unwrap_or(50);
    let seed = cfg.seed.unwrap_or(0);
    let p = prec(cfg)?;
    let mut results = Vec::with_capacity(ks.len());
    for (label, k) in &ks {
        results.push((label, k.to_f64(), rnms_intensity(&rule, k, n, samples, seed, p)?));
    }
    let bytes = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = csv_preamble(cfg, "rnms", &[format!("rule={rule} n={n} samples={samples} seed={seed}")])?;
            let mut wtr = csv::Writer::from_writer(&mut buf);
            wtr.write_record(["k", "k_value", "mean_intensity", "stderr"])?;
            for (label, value, r) in &results {
                wtr.write_record([label.to_string(), value.to_string(), r.mean.to_string(), r.stderr.to_string()])?;
            }
            wtr.flush()?;
            drop(wtr);
            buf
        }
        Format::Json => {
            let rows: Vec<Value> = results
                .iter()
                .map(|(label, value, r)| json!({"k": label, "k_value": value, "mean_intensity": r.mean, "stderr": r.stderr, "samples": r.samples}))
                .collect();
            json_document(cfg, "rnms", json!({"rule": rule.to_string(), "n": n, "samples": samples, "seed": seed, "rows": rows}))?
        }
    };
    emit(cfg, &bytes)
}
