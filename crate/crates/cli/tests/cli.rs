use std::path::Path;
use std::process::{Command, Output};

fn pisotdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pisotdiff")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Parses CSV text after dropping `#` comment lines.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column<'a>(header: &[String], row: &'a [String], name: &str) -> &'a str {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    &row[i]
}

#[test]
fn inspect_reports_fibonacci() {
    let out = pisotdiff(&["inspect", "--rule", "w=ab"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("1.6180339887"));
    assert!(text.contains("PV          true"));
    assert!(text.contains("0, 1, 1, 2, 3, 5, 8"));
}

#[test]
fn inspect_order_does_not_matter() {
    let json = |rule: &str| {
        let out = pisotdiff(&["inspect", "--rule", rule, "--format", "json", "--no-timestamp"]);
        assert_eq!(code(&out), 0);
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["data"].as_object_mut().unwrap().remove("rule");
        v
    };
    assert_eq!(json("w=ab"), json("w=ba"));
}

#[test]
fn inspect_rejects_out_of_class_and_bad_syntax() {
    let out = pisotdiff(&["inspect", "--rule", "w=abb"]);
    assert_eq!(code(&out), 2);
    let out = pisotdiff(&["inspect", "--rule", "w=axb"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("position"));
}

#[test]
fn inspect_csv_table() {
    let out = pisotdiff(&["inspect", "--rule", "w=aab", "--format", "csv", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 21);
    let f: Vec<u64> = rows.iter().map(|r| column(&header, r, "F_n").parse().unwrap()).collect();
    for n in 2..f.len() {
        assert_eq!(f[n], 2 * f[n - 1] + f[n - 2]);
    }
}

#[test]
fn spectrum_rows() {
    let out = pisotdiff(&["spectrum", "--rule", "w=ab", "--k", "0", "--k", "sqrt2", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    let zero: f64 = column(&header, &rows[0], "intensity").parse().unwrap();
    let tau2_5 = ((1.0 + 5f64.sqrt()) / 2.0).powi(2) / 5.0;
    assert!((zero - tau2_5).abs() < 1e-4);
    assert_eq!(column(&header, &rows[0], "in_module"), "true");
    let off: f64 = column(&header, &rows[1], "intensity").parse().unwrap();
    assert!(off < 1e-2);
    assert_eq!(column(&header, &rows[1], "converged"), "true");
    assert_eq!(column(&header, &rows[1], "in_module"), "");
}

#[test]
fn spectrum_rows_sorted_by_k() {
    let out = pisotdiff(&["spectrum", "--rule", "w=ab", "--k", "sqrt2", "--k", "1/3", "--k", "0", "--n-max", "12", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&stdout(&out));
    let values: Vec<f64> = rows.iter().map(|r| column(&header, r, "k_value").parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn spectrum_empty_list_is_header_only() {
    let out = pisotdiff(&["spectrum", "--rule", "w=ab", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(header[0], "k");
    assert!(rows.is_empty());
}

#[test]
fn spectrum_module_sweep_agrees_with_formula() {
    let out = pisotdiff(&[
        "spectrum", "--rule", "w=ab", "--module-kmax", "1.5", "--coeff-bound", "2", "--n-max", "24", "--no-timestamp",
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&stdout(&out));
    assert!(rows.len() >= 5);
    for row in &rows {
        let i: f64 = column(&header, row, "intensity").parse().unwrap();
        let f: f64 = column(&header, row, "intensity_formula").parse().unwrap();
        assert!((i - f).abs() < 1e-3 || (i - f).abs() < 0.05 * f, "{row:?}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, args: &[&str]| {
        let path = dir.path().join(name);
        let mut full: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap().to_string();
        full.extend(["--no-timestamp", "--out", &p]);
        let out = pisotdiff(&full);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(&path).unwrap()
    };
    let cases: [&[&str]; 5] = [
        &["patch", "--rule", "m=1;probs=0.5,0.5", "--n-max", "8", "--seed", "4"],
        &["amplitude", "--rule", "w=aab", "--k", "pi", "--n-max", "15"],
        &["decay", "--rule", "w=ab", "--k", "sqrt2", "--n-scan", "40"],
        &["orbit", "--k", "sqrt2", "--n-max", "300"],
        &["rnms", "--rule", "m=1;probs=0.5,0.5", "--k", "1/3", "--n-max", "10", "--samples", "6", "--seed", "9"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let a = run(&format!("a{i}"), args);
        let b = run(&format!("b{i}"), args);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn timestamp_line_is_first_and_optional() {
    let with = stdout(&pisotdiff(&["amplitude", "--k", "1", "--n-max", "5"]));
    assert!(with.lines().next().unwrap().starts_with("# generated_at_unix="));
    let without = stdout(&pisotdiff(&["amplitude", "--k", "1", "--n-max", "5", "--no-timestamp"]));
    assert_eq!(with.lines().skip(1).collect::<Vec<_>>(), without.lines().collect::<Vec<_>>());
}

#[test]
fn csv_outputs_parse_with_their_columns() {
    let cases: [(&[&str], &[&str]); 5] = [
        (&["patch", "--rule", "w=aab", "--n-max", "5"], &["index", "letter"]),
        (&["amplitude", "--k", "e", "--n-max", "10"], &["n", "re", "im", "abs_normalized", "profile"]),
        (&["decay", "--k", "sqrt2", "--format", "csv"], &["n", "profile", "running_max"]),
        (&["orbit", "--k", "pi", "--n-max", "100"], &["n", "frac", "dist_to_int"]),
        (&["rnms", "--rule", "m=2;probs=0.2,0.3,0.5", "--k", "1", "--n-max", "6", "--samples", "3"], &["k", "mean_intensity", "stderr"]),
    ];
    for (args, cols) in cases {
        let out = pisotdiff(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let (header, rows) = csv_rows(&stdout(&out));
        for c in cols {
            assert!(header.iter().any(|h| h == c), "{args:?} lacks {c}: {header:?}");
        }
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.len() == header.len()));
    }
}

#[test]
fn decay_pi_certificate() {
    let out = pisotdiff(&["decay", "--rule", "w=ab", "--k", "pi", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cert = &v["data"]["certificate"];
    assert_eq!(cert["status"], "certified");
    assert!(cert["epsilon"].as_f64().unwrap() > 0.0);
}

#[test]
fn decay_refuses_field_elements() {
    let out = pisotdiff(&["decay", "--k", "1/3"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn orbit_of_one_has_one_cluster() {
    let out = pisotdiff(&["orbit", "--k", "1", "--format", "json", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["data"]["clusters"], 1);
}

#[test]
fn rnms_zero_mode_has_zero_stderr() {
    let out = pisotdiff(&["rnms", "--rule", "m=1;probs=0.5,0.5", "--k", "0", "--n-max", "12", "--samples", "10", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(column(&header, &rows[0], "stderr"), "0");
}

#[test]
fn rnms_needs_random_rule() {
    assert_eq!(code(&pisotdiff(&["rnms", "--rule", "w=ab", "--k", "0"])), 2);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"rule": "w=ab", "k": ["0"], "n_max": 20, "no_timestamp": true}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let out = pisotdiff(&["spectrum", "--config", c]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("n_max=20"));
    let out = pisotdiff(&["spectrum", "--config", c, "--n-max", "22"]);
    assert!(stdout(&out).contains("n_max=22"));

    std::fs::write(&cfg, r#"{"rule": "w=ab", "kk": ["0"]}"#).unwrap();
    assert_eq!(code(&pisotdiff(&["spectrum", "--config", c])), 2);
    assert_eq!(code(&pisotdiff(&["spectrum", "--config", &dir.path().join("missing.json").to_string_lossy()])), 2);
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(code(&pisotdiff(&["spectrum", "--prec-bits", "10"])), 2);
    assert_eq!(code(&pisotdiff(&["spectrum", "--bogus"])), 2);
    assert_eq!(code(&pisotdiff(&["amplitude", "--k", "1", "--k", "2"])), 2);
    assert_eq!(code(&pisotdiff(&["--help"])), 0);
}

#[test]
fn precision_exhaustion_exits_three() {
    let out = pisotdiff(&["orbit", "--k", "sqrt2", "--n-max", "2000", "--prec-bits", "256"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let out = pisotdiff(&["orbit", "--k", "sqrt2", "--n-max", "2000", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn out_file_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("patch.csv");
    let out = pisotdiff(&["patch", "--n-max", "4", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert!(Path::new(&path).exists());
}
