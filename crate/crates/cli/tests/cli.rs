use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toeplitz-propagator"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("TP_SEED").env_remove("TP_QUAD_SCALE").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().expect("header").split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("column {name} missing"))
}

#[test]
fn propagator_csv_is_deterministic_and_accurate() {
    let args = ["propagator", "--k", "30", "--tgrid", "0:0.25:1"];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout, "two runs differ");
    let text = stdout(&a);
    assert!(!text.contains('\r'));
    let (header, rows) = csv_rows(&text);
    assert_eq!(
        header,
        ["t", "re_exact", "im_exact", "re_pred", "im_pred", "abs_exact", "abs_pred", "rel_err_modulus", "phase_err"]
    );
    assert_eq!(rows.len(), 5);
    let err = column(&header, "rel_err_modulus");
    for row in &rows {
        assert_eq!(row.len(), header.len());
        let e: f64 = row[err].parse().unwrap();
        assert!(e < 1e-2, "relative error {e}");
    }
}

#[test]
fn propagator_json_rows_carry_k() {
    let o = run(&["propagator", "--k", "12,16", "--tgrid", "0:0.5:1", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["k"], 12);
    assert_eq!(rows[5]["k"], 16);
    assert!(rows[2]["abs_exact"].as_f64().unwrap() > 0.0);
}

#[test]
fn several_levels_write_one_csv_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("prop.csv");
    let o = run(&["propagator", "--k", "10,14", "--tgrid", "0:0.5:1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in [10, 14] {
        let text = std::fs::read_to_string(dir.path().join(format!("prop_k{k}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
    assert!(!out.exists());

    let o = run(&["propagator", "--k", "10,14", "--tgrid", "0:0.5:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[experiment]\nk = 12\ntgrid = 0:0.5:1\n\n[output]\nformat = json\n").unwrap();
    let o = run(&["propagator", "--config", cfg.to_str().unwrap(), "--k", "14"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["k"] == 14));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[experiment]\nk = 12\nfrobnicate = 1\n").unwrap();
    let o = run(&["propagator", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frobnicate"));

    let missing = dir.path().join("absent.toml");
    let o = run(&["propagator", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    for args in [
        &["propagator", "--k", "1000"][..],
        &["propagator", "--k", "0"],
        &["propagator", "--point", "1.2,0.1"],
        &["propagator", "--tgrid", "0:0.3:1"],
        &["projector", "--k", "20", "--point", "0.3,0.5"],
        &["projector", "--k", "20", "--point", "0.3,0.0"],
        &["projector", "--k", "20", "--energy", "0.2"],
        &["projector", "--k", "20", "--target", "0.5,0.3"],
        &["projector", "--k", "20", "--fhat", "box:3"],
        &["propagator", "--k", "20", "--symbol", "expr:cos(2*PI*x)"],
        &["propagator", "--k", "20", "--symbol", "expr:p*q"],
        &["selftest", "--criteria", "A99"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "), "{args:?}");
    }
}

#[test]
fn projector_reports_returns_on_the_orbit() {
    let o = run(&["projector", "--k", "20", "--target", "0.3,0.1", "--target", "0.8,0.1", "--fhat", "bump:1.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let (returns, off) = (column(&header, "returns"), column(&header, "off_image"));
    assert!(rows[0][returns].parse::<u32>().unwrap() >= 1);
    assert_eq!(rows[0][off], "false");
    assert_eq!(rows[1][returns], "0");
    assert_eq!(rows[1][off], "true");
    let e: f64 = rows[0][column(&header, "energy")].parse().unwrap();
    assert!((e - (0.2 * std::f64::consts::PI).cos()).abs() < 1e-15);
}

#[test]
fn lifts_columns_and_initial_values() {
    let o = run(&["lifts", "--k", "20", "--tgrid", "0:0.25:1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(
        header,
        [
            "t",
            "transport_L_phase",
            "prequantum_phase",
            "rho_half_re",
            "rho_half_im",
            "rho_level_half_re",
            "rho_level_half_im"
        ]
    );
    assert_eq!(rows.len(), 5);
    let first: Vec<f64> = rows[0].iter().map(|c| c.parse().unwrap()).collect();
    assert_eq!(first[1], 0.0);
    assert_eq!(first[3], 1.0);
    for row in &rows {
        let level: f64 = row[5].parse().unwrap();
        assert!((level - 1.3574422932371395).abs() < 1e-9, "{level}");
    }
}

#[test]
fn formula_symbol_uses_toeplitz_quantization() {
    let k = 40.0;
    let base = ["propagator", "--k", "40", "--tgrid", "0:0.5:1"];
    let model = run(&base);
    let formula = run(&[&base[..], &["--symbol", "expr:cos(2*PI*q)"]].concat());
    assert!(formula.status.success(), "{}", stderr(&formula));
    let (header, a) = csv_rows(&stdout(&model));
    let (_, b) = csv_rows(&stdout(&formula));
    let (abs, err) = (column(&header, "abs_exact"), column(&header, "rel_err_modulus"));
    for (ra, rb) in a.iter().zip(&b) {
        let e: f64 = rb[err].parse().unwrap();
        assert!(e < 0.6 / k, "formula predictor error {e}");
        let (x, y): (f64, f64) = (ra[abs].parse().unwrap(), rb[abs].parse().unwrap());
        assert!((x - y).abs() < 2e-2 * x.abs(), "{x} vs {y}");
    }
}

#[test]
fn time_dependent_formula_runs() {
    let o = run(&[
        "propagator",
        "--k",
        "12",
        "--tgrid",
        "0:0.5:1",
        "--max-step",
        "0.02",
        "--symbol",
        "expr:(1 + 0.3*sin(2*PI*t))*cos(2*PI*q)",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
}

#[test]
fn selftest_writes_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("summary.json");
    let o = run(&["selftest", "--criteria", "A6,A12", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("A6 PASS") && err.contains("A12 PASS"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for (row, id) in rows.iter().zip(["A6", "A12"]) {
        assert_eq!(row["criterion_id"], id);
        assert_eq!(row["pass"], true);
        for key in ["description", "measured", "bound", "diagnostics"] {
            assert!(row.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn help_lists_commands() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for cmd in ["propagator", "projector", "lifts", "selftest"] {
        assert!(text.contains(cmd));
    }
}
