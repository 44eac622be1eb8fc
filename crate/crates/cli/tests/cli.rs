use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lcl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lcl"));
    c.env_remove("LCL_SEED");
    c
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("cases").join(name)
}

fn write_case(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run_with(args: &[&str], cases: &[&Path], out: &Path) -> Output {
    let mut c = lcl();
    c.args(args).arg("--out").arg(out).arg("--cases").args(cases);
    c.output().unwrap()
}

fn csv_rows(out: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(out.join("report.csv")).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_case_list_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = lcl().args(["run", "--out"]).arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv, "case_id,test_function,theorem,ratio,lower_const,upper_const,functional,pass\n");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn bundled_knopp_case() {
    let dir = TempDir::new().unwrap();
    let o = run_with(&["run"], &[&bundled("knopp.json")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(dir.path());
    assert_eq!(rows.len(), 1);
    let ratio: f64 = rows[0][3].parse().unwrap();
    assert!((ratio - 2.0 / std::f64::consts::E).abs() < 1e-9);
    assert_eq!(rows[0][7], "true");
}

#[test]
fn p_above_q_names_the_fields() {
    let dir = TempDir::new().unwrap();
    let case = write_case(
        &dir,
        "bad.json",
        r#"{"id": "bad", "theorem": "PowerLCL", "p": 2, "q": 1,
            "group": {"law": "abelian", "dilation_exponents": [1]}, "test_function": "exp_decay"}"#,
    );
    let o = run_with(&["run"], &[&case], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("bad.p/q") && e.contains("`p`") && e.contains("`q`"), "{e}");
}

#[test]
fn configuration_errors_carry_field_paths() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"theorem": "Levin3", "test_function": "exp_decay"}"#, "theorem"),
        (
            r#"{"theorem": "GeneralLCL", "group": {"law": "heisenberg"}, "weights": {"u": "bump(2)"}, "test_function": "gauss"}"#,
            "weights.u",
        ),
        (r#"{"theorem": "Knopp", "test_function": ["exp_decay", "nope"]}"#, "test_function[1]"),
        (r#"{"theorem": "Knopp", "epsilon": "one", "test_function": "gauss"}"#, "epsilon"),
        (r#"{"theorem": "Knopp", "group": {"law": "half_line", "extra": 1}, "test_function": "gauss"}"#, "group"),
        (r#"{"theorem": "PowerLCL", "group": {"law": "moebius"}, "test_function": "gauss"}"#, "group.law"),
    ];
    for (i, (body, field)) in cases.iter().enumerate() {
        let case = write_case(&dir, &format!("c{i}.json"), body);
        let o = run_with(&["run"], &[&case], &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(1), "{body}");
        assert!(stderr(&o).contains(field), "{body}: {}", stderr(&o));
    }
}

#[test]
fn epsilon_sweep_on_knopp() {
    let dir = TempDir::new().unwrap();
    let o = run_with(&["sweep", "--parameter", "epsilon", "--values", "0.5,1,2"], &[&bundled("knopp.json")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(dir.path());
    assert_eq!(rows.len(), 4);
    for (row, eps) in rows.iter().zip([0.5f64, 1.0, 2.0]) {
        let upper: f64 = row[5].parse().unwrap();
        assert!((upper - (1.0 / eps).exp()).abs() <= 1e-15 * upper);
    }
    let summary = &rows[3];
    assert!(summary[0].ends_with("[summary]"));
    assert_eq!(summary[1], "argmax epsilon=2");
    assert_eq!(summary[3], rows[2][3]);
}

#[test]
fn delta_and_lambda_sweeps_delegate() {
    let dir = TempDir::new().unwrap();
    let conj = write_case(
        &dir,
        "conj.json",
        r#"{"id": "conj", "theorem": "ConjugatePowerLCL", "p": 1, "q": 1, "a": 0, "b": 0, "epsilon": 1,
            "group": {"law": "abelian", "dilation_exponents": [1]}, "test_function": "exp_decay"}"#,
    );
    let out = dir.path().join("d");
    let o = run_with(&["sweep", "--parameter", "delta", "--values", "0.1,0.05,0.02,0.01"], &[&conj], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    assert!(rows[0][1].starts_with("sharpness_delta("));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let limit = json["rows"][4]["extrapolated_limit"].as_f64().unwrap();
    assert!((limit - (-1.0f64).exp()).abs() < 0.01 * (-1.0f64).exp());

    let unbalanced = write_case(
        &dir,
        "unb.json",
        r#"{"id": "unb", "theorem": "PowerLCL", "p": 1, "q": 1, "a": 1, "b": 0, "epsilon": 1,
            "group": {"law": "abelian", "dilation_exponents": [1]}, "test_function": "exp_decay"}"#,
    );
    let out = dir.path().join("l");
    let o = run_with(&["sweep", "--parameter", "lambda", "--values", "0.1,1,10,100"], &[&unbalanced], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    let slope: f64 = rows[4][6].parse().unwrap();
    assert!((slope - 1.0).abs() < 0.05);
}

#[test]
fn unbalanced_run_reports_the_dilation_test() {
    let dir = TempDir::new().unwrap();
    let case = write_case(
        &dir,
        "unb.json",
        r#"{"id": "unb", "theorem": "PowerLCL", "p": 2, "q": 2, "a": 0, "b": 1, "epsilon": 2,
            "group": {"law": "abelian", "dilation_exponents": [1, 2]}, "test_function": "exp_decay"}"#,
    );
    let o = run_with(&["run"], &[&case], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["rows"][0]["kind"], "necessity");
    assert!((json["rows"][0]["functional"].as_f64().unwrap() + 1.5).abs() < 0.075);
}

#[test]
fn reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let case = write_case(
        &dir,
        "mix.json",
        r#"[
          {"id": "z-general", "theorem": "PowerLCL", "p": 1, "q": 1, "a": 0, "b": 0, "epsilon": 1,
           "group": {"law": "heisenberg"}, "test_function": ["tilted_exp", "exp_decay"]},
          {"id": "a-knopp", "theorem": "Knopp", "test_function": "gauss"}
        ]"#,
    );
    let runs: Vec<(String, String)> = [("1", "a"), ("3", "b"), ("1", "c")]
        .iter()
        .map(|(jobs, name)| {
            let out = dir.path().join(name);
            let o = run_with(&["run", "--jobs", jobs, "--seed", "7"], &[&case], &out);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            (
                std::fs::read_to_string(out.join("report.csv")).unwrap(),
                std::fs::read_to_string(out.join("report.json")).unwrap(),
            )
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    // Rows come out ordered by case id.
    let first = runs[0].0.lines().nth(1).unwrap();
    assert!(first.starts_with("a-knopp"), "{first}");
}

#[test]
fn env_seed_overrides_flag() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = lcl()
        .env("LCL_SEED", "42")
        .args(["run", "--seed", "3", "--out"])
        .arg(&out)
        .arg("--cases")
        .arg(bundled("knopp.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 42);
}

#[test]
fn every_bundled_case_passes() {
    let dir = TempDir::new().unwrap();
    let mut files: Vec<PathBuf> = std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("cases"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    let refs: Vec<&Path> = files.iter().map(|p| p.as_path()).collect();
    let o = run_with(&["run", "--jobs", "2"], &refs, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(dir.path());
    assert!(rows.len() >= 8);
    assert!(rows.iter().all(|r| r[7] == "true"));
}
