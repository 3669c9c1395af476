//! End-to-end tests of the `toric` binary: file formats, exit codes, output
//! schemas, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/polytopes")
        .join(name)
}

fn schema_required(name: &str) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/schemas")
        .join(name);
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    schema["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect()
}

fn assert_schema(value: &serde_json::Value, schema: &str) {
    for key in schema_required(schema) {
        assert!(
            value.get(&key).is_some(),
            "output missing required key {key:?} of {schema}"
        );
    }
    assert_eq!(value["schema_version"], 1);
}

#[test]
fn check_delzant_builtin_and_file() {
    let out = toric(&["check-delzant", "square"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_schema(&v, "check-delzant.schema.json");
    assert_eq!(v["delzant"], true);
    assert_eq!(v["vertices"], 4);

    let file = data_file("bl1cp2.json");
    let out = toric(&["check-delzant", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["vertices"], 4);
}

#[test]
fn check_delzant_missing_file_exits_2() {
    let out = toric(&["check-delzant", "no-such-polytope.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn futaki_pinned_value() {
    let out = toric(&["futaki", "bl1cp2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_schema(&v, "futaki.schema.json");
    assert_eq!(v["futaki"], serde_json::json!(["1/3", "1/3"]));
    assert_eq!(v["constant_a"], "2");
}

#[test]
fn extremal_a_regression() {
    let out = toric(&["extremal-a", "bl1cp2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["constant"], "21/11");
    assert_eq!(v["gradient"], serde_json::json!(["6/11", "6/11"]));
}

#[test]
fn lattice_counting() {
    let out = toric(&["lattice", "square", "--k", "3"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["count"], 16);
    let out = toric(&["lattice", "square", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn soliton_constants_symmetric() {
    let out = toric(&["soliton-constants", "cp2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_schema(&v, "soliton-constants.schema.json");
    let c = v["c"].as_array().unwrap();
    assert!(c.iter().all(|x| x.as_f64().unwrap().abs() < 1e-9));
    // not Fano -> validation error
    let out = toric(&["soliton-constants", "square"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_probe_schema_and_certificate() {
    let file = data_file("pdelta-half.json");
    let out = toric(&[
        "stability-probe",
        file.to_str().unwrap(),
        "--budget",
        "6",
        "--a",
        r#"{"constant": "4"}"#,
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_schema(&v, "stability-probe.schema.json");
}

#[test]
fn curvature_csv_round_trip() {
    let dir = std::env::temp_dir().join("toric-test-curvature");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("field.csv");
    let out = toric(&[
        "curvature",
        "square",
        "--field",
        "S",
        "--grid",
        "9",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let file = std::fs::File::open(&path).unwrap();
    let gf = toric_kahler::potential::GridFunction::read_csv(std::io::BufReader::new(file))
        .unwrap();
    assert_eq!(gf.dim(), 2);
    for (v, flag) in gf.values().iter().zip(gf.flags()) {
        if *flag == toric_kahler::potential::NodeClass::Interior {
            assert!((v - 4.0).abs() < 1e-8);
        }
    }
    // unknown field name is a validation error
    let out = toric(&["curvature", "square", "--field", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_extremal_writes_report() {
    let dir = std::env::temp_dir().join("toric-test-extremal");
    let _ = std::fs::remove_dir_all(&dir);
    let out = toric(&[
        "solve",
        "interval",
        "--equation",
        "extremal",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "Converged");
    assert!(dir.join("u.csv").exists());
    assert!(dir.join("S.csv").exists());
}

#[test]
fn solve_prescribed_square() {
    let dir = std::env::temp_dir().join("toric-test-prescribed");
    let _ = std::fs::remove_dir_all(&dir);
    let out = toric(&[
        "solve",
        "square",
        "--equation",
        "prescribed",
        "--A",
        r#"{"constant": 4}"#,
        "--grid",
        "13",
        "--tol",
        "1e-5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    for key in schema_required("solve-report.schema.json") {
        assert!(report.get(&key).is_some(), "missing {key}");
    }
    assert_eq!(report["status"], "Converged");
    assert!(dir.join("v.csv").exists());
    // the extremal target for an interval passed to a 2d solver is rejected
    let out = toric(&["solve", "interval", "--equation", "prescribed"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn asymptotics_csv() {
    let out = toric(&[
        "asymptotics",
        "interval",
        "--k",
        "4,8",
        "--mode",
        "l2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,nu0,value,reference,gap");
    // 5 + 9 data rows for k = 4 and 8
    assert_eq!(lines.count(), 14);
}

#[test]
fn legendre_csv() {
    let out = toric(&["legendre", "interval", "--radius", "3", "--samples", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t0,phi,dphi0"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn outputs_are_deterministic() {
    let a = toric(&["futaki", "bl1cp2"]);
    let b = toric(&["futaki", "bl1cp2"]);
    assert_eq!(a.stdout, b.stdout);
    let a = toric(&["stability-probe", "square", "--budget", "4"]);
    let b = toric(&["stability-probe", "square", "--budget", "4"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_cap_env_is_accepted() {
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .args(["futaki", "square"])
        .env("TORIC_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}
