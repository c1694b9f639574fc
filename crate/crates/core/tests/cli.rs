use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fcs::scattering::binomial_chi;
use serde_json::Value;

fn fcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcs"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn two_circle_config() -> String {
    let r = 0.7f64.sqrt();
    let t = 0.3f64.sqrt();
    format!(
        r#"{{
  "experiment": "two-circle",
  "model": {{"two_circle": {{
    "S": {{"r": [{r}, 0.0], "t": [{t}, 0.0], "r_prime": [{r}, 0.0], "t_prime": [{nt}, 0.0]}},
    "T": {period}, "mu_L": 9.5, "mu_R": -0.5, "cutoff": 12.7
  }}}},
  "variant": "regularized",
  "grid_size": 64
}}"#,
        nt = -t,
        period = 2.0 * PI
    )
}

#[test]
fn two_circle_run_matches_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "tc.json", &two_circle_config());
    let out = dir.path().join("out");
    let o = fcs(&[
        "run",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut reader = csv::Reader::from_path(out.join("chi.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["lambda", "re_chi", "im_chi", "re_log_chi", "im_log_chi"]
    );
    let mut rows = 0;
    for record in reader.records() {
        let r: Vec<f64> = record.unwrap().iter().map(|x| x.parse().unwrap()).collect();
        let expected = binomial_chi(0.3, 10, r[0]);
        assert!((r[1] - expected.re).abs() < 1e-10 && (r[2] - expected.im).abs() < 1e-10);
        rows += 1;
    }
    assert_eq!(rows, 64);

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("two-circle.json")).unwrap()).unwrap();
    assert_eq!(summary["fcs-schema"], 1);
    assert_eq!(summary["window_count"], 10);
    assert!(summary["max_binomial_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "oracle.json",
        r#"{"experiment": "oracle-check", "model": {"random": {"seed": 1, "dim": 6, "kind": "mixed-general"}}}"#,
    );
    let o = fcs(&["run", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("oracle-check.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["max_deviation"].as_f64().unwrap() <= 1e-9);
    assert!(report["report"].as_str().unwrap().contains("<="));
}

#[test]
fn malformed_config_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.json",
        r#"{"experiment": "chi", "model": {"random": {"seed": 1, "dim": 4, "kind": "pure-commuting"}}, "grid_size": "many"}"#,
    );
    for cmd in ["run", "validate"] {
        let o = fcs(&[cmd, &config, "--out", dir.path().to_str().unwrap()]
            [..if cmd == "run" { 4 } else { 2 }]);
        assert_eq!(o.status.code(), Some(2));
        let record: Value =
            serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
        assert_eq!(record["fcs-schema"], 1);
        assert_eq!(record["error"]["kind"], "validation");
        assert_eq!(record["error"]["field"], "grid_size");
    }
}

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "tc.json", &two_circle_config());
    let o = fcs(&["validate", &config]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "ok");
}

#[test]
fn missing_config_is_an_io_error() {
    let o = fcs(&["run", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "dist.json",
            r#"{"experiment": "distribution", "variant": "collapse", "model": {"random": {"seed": 7, "dim": 4, "kind": "mixed-general"}}}"#,
        ),
        (
            "cum.json",
            r#"{"experiment": "cumulants", "k_max": 5, "model": {"random": {"seed": 3, "dim": 5, "kind": "mixed-commuting"}}}"#,
        ),
        (
            "diag.json",
            r#"{"experiment": "diagnostics", "model": {"random": {"seed": 3, "dim": 5, "kind": "mixed-general"}}}"#,
        ),
    ];
    for (name, text) in configs {
        let config = write(dir.path(), name, text);
        let a = dir.path().join(format!("{name}.a"));
        let b = dir.path().join(format!("{name}.b"));
        assert!(fcs(&[
            "run",
            &config,
            "--out",
            a.to_str().unwrap(),
            "--threads",
            "1"
        ])
        .status
        .success());
        assert!(fcs(&[
            "run",
            &config,
            "--out",
            b.to_str().unwrap(),
            "--threads",
            "4"
        ])
        .status
        .success());
        let mut files: Vec<_> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        files.sort();
        assert!(!files.is_empty());
        for f in files {
            assert_eq!(
                fs::read(a.join(&f)).unwrap(),
                fs::read(b.join(&f)).unwrap(),
                "{f:?}"
            );
        }
    }
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // χ of a p = 1/2 two-mode model vanishes at λ = π, so the log cannot be continued
    let config = write(
        dir.path(),
        "zero.json",
        r#"{"experiment": "chi", "variant": "les-lev", "grid_size": 8, "model": {"inline": {"dim": 2,
            "U": [[0.7071067811865476, 0.0], [-0.7071067811865476, 0.0], [0.7071067811865476, 0.0], [0.7071067811865476, 0.0]],
            "rho": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
            "Q": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}}}"#,
    );
    let o = fcs(&["run", &config, "--out", dir.path().to_str().unwrap()]);
    let record: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(o.status.code(), Some(3), "{record}");
    assert_eq!(record["error"]["code"], "UnwrapFailure");
}
