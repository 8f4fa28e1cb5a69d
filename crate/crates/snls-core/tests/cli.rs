use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn snls(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snls")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const FAST_SIMULATE: &str = r#"
n_real = 120
seed = 99

[lattice]
nt = 64
nx = 64
epsilon = 0.03125

[simulate]
lambdas = [0.02]
scaling = false
decay = false
"#;

#[test]
fn expand_writes_outputs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(tmp.path(), &["expand", "--order", "0", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let txt = fs::read_to_string(tmp.path().join("run/expansion.txt")).unwrap();
    assert_eq!(txt, "F_0 = Φ\n");
    assert_eq!(code(&snls(tmp.path(), &["expand", "--order", "2", "--out", "two"])), 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("two/expansion.json")).unwrap()).unwrap();
    assert_eq!(json["coefficients"][2]["pretty"], "G⊛(Φ²Ḡ⊛(ΦΦ̄²)) + 2G⊛(ΦΦ̄G⊛(Φ²Φ̄))");
    assert_eq!(json["counterterms"][0]["pretty"], "2C̄□");
    assert!(json["two_point_diagrams"].as_array().unwrap().len() > 3);
    for f in ["expansion.json", "manifest.json", "manifest.toml"] {
        assert!(tmp.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn expect_succeeds_with_zero_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(tmp.path(), &["expect", "--order", "3", "--kappa", "2", "--out", "e"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("e/expectation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
}

#[test]
fn config_errors_exit_two_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "seed = 1\nkappa = 0\n").unwrap();
    let o = snls(tmp.path(), &["expand", "--config", "bad.toml"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(tmp.path().join("typo.toml"), "seed = 1\n\n[lattice]\nntt = 3\n").unwrap();
    let o = snls(tmp.path(), &["expand", "--config", "typo.toml"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(code(&snls(tmp.path(), &["frobnicate"])), 2);
    assert_eq!(code(&snls(tmp.path(), &["expand", "--config", "missing.toml"])), 2);
}

#[test]
fn odd_point_functions_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("odd.toml"), "[correlate]\npoints = 3\n").unwrap();
    let o = snls(tmp.path(), &["correlate", "--config", "odd.toml", "--out", "c"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn correlate_lists_first_order_diagrams() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(tmp.path(), &["correlate", "--order", "1", "--out", "c"]);
    assert_eq!(code(&o), 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("c/diagrams.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 3);
    assert!(tmp.path().join("c/dot/diagram_2.dot").exists());
    let csv = fs::read_to_string(tmp.path().join("c/correlate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 5);
}

#[test]
fn analyze_reports_subcriticality() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&snls(tmp.path(), &["analyze", "--dim", "1", "--out", "a"])), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("a/verdict.json")).unwrap()).unwrap();
    assert_eq!(v["subcritical"], true);
    assert_eq!(code(&snls(tmp.path(), &["analyze", "--dim", "2", "--out", "b"])), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("b/verdict.json")).unwrap()).unwrap();
    assert_eq!(v["subcritical"], false);
    assert_eq!(code(&snls(tmp.path(), &["analyze", "--dim", "3", "--out", "c"])), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("c/verdict.json")).unwrap()).unwrap();
    assert_eq!(v["subcritical"], false);
    let csv = fs::read_to_string(tmp.path().join("a/divergence.csv")).unwrap();
    assert!(csv.starts_with("k,diagram_id,L,N,rho,divergent\n"));
    assert!(csv.lines().skip(1).all(|l| {
        let f: Vec<&str> = l.split(',').collect();
        let k: u64 = f[0].parse().unwrap();
        f[2] == (3 * k + 1).to_string() && f[3] == (2 * k + 1).to_string()
    }));
}

#[test]
fn simulate_rerun_from_manifest_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("fast.toml"), FAST_SIMULATE).unwrap();
    assert_eq!(code(&snls(tmp.path(), &["simulate", "--config", "fast.toml", "--out", "s1"])), 0);
    assert_eq!(code(&snls(tmp.path(), &["simulate", "--config", "s1/manifest.json", "--out", "s2"])), 0);
    assert_eq!(code(&snls(tmp.path(), &["simulate", "--config", "s1/manifest.toml", "--out", "s3"])), 0);
    for f in ["estimates.csv", "kernel_values.csv"] {
        let a = fs::read(tmp.path().join("s1").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("s2").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(tmp.path().join("s3").join(f)).unwrap(), "{f}");
    }
    let est = fs::read_to_string(tmp.path().join("s1/estimates.csv")).unwrap();
    assert!(est.starts_with("observable,mean_re,mean_im,stderr,n\n"));
    assert!(est.contains("early_late:slope_central:lambda=0.02"));
}

#[test]
fn too_few_realizations_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(tmp.path(), &["simulate", "--realizations", "5", "--out", "s"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_passes_on_default_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = snls(tmp.path(), &["verify", "--out", "v"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(tmp.path().join("v/verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")), "{csv}");
}
