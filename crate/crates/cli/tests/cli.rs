use std::path::{Path, PathBuf};
use std::process::Command;

use additive_stats::dist::FiniteDist;
use additive_stats::dominance::CatalystCertificate;
use additive_stats_cli::run;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn mas(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("mas").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "x.json", r#"{"support":[0,1],"probs":[0.6666666666666666,0.3333333333333334]}"#);
        write(dir.path(), "y.json", r#"{"uniform":[-0.6,0.4]}"#);
        write(dir.path(), "mean.json", r#"{"atoms":[{"a":0,"w":1}]}"#);
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }
}

#[test]
fn dominance_reports_coin_and_uniform_unranked() {
    let f = Fixture::new();
    let r = mas(&["dominance", "--order", "1", &f.path("x.json"), &f.path("y.json")]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["verdict"], "no");
    assert!(v["witness"].as_f64().unwrap() >= 0.0);
}

#[test]
fn catalyst_certificate_round_trips_and_verifies() {
    let f = Fixture::new();
    let out = f.path("cert.json");
    let r = mas(&["catalyst", "--out", &out, &f.path("x.json"), &f.path("y.json")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let cert: CatalystCertificate = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(cert.verified);

    let x = FiniteDist::new(vec![0.0, 1.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
    let y = FiniteDist::discretize_uniform(-0.6, 0.4, 1e-3).unwrap();
    assert!(cert.reverify(&x, &y) >= -1e-12);

    // the emitted catalyst reads back as a distribution
    let z = f.path("z.json");
    std::fs::write(&z, serde_json::to_string(&cert.catalyst).unwrap()).unwrap();
    let r = mas(&["dominance", &f.path("x.json"), &f.path("y.json")]);
    assert_eq!(r.code, 1);
    let csv = mas(&["cdf-csv", "--catalyst", &z, &f.path("x.json"), &f.path("y.json")]);
    assert_eq!(csv.code, 0);
    for line in csv.stdout.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[2] - cols[1] >= -1e-12, "row {line}");
    }
}

#[test]
fn catalyst_reports_k_obstruction() {
    let f = Fixture::new();
    let r = mas(&["catalyst", &f.path("y.json"), &f.path("x.json")]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["verdict"], "no_k_dominance");
}

#[test]
fn exhausted_budgets_exit_3() {
    let f = Fixture::new();
    let r = mas(&["catalyst", "--max-atoms", "5", &f.path("x.json"), &f.path("y.json")]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let m = format!("mas({})", f.path("mean.json"));
    let r = mas(&["violation-search", "--pref1", &m, "--pref2", "mean", "--budget", "10"]);
    assert_eq!(r.code, 3);
}

#[test]
fn phi_with_zero_atom_is_the_mean() {
    let f = Fixture::new();
    let r = mas(&["phi", "--measure", &f.path("mean.json"), "--dist", &f.path("x.json")]);
    assert_eq!(r.code, 0);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert!((v["phi"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn malformed_input_names_the_field() {
    let f = Fixture::new();
    let bad = write(f.dir.path(), "bad.json", r#"{"atoms":[{"a":0.5,"w":1},{"a":"east","w":0}]}"#);
    let r = mas(&["classify", bad.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("atoms[1].a"), "{}", r.stderr);

    let r = mas(&["phi", "--measure", "/nonexistent.json", "--dist", &f.path("x.json")]);
    assert_eq!(r.code, 2);
    let r = mas(&["no-such-command"]);
    assert_eq!(r.code, 2);
    let r = mas(&["--fosd-tol", "-1", "dominance", &f.path("x.json"), &f.path("y.json")]);
    assert_eq!(r.code, 2);
}

#[test]
fn classify_and_compare() {
    let f = Fixture::new();
    let m = write(f.dir.path(), "m.json", r#"{"atoms":[{"a":-1,"w":0.25},{"a":2,"w":0.75}]}"#);
    let r = mas(&["classify", m.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["risk"], "mixed");
    assert_eq!(v["betweenness"]["class"], "not_betweenness");
    assert_eq!(mas(&["classify", "--betweenness", m.to_str().unwrap()]).code, 1);

    let lo = write(f.dir.path(), "lo.json", r#"{"atoms":[{"a":2,"w":1}]}"#);
    let hi = write(f.dir.path(), "hi.json", r#"{"atoms":[{"a":1,"w":0.25},{"a":3,"w":0.75}]}"#);
    let r = mas(&["compare", lo.to_str().unwrap(), hi.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("\"le\""), "{}", r.stdout);
}

#[test]
fn preference_commands() {
    let f = Fixture::new();
    let agg = write(f.dir.path(), "agg.json", r#"{"rates":[1,3],"weights":[0.5,0.5]}"#);
    let r = mas(&["aggregate", agg.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["rate"], 1.5);

    let r = mas(&["indiff-pair", "--rates", "0.5,1,2", "--c", "0.99"]);
    assert_eq!(r.code, 0);
    let r = mas(&["indiff-pair", "--rates", "0.5,1,2", "--c", "0.2"]);
    assert_eq!(r.code, 2);

    let t = write(f.dir.path(), "t.json", r#"{"support":[3],"probs":[1]}"#);
    let r = mas(&[
        "time-value", "--prize", "2", "--time", t.to_str().unwrap(), "--rate", "0.1",
        "--measure", &f.path("mean.json"),
    ]);
    assert_eq!(r.code, 0);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0 * (-0.3f64).exp()).abs() < 1e-15);

    assert_eq!(mas(&["violation-search", "--pref1", "median", "--pref2", "median"]).code, 0);
    assert_eq!(mas(&["violation-search", "--pref1", "mean", "--pref2", "mean-variance(1)"]).code, 0);
    let m = format!("mas({})", f.path("mean.json"));
    assert_eq!(mas(&["violation-search", "--pref1", &m, "--pref2", &m]).code, 1);
}

#[test]
fn large_numbers_verdicts() {
    let f = Fixture::new();
    let r = mas(&["large-n", &f.path("y.json"), &f.path("x.json")]);
    assert_eq!(r.code, 1);
    let up = write(f.dir.path(), "up.json", r#"{"support":[1,2],"probs":[0.5,0.5]}"#);
    let lo = write(f.dir.path(), "lo.json", r#"{"support":[0,1.5],"probs":[0.5,0.5]}"#);
    let r = mas(&["large-n", up.to_str().unwrap(), lo.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("\"n\": 1"), "{}", r.stdout);
}

#[test]
fn output_is_deterministic() {
    let f = Fixture::new();
    for args in [
        vec!["selftest", "--only", "4", "--seed", "7"],
        vec!["kprofile", "--n-grid", "21", &f.path("x.json")],
    ] {
        let (a, b) = (mas(&args), mas(&args));
        assert_eq!(a.code, 0, "{}", a.stderr);
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn selftest_passes() {
    let r = mas(&["selftest"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stderr.lines().filter(|l| l.starts_with("[PASS]")).count(), 12);
}

#[test]
fn binary_exit_codes() {
    let f = Fixture::new();
    let bin = env!("CARGO_BIN_EXE_mas");
    let status = Command::new(bin)
        .args(["dominance", &f.path("x.json"), &f.path("y.json")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    let status = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).contains("selftest"));
}
