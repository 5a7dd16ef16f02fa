use std::path::{Path, PathBuf};
use std::process::Command;

use freeatoms_cli::docs::*;
use freeatoms_cli::error::Diagnostic;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Out {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_freeatoms"));
    cmd.args(args).env_remove("FREEATOMS_TOL").env_remove("FREEATOMS_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let o = cmd.output().expect("binary runs");
    Out {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Out {
    run_env(args, &[])
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.code, 0, "{args:?}: {}", o.stderr);
    o.stdout
}

/// Parses, then checks that serializing and parsing again gives the same value.
fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(text: &str) -> T {
    let doc: T = serde_json::from_str(text).expect("output parses as its document type");
    let again: T = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(again, doc);
    doc
}

fn golden<T: DeserializeOwned>(name: &str) -> T {
    serde_json::from_str(&std::fs::read_to_string(data(&format!("golden/{name}"))).unwrap()).unwrap()
}

fn c(re: f64) -> [f64; 2] {
    [re, 0.0]
}

#[test]
fn linearize_anticommutator_block_structure() {
    let doc: LinearizeDoc = round_trip(&ok(&["linearize", "--poly", "Z1*Z2+Z2*Z1"]));
    let r = &doc.result;
    assert!(r.certificate_verified && r.integer_coefficients);
    assert!(doc.breaches.is_empty());
    assert!(r.equivalence.as_ref().unwrap().violations.is_empty());
    let rows = |m: &freeatoms::CMat| freeatoms::linalg::mat_serde::to_rows(m);
    let z = c(0.0);
    let o = c(1.0);
    assert_eq!(rows(&r.pencil.a0), vec![vec![z, z, z], vec![z, z, o], vec![z, o, z]]);
    assert_eq!(rows(&r.pencil.a1), vec![vec![z, o, z], vec![o, z, z], vec![z, z, z]]);
    assert_eq!(rows(&r.pencil.a2), vec![vec![z, z, o], vec![z, z, z], vec![o, z, z]]);
    let g: LinearizeDoc = golden("linearize_anticommutator.json");
    assert_eq!(g.result, doc.result);
}

#[test]
fn convolve_bernoulli_is_arcsine() {
    let text = ok(&["convolve", "--mu1", &data("bern.json"), "--mu2", &data("bern.json"), "--grid", "-2.5:2.5:501", "--format", "csv"]);
    let parse = |t: &str| -> Vec<(f64, f64)> {
        let mut r = csv::Reader::from_reader(t.as_bytes());
        r.records().map(|x| {
            let x = x.unwrap();
            (x[0].parse().unwrap(), x[1].parse().unwrap())
        })
        .collect()
    };
    let got = parse(&text);
    assert_eq!(got.len(), 501);
    for &(x, d) in &got {
        if x.abs() <= 1.9 {
            let want = 1.0 / (std::f64::consts::PI * (4.0 - x * x).sqrt());
            assert!((d - want).abs() < 1e-3, "x = {x}: {d} vs {want}");
        }
    }
    let gold = parse(&std::fs::read_to_string(data("golden/convolve_bernoulli.csv")).unwrap());
    for (a, b) in got.iter().zip(&gold) {
        assert!(a.0 == b.0 && (a.1 - b.1).abs() <= 1e-9 * (1.0 + b.1.abs()), "{a:?} vs {b:?}");
    }
}

#[test]
fn eigtest_free_projections() {
    let text = ok(&["eigtest", "--poly", "Z1*Z2+Z2*Z1", "--lambda", "0", "--mu1", &data("proj.json"), "--mu2", &data("proj.json"), "--strict"]);
    let doc: EigtestDoc = round_trip(&text);
    let r = &doc.result;
    let (pair, _) = r.regularization.as_ref().expect("E(p) is singular at 0");
    assert!(pair.doubled_invertible);
    assert!(r.offset_distance.unwrap() < 1e-2);
    assert!(r.mass.abs() < 1e-6);
    let g: EigtestDoc = golden("eigtest_projections.json");
    assert!((g.result.mass - r.mass).abs() < 1e-9);
    assert!((g.result.regularization.unwrap().0.offset - pair.offset).abs() < 1e-9);
}

#[test]
fn decompose_two_point_measures() {
    let text = ok(&["decompose", "--mu1", &data("mu_a.json"), "--mu2", &data("mu_b.json"), "--at", "0", "--strict"]);
    let doc: DecomposeDoc = round_trip(&text);
    let r = &doc.result.report;
    let d = r.decomposition.as_ref().unwrap();
    assert!((r.mass - 0.3).abs() < 1e-6);
    assert!((d.beta1[(0, 0)].re - 7.0 / 3.0).abs() < 1e-4 && (d.beta2[(0, 0)].re - 2.0).abs() < 1e-4);
    let g: DecomposeDoc = golden("decompose_atom0.json");
    assert!((g.result.report.mass - r.mass).abs() < 1e-9);
}

#[test]
fn matrix_model_compresses() {
    let text = ok(&["decompose", "--model", &data("model_2x2.json"), "--location", &data("location_2x2.json"), "--strict"]);
    let doc: DecomposeDoc = round_trip(&text);
    let (pair, _) = doc.result.regularization.as_ref().unwrap();
    assert_eq!(pair.rank_q1, 1);
    assert!((pair.offset - pair.offset.round()).abs() < 1e-2);
    assert!((doc.result.report.mass - 0.15).abs() < 1e-6);
}

#[test]
fn atom_scan_default_candidates() {
    let doc: ScanDoc = round_trip(&ok(&["atom-scan", "--mu1", &data("mu_a.json"), "--mu2", &data("mu_b.json")]));
    let masses: Vec<f64> = doc.result.entries.iter().map(|e| e.report.as_ref().unwrap().mass).collect();
    assert_eq!(masses.len(), 2);
    assert!((masses[0] - 0.3).abs() < 1e-6 && (masses[1] - 0.1).abs() < 1e-6);
}

#[test]
fn compare_emits_discrepancy_table() {
    let args = ["compare", "--poly", "Z1+Z2", "--lambda", "0,2", "--mu1", &data("mu_a.json"), "--mu2", &data("mu_b.json"), "-N", "200", "--trials", "3", "--strict"];
    let doc: CompareDoc = round_trip(&ok(&args));
    assert_eq!(doc.result.rows.len(), 2);
    assert!(doc.result.rows.iter().all(|r| r.agree), "{:?}", doc.result.rows);
    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    let text = ok(&csv_args);
    assert!(text.starts_with("lambda,pipeline_mass,oracle_mass,std_error,tolerance,discrepancy,agree"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn compare_matrix_model_location() {
    let args = ["compare", "--model", &data("model_2x2.json"), "--locations", &data("location_2x2.json"), "-N", "200", "--trials", "2"];
    let doc: CompareDoc = round_trip(&ok(&args));
    assert!(doc.result.rows[0].agree, "{:?}", doc.result.rows);
}

#[test]
fn oracle_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n).display().to_string();
    let base = ["oracle", "--poly", "Z1*Z2+Z2*Z1", "--lambda", "0", "--mu1", &data("proj.json"), "--mu2", &data("proj.json"), "-N", "120", "--trials", "3", "--bins", "30"];
    for (name, seed) in [("a.json", "4"), ("b.json", "4"), ("c.json", "5")] {
        let mut args = base.to_vec();
        args.extend(["--seed", seed, "-o"]);
        let p = path(name);
        args.push(&p);
        ok(&args);
    }
    let read = |n: &str| std::fs::read_to_string(path(n)).unwrap();
    let a: OracleDoc = round_trip(&read("a.json"));
    let b: OracleDoc = round_trip(&read("b.json"));
    let c: OracleDoc = round_trip(&read("c.json"));
    assert_eq!(a.result, b.result);
    assert_ne!(a.result.histogram, c.result.histogram);
    assert_eq!(a.result.histogram.len(), 30);
}

#[test]
fn convolve_json_round_trips() {
    let text = ok(&["convolve", "--mu1", &data("semicircle.json"), "--mu2", &data("semicircle.json"), "--grid", "-3:3:13"]);
    let doc: ConvolveDoc = round_trip(&text);
    assert_eq!(doc.result.points.len(), 13);
    assert!(doc.result.points.iter().all(|p| p.density >= 0.0));
}

#[test]
fn schema_errors_exit_2() {
    let bad = run(&["decompose", "--mu1", &data("bad_measure.json"), "--mu2", &data("mu_b.json"), "--at", "0"]);
    assert_eq!(bad.code, 2, "{}", bad.stderr);
    let missing = run(&["decompose", "--mu1", &data("nope.json"), "--mu2", &data("mu_b.json"), "--at", "0"]);
    assert_eq!(missing.code, 2);
    let grid = run(&["convolve", "--mu1", &data("bern.json"), "--mu2", &data("bern.json"), "--grid", "1:1:5"]);
    assert_eq!(grid.code, 2);
    let depth = run(&["decompose", "--mu1", &data("mu_a.json"), "--mu2", &data("mu_b.json"), "--at", "0", "--ladder-depth", "41"]);
    assert_eq!(depth.code, 2);
    let poly = run(&["linearize", "--poly", "Z1*("]);
    assert_eq!(poly.code, 2);
}

#[test]
fn environment_overrides() {
    let args = ["decompose", "--mu1", &data("mu_a.json"), "--mu2", &data("mu_b.json"), "--at", "0"];
    assert_eq!(run_env(&args, &[("FREEATOMS_TOL", "0")]).code, 2);
    let o = run_env(&args, &[("FREEATOMS_SEED", "9"), ("FREEATOMS_TOL", "1e-11")]);
    assert_eq!(o.code, 0);
    let doc: DecomposeDoc = round_trip(&o.stdout);
    assert_eq!((doc.config.seed, doc.config.tol), (9, 1e-11));
    let flag_wins = run_env(&[&args[..], &["--seed", "3"]].concat(), &[("FREEATOMS_SEED", "9")]);
    let doc: DecomposeDoc = round_trip(&flag_wins.stdout);
    assert_eq!(doc.config.seed, 3);
}

#[test]
fn non_convergence_exit_3_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out: PathBuf = dir.path().join("diag.json");
    let o = run(&["convolve", "--mu1", &data("bern.json"), "--mu2", &data("bern.json"), "--grid", "0:1:2", "--tol", "1e-30", "-o", out.to_str().unwrap()]);
    assert_eq!(o.code, 3, "{}", o.stderr);
    let d: Diagnostic = round_trip(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(d.error, "no-convergence");
    assert!(d.iterations.is_some());
}

#[test]
fn strict_invariant_breach_exit_4() {
    let args = ["decompose", "--mu1", &data("mu_a.json"), "--mu2", &data("mu_b.json"), "--at", "0", "--ladder-depth", "6", "--y0", "0.01", "--extrapolation", "linear"];
    let lax = run(&args);
    assert_eq!(lax.code, 0);
    let doc: DecomposeDoc = round_trip(&lax.stdout);
    assert!(!doc.breaches.is_empty());
    let strict = run(&[&args[..], &["--strict"]].concat());
    assert_eq!(strict.code, 4);
    assert!(strict.stderr.contains("invariant"));
}
