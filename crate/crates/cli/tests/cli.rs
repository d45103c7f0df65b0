use std::path::Path;
use std::process::{Command, Output};

use randbc_core::experiments::read_csv;
use randbc_core::{Algorithm, BilinearFormula, MatrixKind};

fn randbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randbc")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = randbc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn experiment_to_stdout_and_file_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let args = ["experiment", "s2-variants", "--size", "16", "--trials", "3", "--recursions", "2", "--matrix-type", "adv1,hilbert"];
    let stdout = ok(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", p(&out)]);
    ok(&with_out);
    assert_eq!(stdout, std::fs::read_to_string(&out).unwrap());
    let records = read_csv(stdout.as_bytes()).unwrap();
    // Per family: standard, 2 deterministic, 2 rescaled, 3 variants x 2 depths x 3 trials.
    assert_eq!(records.len(), 2 * (1 + 2 + 2 + 18));
    assert!(records.iter().all(|r| [MatrixKind::Adversarial1, MatrixKind::Hilbert].contains(&r.matrix_type)));
}

#[test]
fn repeats_write_separate_files_with_distinct_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("avg.csv");
    ok(&["experiment", "s1-avg", "--size", "8", "--trials", "20", "--recursions", "1", "--repeats", "2", "--out", p(&out)]);
    let a = read_csv(std::fs::File::open(dir.path().join("avg.run-1.csv")).unwrap()).unwrap();
    let b = read_csv(std::fs::File::open(dir.path().join("avg.run-2.csv")).unwrap()).unwrap();
    assert!(!out.exists());
    assert_eq!(a.len(), b.len());
    assert_ne!(a, b);
    let single = read_csv(ok(&["experiment", "s1-avg", "--size", "8", "--trials", "20", "--recursions", "1"]).as_bytes()).unwrap();
    assert_eq!(single, a);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "size = 8\ntrials = 4\nrecursions = \"1-2\"\nmatrix-type = [\"uniform\"]\nalgorithm = [\"deterministic\", \"sign\"]\n").unwrap();
    let records = read_csv(ok(&["experiment", "s1-dist", "--config", p(&cfg), "--size", "16"]).as_bytes()).unwrap();
    assert!(records.iter().all(|r| r.n == 16 && r.matrix_type == MatrixKind::Uniform));
    assert_eq!(records.iter().filter(|r| r.algorithm == Algorithm::Deterministic).count(), 2);
    // The distribution experiment runs the configured variant, which defaults to full.
    assert_eq!(records.iter().filter(|r| r.algorithm == Algorithm::FullRandom).count(), 8);

    std::fs::write(&cfg, "sise = 8\n").unwrap();
    assert!(!randbc(&["experiment", "s1-dist", "--config", p(&cfg)]).status.success());
}

#[test]
fn formula_export_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    ok(&["formula", "export", "--perturb-sigma", "1e-3", "--seed", "4", "--out", p(&path)]);
    let f = BilinearFormula::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(!f.is_exact(1e-12));
    let text = ok(&["formula", "inspect", p(&path)]);
    assert!(text.contains("n = 2, R = 7"));
    assert!(text.contains("is_exact = false"));

    let exact = ok(&["formula", "export"]);
    assert_eq!(BilinearFormula::from_json(&exact).unwrap(), BilinearFormula::strassen());

    let records = read_csv(
        ok(&["experiment", "s2-variants", "--size", "8", "--trials", "2", "--recursions", "1", "--formula", p(&path), "--algorithm", "deterministic"])
            .as_bytes(),
    )
    .unwrap();
    assert_eq!(records.len(), 1);
}

#[test]
fn bounds_report_holds() {
    let text = ok(&["bounds", "--m", "2", "--trials", "3"]);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let bound = headers.iter().position(|h| h == "bound_value").unwrap();
    let emp = headers.iter().position(|h| h == "empirical_value").unwrap();
    let mut n = 0;
    for row in rows.records() {
        let row = row.unwrap();
        if row[emp].is_empty() {
            continue;
        }
        let (b, e): (f64, f64) = (row[bound].parse().unwrap(), row[emp].parse().unwrap());
        assert!(e <= b, "{row:?}");
        n += 1;
    }
    // sup constant, then per trial two exact-arithmetic bounds and four rounding bounds.
    assert_eq!(n, 1 + 3 * 6);
}

#[test]
fn multiply_prints_error() {
    let text = ok(&["multiply", "--algorithm", "full", "--size", "32", "--recursions", "2", "--precision", "f32"]);
    let line = text.lines().find(|l| l.starts_with("rel_error")).unwrap();
    let err: f64 = line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!(err > 0.0 && err < 1e-5);
}

#[test]
fn bad_arguments_fail() {
    for args in [
        &["experiment", "s3"][..],
        &["experiment", "s1-avg", "--precision", "f16"],
        &["experiment", "s1-avg", "--size", "10", "--recursions", "3"],
        &["experiment", "s1-avg", "--matrix-type", "toeplitz"],
        &["experiment", "s1-avg", "--repeats", "2"],
    ] {
        let out = randbc(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}
