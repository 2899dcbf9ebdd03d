use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use glucevo_core::dataset::{joy_wilson, read_report, write_patient};

fn glucevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glucevo"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(dir: &Path) -> String {
    let path = dir.join("joy.csv");
    write_patient(&path, &joy_wilson()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn map_exit_codes() {
    let ok = glucevo(&["map", "12,55,23,47,38,254,2"]);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("phenotype: Abs(X) * X"));
    assert!(stdout(&ok).contains("wraps used: 1"));

    let zeros = vec!["0"; 100];
    let mut args = vec!["map", "--grammar", "G11"];
    args.extend(zeros);
    assert_eq!(glucevo(&args).status.code(), Some(3));

    assert_eq!(glucevo(&["map", "--grammar", "G11"]).status.code(), Some(2));
    assert_eq!(glucevo(&["map", "300"]).status.code(), Some(1));
}

#[test]
fn train_writes_reports_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path());
    let out = dir.path().join("out");
    let o = glucevo(&[
        "train", "--dataset", &data, "--grammar", "G11,G13", "--objective", "f2,f5", "--runs", "2",
        "--generations", "3", "--population", "10", "--seed", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for g in ["G11", "G13"] {
        for f in ["f2", "f5"] {
            for run in 0..2 {
                let r = read_report(&out.join(format!("joy_{g}_{f}_{run}.report"))).unwrap();
                assert_eq!(r.history.len(), 3);
                assert_eq!(r.run, run);
            }
        }
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.starts_with("patient,grammar,objective,runs,invalid_runs,fitness_mean"));
    assert!(stdout(&o).contains(" ± "));

    // summarize rebuilds the same file from the reports alone.
    fs::remove_file(out.join("summary.csv")).unwrap();
    let s = glucevo(&["summarize", "--out", out.to_str().unwrap()]);
    assert!(s.status.success());
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap(), summary);
}

#[test]
fn single_run_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path());
    let out = dir.path().join("out");
    let o = glucevo(&[
        "train", "--dataset", &data, "--grammar", "G10", "--objective", "f1", "--runs", "1", "--generations",
        "1", "--population", "8", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[6], "0.0");
}

#[test]
fn train_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path());
    let missing = glucevo(&["train", "--dataset", "/no/such.csv", "--grammar", "G11", "--objective", "f1"]);
    assert_eq!(missing.status.code(), Some(1));
    let zero = glucevo(&["train", "--dataset", &data, "--grammar", "G11", "--objective", "f1", "--runs", "0"]);
    assert_eq!(zero.status.code(), Some(1));
    let bad_obj = glucevo(&["train", "--dataset", &data, "--grammar", "G11", "--objective", "f9"]);
    assert_eq!(bad_obj.status.code(), Some(2));
}

#[test]
fn eval_on_a_second_dataset_from_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path());
    let out = dir.path().join("out");
    let o = glucevo(&[
        "train", "--dataset", &data, "--grammar", "G11", "--objective", "f4", "--generations", "5",
        "--population", "20", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let report_path = out.join("joy_G11_f4_0.report");
    let report = read_report(&report_path).unwrap();

    // Same inputs, meals moved: a held-out "test" patient.
    let base = joy_wilson();
    let mut ch = base.ch().to_vec();
    ch.rotate_right(2);
    let other = glucevo_core::PatientSeries::new("other", base.gl().to_vec(), ch, base.is().to_vec(), base.il().to_vec())
        .unwrap();
    let other_path = dir.path().join("other.csv");
    write_patient(&other_path, &other).unwrap();

    let e = glucevo(&[
        "eval", "--report", report_path.to_str().unwrap(), "--dataset", &data, "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(e.status.success());
    let text = stdout(&e);
    let f4_line = text.lines().find(|l| l.starts_with("F4")).unwrap();
    let f4: f64 = f4_line.split_whitespace().last().unwrap().parse().unwrap();
    let want = report.best_fitness.value().unwrap();
    assert!((f4 - want).abs() <= 1e-6 * want.max(1.0), "{f4} vs {want}");

    let e2 = glucevo(&[
        "eval", "--report", report_path.to_str().unwrap(), "--dataset", other_path.to_str().unwrap(), "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(e2.status.success());
    let table = fs::read_to_string(dir.path().join("other_estimate.csv")).unwrap();
    assert!(table.starts_with("k,GL,GL_hat\n1,"));
    assert_eq!(table.lines().count(), 98);
}

#[test]
fn eval_rejects_unparseable_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path());
    let o = glucevo(&["eval", "GL[k] + + 1", "--dataset", &data, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parsing model"));
}
