use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pairlink");

const IDEAL: &str = "name = ideal
source = poissonian
lambda = 0.6931471805599453
detector_efficiency = 1
transmission_efficiency = 1
dark_rate = 0
bin_width = 1e-9
outcome_count = 4
";

fn pairlink(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn eval_ideal_link() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IDEAL);
    let out = pairlink(&["--config", &cfg, "--csv", "eval"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let h: f64 = row[5].parse().unwrap();
    let key_bits: f64 = row[9].parse().unwrap();
    assert!((h - 1.0).abs() < 1e-12);
    assert!((key_bits - 4.0).abs() < 1e-11);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &IDEAL.replace("detector_efficiency = 1", "detector_efficiency = 1.2"));
    let out = pairlink(&["--config", &cfg, "eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":4: detector_efficiency"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), &format!("{IDEAL}colour = blue\n"));
    let out = pairlink(&["--config", &cfg, "eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("colour: unknown key"), "{}", stderr(&out));

    assert_eq!(pairlink(&["eval"]).status.code(), Some(2));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(pairlink(&["--config", missing.to_str().unwrap(), "eval"]).status.code(), Some(2));
    assert_eq!(pairlink(&["launch"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "# measured\n0.9\n0.1\n").unwrap();
    let body = IDEAL
        .replace("poissonian", "empirical")
        .replace("lambda = 0.6931471805599453", "probabilities = p.txt");
    let cfg = write_config(dir.path(), &body);
    assert!(pairlink(&["--config", &cfg, "eval"]).status.success());
    let out = pairlink(&["--config", &cfg, "optimize"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empirical"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), IDEAL);
    let out = pairlink(&["--config", &cfg, "optimize", "--bracket-low", "1", "--bracket-high", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_recovers_ln2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IDEAL);
    let out = pairlink(&["--config", &cfg, "--csv", "optimize", "--objective", "H"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let lam: f64 = row[1].parse().unwrap();
    assert!((lam - std::f64::consts::LN_2).abs() < 1e-5);
}

#[test]
fn figure_errors() {
    assert_eq!(pairlink(&["figure", "fig4"]).status.code(), Some(2));
    let out = pairlink(&["figure", "fig1", "--output", "/nonexistent-dir/fig1.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn figure_output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(pairlink(&["--jobs", "1", "figure", "fig3b", "--output", a.to_str().unwrap()]).status.success());
    assert!(pairlink(&["--jobs", "4", "figure", "fig3b", "--output", b.to_str().unwrap()]).status.success());
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert!(a.starts_with(b"lambda,Id_eta0.8,Id_eta0.4\n"));
}

#[test]
fn verify_is_deterministic_and_detects_zero_tolerance() {
    let args = ["--seed", "7", "verify", "--trials", "200000"];
    let first = pairlink(&args);
    let second = pairlink(&["--jobs", "3", "--seed", "7", "verify", "--trials", "200000"]);
    assert!(first.status.success(), "{}", stdout(&first));
    assert_eq!(first.stdout, second.stdout);

    let out = pairlink(&["verify", "--trials", "200000", "--tolerance-scale", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("lambda=1e0"), "{}", stdout(&out));
}
