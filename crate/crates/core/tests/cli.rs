use std::path::{Path, PathBuf};

use ldbsm::cli::{self, EXIT_CHECK_FAIL, EXIT_INPUT, EXIT_OK, EXIT_UNKNOWN};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn walk() -> String {
    data("models/random_walk.toml").display().to_string()
}

fn hand_certificate() -> String {
    data("certificates/walk_gf_a.toml").display().to_string()
}

fn run(args: &[&str]) -> cli::Outcome {
    cli::run(std::iter::once("ldbsm").chain(args.iter().copied()))
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn check_passes_and_reports_bound() {
    let out = run(&["check", &walk(), "GF a", &hand_certificate()]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stdout);
    assert!(out.stdout.contains("certified probability >= 0.9999546001"), "{}", out.stdout);
}

#[test]
fn mutated_certificate_fails_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(hand_certificate()).unwrap().replace("eps_S = \"5/32\"", "eps_S = \"1\"");
    let cert = write(&dir, "c.toml", &text);
    let out = run(&["check", &walk(), "GF a", &cert]);
    assert_eq!(out.code, EXIT_CHECK_FAIL);
    assert!(out.stdout.contains("value -27/32"), "{}", out.stdout);
}

#[test]
fn float_literal_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(hand_certificate()).unwrap().replace("M_S = \"1\"", "M_S = 1.0");
    let cert = write(&dir, "c.toml", &text);
    let out = run(&["check", &walk(), "GF a", &cert]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("line"), "{}", out.stderr);
}

#[test]
fn unknown_automaton_is_an_input_error() {
    let out = run(&["check", &walk(), "X a", &hand_certificate()]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("neither a file nor a shipped name"));
}

#[test]
fn control_needs_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run").display().to_string();
    let out = run(&["control", &walk(), "G b", "--out", &out_dir]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("input space"), "{}", out.stderr);
}

#[test]
fn empty_input_box_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("models/controlled_walk.toml"))
        .unwrap()
        .replace("[[\"-2\", \"2\"]]", "[[\"2\", \"-2\"]]");
    let model = write(&dir, "m.toml", &text);
    let out_dir = dir.path().join("run").display().to_string();
    let out = run(&["control", &model, "G b", "--out", &out_dir]);
    assert_eq!(out.code, EXIT_INPUT, "{}{}", out.stdout, out.stderr);
}

#[test]
fn probability_one_is_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run").display().to_string();
    let out = run(&["verify", &walk(), "G b", "--prob", "1", "--out", &out_dir]);
    assert_eq!(out.code, EXIT_UNKNOWN, "{}{}", out.stdout, out.stderr);
}

#[test]
fn bad_box_is_rejected() {
    let out = run(&["check", &walk(), "GF a", &hand_certificate(), "--box", "3:1"]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("empty interval"));
}

#[test]
fn simulate_hand_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let out = run(&[
        "simulate",
        &walk(),
        "GF a",
        &hand_certificate(),
        "--horizon",
        "2000",
        "--runs",
        "200",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 201);
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.code, EXIT_OK);
    for sub in ["verify", "control", "check", "simulate"] {
        assert!(out.stdout.contains(sub));
    }
}
