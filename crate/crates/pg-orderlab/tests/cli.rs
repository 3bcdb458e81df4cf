//! End-to-end tests of the installed binary: flag validation, output
//! formats, exit codes, and byte-level determinism of written files.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pg-orderlab")
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn temp_file(tag: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("pg-orderlab-cli-{}-{tag}", std::process::id()));
    p
}

#[test]
fn help_prints_usage() {
    let (code, stdout, _) = run_cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("usage: pg-orderlab"));
}

#[test]
fn no_command_is_a_usage_error() {
    let (code, _, stderr) = run_cli(&[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("usage"));
}

#[test]
fn examples_lists_the_registry() {
    let (code, stdout, _) = run_cli(&["examples"]);
    assert_eq!(code, 0);
    for name in [
        "example1", "example2", "example3", "example4", "example5", "prop2",
    ] {
        assert!(stdout.contains(name), "missing {name}");
    }
    assert!(stdout.contains("repo default"));
}

#[test]
fn check_reports_the_three_verdicts() {
    let (code, stdout, _) = run_cli(&["check", "--example", "example1"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("non-domination: satisfied"));
    assert!(stdout.contains("order-preservation: feasible"));
    assert!(stdout.contains("argmax action 1"));
    assert!(stdout.contains("pg prediction: guaranteed-global"));
    assert!(stdout.contains("npg prediction: global"));

    let (code, stdout, _) = run_cli(&["check", "--example", "example2"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("order-preservation: infeasible"));
    assert!(stdout.contains("npg prediction: global"));

    let (code, stdout, _) = run_cli(&["check", "--example", "example3"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("order-preservation: feasible"));
    assert!(stdout.contains("argmax action 2"));
    assert!(stdout.contains("npg prediction: not-global"));

    let (code, stdout, _) = run_cli(&["check", "--example", "prop2"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("non-domination: violated by pair (3, 2)"));
}

#[test]
fn check_rejects_unknown_names_and_flag_combinations() {
    let (code, _, stderr) = run_cli(&["check", "--example", "example99"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("example99"));
    assert!(stderr.contains("example1"));

    let (code, _, stderr) = run_cli(&["check", "--example", "example1", "--file", "whatever.txt"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("mutually exclusive"));

    let (code, _, stderr) = run_cli(&["check", "--example", "example1", "--bogus", "1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--bogus"));
}

#[test]
fn run_writes_deterministic_trajectories() {
    let out1 = temp_file("traj-a.txt");
    let out2 = temp_file("traj-b.txt");
    for out in [&out1, &out2] {
        let (code, stdout, _) = run_cli(&[
            "run",
            "--example",
            "example1",
            "--alg",
            "npg",
            "--max-iters",
            "150",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(stdout.contains("limit action: 1"));
        assert!(stdout.contains("terminal: max-iters"));
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(
        a, b,
        "identical invocations must produce byte-identical files"
    );

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "# t value gap grad_norm theta_0 theta_1"
    );
    let last = text.lines().last().unwrap();
    let cols: Vec<&str> = last.split_whitespace().collect();
    assert_eq!(cols[0], "151");
    let gap: f64 = cols[2].parse().unwrap();
    assert!(gap < 1e-6, "final gap {gap}");

    std::fs::remove_file(&out1).ok();
    std::fs::remove_file(&out2).ok();
}

#[test]
fn run_on_tied_projection_reports_no_limit_action() {
    let (code, stdout, _) = run_cli(&[
        "run",
        "--example",
        "example4",
        "--alg",
        "npg",
        "--max-iters",
        "150",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("limit action: none"), "{stdout}");
    assert!(stdout.contains("probability ratio pi(1)/pi(2)"), "{stdout}");
    // the frozen ratio shows up as initial == final
    let ratio_line = stdout
        .lines()
        .find(|l| l.contains("probability ratio"))
        .unwrap();
    let tokens: Vec<&str> = ratio_line.split_whitespace().collect();
    let value_after = |key: &str| -> f64 {
        let idx = tokens.iter().position(|t| *t == key).unwrap();
        tokens[idx + 1].trim_end_matches(',').parse().unwrap()
    };
    let initial = value_after("initial");
    let final_ = value_after("final");
    assert!(
        (initial - final_).abs() <= 1e-9 * initial.abs(),
        "{initial} vs {final_}"
    );
}

#[test]
fn run_warns_above_the_safe_step_bound() {
    let (code, _, stderr) = run_cli(&[
        "run",
        "--example",
        "example1",
        "--alg",
        "pg",
        "--max-iters",
        "10",
    ]);
    assert_eq!(code, 0);
    assert!(stderr.contains("monotone-ascent bound"), "{stderr}");
}

#[test]
fn numerical_failure_exits_with_code_two() {
    let (code, stdout, _) = run_cli(&[
        "run",
        "--example",
        "example1",
        "--alg",
        "pg",
        "--eta",
        "1e300",
        "--max-iters",
        "10",
    ]);
    assert_eq!(code, 2);
    assert!(stdout.contains("terminal: numerical-failure"));
}

#[test]
fn run_requires_eta_for_sources_without_defaults() {
    let path = temp_file("no-defaults.txt");
    std::fs::write(&path, "K 3\nd 1\nX\n1\n-1\n0.5\nr 3 1 2\n").unwrap();
    let (code, _, stderr) = run_cli(&[
        "run",
        "--file",
        path.to_str().unwrap(),
        "--alg",
        "pg",
        "--max-iters",
        "10",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--eta is required"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn run_accepts_file_sources_with_inline_defaults() {
    let path = temp_file("with-defaults.txt");
    std::fs::write(
        &path,
        "# example1 re-encoded\nK 4\nd 2\nX\n0 -2\n-1 0\n0 1\n2 0\nr 9 8 7 6\ntheta1 6 8\neta 0.2\n",
    )
    .unwrap();
    let (code, stdout, _) = run_cli(&[
        "run",
        "--file",
        path.to_str().unwrap(),
        "--alg",
        "npg",
        "--max-iters",
        "150",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("limit action: 1"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn malformed_instance_files_are_load_errors() {
    let path = temp_file("square.txt");
    std::fs::write(&path, "K 2\nd 2\nX\n1 0\n0 1\nr 2 1\n").unwrap();
    let (code, _, stderr) = run_cli(&["check", "--file", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("requires d < K"), "{stderr}");
    std::fs::remove_file(&path).ok();
}

#[test]
fn rate_recovers_a_synthetic_decay() {
    let path = temp_file("synthetic.txt");
    let mut body = String::from("# t value gap grad_norm\n");
    for t in 1..=100 {
        let gap = (-0.3 * t as f64).exp();
        body.push_str(&format!("{t} {} {gap} 0\n", 9.0 - gap));
    }
    std::fs::write(&path, body).unwrap();
    let (code, stdout, _) = run_cli(&[
        "rate",
        path.to_str().unwrap(),
        "--model",
        "exp",
        "--window",
        "1.0",
    ]);
    assert_eq!(code, 0);
    let slope_line = stdout.lines().find(|l| l.starts_with("slope:")).unwrap();
    let slope: f64 = slope_line
        .trim_start_matches("slope:")
        .trim()
        .parse()
        .unwrap();
    assert!((slope + 0.3).abs() < 1e-6, "slope {slope}");
    assert!(stdout.contains("r_squared: 1"), "{stdout}");
    std::fs::remove_file(&path).ok();
}

#[test]
fn rate_on_missing_file_is_a_load_error() {
    let (code, _, stderr) = run_cli(&["rate", "/nonexistent-pg-orderlab.txt", "--model", "exp"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("nonexistent"));
}

#[test]
fn landscape_writes_a_plot_ready_grid() {
    let out = temp_file("grid.txt");
    let (code, stdout, _) = run_cli(&[
        "landscape",
        "--example",
        "example1",
        "--half-width",
        "12",
        "--grid",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("5x5"));
    let text = std::fs::read_to_string(&out).unwrap();
    let data_lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .collect();
    assert_eq!(data_lines.len(), 6); // axis row + 5 value rows
    for row in &data_lines[1..] {
        for cell in row.split_whitespace().skip(1) {
            let v: f64 = cell.parse().unwrap();
            assert!((6.0..=9.0).contains(&v), "value {v} outside reward range");
        }
    }
    std::fs::remove_file(&out).ok();
}

#[test]
fn landscape_needs_two_parameter_dimensions() {
    let path = temp_file("one-dim.txt");
    std::fs::write(&path, "K 3\nd 1\nX\n1\n-1\n0.5\nr 3 1 2\n").unwrap();
    let (code, _, stderr) = run_cli(&[
        "landscape",
        "--file",
        path.to_str().unwrap(),
        "--half-width",
        "2",
        "--out",
        "/tmp/should-not-exist-pg-orderlab.txt",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("at least 2"), "{stderr}");
    std::fs::remove_file(&path).ok();
}

#[test]
fn verify_fast_skips_the_long_runs_and_exits_zero() {
    let (code, stdout, _) = run_cli(&["verify", "--fast"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS c01-approx-errors"));
    assert!(stdout.contains("SKIP c06-pg-global-convergence"));
    assert!(stdout.contains("SKIP c07-pg-failure-example2"));
    assert!(stdout.contains("SKIP c09-pg-power-law-rate"));
    assert!(stdout.contains("0 failed"));
}

#[test]
fn verify_honors_the_thread_cap_variable() {
    let out = Command::new(bin())
        .args(["verify", "--fast"])
        .env("PG_ORDERLAB_THREADS", "1")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0));

    let out = Command::new(bin())
        .args(["verify", "--fast"])
        .env("PG_ORDERLAB_THREADS", "zero")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1));
}
