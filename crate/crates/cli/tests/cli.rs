//! End-to-end tests of the binary: artifact layout, canonical plan
//! round-trips, determinism, and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_degen-rd"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("degen-rd-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("create test dir");
    dir
}

fn write(path: &Path, body: &str) {
    std::fs::write(path, body).expect("write test file");
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn assert_exit(output: &Output, expected: i32, what: &str) {
    let code = output.status.code().expect("no exit code");
    assert_eq!(
        code,
        expected,
        "{what}: expected exit {expected}, got {code}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn report_value(path: &Path, key: &str) -> String {
    read(path)
        .lines()
        .find_map(|line| {
            let (k, v) = line.split_once('=')?;
            (k.trim() == key).then(|| v.trim().to_string())
        })
        .unwrap_or_else(|| panic!("{} has no key {key}", path.display()))
}

const STEERING_PROBLEM: &str = r#"
[problem]
profile = "legendre"
bc = "weighted-neumann"
reaction = "power-decay"
reaction_params = [0.1, 3.0]

[grid]
n_cells = 200
dt = 0.001
t_final = 0.5

[synthesize]
initial = { kind = "raised-cosine", amplitude = 1.0 }
target = { kind = "gaussian", amplitude = 2.0, width = 4.0 }
epsilon = 0.1
epsilon_relative = true
"#;

#[test]
fn plan_round_trip_is_byte_identical_and_errors_agree_across_resolutions() {
    let dir = workdir("roundtrip");
    let config = dir.join("run.toml");
    let out = dir.join("out");
    let plan = out.join("plan.txt");
    write(
        &config,
        &format!(
            "{STEERING_PROBLEM}\n[verify]\nplan = {:?}\nn_cells = 300\n",
            plan.to_string_lossy()
        ),
    );

    let syn = run(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "synthesize"]);
    assert_exit(&syn, 0, "synthesize");
    let ver = run(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "verify"]);
    assert_exit(&ver, 0, "verify");

    let original = read(&plan);
    let echoed = read(&out.join("plan-echo.txt"));
    assert_eq!(original, echoed, "parse + re-serialize must be byte-identical");

    let report = out.join("report.txt");
    let coarse: f64 = report_value(&report, "epsilon").parse().unwrap();
    let fine: f64 = report_value(&report, "terminal_error").parse().unwrap();
    assert!(fine < coarse, "cross-resolution run must stay within epsilon");
    let synthesized: f64 =
        source_terminal_error(&original).expect("plan stores its terminal error");
    assert!(
        (fine - synthesized).abs() <= 0.3 * synthesized.max(1e-6),
        "refinement moved the terminal error too far: {synthesized} -> {fine}"
    );
}

fn source_terminal_error(plan_text: &str) -> Option<f64> {
    let mut in_states = false;
    for line in plan_text.lines() {
        if line.trim() == "[states]" {
            in_states = true;
        } else if line.starts_with('[') {
            in_states = false;
        } else if in_states {
            if let Some((k, v)) = line.split_once('=') {
                if k.trim() == "terminal-error" {
                    return v.trim().parse().ok();
                }
            }
        }
    }
    None
}

#[test]
fn synthesize_is_deterministic() {
    let dir = workdir("deterministic");
    let config = dir.join("run.toml");
    write(&config, STEERING_PROBLEM);
    for out in ["a", "b"] {
        let out = dir.join(out);
        let st = run(&[
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "synthesize",
        ]);
        assert_exit(&st, 0, "synthesize");
    }
    assert_eq!(
        read(&dir.join("a/plan.txt")),
        read(&dir.join("b/plan.txt")),
        "two runs of the same config must produce identical plans"
    );
}

#[test]
fn unknown_config_key_is_named_in_the_error() {
    let dir = workdir("badkey");
    let config = dir.join("run.toml");
    write(&config, "[grid]\nn_cellz = 10\n");
    let output = run(&["--config", config.to_str().unwrap(), "spectrum"]);
    assert_exit(&output, 2, "unknown key");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("n_cellz"), "stderr must name the bad key: {stderr}");
}

#[test]
fn zero_epsilon_is_a_validation_error() {
    let dir = workdir("zeroeps");
    let config = dir.join("run.toml");
    write(
        &config,
        "[synthesize]\ninitial = { kind = \"constant\", value = 1.0 }\n\
         target = { kind = \"constant\", value = 3.0 }\nepsilon = 0.0\n",
    );
    let output = run(&["--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "synthesize"]);
    assert_exit(&output, 2, "zero epsilon");
}

#[test]
fn negative_target_is_rejected_with_the_obstruction() {
    let dir = workdir("negtarget");
    let config = dir.join("run.toml");
    write(
        &config,
        "[synthesize]\ninitial = { kind = \"constant\", value = 1.0 }\n\
         target = { kind = \"cosine\", mean = 0.0, amplitude = 1.0, frequency = 2.0 }\n\
         epsilon = 0.01\n",
    );
    let output = run(&["--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "synthesize"]);
    assert_exit(&output, 2, "negative target");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("nonnegative"), "stderr must state the sign obstruction: {stderr}");
}

#[test]
fn horizon_mismatch_is_a_validation_error() {
    let dir = workdir("horizon");
    let out = dir.join("out");
    let config = dir.join("run.toml");
    write(&config, STEERING_PROBLEM);
    let st = run(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "synthesize"]);
    assert_exit(&st, 0, "synthesize");

    let bad = dir.join("bad.toml");
    write(
        &bad,
        &format!(
            "[grid]\nn_cells = 200\ndt = 0.001\nt_final = 0.75\n\n[verify]\nplan = {:?}\n",
            out.join("plan.txt").to_string_lossy()
        ),
    );
    let output = run(&["--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap(), "verify"]);
    assert_exit(&output, 2, "horizon mismatch");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("mismatch"), "stderr must call out the mismatch: {stderr}");
}

#[test]
fn truncated_plan_is_a_parse_error() {
    let dir = workdir("truncated");
    let out = dir.join("out");
    let config = dir.join("run.toml");
    write(&config, STEERING_PROBLEM);
    let st = run(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "synthesize"]);
    assert_exit(&st, 0, "synthesize");

    let plan_path = out.join("plan.txt");
    let text = read(&plan_path);
    write(&plan_path, &text[..text.len() / 2]);
    let bad = dir.join("verify.toml");
    write(
        &bad,
        &format!(
            "[grid]\nn_cells = 200\ndt = 0.001\nt_final = 0.5\n\n[verify]\nplan = {:?}\n",
            plan_path.to_string_lossy()
        ),
    );
    let output = run(&["--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap(), "verify"]);
    assert_exit(&output, 2, "truncated plan");
}

#[test]
fn spectrum_emits_the_oracle_comparison() {
    let dir = workdir("spectrum");
    let config = dir.join("run.toml");
    write(&config, "[grid]\nn_cells = 400\ndt = 0.001\nt_final = 1.0\n\n[spectrum]\nn_modes = 6\n");
    let output = run(&["--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "spectrum"]);
    assert_exit(&output, 0, "spectrum");

    let csv = read(&dir.join("eigenvalues.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p,lambda,analytic,relative_error"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let rel_p2: f64 = rows[2][3].parse().unwrap();
    assert_eq!(rows[2][2], "6", "analytic value for p = 2");
    assert!(rel_p2 < 1e-3, "p = 2 relative error {rel_p2}");

    let modes = read(&dir.join("eigenvectors.csv"));
    assert_eq!(modes.lines().count(), 402, "header plus one row per node");
}

#[test]
fn simulate_writes_consistent_artifacts() {
    let dir = workdir("simulate");
    let config = dir.join("run.toml");
    write(
        &config,
        "[grid]\nn_cells = 80\ndt = 0.001\nt_final = 0.2\n\n[output]\ndirectory = \"unused\"\nstate_stride = 20\n\n\
         [simulate]\ninitial = { kind = \"cosine\", mean = 1.0, amplitude = 0.3, frequency = 2.0 }\n\
         control = { kind = \"linear\", slope = 0.5 }\n",
    );
    let output = run(&["--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "simulate"]);
    assert_exit(&output, 0, "simulate");

    let traj = read(&dir.join("trajectory.csv"));
    assert_eq!(traj.lines().next().unwrap().split(',').count(), 82, "t plus 81 nodes");
    assert_eq!(traj.lines().count(), 12, "header, initial state, 9 strided rows, final state");
    let diag = read(&dir.join("diagnostics.csv"));
    assert_eq!(diag.lines().count(), 202, "header plus one row per step plus initial");
    let mass_initial: f64 = report_value(&dir.join("summary.txt"), "mass_initial").parse().unwrap();
    let mass_final: f64 = report_value(&dir.join("summary.txt"), "mass_final").parse().unwrap();
    let exact = 2.0 + 0.3 * 2.0f64.sin();
    assert!((mass_initial - exact).abs() < 1e-3, "mass of 1 + 0.3 cos(2x): {mass_initial}");
    assert!(
        (mass_final - mass_initial).abs() < 0.05,
        "the odd control 0.5 x is nearly mass-neutral: {mass_initial} -> {mass_final}"
    );
}

#[test]
fn climate_scenario_reports_physical_range() {
    let dir = workdir("climate");
    let config = dir.join("run.toml");
    write(
        &config,
        "[output]\ndirectory = \"unused\"\nstate_stride = 200\n\n\
         [climate]\nn_cells = 80\nt_final = 1.0\n",
    );
    let output = run(&["--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "climate"]);
    assert_exit(&output, 0, "climate");
    assert_eq!(report_value(&dir.join("report.txt"), "in_physical_range"), "true");
    let long = read(&dir.join("climate_long.csv"));
    assert_eq!(long.lines().next(), Some("x,t,u"));
    let stored_rows = read(&dir.join("trajectory.csv")).lines().count() - 1;
    assert_eq!(long.lines().count() - 1, stored_rows * 81, "long format covers every node");
}

#[test]
fn selftest_subset_passes_and_is_reported() {
    let dir = workdir("selftest");
    let output = run(&["--out", dir.to_str().unwrap(), "selftest", "8"]);
    assert_exit(&output, 0, "selftest 8");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("PASS"), "summary line missing: {stdout}");
    assert!(read(&dir.join("selftest.txt")).contains("mass-conservation"));
    let bad = run(&["--out", dir.to_str().unwrap(), "selftest", "11"]);
    assert_exit(&bad, 2, "out-of-range check id");
}
