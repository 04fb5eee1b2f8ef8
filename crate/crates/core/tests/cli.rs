mod support;

use std::path::Path;
use std::process::{Command, Output};

use etflock::output;
use etflock::scenario::Scenario;

fn etflock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etflock"))
        .args(args)
        .env_remove("ETFLOCK_OUT_DIR")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A short double-integrator scenario written to `dir/short.toml`.
fn short_scenario(dir: &Path, duration: f64) -> std::path::PathBuf {
    let mut s = Scenario::double_integrator();
    s.simulation.duration = duration;
    let file = dir.join("short.toml");
    std::fs::write(&file, s.to_toml_string()).unwrap();
    file
}

#[test]
fn presets_round_trip_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    for name in etflock::scenario::PRESETS {
        let file = dir.path().join(format!("{name}.toml"));
        let out = etflock(&["preset", "--name", name, "--out", path(&file)]);
        assert!(out.status.success());
        assert_eq!(Scenario::load(&file).unwrap(), Scenario::preset(name).unwrap());
        let out = etflock(&["validate", "--scenario", path(&file)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn unstable_sigma_is_rejected_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::double_integrator();
    s.trigger.sigma = 1.5;
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, s.to_toml_string()).unwrap();

    let out = etflock(&["validate", "--scenario", path(&file)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < sigma < 1"));

    let out = etflock(&["run", "--scenario", path(&file), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("o").exists());

    let out = etflock(&["validate", "--scenario", path(&file), "--allow-unstable-gains"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn malformed_scenarios_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("junk.toml");
    std::fs::write(&file, "[graph]\nkind = \"explicit\"\nnode_count = \"many\"\n").unwrap();
    assert_eq!(etflock(&["validate", "--scenario", path(&file)]).status.code(), Some(1));
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        etflock(&["validate", "--scenario", path(&missing)]).status.code(),
        Some(1)
    );
    assert_eq!(etflock(&["run"]).status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let file = short_scenario(dir.path(), 2.0);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = etflock(&["run", "--scenario", path(&file), "--seed", "7", "--out", path(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = support::compare_dirs(&a, &b).unwrap();
    assert!(files >= 6);
    // The seed override is recorded in the written scenario.
    let written = Scenario::load(&a.join(output::SCENARIO_FILE)).unwrap();
    assert_eq!(written.simulation.seed, 7);
}

#[test]
fn output_directory_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let file = short_scenario(dir.path(), 0.5);
    let target = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_etflock"))
        .args(["run", "--scenario", path(&file)])
        .env("ETFLOCK_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join(output::SUMMARY_FILE).exists());
}

#[test]
fn metrics_recompute_from_recorded_states() {
    let dir = tempfile::tempdir().unwrap();
    let file = short_scenario(dir.path(), 3.0);
    let out = dir.path().join("run");
    assert!(etflock(&["run", "--scenario", path(&file), "--out", path(&out)])
        .status
        .success());
    let run = output::read_run(&out).unwrap();
    let recomputed = run.recompute_metrics().unwrap();
    assert_eq!(recomputed.len(), run.metrics.len());
    for (a, b) in recomputed.iter().zip(&run.metrics) {
        assert_eq!(a, b);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(output::SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["completed"], true);
    assert_eq!(summary["monitors"]["lyapunov_monotone"], true);
}

#[test]
fn every_plot_kind_renders_from_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let file = short_scenario(dir.path(), 1.0);
    let out = dir.path().join("run");
    assert!(etflock(&["run", "--scenario", path(&file), "--out", path(&out)])
        .status
        .success());
    let figs = dir.path().join("figs");
    for kind in ["trajectory", "velocity", "events", "metrics"] {
        let o = etflock(&["plot", "--record", path(&out), "--kind", kind, "--out", path(&figs)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let svg = std::fs::read_to_string(figs.join(format!("{kind}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") || svg.contains("<svg"));
    }
    let o = etflock(&["plot", "--record", path(&dir.path().join("absent")), "--kind", "events"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_abort_exits_two_and_keeps_partial_output() {
    // Nearly uncoupled agents coasting into each other meet exactly at the origin.
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[graph]
kind = "explicit"
node_count = 2
edges = [[0, 1]]

[dynamics]
model = "double_integrator"
dimension = 1

[gains]
alpha = 1e-30
beta = 1e-30

[potential]
desired_distance = 0.5

[trigger]
sigma = 0.5

[simulation]
dt = 0.125
duration = 2.0
record_stride = 1

[simulation.initial]
kind = "explicit"
positions = [[-0.25, 0.0, 0.0], [0.25, 0.0, 0.0]]
velocities = [[0.25, 0.0, 0.0], [-0.25, 0.0, 0.0]]
"#;
    let file = dir.path().join("boom.toml");
    std::fs::write(&file, text).unwrap();
    let out = dir.path().join("run");
    let o = etflock(&["run", "--scenario", path(&file), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(output::SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["completed"], false);
    assert!(summary["abort_cause"].is_string());
}
