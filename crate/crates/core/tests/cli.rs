use std::path::Path;

use sdcbf::cli::{main_with_args, EXIT_CONFIG, EXIT_INFEASIBLE};
use sdcbf::config::DEFAULT_CONFIG;

fn cli(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("sdcbf").chain(args.iter().copied()))
}

fn small_config(dir: &Path, edits: &[(&str, &str)]) -> String {
    let mut text = DEFAULT_CONFIG.replace("n_traj = 200", "n_traj = 20").replace("n_steps = 1000", "n_steps = 200");
    for (from, to) in edits {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn synth_without_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["run", "--out", &p(dir.path(), "o")]), EXIT_CONFIG);
}

#[test]
fn zero_trajectories_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &[("n_traj = 20", "n_traj = 0")]);
    assert_eq!(cli(&["gen-data", "--config", &cfg, "--out", &p(dir.path(), "d")]), EXIT_CONFIG);
}

#[test]
fn bad_arguments_and_unknown_controller() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["frobnicate"]), EXIT_CONFIG);
    let out = p(dir.path(), "o");
    assert_eq!(cli(&["run", "--controller", "mpc", "--out", &out]), EXIT_CONFIG);
    assert_eq!(cli(&["--help"]), 0);
}

#[test]
fn fail_stop_halts_with_infeasible_exit() {
    // With κ = 1 the constraint cannot be met at the initial state.
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &[("kappa = 1e6", "kappa = 1.0")]);
    assert_eq!(cli(&["gen-data", "--config", &cfg, "--out", &p(dir.path(), "d")]), 0);
    let ds = p(dir.path(), "d/dataset.csv");
    let out = p(dir.path(), "r");
    assert_eq!(cli(&["run", "--config", &cfg, "--dataset", &ds, "--out", &out]), EXIT_INFEASIBLE);
    let summary = std::fs::read_to_string(dir.path().join("r/summary.toml")).unwrap();
    assert!(summary.contains("halted"));

    // The reuse policy keeps going.
    let out = p(dir.path(), "r2");
    let code = cli(&[
        "run", "--config", &cfg, "--dataset", &ds, "--out", &out, "--horizon", "20", "--fallback",
        "reuse-nearest-sample-input",
    ]);
    assert_eq!(code, 0);
    let diag = std::fs::read_to_string(dir.path().join("r2/diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 21);
    assert!(diag.contains("fallback"));
}

#[test]
fn run_compare_sweep_and_suprema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, &[]);
    assert_eq!(cli(&["gen-data", "--config", &cfg, "--out", &p(d, "data")]), 0);
    let ds = p(d, "data/dataset.csv");
    assert_eq!(cli(&["run", "--config", &cfg, "--dataset", &ds, "--horizon", "100", "--out", &p(d, "s")]), 0);
    assert_eq!(cli(&["run", "--config", &cfg, "--controller", "baseline", "--horizon", "100", "--out", &p(d, "b")]), 0);
    for f in ["trajectory.csv", "diagnostics.csv", "summary.toml", "manifest.toml"] {
        assert!(d.join("s").join(f).is_file(), "{f}");
    }
    let traj = std::fs::read_to_string(d.join("s/trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x_0,x_1,u_0,h\n"));
    assert_eq!(traj.lines().count(), 1 + 100 * 100 + 1);

    let (ta, tb) = (p(d, "s/trajectory.csv"), p(d, "b/trajectory.csv"));
    let code = cli(&["compare", &ta, &tb, "--out", &p(d, "cmp"), "--config", &cfg, "--labels", "synth,baseline"]);
    assert_eq!(code, 0);
    let svg = std::fs::read_to_string(d.join("cmp/comparison.svg")).unwrap();
    assert!(svg.contains(">synth<") && svg.contains(">baseline<"));
    assert!(d.join("cmp/comparison.toml").is_file());

    let code = cli(&[
        "sweep-dt", "--config", &cfg, "--dataset", &ds, "--out", &p(d, "sw"), "--dt", "0.005,0.01", "--horizon", "0.5",
        "--grid", "5",
    ]);
    assert_eq!(code, 0);
    let sweep = std::fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    assert!(sweep.starts_with("dt,gronwall_term,probe_states,feasible_fraction"));

    assert_eq!(cli(&["suprema", "--config", &cfg, "--grid", "11"]), 0);
}
