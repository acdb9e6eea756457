//! End-to-end runs through the command-line layer: determinism of the CSV
//! outputs, worker-count invariance, and the binary's flag handling.

use std::fs;
use std::path::Path;
use std::process::Command;

use rydsim::cli::{run_and_write, ExperimentConfig, PRESET_NAMES};
use tempfile::TempDir;

const SCAN_TOML: &str = r#"
[physics]
scheme = "two_level"
omega12 = 1.0
gamma21 = 6.0

[interaction]
c6 = 900.0

[geometry]
kind = "gas1d"
atoms = 12
density = 0.5

[partition]
mode = "overlapping"

[mc]
trajectories = 40
realizations = 2
seed = 7

[scan]
kind = "detuning"
deltas = [0.0, 1.0, 2.0]
"#;

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn repeated_runs_with_one_seed_write_identical_files() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(SCAN_TOML).unwrap();
    cfg.workers = Some(1);
    cfg.output.dir = tmp.path().join("scan");

    run_and_write(&cfg).unwrap();
    let first = fs::read(cfg.output.dir.join("detuning_scan.csv")).unwrap();
    run_and_write(&cfg).unwrap();
    let second = fs::read(cfg.output.dir.join("detuning_scan.csv")).unwrap();
    assert_eq!(first, second, "same seed must rewrite byte-identical output");
}

#[test]
fn worker_counts_leave_the_numbers_unchanged() {
    let tmp = TempDir::new().unwrap();
    let mut rows = Vec::new();
    for workers in [1usize, 2] {
        let mut cfg = ExperimentConfig::from_toml_str(SCAN_TOML).unwrap();
        cfg.workers = Some(workers);
        cfg.output.dir = tmp.path().join(format!("w{workers}"));
        run_and_write(&cfg).unwrap();
        rows.push(data_lines(&cfg.output.dir.join("detuning_scan.csv")));
    }
    assert_eq!(rows[0], rows[1], "scheduling must not leak into the results");
    assert_eq!(rows[0].len(), 4, "header row plus one row per detuning");
}

#[test]
fn the_binary_lists_its_presets() {
    let out = Command::new(env!("CARGO_BIN_EXE_rydsim"))
        .arg("presets")
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let listed: Vec<&str> = stdout.lines().collect();
    assert_eq!(listed, PRESET_NAMES);
}

#[test]
fn the_binary_runs_a_config_file_with_overrides() {
    let tmp = TempDir::new().unwrap();
    let config_path = tmp.path().join("scan.toml");
    fs::write(&config_path, SCAN_TOML).unwrap();
    let out_dir = tmp.path().join("results");

    let out = Command::new(env!("CARGO_BIN_EXE_rydsim"))
        .arg("run")
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(&out_dir)
        .arg("--seed")
        .arg("123")
        .arg("--trajectories")
        .arg("10")
        .arg("--workers")
        .arg("1")
        .arg("--dump-positions")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let scan = fs::read_to_string(out_dir.join("detuning_scan.csv")).unwrap();
    assert!(scan.contains("# seed = 123"), "override seed missing from the header");
    assert!(scan.contains("trajectories = 10"), "override budget missing");
    assert_eq!(scan.lines().filter(|l| !l.starts_with('#')).count(), 4);

    for r in 0..2 {
        let name = format!("positions_r{r:03}.csv");
        let positions = data_lines(&out_dir.join(&name));
        assert_eq!(positions.len(), 13, "{name}: header plus one row per atom");
    }
}

#[test]
fn broken_config_diagnostics_name_the_line() {
    let tmp = TempDir::new().unwrap();
    let config_path = tmp.path().join("broken.toml");
    fs::write(&config_path, "[physics]\nscheme = \"two_level\"\nomega12 = oops\n")
        .unwrap();

    let out = Command::new(env!("CARGO_BIN_EXE_rydsim"))
        .arg("run")
        .arg("--config")
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "no line in the diagnostic: {stderr}");
}
