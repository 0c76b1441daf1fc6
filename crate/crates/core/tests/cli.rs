use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracspde::solver::Trajectory;

const SPATIAL: &str = "\
# H=0.3, m=0, (0.6, 0.7), spatial refinement
alpha = 0.6
s = 0.7
hurst = 0.3
m = 0
axis = space
levels = 8, 16, 32, 64
fixed_other = 16
n_traj = 3
seed = 11
";

fn fracspde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracspde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("study.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn selftest_passes() {
    let out = fracspde(&["selftest"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.matches("PASS").count(), 4, "{stdout}");
    assert!(stdout.contains("4/4 suites passed"));
}

#[test]
fn study_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SPATIAL);
    let out_dir = dir.path().join("out");
    let out = fracspde(&[
        "study",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("table.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,error,observed_rate,theoretical_rate");
    assert_eq!(lines.len(), 5);
    for (line, level) in lines[1..].iter().zip([8, 16, 32, 64]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], level.to_string());
        assert_eq!(cells[3], "2.00000e-1");
    }
    assert_eq!(lines[4].split(',').nth(2), Some(""));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["alpha"], 0.6);
    assert_eq!(manifest["config"]["n_traj"], 3);
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["command"], "study");
}

#[test]
fn study_output_is_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SPATIAL);
    let run = |name: &str, threads: &str| {
        let out_dir = dir.path().join(name);
        let out = fracspde(&[
            "study",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(out.status.success());
        fs::read(out_dir.join("table.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "3"));
}

#[test]
fn overrides_supersede_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SPATIAL);
    let out_dir = dir.path().join("out");
    let out = fracspde(&[
        "study",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "n_traj=2",
        "--set",
        "levels=4,8",
    ]);
    assert!(out.status.success());
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(manifest["config"]["n_traj"], 2);
    assert_eq!(manifest["config"]["levels"], serde_json::json!([4, 8]));
}

#[test]
fn trajectory_dump_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SPATIAL);
    let out_dir = dir.path().join("traj");
    let out = fracspde(&[
        "trajectory",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "trajectory=2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bytes = fs::read(out_dir.join("trajectory.bin")).unwrap();
    let t = Trajectory::read_from(bytes.as_slice()).unwrap();
    assert_eq!(t.disc.n_modes(), 64);
    assert_eq!(t.disc.n_steps(), 16);
    assert_eq!(t.states.len(), 17);
    assert_eq!(t.noise.map(|n| (n.master_seed, n.traj)), Some((11, 2)));
    assert!(t.final_state().l2_norm() > 0.0);
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn errors_exit_nonzero_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracspde(&["study", "--config", "/no/such/file.cfg"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("/no/such/file.cfg"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);

    let cfg = write_config(dir.path(), SPATIAL);
    for (set, key) in [
        ("hurst=0", "hurst"),
        ("hurts=0.5", "hurts"),
        ("levels=8,12", "levels"),
    ] {
        let out = fracspde(&["study", "--config", &cfg, "--set", set]);
        assert!(!out.status.success());
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(&format!("`{key}`")), "{err}");
    }

    let out = fracspde(&["frobnicate"]);
    assert!(!out.status.success());
}
