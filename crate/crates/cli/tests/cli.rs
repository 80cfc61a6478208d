//! End-to-end runs of the `biphoton` binary: exit codes, seeding, and
//! degenerate sweeps.

use std::path::Path;
use std::process::{Command, Output};

const SMALL_GRID: &str = "[grid]\nn_plus = 128\nn_minus = 256\n\n[sweep]\nsteps = 41\n";

fn biphoton(args: &[&str], config: &Path, out: &Path, envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_biphoton"));
    cmd.args(args).arg("--config").arg(config).arg("--out").arg(out);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn successful_run_prints_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_GRID);
    let out = biphoton(&["timing"], &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.trim_end().ends_with("  timing.json"), "{stdout}");
    assert!(dir.path().join("o/manifest.json").exists());
}

#[test]
fn configuration_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.toml", "[pump]\nwavelenght = 266.0\n", "wavelenght"),
        ("negative.toml", "[crystal]\nlength = -1.0\n", "crystal length"),
        ("range.toml", "[precompensator]\ntp = 400.0\n", "precompensator.tp"),
    ];
    for (name, text, key) in cases {
        let cfg = write_config(dir.path(), name, text);
        let out = biphoton(&["timing"], &cfg, &dir.path().join("o"), &[]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(key), "{name}: {stderr}");
    }
    let out = biphoton(&["timing"], &dir.path().join("missing.toml"), &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_worker_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_GRID);
    for bad in ["0", "many"] {
        let out = biphoton(&["timing"], &cfg, &dir.path().join("o"), &[("BIPHOTON_WORKERS", bad)]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("BIPHOTON_WORKERS"));
    }
}

#[test]
fn strict_mode_turns_resolution_warnings_into_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = "[grid]\nn_plus = 128\nn_minus = 256\nspan_plus = 0.05\n\n[sweep]\nsteps = 5\n";
    let cfg = write_config(dir.path(), "c.toml", coarse);
    let lenient = biphoton(&["spectrum"], &cfg, &dir.path().join("a"), &[]);
    assert_eq!(lenient.status.code(), Some(0), "{}", String::from_utf8_lossy(&lenient.stderr));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("warning"));
    let strict = biphoton(&["spectrum", "--strict"], &cfg, &dir.path().join("b"), &[]);
    assert_eq!(strict.status.code(), Some(3), "{}", String::from_utf8_lossy(&strict.stderr));
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_GRID);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = biphoton(&["timing"], &cfg, &blocker, &[]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_flag_controls_noisy_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_GRID}\n[pattern]\nv = 0.9\npoisson = true\n");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("pattern.csv")).unwrap();
    for (sub, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let out = biphoton(&["pattern", "--seed", seed], &cfg, &dir.path().join(sub), &[]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn zero_width_sweep_emits_one_point_and_no_fit() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[grid]\nn_plus = 128\nn_minus = 256\n\n[sweep]\nt_min = 0.0\nt_max = 0.0\nsteps = 1\n";
    let cfg = write_config(dir.path(), "c.toml", text);
    let out = biphoton(&["vcurve"], &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/vcurve.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0,1,") || rows[1].starts_with("0,0.99999"), "{}", rows[1]);
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/vcurve_fit.json")).unwrap()).unwrap();
    assert!(fit["curves"][0]["fit"].is_null());
}

#[test]
fn counts_file_round_trip_through_tomo() {
    let dir = tempfile::tempdir().unwrap();
    let first = write_config(dir.path(), "a.toml", "[tomography]\nv = 0.8\nseed = 3\n");
    let out = biphoton(&["tomo"], &first, &dir.path().join("a"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let counts = dir.path().join("a/counts.json");
    let second = write_config(
        dir.path(),
        "b.toml",
        &format!("[tomography]\nv = 0.8\ncounts_file = {:?}\n", counts.to_str().unwrap()),
    );
    let out = biphoton(&["tomo"], &second, &dir.path().join("b"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rho = |sub: &str| std::fs::read(dir.path().join(sub).join("rho.json")).unwrap();
    assert_eq!(rho("a"), rho("b"));
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            biphoton_cli::config::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}
