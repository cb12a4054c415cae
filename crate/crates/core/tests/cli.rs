use std::path::Path;
use std::process::Command;

use magdecay::cli::{RunManifest, EXIT_CONFIG, EXIT_OK, EXIT_VERDICT};

fn run(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_magdecay"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn unknown_key_is_a_config_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[grid]\nn = 8\nl = 4.0\nspacing = 1.0\n",
    );
    let out = dir.path().join("out");
    assert_eq!(
        run(&["spectral-check", "--config", &cfg], &out),
        EXIT_CONFIG
    );
    assert!(!out.join("spectral.json").exists());
}

#[test]
fn zero_potential_spectral_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", "[grid]\nn = 12\nl = 6.0\n");
    let out = dir.path().join("out");
    assert_eq!(run(&["spectral-check", "--config", &cfg], &out), EXIT_OK);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("spectral.json")).unwrap()).unwrap();
    assert_eq!(summary["condition"]["sigma_min"].as_f64(), Some(1.0));
    assert_eq!(summary["spectral_data"]["n_discrete"].as_u64(), Some(0));
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "decay.toml",
        "[grid]\nn = 24\nl = 16.0\n[initial]\nwidth = 1.5\n[decay]\nt_min = 2.0\nt_max = 20.0\nt_count = 10\nroute = \"free_open\"\n",
    );
    let out = dir.path().join("out");
    let code = run(&["decay-report", "--config", &cfg], &out);
    assert!(code == EXIT_OK || code == EXIT_VERDICT, "exit {code}");
    let manifest = out.join("manifest.json").to_string_lossy().into_owned();
    let record: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert!(record.files.iter().any(|f| f.path == "decay.csv"));
    assert_eq!(run(&["replay", &manifest], &out), EXIT_OK);

    let csv = out.join("decay.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    std::fs::write(&csv, text.replacen(",", ",9", 2)).unwrap();
    assert_eq!(run(&["replay", &manifest], &out), EXIT_VERDICT);
}
