use std::path::Path;
use std::process::{Command, Output};

use idla_cli::output::{read_manifest, verify_manifest, MANIFEST_FILE, RESOLVED_CONFIG_FILE};

fn lab(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_idla-lab"));
    cmd.args(args);
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().expect("binary runs")
}

#[test]
fn demo_idla_writes_a_verified_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = lab(&["idla", "-n", "200"], Some(&dir));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
    let manifest = read_manifest(&dir).unwrap();
    assert_eq!(manifest.experiment, "idla");
    assert!(manifest.pass);
    assert!(verify_manifest(&dir, &manifest).is_empty());
    let names: Vec<&str> = manifest.outputs.iter().map(|f| f.path.as_str()).collect();
    for f in [
        RESOLVED_CONFIG_FILE,
        "aggregate.txt",
        "aggregate.svg",
        "idla.ndjson",
    ] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    let resolved = std::fs::read_to_string(dir.join(RESOLVED_CONFIG_FILE)).unwrap();
    assert!(resolved.contains("p = 0.7"));
    assert!(resolved.contains("particles = 200"));
}

#[test]
fn missing_p_is_rejected_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[graph]\nsource = \"percolation\"\nd = 2\n[experiment]\nkind = \"idla\"\n",
    )
    .unwrap();
    let dir = tmp.path().join("run");
    let out = lab(&["run", cfg.to_str().unwrap()], Some(&dir));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("graph.p"));
    assert!(!dir.exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[experiment]\nkind = \"idla\"\nspeed = 3\n").unwrap();
    let out = lab(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn four_dimensional_render_is_invalid_input() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = lab(&["idla", "--d", "4", "--p", "0.9", "-n", "20"], Some(&dir));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join(MANIFEST_FILE).exists());
    let out = lab(
        &["render", dir.join("aggregate.txt").to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_idla-lab"))
        .args(["percolate", "--half-width", "10"])
        .env("IDLA_LAB_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let entries: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(entries.len(), 1);
    assert!(entries[0].starts_with("percolate-"), "{entries:?}");
}
