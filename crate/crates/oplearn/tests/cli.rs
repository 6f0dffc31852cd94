mod common;

use std::process::Command;

use common::{small_config, write_config};

fn oplearn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_oplearn")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("out"));
    let path = write_config(dir.path(), &cfg);
    let p = path.to_str().unwrap();

    let out = oplearn(&["oracle", "--config", p, "--case", "zero-c", "--x", "0", "--paths", "4000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));

    let out = oplearn(&["oracle", "--config", p, "--case", "custom", "--kappa", "1000", "--x", "0"]);
    assert_eq!(out.status.code(), Some(2));

    // training before generation is an I/O failure
    let out = oplearn(&["train", "--config", p, "--model", "deeponet"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = oplearn(&["evaluate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, cfg.to_toml().replace("n_steps = 20", "n_steps = 0")).unwrap();
    let out = oplearn(&["gen-data", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line ") && err.contains("n_steps"), "{err}");

    let out = oplearn(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = oplearn(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn basis_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("out"));
    let path = write_config(dir.path(), &cfg);
    let out = oplearn(&[
        "basis", "--config", path.to_str().unwrap(), "--dump-grid", "-3", "3", "13", "--samples", "2", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/report/basis/basis.csv")).unwrap();
    assert_eq!(csv.lines().count(), 14);
    assert!(dir.path().join("out/report/basis/samples.csv").exists());
}
