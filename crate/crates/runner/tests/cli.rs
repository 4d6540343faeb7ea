use std::path::Path;
use std::process::Command;

use ealab_runner::{run, ExperimentConfig, Kind, Overrides, RunManifest};
use serde_json::Value;

fn ealab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ealab")).args(args).output().unwrap()
}

fn config(kind: Kind, text: &str, out: &Path) -> ExperimentConfig {
    let o = Overrides { out: Some(out.to_path_buf()), ..Default::default() };
    ExperimentConfig::parse(text, kind, &o).unwrap()
}

fn data(dir: &Path, name: &str) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    v["data"].clone()
}

#[test]
fn selftest_exits_zero_and_lists_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[selftest]\nsamples = 2000\ninstances = 5\ntriples = 200\n").unwrap();
    let o = ealab(&["selftest", "--config", cfg.to_str().unwrap(), "--out", out, "--L", "3,4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::read(dir.path()).unwrap();
    assert!(m.passed());
    assert_eq!(m.kind, "selftest");
    for f in &m.outputs {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "sizes = [4]\n").unwrap();
    let o = ealab(&["gs", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sizes"));
}

#[test]
fn result_files_carry_seed_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(Kind::Stiffness, "seed = 17\nL = [3, 4, 5]\nn_real = 20\n", dir.path());
    let m = run(&c).unwrap();
    assert_eq!(m.config_hash, c.hash());
    let head = std::fs::read_to_string(dir.path().join("stiffness.csv")).unwrap();
    let first = head.lines().next().unwrap();
    assert!(first.starts_with("# schema="), "{first}");
    assert!(first.contains("seed=17") && first.contains(&c.hash()), "{first}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("stiffness.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 17);
    assert_eq!(v["config_hash"], c.hash());
}

#[test]
fn rerunning_the_resolved_config_reproduces_the_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let m = run(&config(Kind::Droplet, "L = [3, 4, 5]\nn_real = 8\n", &first)).unwrap();
    let resolved = std::fs::read_to_string(first.join("config.toml")).unwrap();
    let again = run(&config(Kind::Droplet, &resolved, &second)).unwrap();
    assert_eq!(m.config_hash, again.config_hash);
    for f in &m.outputs {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn chain_chaos_run_reports_zero_droplet_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config(Kind::Chaos, "d = 1\nL = [8, 16, 32]\nn_real = 20\n", dir.path())).unwrap();
    assert!(m.passed(), "{:?}", m.violations);
    let d = data(dir.path(), "chaos.json");
    assert_eq!(d["droplets"]["gamma"]["estimate"].as_f64(), Some(0.0));
}

#[test]
fn saved_couplings_reload_to_the_same_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run(&config(Kind::Gs, "L = [4]\nn_real = 3\n[gs]\nsave_couplings = true\n", &first)).unwrap();
    let saved = data(&first, "groundstates.json");
    let file = first.join("couplings_L4_r2.bin");
    let second = dir.path().join("second");
    let text = format!("[gs]\ncouplings = {:?}\n", file.to_str().unwrap());
    run(&config(Kind::Gs, &text, &second)).unwrap();
    let reloaded = data(&second, "groundstates.json");
    let energy = |v: &Value, k: usize| v[k]["record"]["energy"].as_f64().unwrap();
    assert_eq!(energy(&saved, 2), energy(&reloaded, 0));
}

#[test]
fn plot_without_curves_names_the_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(Kind::Gs, "L = [3]\nn_real = 2\n", dir.path())).unwrap();
    let o = ealab(&["plot", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("chaos_curve.csv"), "{err}");
}

#[test]
fn plot_without_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = ealab(&["plot", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plots_regenerate_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ealab(&["chaos", "--out", out, "--L", "3,4,5", "--n-real", "15", "--plot"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names = ["q_vs_t.svg", "collapse.svg", "droplet_hist.svg"];
    let before: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(dir.path().join(n)).unwrap()).collect();
    let o = ealab(&["plot", "--out", out]);
    assert!(o.status.success());
    let after: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(dir.path().join(n)).unwrap()).collect();
    assert_eq!(before, after);
    assert!(std::str::from_utf8(&before[0]).unwrap().starts_with("<svg") || before[0].starts_with(b"<?xml"));
}
