use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"
n_range = [1, 2]
d_anc = [1]
methods = ["exact", "seesaw", "qfi_bound", "unitary_bound"]

[channels]
kind = "phase"
model = { family = "perp_dephasing_signal_first", p = 0.9 }
delta_theta = [0.3]

[seesaw]
restarts = 2
"#;

fn discriminate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_discriminate")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn builtin_scenarios_validate() {
    let out = discriminate(&["list"]);
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    for name in ["unitary", "perp-signal-first", "perp-noise-first", "parallel-dephasing", "fig5"] {
        assert!(listing.contains(name), "{name} missing from list");
        let out = discriminate(&["validate", name]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn runs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = discriminate(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "5"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("tiny.csv")).unwrap());
        assert!(out_dir.join("plot").join("tiny_seesaw_dt0.3_dA1.dat").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.swap_remove(0)).unwrap();
    // Header plus two rows for each of the four methods.
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().filter(|l| l.starts_with("tiny,seesaw,")).all(|l| l.contains(",5,")));
}

#[test]
fn json_output_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY);
    let out_dir = dir.path().join("out");
    let out = discriminate(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--format", "json", "--jobs", "2", "--no-plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("tiny.json")).unwrap();
    assert!(text.trim_start().starts_with('['));
    assert!(!out_dir.join("plot").exists());
}

#[test]
fn empty_range_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.toml", &TINY.replace("n_range = [1, 2]", "n_range = [2, 1]"));
    let out_dir = dir.path().join("out");
    let out = discriminate(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(out_dir.join("tiny.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("scenario,method,"));
}

#[test]
fn bound_prints_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY);
    let out = discriminate(&["bound", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("generator outside the Kraus span: yes"));
    assert!(text.contains("qfi_bound"));
}

#[test]
fn bad_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &TINY.replace("name = \"tiny\"", "name = \"tiny\"\ncolour = \"red\""));
    let out = discriminate(&["validate", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert!(!discriminate(&["run", "no-such-scenario"]).status.success());
}
