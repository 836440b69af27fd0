use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aco"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn defaults_output_is_a_valid_scenario() {
    let out = aco(&["defaults"]);
    assert!(out.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "defaults.toml", &stdout(&out));
    let check = aco(&["validate", "--scenario", &path]);
    assert!(check.status.success(), "{}", stderr(&check));
    assert!(stdout(&check).ends_with(": ok (21 cells, 0 faults)\n"));
}

#[test]
fn validate_reports_syntax_errors_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "bad.toml", "[network]\nisd_m = 500.0\ncells = = 3\n");
    let out = aco(&["validate", "--scenario", &path]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn validate_names_violated_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "bad.toml", "[thresholds]\npartial_d = 0.3\n");
    let out = aco(&["validate", "--scenario", &path]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("∂ must exceed 1"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_fail_unless_lenient() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "typo.toml", "[network]\nisd_mm = 500.0\n");
    let strict = aco(&["validate", "--scenario", &path]);
    assert!(!strict.status.success());
    assert!(stderr(&strict).contains("network.isd_mm"), "{}", stderr(&strict));
    let lenient = aco(&["validate", "--scenario", &path, "--lenient"]);
    assert!(lenient.status.success(), "{}", stderr(&lenient));
    assert!(stderr(&lenient).contains("warning"));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "s.toml", "[network]\ncells = 3\n");
    let mut sets = Vec::new();
    for out in ["a", "b"] {
        let dir = tmp.path().join(out);
        let o = aco(&[
            "run",
            "--scenario",
            &scenario,
            "--rounds",
            "1",
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
            "--emit-heatmaps",
            "--emit-maps",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("round"));
        sets.push(snapshot(&dir));
    }
    assert_eq!(sets[0], sets[1]);
    assert!(sets[0].contains_key("map_cell_0_round_1.csv"));
    assert!(sets[0].contains_key("heatmap_round_1.pgm"));
}

#[test]
fn unwritable_output_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "s.toml", "[network]\ncells = 3\n");
    write(tmp.path(), "file", "");
    let target = tmp.path().join("file").join("out");
    let o = aco(&["run", "--scenario", &scenario, "--rounds", "1", "--out", target.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn zero_rounds_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "s.toml", "");
    let out = tmp.path().join("out");
    let o = aco(&["run", "--scenario", &scenario, "--rounds", "0", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
}
