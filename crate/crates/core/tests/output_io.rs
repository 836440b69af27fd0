use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use aco_core::geometry::AggregatedMap;
use aco_core::output::{run, EmitFlags, OutputError, RunManifest};
use aco_core::sim::ActionRecord;

fn entries(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

fn manifest(root: &Path, out: &str, rounds: u64) -> RunManifest {
    let scenario = root.join("scenario.toml");
    fs::write(&scenario, "").unwrap();
    RunManifest::new(scenario, root.join(out), rounds)
}

fn reprints_exactly(field: &str) -> bool {
    field.parse::<f64>().is_ok_and(|v| v.to_string() == field)
}

#[test]
fn default_run_writes_baseline_plus_rounds() {
    let tmp = tempfile::tempdir().unwrap();
    let m = manifest(tmp.path(), "out", 2);
    let summary = run(&m).unwrap();
    let names = entries(&m.out_dir);
    let kpis: Vec<_> = names.iter().filter(|n| n.starts_with("kpi_round_")).collect();
    assert_eq!(kpis, ["kpi_round_0.csv", "kpi_round_1.csv", "kpi_round_2.csv"]);
    assert!(names.contains("actions.jsonl"));
    assert!(names.contains("scenario_resolved.toml"));
    assert!(!names.iter().any(|n| n.starts_with(".aco-staging")));
    assert_eq!(summary.files.len(), names.len());
    assert_eq!(summary.rows.len(), 3);
}

#[test]
fn summary_matches_kpi_files() {
    let tmp = tempfile::tempdir().unwrap();
    let m = manifest(tmp.path(), "out", 1);
    let summary = run(&m).unwrap();
    for row in &summary.rows {
        let path = m.out_dir.join(format!("kpi_round_{}.csv", row.round));
        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(reader.headers().unwrap(), vec!["metric", "value"]);
        let mut seen = 0;
        for rec in reader.records() {
            let rec = rec.unwrap();
            match &rec[0] {
                "coverage_ge_-85dbm" => assert_eq!(&rec[1], row.coverage_85),
                "coverage_ge_-80dbm" => assert_eq!(&rec[1], row.coverage_80),
                _ => continue,
            }
            seen += 1;
        }
        assert_eq!(seen, 2);
        assert!(summary.table().contains(&row.coverage_85));
    }
}

#[test]
fn artifacts_parse_back_losslessly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = manifest(tmp.path(), "out", 1);
    m.emit = EmitFlags {
        heatmaps: true,
        spectra: true,
        maps: true,
        action_log: true,
    };
    run(&m).unwrap();
    let mut kinds = BTreeSet::<String>::new();
    for name in entries(&m.out_dir) {
        let path = m.out_dir.join(&name);
        let bytes = fs::read(&path).unwrap();
        if name.starts_with("map_cell_") {
            let snaps = AggregatedMap::read_csv(bytes.as_slice()).unwrap();
            let again = AggregatedMap {
                cell_id: snaps[0].cell_id,
                window: None,
                sub_areas: snaps,
            };
            let mut buf = Vec::new();
            again.write_csv(&mut buf).unwrap();
            assert_eq!(buf, bytes, "{name}");
            kinds.insert("map".to_string());
        } else if name.ends_with(".csv") {
            let mut reader = csv::Reader::from_reader(bytes.as_slice());
            let width = reader.headers().unwrap().len();
            for rec in reader.records() {
                let rec = rec.unwrap();
                assert_eq!(rec.len(), width);
                for field in rec.iter().skip(usize::from(name.starts_with("kpi_"))) {
                    assert!(field.is_empty() || reprints_exactly(field), "{name}: {field}");
                }
            }
            kinds.insert(name.split('_').next().unwrap().to_string());
        } else if name == "actions.jsonl" {
            let text = String::from_utf8(bytes).unwrap();
            for line in text.lines() {
                let rec: ActionRecord = serde_json::from_str(line).unwrap();
                assert_eq!(serde_json::to_string(&rec).unwrap(), line);
            }
            kinds.insert("actions".to_string());
        }
    }
    assert_eq!(
        kinds,
        ["actions", "heatmap", "kpi", "map", "spectrum"].map(String::from).into()
    );
}

#[test]
fn action_records_carry_the_documented_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let m = manifest(tmp.path(), "out", 1);
    run(&m).unwrap();
    let text = fs::read_to_string(m.out_dir.join("actions.jsonl")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 21);
    for (cell, line) in lines.iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in [
            "round",
            "cell_id",
            "gate_result",
            "classification",
            "proposed_action",
            "applied_action",
            "tilt_deg",
            "p_rs_dbm",
            "rotation_deg",
            "clamped",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["round"], 1);
        assert_eq!(v["cell_id"], cell);
    }
}

#[test]
fn unwritable_output_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), "not a directory").unwrap();
    let m = manifest(tmp.path(), "blocker/out", 1);
    assert!(matches!(run(&m), Err(OutputError::Io { .. })));
    assert_eq!(entries(tmp.path()), BTreeSet::from(["blocker".into(), "scenario.toml".into()]));
}

#[test]
fn failed_commit_leaves_no_partial_files() {
    let tmp = tempfile::tempdir().unwrap();
    let m = manifest(tmp.path(), "out", 1);
    // A non-empty directory in place of the action log blocks its rename
    // after the KPI files were already moved.
    let blocker = m.out_dir.join("actions.jsonl");
    fs::create_dir_all(&blocker).unwrap();
    fs::write(blocker.join("keep"), "").unwrap();
    assert!(matches!(run(&m), Err(OutputError::Io { .. })));
    assert_eq!(entries(&m.out_dir), BTreeSet::from(["actions.jsonl".to_string()]));
}

#[test]
fn zero_rounds_rejected_before_any_write() {
    let tmp = tempfile::tempdir().unwrap();
    let m = manifest(tmp.path(), "out", 0);
    assert!(matches!(run(&m), Err(OutputError::Manifest(_))));
    assert!(!m.out_dir.exists());
}
