//! End-to-end checks of the installed binary: subcommands, exit codes, and
//! the generate → stats → run → report flow.

use std::path::Path;
use std::process::Command;

fn slcolm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slcolm"))
}

fn write_config(path: &Path, fixture: &Path, out: &Path) {
    let config = serde_json::json!({
        "corpus_dir": fixture.join("corpus"),
        "predictions_dir": fixture.join("predictions"),
        "schema_path": fixture.join("schema.json"),
        "output_dir": out,
        "merge": {"modes": [1, 3], "worst_k": 4},
        "backend": {
            "kind": "mock",
            "correct_relations": ["Fearfulness", "Motherhood", "Time of Death", "Death Location"]
        }
    });
    std::fs::write(path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
}

#[test]
fn generate_stats_run_report_flow() {
    let dir = tempfile::TempDir::new().unwrap();
    let fixture = dir.path().join("fixture");
    let out = dir.path().join("out");
    let config_path = dir.path().join("config.json");

    let spec = serde_json::json!({
        "relations": {
            "Kill": 30, "Attack": 30, "Marriage": 30, "Father": 30,
            "Fearfulness": 6, "Motherhood": 6, "Time of Death": 6, "Death Location": 6
        },
        "slm": {
            "default_recall": 0.9,
            "recall": {"Fearfulness": 0.0, "Motherhood": 0.0, "Time of Death": 0.0, "Death Location": 0.0}
        },
        "tail_types": {"Time of Death": "Time", "Death Location": "Location"}
    });
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();

    let status = slcolm()
        .args(["generate-fixture", "--out"])
        .arg(&fixture)
        .args(["--seed", "5", "--spec"])
        .arg(&spec_path)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(fixture.join("corpus/train.jsonl").exists());

    write_config(&config_path, &fixture, &out);

    let stats_out = slcolm()
        .args(["stats", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(stats_out.status.success());
    let text = String::from_utf8_lossy(&stats_out.stdout);
    assert!(text.contains("coverage trigger"), "stats output: {text}");

    let run_out = slcolm()
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(run_out.status.success());
    let text = String::from_utf8_lossy(&run_out.stdout);
    assert!(text.contains("merge mode 3"), "run output: {text}");
    assert!(out.join("manifest.json").exists());
    assert!(out.join("reports/eval_mode3.json").exists());

    // reports can be rebuilt from stored responses alone
    std::fs::remove_dir_all(out.join("merged")).unwrap();
    let report_out = slcolm()
        .args(["report", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(report_out.status.success());
    assert!(out.join("merged/mode3").exists());
    let text = String::from_utf8_lossy(&report_out.stdout);
    assert!(text.contains("llm calls: 0"), "report output: {text}");
}

#[test]
fn merge_sweep_covers_all_modes() {
    let dir = tempfile::TempDir::new().unwrap();
    let fixture = dir.path().join("fixture");
    let out = dir.path().join("out");
    let config_path = dir.path().join("config.json");

    let spec = serde_json::json!({
        "relations": {"Kill": 12, "Marriage": 12},
        "slm": {"default_recall": 0.8}
    });
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();

    assert!(slcolm()
        .args(["generate-fixture", "--out"])
        .arg(&fixture)
        .args(["--seed", "9", "--spec"])
        .arg(&spec_path)
        .status()
        .unwrap()
        .success());
    write_config(&config_path, &fixture, &out);

    let output = slcolm()
        .args(["merge-sweep", "--config"])
        .arg(&config_path)
        .args(["--merge-modes", "0,1,2,3,4"])
        .output()
        .unwrap();
    assert!(output.status.success());
    for mode in 0..5 {
        assert!(out.join(format!("reports/eval_mode{mode}.json")).exists());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["merge_modes"].as_array().unwrap().len(), 5);
}

#[test]
fn config_errors_exit_with_code_one() {
    let dir = tempfile::TempDir::new().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, "{ not json").unwrap();
    let status = slcolm()
        .args(["run", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    let missing = slcolm()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.json"))
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(1));
}

#[test]
fn backend_failures_exit_with_code_two() {
    let dir = tempfile::TempDir::new().unwrap();
    let fixture = dir.path().join("fixture");
    let out = dir.path().join("out");

    let spec = serde_json::json!({"relations": {"Kill": 6, "Marriage": 6}});
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();
    assert!(slcolm()
        .args(["generate-fixture", "--out"])
        .arg(&fixture)
        .args(["--seed", "3", "--spec"])
        .arg(&spec_path)
        .status()
        .unwrap()
        .success());

    // unreachable endpoint, no retries
    let config = serde_json::json!({
        "corpus_dir": fixture.join("corpus"),
        "predictions_dir": fixture.join("predictions"),
        "schema_path": fixture.join("schema.json"),
        "output_dir": out,
        "backend": {
            "kind": "http",
            "endpoint": "http://127.0.0.1:9/v1/chat/completions",
            "model": "m",
            "max_retries": 0,
            "retry_base_ms": 1
        }
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, config.to_string()).unwrap();

    let status = slcolm()
        .args(["run", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
