//! The `asda` binary end to end: exit codes, error locations and the
//! generate / stats / optimize round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn asda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asda")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn generate(script: &Path, out: &Path, extra: &[&str]) -> Output {
    let scenes = fixtures().join("scenes");
    let mut args = vec!["generate", "--script", script.to_str().unwrap(), "--scenes", scenes.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    asda(&args)
}

#[test]
fn small_run_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let script = fixtures().join("scripts/weather_by_city.asda");
    let run = generate(&script, &out, &["--max-variations", "2", "--width", "48", "--height", "32", "--seed", "3"]);
    assert_eq!(run.status.code(), Some(0), "{}", text(&run.stderr));
    // WINDFARM matches no prompt filter: it yields a variation with no anchors, not a failure.
    assert!(text(&run.stdout).contains("variations:         3 (0 failed)"), "{}", text(&run.stdout));

    let stats = asda(&["stats", "--dataset", out.to_str().unwrap()]);
    assert_eq!(stats.status.code(), Some(0), "{}", text(&stats.stderr));
    let report = text(&stats.stdout);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let records = manifest["records"].as_array().unwrap().len();
    assert!(records > 0);
    assert!(report.lines().any(|l| l.starts_with("records:") && l.ends_with(&format!(" {records}"))), "{report}");
    // Each city has its own weather prompt; WINDFARM is filtered out of both.
    assert!(report.contains("randomize_global                  2/6"), "{report}");
    assert!(report.contains("manifest warnings:    1"), "{report}");
}

#[test]
fn syntax_error_names_file_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.asda");
    std::fs::write(&script, "collect_data()\npre_processing_pipeline.random_weather (1, scene=\"SEA\" x)\n").unwrap();
    let run = generate(&script, &dir.path().join("out"), &[]);
    assert_eq!(run.status.code(), Some(1));
    let err = text(&run.stderr);
    assert!(err.contains(&format!("{}:2:", script.display())), "{err}");

    std::fs::write(&script, "pre_processing_pipeline.random_weather (1, scene=\"SEA\" x)\n").unwrap();
    let err = text(&generate(&script, &dir.path().join("out"), &[]).stderr);
    assert!(err.contains(&format!("{}:1:56:", script.display())), "{err}");
    assert!(!dir.path().join("out").exists(), "nothing is written on a parse error");
}

#[test]
fn failed_variation_is_partial() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("partial.asda");
    // WINDFARM has no buildings, so its variation fails; the cities succeed.
    std::fs::write(
        &script,
        "pre_processing_pipeline.generate_rand_variation (1, asset=\"obstacle_drone\", nvariations=1)\n\
         pre_processing_pipeline.distribute_asset (1, asset=\"obstacle_drone\", container_class=\"building\", regions=2)\n\
         collect_data(variations=1, width=32, height=32)\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = generate(&script, &out, &[]);
    assert_eq!(run.status.code(), Some(2), "{}", text(&run.stderr));
    assert!(text(&run.stderr).contains("WINDFARM"));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("WINDFARM#0"), "failure is recorded in the manifest");
}

#[test]
fn unwritable_output_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let run = generate(&fixtures().join("scripts/weather_by_city.asda"), &blocker.join("ds"), &["--max-variations", "1"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(text(&run.stderr).starts_with("error:"));
}

#[test]
fn zero_workers_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = generate(&fixtures().join("scripts/weather_by_city.asda"), dir.path(), &["--workers", "0"]);
    assert_ne!(run.status.code(), Some(0));
}

#[test]
fn stats_without_dataset_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let run = asda(&["stats", "--dataset", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(text(&run.stderr).contains("manifest.json"));
}

fn optimizer_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("optimizer_synthetic.json")).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("optimizer.json");
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn optimize_reaches_target_and_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = optimizer_config(dir.path(), |_| {});
    let run = asda(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", text(&run.stderr));
    let table = text(&run.stdout);
    assert!(table.contains("decision"), "{table}");
    let history = std::fs::read_to_string(dir.path().join("loc_history.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = history.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!rows.is_empty() && rows.len() <= 8);
    let last = rows.last().unwrap()["score"].as_f64().unwrap();
    assert!(last >= 0.9, "final score {last}");
    let sizes: Vec<u64> = rows.iter().map(|r| r["size"].as_u64().unwrap()).collect();
    assert!(sizes.windows(2).all(|w| w[0] < w[1]), "{sizes:?}");
}

#[test]
fn optimize_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = optimizer_config(dir.path(), |v| v["v_star"] = 1.01.into());
    let run = asda(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(text(&run.stderr).contains("v_star"), "{}", text(&run.stderr));

    let cfg = optimizer_config(dir.path(), |v| {
        v["v_star"] = 0.99.into();
        v["max_iterations"] = 1.into();
    });
    let history = dir.path().join("elsewhere.jsonl");
    let run = asda(&["optimize", "--config", cfg.to_str().unwrap(), "--history", history.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3), "{}", text(&run.stderr));
    assert_eq!(std::fs::read_to_string(&history).unwrap().lines().count(), 1);
}
