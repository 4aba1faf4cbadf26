use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use transit_deia::pipeline::{self, INCOMPLETE_MARKER};
use transit_deia::report::REPORT_SCHEMA;
use transit_deia::synth;

const BIN: &str = env!("CARGO_BIN_EXE_transit-deia");

fn bundle() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    synth::write_fixture_bundle(dir.path()).unwrap();
    dir
}

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn version_reports_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["--version"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("(schema 1)"));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = bundle();
    let o = cli(dir.path(), &["ingest", "--config", "pipeline.conf", "--set", "topics.kk=3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("topics.kk"));
}

#[test]
fn missing_seed_is_config_error() {
    let dir = bundle();
    let o = cli(dir.path(), &["ingest", "--set", "input.posts=posts.ndjson"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn missing_lexicon_names_sentiment_stage() {
    let dir = bundle();
    let o = cli(dir.path(), &["run", "--config", "pipeline.conf", "--set", "input.lexicon=no_such_lexicon.txt"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("sentiment"), "{err}");
    assert!(err.contains("no_such_lexicon.txt"), "{err}");
    // Inputs are checked before any stage writes output.
    assert!(!dir.path().join("out").join(pipeline::CLEAN).exists());
}

#[test]
fn stale_schema_version_is_rejected() {
    let dir = bundle();
    assert!(cli(dir.path(), &["ingest", "--config", "pipeline.conf"]).status.success());
    let clean = dir.path().join("out").join(pipeline::CLEAN);
    let text = fs::read_to_string(&clean).unwrap();
    fs::write(&clean, text.replace("\"schema_version\":1", "\"schema_version\":99")).unwrap();
    let o = cli(dir.path(), &["filter", "--config", "pipeline.conf"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("filter") && err.contains("schema_version"), "{err}");
}

#[test]
fn single_topic_segment() {
    let dir = bundle();
    for stage in ["ingest", "filter", "sentiment"] {
        let o = cli(dir.path(), &[stage, "--config", "pipeline.conf"]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let o = cli(dir.path(), &["topics", "--config", "pipeline.conf", "--segment", "negative", "--k", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(out.join("topics_negative.json").is_file());
    assert!(!out.join("topics_neutral.json").exists());
    assert!(!out.join("topics_positive.json").exists());
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("topics_negative.json")).unwrap()).unwrap();
    assert_eq!(v["segment"], "negative");
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn bad_segment_name_is_usage_error() {
    let dir = bundle();
    let o = cli(dir.path(), &["topics", "--config", "pipeline.conf", "--segment", "angry"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_run_leaves_incomplete_marker() {
    let dir = bundle();
    fs::write(dir.path().join("tracts.geojson"), "{\"type\": \"FeatureCollection\"").unwrap();
    let o = cli(dir.path(), &["run", "--config", "pipeline.conf"]);
    assert_eq!(o.status.code(), Some(1));
    let marker = fs::read_to_string(dir.path().join("out").join(INCOMPLETE_MARKER)).unwrap();
    assert!(marker.contains("geotag"), "{marker}");
}

#[test]
fn successful_run_clears_marker_and_matches_schema() {
    let dir = bundle();
    let o = cli(dir.path(), &["run", "--config", "pipeline.conf"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(!out.join(INCOMPLETE_MARKER).exists());

    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");

    // The schema is strict enough to catch a stray field.
    let mut tampered = report.clone();
    tampered["filter_chain"]["extra"] = Value::from(1);
    assert!(!validator.is_valid(&tampered));
}

#[test]
fn convert_coords_flattens_points() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("nested.ndjson");
    fs::write(
        &input,
        concat!(
            r#"{"id":"1","text":"bus","coordinates":[-73.98,40.75]}"#,
            "\n",
            r#"{"id":"2","text":"train","coordinates":{"type":"Point","coordinates":[-73.9,40.7]}}"#,
            "\n",
            r#"{"id":"3","text":"no coords"}"#,
            "\n",
            "not json\n",
        ),
    )
    .unwrap();
    let o = cli(dir.path(), &["convert-coords", "--input", "nested.ndjson", "--output", "flat.ndjson"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("converted=2 skipped=2"));
    let rows: Vec<Value> = fs::read_to_string(dir.path().join("flat.ndjson"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["lon"], -73.98);
    assert_eq!(rows[0]["lat"], 40.75);
    assert!(rows[0].get("coordinates").is_none());
    assert_eq!(rows[1]["lon"], -73.9);
}

#[test]
fn synth_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["synth", "--out", "b"]);
    assert!(o.status.success());
    for f in synth::FIXTURE_FILES {
        assert!(dir.path().join("b").join(f).is_file(), "{f}");
    }
}
