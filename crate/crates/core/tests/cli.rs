mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn panelrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panelrisk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

const WORKED_EXAMPLE_SCHEMA: &str = r#"{
    "variables": [
      { "name": "Age", "kind": "integer", "missing_tokens": ["", "."] },
      { "name": "Gender", "kind": "categorical", "missing_tokens": ["", "."] }
    ]
  }"#;

fn simulation_config(dir: &Path, draws: usize) -> String {
    let text = format!(
        r#"{{
  "simulation": {{
    "population": {{
      "population_size": 4000,
      "variables": [
        {{ "name": "a", "labels": ["0","1","2","3","4","5","6","7","8","9"] }},
        {{ "name": "b", "labels": ["0","1","2","3","4","5","6","7","8","9"] }}
      ],
      "seed": 3
    }},
    "sampling_fraction": 0.1,
    "missing_rates": {{ "b": 0.05 }},
    "replicates": 3,
    "draws": {draws},
    "seed": 11
  }}
}}"#
    );
    write(dir, "sim.json", &text)
}

#[test]
fn assess_worked_example_prints_both_tables() {
    let config = fixture("worked_example.json");
    let out = panelrisk(&["assess", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Quasi-Identifier"), "{text}");
    assert!(text.contains("n_match = 1"), "{text}");
    assert!(text.contains("Age + Gender"), "{text}");
}

#[test]
fn assess_formats_are_parseable() {
    let config = fixture("worked_example.json");
    let json = panelrisk(&[
        "assess",
        "--format",
        "json",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(json.status.success());
    let value: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(value["records"].as_array().unwrap().len(), 2);
    let csv = panelrisk(&[
        "assess",
        "--format",
        "csv",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(csv.status.success());
    let mut reader = csv::Reader::from_reader(csv.stdout.as_slice());
    assert_eq!(reader.records().count(), 2);
}

#[test]
fn oracle_agrees_on_worked_example() {
    let config = fixture("worked_example.json");
    for extra in [None, Some("--require-observed-overlap")] {
        let mut args = vec!["oracle", "--config", config.to_str().unwrap()];
        args.extend(extra);
        let out = panelrisk(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("0 mismatches"), "{}", stdout(&out));
    }
}

#[test]
fn unknown_quasi_identifier_variable_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(
        fixture("worked_example.csv"),
        dir.path().join("worked_example.csv"),
    )
    .unwrap();
    let config = write(
        dir.path(),
        "config.json",
        &format!(
            r#"{{ "schema": {WORKED_EXAMPLE_SCHEMA}, "input": "worked_example.csv", "population_size": 100,
                 "quasi_identifiers": [{{ "variables": ["Age", "Shoe size"] }}] }}"#
        ),
    );
    let out = panelrisk(&["assess", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Shoe size"), "{}", stderr(&out));
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let out = panelrisk(&["assess"]);
    assert_eq!(out.status.code(), Some(2));
    let out = panelrisk(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_integer_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "worked_example.csv",
        "id,Age,Gender\n1,40,Male\n2,forty,Female\n",
    );
    let config = write(
        dir.path(),
        "config.json",
        &format!(
            r#"{{ "schema": {WORKED_EXAMPLE_SCHEMA}, "input": "worked_example.csv", "population_size": 100,
                 "quasi_identifiers": [{{ "variables": ["Age", "Gender"] }}] }}"#
        ),
    );
    let out = panelrisk(&["assess", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("forty"), "{err}");
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = simulation_config(dir.path(), 3000);
    let a = panelrisk(&["simulate", "--config", &config]);
    let b = panelrisk(&["simulate", "--config", &config]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = panelrisk(&["simulate", "--seed", "12", "--config", &config]);
    assert!(c.status.success());
    assert_ne!(a.stdout, c.stdout);
    let d = panelrisk(&[
        "simulate",
        "--seed",
        "12",
        "--threads",
        "1",
        "--config",
        &config,
    ]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn simulate_rejects_zero_draws() {
    let dir = tempfile::tempdir().unwrap();
    let config = simulation_config(dir.path(), 0);
    let out = panelrisk(&["simulate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("draws must be positive"),
        "{}",
        stderr(&out)
    );
}

const WAVE_SCHEMA: &str = r#"{
    "variables": [
      { "name": "age", "kind": "integer" },
      { "name": "gender", "kind": "categorical" }
    ]
  }"#;

fn prep_config(dir: &Path) -> String {
    write(
        dir,
        "config.json",
        &format!(
            r#"{{ "schema": {WAVE_SCHEMA}, "waves_dir": "waves", "participation": "participation.csv" }}"#
        ),
    )
}

#[test]
fn prep_with_empty_participation_removes_everyone() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "waves/2010-01.csv",
        "id,age,gender\na,30,F\nb,41,M\n",
    );
    write(dir.path(), "participation.csv", "respondent,study\n");
    let config = prep_config(dir.path());
    let out = panelrisk(&["prep", "--config", &config]);
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(
        err.contains("warning") && err.contains("removed 2 respondents"),
        "{err}"
    );
    assert_eq!(stdout(&out), "id,age,gender,mob_candidates\n");
}

#[test]
fn prep_single_complete_wave_adds_an_empty_birth_month_column() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "waves/2010-01.csv",
        "id,age,gender\na,30,F\nb,41,M\n",
    );
    write(
        dir.path(),
        "participation.csv",
        "respondent,study\na,s1\nb,s2\n",
    );
    let config = prep_config(dir.path());
    let output = dir.path().join("prepared.csv");
    let out = panelrisk(&[
        "prep",
        "--config",
        &config,
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(output).unwrap(),
        "id,age,gender,mob_candidates\na,30,F,\nb,41,M,\n"
    );
}

#[test]
fn prep_estimates_birth_months_across_waves() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "waves/2010-05.csv",
        "id,age,gender\na,30,F\nb,41,M\n",
    );
    write(
        dir.path(),
        "waves/2010-06.csv",
        "id,age,gender\na,31,F\nb,41,M\n",
    );
    write(
        dir.path(),
        "waves/2010-07.csv",
        "id,age,gender\na,31,F\nb,42,M\n",
    );
    write(
        dir.path(),
        "participation.csv",
        "respondent,study\na,s1\nb,s2\n",
    );
    let config = prep_config(dir.path());
    let out = panelrisk(&["prep", "--config", &config]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        stdout(&out),
        "id,age,gender,mob_candidates\na,31,F,5/6\nb,42,M,6/7\n"
    );
}
