//! End-to-end tests of the `cetool` binary: run outputs, determinism, exit
//! codes, and the explain decomposition.

use std::fs;
use std::path::Path;
use std::process::Command;

fn cetool() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cetool"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_noiseless_scenario_passes_with_zero_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "scenarios": [
                {"family": "bounded_noise", "grid": 8, "radius": 0, "horizon": 3, "seed": 4}
            ]
        }"#,
    );
    let out = tmp.path().join("out");
    let status = cetool()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(
            out.join("000_bounded_noise_n8_r0_T3_s4")
                .join("report.json"),
        )
        .unwrap(),
    )
    .unwrap();
    for row in report["rows"].as_array().unwrap() {
        assert_eq!(row["bound"].as_f64().unwrap(), 0.0);
        assert!(row["gap"].as_f64().unwrap().abs() <= 1e-9);
    }
}

#[test]
fn run_fifty_random_seeds_all_nonnegative_slack() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "scenarios": [
                {"family": "random", "states": 3, "observations": 2, "actions": 2,
                 "horizon": 3, "seed": 500, "variant": 1, "repeat": 50}
            ]
        }"#,
    );
    let out = tmp.path().join("out");
    let status = cetool()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.trim_end().lines().skip(1).collect();
    assert_eq!(rows.len(), 50);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for row in json["scenarios"].as_array().unwrap() {
        assert_eq!(row["verdict"], "pass");
        assert!(row["worst_slack"].as_f64().unwrap() >= -1e-9);
    }
}

#[test]
fn rerunning_identical_config_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "workers": 3,
            "scenarios": [
                {"family": "bounded_noise", "grid": 8, "radius": 1, "horizon": 3, "seed": 6},
                {"family": "random", "states": 3, "observations": 3, "actions": 2,
                 "horizon": 3, "seed": 300, "variant": 2, "repeat": 4},
                {"family": "quantized", "grid": 9, "radius": 1, "cell": 3, "horizon": 3, "seed": 2}
            ]
        }"#,
    );
    let mut snapshots: Vec<Vec<(String, String)>> = Vec::new();
    for pass in 0..2 {
        let out = tmp.path().join(format!("out{pass}"));
        let status = cetool()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let mut files = Vec::new();
        collect_csvs(&out, &mut files);
        files.sort();
        snapshots.push(
            files
                .into_iter()
                .map(|p| {
                    let rel = p.strip_prefix(&out).unwrap().to_string_lossy().into_owned();
                    (rel, fs::read_to_string(p).unwrap())
                })
                .collect(),
        );
    }
    assert_eq!(
        snapshots[0], snapshots[1],
        "CSV outputs must be byte-identical"
    );
}

fn collect_csvs(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_csvs(&path, out);
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path);
        }
    }
}

#[test]
fn model_file_scenario_loads_and_runs() {
    let tmp = tempfile::tempdir().unwrap();
    // Generate an instance, export it, and run it back through the CLI.
    let sc = cetool_core::scenarios::random_instance(77, (3, 2, 2, 2), 0).unwrap();
    let model = cetool_core::model::ModelFile::from_pomdp(&sc.pomdp);
    let model_path = tmp.path().join("instance.json");
    fs::write(&model_path, model.to_json()).unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            r#"{{
                "scenarios": [
                    {{"model": {:?}, "estimator": {{"kind": "map_posterior"}}}}
                ]
            }}"#,
            model_path.to_string_lossy()
        ),
    );
    let out = tmp.path().join("out");
    let status = cetool()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn missing_config_and_missing_model_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    // Missing config: usage error.
    let status = cetool()
        .args(["run", "--config"])
        .arg(tmp.path().join("nope.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Config referencing a missing model file: scenario failure, nonzero.
    let cfg = write_config(
        tmp.path(),
        r#"{"scenarios": [{"model": "/does/not/exist.json"}]}"#,
    );
    let status = cetool()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_ne!(status.code(), Some(0));

    // Malformed JSON: parse error.
    let bad = write_config(tmp.path(), "{ not json");
    let status = cetool()
        .args(["run", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn explain_decomposes_alpha_and_checks_range() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "scenarios": [
                {"family": "bounded_noise", "grid": 8, "radius": 1, "horizon": 3, "seed": 6},
                {"family": "bounded_noise", "grid": 8, "radius": 1, "horizon": 1, "seed": 6}
            ]
        }"#,
    );
    let out = tmp.path().join("out");
    assert!(cetool()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let report = out
        .join("000_bounded_noise_n8_r1_T3_s6")
        .join("report.json");

    let output = cetool()
        .args(["explain", "--report"])
        .arg(&report)
        .args(["--t", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("alpha_1 decomposition"));
    assert!(text.contains("dominant term"));

    // T = 1 report: alpha_1 is eps_1 alone.
    let t1 = out
        .join("001_bounded_noise_n8_r1_T1_s6")
        .join("report.json");
    let output = cetool()
        .args(["explain", "--report"])
        .arg(&t1)
        .args(["--t", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    let eps_line = text
        .lines()
        .find(|l| l.trim_start().starts_with("eps_1"))
        .unwrap();
    let alpha_line = text
        .lines()
        .find(|l| l.trim_start().starts_with("alpha (reported)"))
        .unwrap();
    let tail = |l: &str| l.rsplit('=').next().unwrap().trim().to_string();
    assert_eq!(tail(eps_line), tail(alpha_line));

    // Out-of-range stage: exit 2.
    let status = cetool()
        .args(["explain", "--report"])
        .arg(&report)
        .args(["--t", "9"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn family_filter_and_env_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "scenarios": [
                {"family": "bounded_noise", "grid": 8, "radius": 1, "horizon": 3, "seed": 6},
                {"family": "random", "states": 2, "observations": 2, "actions": 2,
                 "horizon": 2, "seed": 1, "variant": 0}
            ]
        }"#,
    );
    let out = tmp.path().join("out");
    let status = cetool()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--families", "random"])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.trim_end().lines().count(), 2); // header + 1 scenario

    // A tiny budget from the environment makes the tree build fail.
    let status = cetool()
        .env("CETOOL_BUDGET", "2")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
