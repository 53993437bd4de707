use std::path::Path;
use std::process::Command;

use double_irs::harness::emit::{to_csv, to_json};
use double_irs::harness::{run_sweep, Algorithm, SweepAxis, SweepSpec};
use double_irs::geometry::Scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_double-irs"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn solve_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "[radio]\ntx_power_dbm = 20\n[bs]\nantennas = 2\n[user]\nantennas = 2\n");
    let csv_out = dir.path().join("r.csv");
    let json_out = dir.path().join("r.json");
    for out in [&csv_out, &json_out] {
        let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(out).status().unwrap();
        assert!(st.success());
    }
    let rows = csv_rows(&std::fs::read_to_string(&csv_out).unwrap());
    assert_eq!(rows.len(), 1);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    let obj = &json.as_array().unwrap()[0];
    assert_eq!(obj["algorithm"], "algorithm1");
    let csv_rate: f64 = rows[0][2].parse().unwrap();
    assert_eq!(obj["rate_bpshz"].as_f64().unwrap(), csv_rate);
    assert!(csv_rate > 10.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin().args(["solve", "--config", "/definitely/missing.toml"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let bad = write(dir.path(), "bad.toml", "[bs]\naxis = [2.0, 0.0, 0.0]\n");
    let out = bin().args(["solve", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("v_t"));
    // rank-two closed form is undefined for three user antennas
    let three = write(dir.path(), "three.toml", "[user]\nantennas = 3\n");
    let st = bin().args(["solve", "--algo", "rank2_closedform", "--config"]).arg(&three).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let st = bin().args(["validate", "--seed", "11"]).status().unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn sweep_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "scenario.toml", "[bs]\nantennas = 3\n[user]\nantennas = 3\n");
    let spec = write(
        dir.path(),
        "sweep.toml",
        "scenario_file = \"scenario.toml\"\naxis = \"elements\"\nvalues = [100, 200, 400]\nalgorithms = [\"algorithm1\", \"heuristic\"]\n",
    );
    let mut tables = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        assert!(bin().args(["sweep", "--spec"]).arg(&spec).arg("--out").arg(&out).status().unwrap().success());
        tables.push(csv_rows(&std::fs::read_to_string(out).unwrap()));
    }
    assert_eq!(tables[0].len(), 6);
    let strip = |t: &Vec<Vec<String>>| t.iter().map(|r| [&r[..4], &r[5..]].concat()).collect::<Vec<_>>();
    assert_eq!(strip(&tables[0]), strip(&tables[1]));
    for pair in tables[0].chunks(2) {
        assert_eq!(pair[0][1], "algorithm1");
        assert!(pair[0][2].parse::<f64>().unwrap() >= pair[1][2].parse::<f64>().unwrap());
    }
}

#[test]
fn figure_preset_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig7b.json");
    assert!(bin().args(["figure", "fig7b", "--out"]).arg(&out).status().unwrap().success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rates: Vec<f64> = json.as_array().unwrap().iter().map(|r| r["rate_bpshz"].as_f64().unwrap()).collect();
    assert_eq!(rates.len(), 19);
    // the receive correlation is not exactly zero at psi = 0, so the finest
    // grid wobbles slightly near both ends; the overall loss is about 3.5 bits
    assert!(rates[0] - rates[18] > 3.0);
    assert!(rates[6..17].windows(2).all(|w| w[1] < w[0]));
    let st = bin().args(["figure", "fig8", "--out"]).arg(dir.path().join("x.csv")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn csv_and_json_agree() {
    let spec = SweepSpec::new(
        Scenario::reference(),
        SweepAxis::PowerDbm,
        vec![-10.0, 20.0],
        vec![Algorithm::Algorithm1, Algorithm::SingleIrs, Algorithm::Rank2ClosedForm],
    );
    let rows = run_sweep(&spec).unwrap();
    let csv = csv_rows(&to_csv(&rows).unwrap());
    let json: serde_json::Value = serde_json::from_str(&to_json(&rows)).unwrap();
    let keys = ["axis", "algorithm", "rate_bpshz", "iterations", "wall_time_s", "sv1", "sv2", "p1", "p2"];
    for (c, j) in csv.iter().zip(json.as_array().unwrap()) {
        for (k, cell) in keys.iter().zip(c) {
            match &j[k] {
                serde_json::Value::Null => assert_eq!(cell, ""),
                serde_json::Value::String(s) => assert_eq!(s, cell),
                v => assert_eq!(v.as_f64().unwrap(), cell.parse::<f64>().unwrap(), "{k}"),
            }
        }
    }
}
