use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsa")).args(args).output().expect("spawn vsa")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json report")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn zero_timesteps_is_an_argument_error() {
    assert_eq!(code(&vsa(&["run", "--net", "mnist", "--timesteps", "0"])), 2);
    assert_eq!(code(&vsa(&["traffic", "--net", "mnist", "--report", "xml"])), 2);
}

#[test]
fn verified_mnist_run_matches_reference() {
    let r = json(&vsa(&["run", "--net", "mnist", "--timesteps", "3", "--verify", "--deterministic", "--report", "json"]));
    assert_eq!(r["schema"], 1);
    assert_eq!(r["oracle_match"], true);
    assert!(r.get("generated_at_unix").is_none());
    assert_eq!(r["class_counts"].as_array().unwrap().len(), 10);
}

#[test]
fn timestamp_present_unless_deterministic() {
    let r = json(&vsa(&["run", "--net", "mnist", "--timesteps", "1", "--report", "json"]));
    assert!(r["generated_at_unix"].as_u64().unwrap() > 0);
}

#[test]
fn fusion_on_off_differs_by_twice_the_fused_maps() {
    let on = json(&vsa(&["run", "--net", "mnist", "--timesteps", "2", "--fusion", "on", "--deterministic", "--report", "json"]));
    let off = json(&vsa(&["run", "--net", "mnist", "--timesteps", "2", "--fusion", "off", "--deterministic", "--report", "json"]));
    let t = json(&vsa(&["traffic", "--net", "mnist", "--timesteps", "2", "--report", "json"]));
    let diff = off["traffic"]["total_bytes"].as_u64().unwrap() - on["traffic"]["total_bytes"].as_u64().unwrap();
    assert_eq!(diff, t["expected_savings_bytes"].as_u64().unwrap());
    assert_eq!(diff, t["savings_bytes"].as_u64().unwrap());
    // Fusion changes traffic, never spikes.
    assert_eq!(on["class_counts"], off["class_counts"]);
    assert_eq!(on["cycles"], off["cycles"]);
}

#[test]
fn single_conv_network_saves_nothing() {
    let r = json(&vsa(&["traffic", "--net", "32Conv(encoding)", "--input-shape", "3x16x16", "--report", "json"]));
    assert_eq!(r["savings_bytes"], 0);
    assert_eq!(r["percent_reduction"].as_f64().unwrap(), 0.0);
    assert!(r.get("reference_percent_reduction").is_none());
}

#[test]
fn explicit_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let auto = json(&vsa(&["traffic", "--net", "cifar10", "--report", "json"]));
    let plan = write(dir.path(), "plan.json", &auto["plan"].to_string());
    let explicit = json(&vsa(&["traffic", "--net", "cifar10", "--fusion-plan", &plan, "--report", "json"]));
    assert_eq!(auto["fused"], explicit["fused"]);
    assert_eq!(auto["reference_percent_reduction"].as_f64(), Some(35.3));

    let unfused = write(
        dir.path(),
        "unfused.json",
        r#"{"groups":[[0],[1],[2],[4],[5],[6],[7],[9],[10],[11],[12],[14],[15]]}"#,
    );
    let r = json(&vsa(&["traffic", "--net", "cifar10", "--fusion-plan", &unfused, "--report", "json"]));
    assert_eq!(r["savings_bytes"], 0);

    let missing = write(dir.path(), "missing.json", r#"{"groups":[[0],[1,2]]}"#);
    assert_eq!(code(&vsa(&["traffic", "--net", "cifar10", "--fusion-plan", &missing])), 3);
    let garbage = write(dir.path(), "garbage.json", "not json");
    assert_eq!(code(&vsa(&["traffic", "--net", "cifar10", "--fusion-plan", &garbage])), 3);
    let absent = dir.path().join("absent.json");
    assert_eq!(code(&vsa(&["traffic", "--net", "cifar10", "--fusion-plan", absent.to_str().unwrap()])), 1);
}

#[test]
fn tiny_weight_buffer_is_a_capacity_fault() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hw.toml", "[sram]\nweight_bytes = 64\n");
    let o = vsa(&["run", "--net", "mnist", "--timesteps", "1", "--fusion", "off", "--config", &cfg]);
    assert_eq!(code(&o), 4, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_config_key_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hw.toml", "arrays = 4\nbogus = 1\n");
    assert_eq!(code(&vsa(&["bench", "--config", &cfg])), 3);
}

#[test]
fn bench_peak_follows_clock() {
    let r = json(&vsa(&["bench", "--report", "json"]));
    assert_eq!(r["peak_gops"].as_f64().unwrap(), 2304.0);
    for n in r["networks"].as_array().unwrap() {
        assert!(n["achieved_gops"].as_f64().unwrap() <= 2304.0);
        let u = n["utilization"].as_f64().unwrap();
        assert!(u > 0.0 && u <= 1.0);
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hw.toml", "clock_hz = 250e6\n");
    let half = json(&vsa(&["bench", "--config", &cfg, "--report", "json"]));
    assert_eq!(half["peak_gops"].as_f64().unwrap(), 1152.0);
}

#[test]
fn csv_has_one_row_per_layer_and_a_total() {
    let o = vsa(&["run", "--net", "mnist", "--timesteps", "1", "--report", "csv"]);
    assert_eq!(code(&o), 0);
    let mut rd = csv::Reader::from_reader(&o.stdout[..]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    // mnist preset: conv, pool, conv, pool, fc, fc
    assert_eq!(rows.len(), 6 + 1);
    assert_eq!(&rows[6][0], "total");
}

#[test]
fn report_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = vsa(&["traffic", "--net", "mnist", "--report", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
}

#[test]
fn bench_estimate_equals_simulated_cycles() {
    let bench = json(&vsa(&["bench", "--timesteps", "3", "--report", "json"]));
    let run = json(&vsa(&["run", "--net", "mnist", "--timesteps", "3", "--deterministic", "--report", "json"]));
    let mnist = bench["networks"].as_array().unwrap().iter().find(|n| n["network"] == "mnist").unwrap();
    assert_eq!(mnist["cycles"], run["cycles"]["total_cycles"]);
    assert_eq!(mnist["active_pe_cycles"], run["cycles"]["active_pe_cycles"]);
}
