use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn latflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latflow")).args(args).output().unwrap()
}

fn run(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![kind, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    latflow(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_chain_validates() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("validate", &configs().join("validate.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    let conditions = report["conditions"].as_array().unwrap();
    assert_eq!(conditions.len(), 5);
    assert!(conditions.iter().all(|c| c["passed"] == true));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn simulation_without_pairs_follows_the_free_flow() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("simulate", &configs().join("simulate_free.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        for (i, name) in header.iter().enumerate() {
            if name.starts_with("p_") || name.starts_with("q_") {
                let j = header.iter().position(|h| h == format!("free_{name}")).unwrap();
                let (a, b): (f64, f64) = (rec[i].parse().unwrap(), rec[j].parse().unwrap());
                assert!((a - b).abs() <= 1e-12, "{name} at t = {}: {a} vs {b}", &rec[0]);
            }
        }
        rows += 1;
    }
    assert_eq!(rows, 11);
}

#[test]
fn dyson_errors_stay_below_their_tail_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("dyson_compare", &configs().join("dyson_compare.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dyson_compare.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let err = r["sampled_max_error"].as_f64().unwrap();
        let bound = r["tail_bound"].as_f64().unwrap();
        assert!(err <= bound, "order {}: {err} > {bound}", r["order"]);
    }
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("thermo_sweep.json");
    assert_eq!(run("thermo_sweep", &cfg, a.path(), &["--workers", "1"]).status.code(), Some(0));
    assert_eq!(run("thermo_sweep", &cfg, b.path(), &["--workers", "3"]).status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("thermo_sweep.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn malformed_config_reports_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"kind\": \"validate\",\n  \"params\": {,}\n}\n").unwrap();
    let o = run("validate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json:3:"), "{}", stderr(&o));
}

#[test]
fn bad_parameters_are_located_inside_the_params_block() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(configs().join("pair.json"), dir.path().join("pair.json")).unwrap();
    let cfg = dir.path().join("occ.json");
    let text = "{\n  \"kind\": \"occupation\",\n  \"model_ref\": \"pair.json\",\n  \"params\": {\n    \"k\": 0,\n    \"l\": \"one\"\n  }\n}\n";
    std::fs::write(&cfg, text).unwrap();
    let o = run("occupation", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("occ.json:6:"), "{}", stderr(&o));
}

#[test]
fn failing_assumptions_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let model = std::fs::read_to_string(configs().join("pair.json")).unwrap();
    std::fs::write(dir.path().join("pair.json"), model.replace("\"global_C\": 1.0", "\"global_C\": 0.01")).unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(&cfg, r#"{"kind": "validate", "model_ref": "pair.json", "params": {}}"#).unwrap();
    let o = run("validate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("summable"), "{}", stderr(&o));

    let sim = dir.path().join("sim.json");
    std::fs::write(
        &sim,
        r#"{"kind": "simulate", "model_ref": "pair.json", "params": {"state": [], "t": 1.0}}"#,
    )
    .unwrap();
    assert_eq!(run("simulate", &sim, dir.path(), &[]).status.code(), Some(3));
}

#[test]
fn kind_must_match_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("simulate", &configs().join("validate.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
}
