use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdentropy::search::complexity_c;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdentropy"))
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn small_config(snr: &str, methods: &str) -> String {
    format!(
        r#"{{
  "version": 1,
  "channel": {{"family": "selective", "n_t": 6, "memory": 5, "seed": 3}},
  "constellation": {{"kind": "qam", "size": 4}},
  "snr_db": {snr},
  "methods": {methods},
  "n_d": 8,
  "n_n": 4,
  "seed": 5
}}"#
    )
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn unknown_config_field_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let body = small_config("[0]", r#"[{"name": "gb"}]"#).replace("\"seed\": 5", "\"seed\": 5, \"bogus\": 1");
    let cfg = write_config(&dir, "bad.json", &body);
    let out = run(&["run"], &cfg, &dir.path().join("o.csv"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_method_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_config("[0]", r#"[{"name": "nope"}]"#));
    let out = run(&["run"], &cfg, &dir.path().join("o.csv"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_output_path_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_config("[0]", r#"[{"name": "gb"}]"#));
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_snr_list_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_config("[]", r#"[{"name": "truth"}, {"name": "gb"}]"#));
    let csv = dir.path().join("o.csv");
    let out = run(&["run"], &cfg, &csv);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("snr_db,method,params,"));
}

#[test]
fn rerun_is_byte_identical_and_writes_sidecar() {
    let dir = TempDir::new().unwrap();
    let methods = r#"[{"name": "truth"}, {"name": "dfs", "alpha": 1.5}, {"name": "bfs", "k": 4}, {"name": "sdea", "search": {"alpha": 2}, "gamma_l_db": -4, "gamma_h_db": 4, "rho_ref_db": 0}, {"name": "sa"}, {"name": "hd1"}]"#;
    let cfg = write_config(&dir, "c.json", &small_config("[-5, 5]", methods));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run(&["--threads", "1", "run"], &cfg, &a).status.success());
    assert!(run(&["--threads", "3", "run"], &cfg, &b).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let meta = std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(meta["config"]["seed"], 5);
    assert!(meta["columns"].as_array().unwrap().len() >= 8);
}

#[test]
fn seed_override_changes_estimates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_config("[0]", r#"[{"name": "dfs", "alpha": 1}]"#));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run(&["run"], &cfg, &a).status.success());
    assert!(run(&["run", "--seed", "99"], &cfg, &b).status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn dfs_work_falls_with_snr_and_bfs_work_is_fixed() {
    let dir = TempDir::new().unwrap();
    let methods = r#"[{"name": "dfs", "alpha": 2}, {"name": "bfs", "k": 8}]"#;
    let cfg = write_config(&dir, "c.json", &small_config("[-10, 20]", methods));
    let csv = dir.path().join("o.csv");
    assert!(run(&["run"], &cfg, &csv).status.success());
    let rows = rows(&csv);
    let nodes = |snr: &str, method: &str| -> f64 {
        rows.iter()
            .find(|r| &r[0] == snr && &r[1] == method && &r[6] == "upper")
            .map(|r| r[7].parse().unwrap())
            .unwrap()
    };
    assert!(nodes("-10.0", "dfs") >= nodes("20.0", "dfs"));
    let expected = complexity_c(8, 4, 6) as f64;
    assert_eq!(nodes("-10.0", "bfs"), expected);
    assert_eq!(nodes("20.0", "bfs"), expected);
}

#[test]
fn method_filter_keeps_only_named_methods() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_config("[0]", r#"[{"name": "gb"}, {"name": "seb"}]"#));
    let csv = dir.path().join("o.csv");
    assert!(run(&["run", "--method", "seb"], &cfg, &csv).status.success());
    let rows = rows(&csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1], "seb");
}

#[test]
fn sweep_with_single_point_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_config("[0]", "[]"));
    let csv = dir.path().join("o.csv");
    let out = bin()
        .args(["sweep", "--param", "k", "--grid", "inf", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&csv);
    assert_eq!(rows.iter().filter(|r| &r[1] == "bfs").count(), 2);
    let truth: f64 = rows.iter().find(|r| &r[1] == "truth").unwrap()[5].parse().unwrap();
    for r in rows.iter().filter(|r| &r[1] == "bfs") {
        let h: f64 = r[5].parse().unwrap();
        assert!((h - truth).abs() < 1e-9, "full-width K-best should match the truth");
    }
}

#[test]
fn sweep_rejects_multiple_snr_points() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &small_config("[0, 5]", "[]"));
    let out = bin()
        .args(["sweep", "--param", "alpha", "--grid", "1,2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
