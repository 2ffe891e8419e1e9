use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flexpos::output::run_header;

fn flexpos(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexpos"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("FLEXPOS_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(String::from).collect()
}

#[test]
fn mobility_prints_six() {
    let dir = tempfile::tempdir().unwrap();
    let o = flexpos(&["mobility"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("degrees of freedom: 6"));
    for f in ["summary.txt", "config.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn workspace_reports_ranges_and_projections() {
    let dir = tempfile::tempdir().unwrap();
    let o = flexpos(&["workspace"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for needle in ["x 403.7 um", "z 390.9 um", "rz 15278.2 urad", "334.2 N"] {
        assert!(text.contains(needle), "missing `{needle}` in\n{text}");
    }
    assert_eq!(
        header(&dir.path().join("projections.csv")),
        ["plane", "vertex", "coord1", "coord2", "unit"]
    );
}

#[test]
fn simulate_writes_full_run_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    fs::write(&cfg, r#"{"simulate": {"duration_s": 0.05}}"#).unwrap();
    let out = dir.path().join("out");
    let o = flexpos(
        &["--config", cfg.to_str().unwrap(), "simulate", "--trajectory", "rose"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let h = header(&out.join("run.csv"));
    assert_eq!(h, run_header());
    assert_eq!(h.len(), 34);
    let rows = fs::read_to_string(out.join("run.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 500);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_jacobian_reads_measured_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut text = String::from("u1,u2,u3,u4,u5,u6,x,y,z,rx,ry,rz\n");
    for i in 0..20 {
        let u: Vec<f64> = (0..6).map(|k| ((i * 7 + k * 13) % 23) as f64).collect();
        let sum: f64 = u.iter().sum();
        let row: Vec<String> = u
            .iter()
            .map(|v| v.to_string())
            .chain((0..6).map(|k| (sum * k as f64).to_string()))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("out");
    let o = flexpos(&["fit-jacobian", "--data", data.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        header(&out.join("jacobian_fit.csv")),
        ["pose_axis", "actuator", "estimate", "std_error", "truth", "unit"]
    );
}

#[test]
fn malformed_fit_data_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    fs::write(&data, "a,b\n1,2\n").unwrap();
    let o = flexpos(
        &["fit-jacobian", "--data", data.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("expected 12 columns"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(flexpos(&["teleport"], dir.path()).status.code(), Some(4));
    assert_eq!(
        flexpos(&["simulate", "--trajectory", "spiral"], dir.path())
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = flexpos(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("freq-response"));
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"sensor": {"adc_bits": 40}}"#).unwrap();
    let o = flexpos(
        &["--config", cfg.to_str().unwrap(), "mobility"],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sensor.adc_bits"));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = flexpos(&["mobility"], &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = flexpos(&["--seed", "77", "mobility"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 77);
}
