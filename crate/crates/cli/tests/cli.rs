use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn diffloss(args: &[&str]) -> Output {
    diffloss_env(args, &[])
}

fn diffloss_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_diffloss"));
    cmd.args(args).env_remove("DIFFLOSS_OUTPUT_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) {
    let mut text = format!("{header}\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn synth_writes_the_full_mesh_deterministically() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = diffloss(&["synth", "--shape", "19x15x5", "--seed", "7", "--out", s(p)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1 + 1425);
    assert!(text.starts_with("x1,x2,x3,y\n"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(dir.path().join("a.truth.json")).unwrap(), fs::read(dir.path().join("b.truth.json")).unwrap());
    let truth: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["seed"], 7);
}

#[test]
fn short_axes_need_force() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("tiny.csv");
    let out = diffloss(&["synth", "--shape", "2x2x2", "--out", s(&out_path)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("axis requires ≥ 3 points for sensors"));
    assert!(!out_path.exists());

    let out = diffloss(&["synth", "--shape", "2x2x2", "--out", s(&out_path), "--force"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("axis requires ≥ 3 points for sensors"));
    assert_eq!(fs::read_to_string(&out_path).unwrap().lines().count(), 9);
}

#[test]
fn affine_data_gives_zero_sensors() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("affine.csv");
    write_csv(
        &data,
        "x1,x2,y",
        (0..5).flat_map(|i| (0..4).map(move |j| format!("{i},{},{}", 0.5 * j as f64, 2.0 + 0.3 * i as f64 - 0.2 * j as f64))),
    );
    let out_path = dir.path().join("sensors.csv");
    let out = diffloss(&["sensors", "--data", s(&data), "--out", s(&out_path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "i1,i2,diag_++,diag_+-,total");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 3 * 2);
    for line in body {
        for v in line.split(',').skip(2) {
            assert!(v.parse::<f64>().unwrap().abs() <= 1e-12, "{line}");
        }
    }
    assert!(dir.path().join("sensors.summary.csv").is_file());
}

#[test]
fn one_dimensional_data_has_a_single_diagonal() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("line.csv");
    write_csv(&data, "x,y", [1.0, 2.0, 5.0, 3.0].iter().enumerate().map(|(i, v)| format!("{i},{v}")));
    let out_path = dir.path().join("s.csv");
    let out = diffloss(&["sensors", "--data", s(&data), "--out", s(&out_path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "i1,diag_+,total");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn front_dataset_reports_its_peak() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    assert_eq!(code(&diffloss(&["synth", "--shape", "12x9x4", "--out", s(&data)])), 0);
    let out_path = dir.path().join("s.csv");
    let out = diffloss(&["sensors", "--data", s(&data), "--out", s(&out_path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("s.summary.csv")).unwrap();
    let total = summary.lines().find(|l| l.starts_with("total,")).unwrap();
    let fields: Vec<&str> = total.split(',').collect();
    assert!(fields[2].parse::<f64>().unwrap() > 0.0);
    assert_eq!(fields[4].split(';').count(), 3);
}

#[test]
fn missing_inputs_are_validation_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = diffloss(&["sensors", "--data", s(&missing), "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("nope.csv"));
    assert_eq!(code(&diffloss(&["sensors"])), 1);
    assert_eq!(code(&diffloss(&["synth", "--shape", "4xq", "--out", "x.csv"])), 1);
    assert_eq!(code(&diffloss(&["--help"])), 0);
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let out = diffloss(&["synth", "--shape", "4x4", "--out", s(&dir.path().join("no/such/dir/d.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no/such/dir"));
}

#[test]
fn fit_trains_and_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    assert_eq!(code(&diffloss(&["synth", "--shape", "6x5x3", "--out", s(&data)])), 0);
    let run = dir.path().join("run");
    let out = diffloss(&["fit", "--data", s(&data), "--lengthscale", "2", "--out", s(&run)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["status"], "ok");
    assert_eq!(result["method"], "lml");
    let id = result["id"].as_str().unwrap();
    for f in ["result.json", "history.csv", "sensors_staggered.csv"] {
        assert!(run.join(id).join(f).is_file(), "{f}");
    }
    let out = diffloss(&["fit", "--data", s(&data), "--lengthscale", "-1"]);
    assert_eq!(code(&out), 1);
}

fn grid_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
  "spec_version": 1,
  "dataset": {"synthetic": {"shape": [6, 5, 3], "seed": 3}},
  "kernels": ["SE"],
  "lengthscale_inits": [0.5, 2.0],
  "slice": {"fixed": {"0": 2.0, "2": 0.5}, "dense_factor": 4}
}"#;

#[test]
fn grid_rejects_bad_configs_before_computing() {
    let dir = TempDir::new().unwrap();
    let cfg = grid_config(
        dir.path(),
        r#"{"spec_version": 1, "dataset": {"synthetic": {"shape": [6, 5, 3], "seed": 1}}, "kernels": ["SE", "Matern"]}"#,
    );
    let results = dir.path().join("results");
    let out = diffloss(&["grid", "--config", s(&cfg), "--out", s(&results)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("/kernels/1"), "{}", stderr(&out));
    assert!(!results.exists());
}

#[test]
fn lml_only_grid_has_one_row_per_init() {
    let dir = TempDir::new().unwrap();
    let cfg = grid_config(
        dir.path(),
        r#"{"spec_version": 1, "dataset": {"synthetic": {"shape": [6, 5, 3], "seed": 1}}, "kernels": ["SE"], "methods": ["lml"]}"#,
    );
    let results = dir.path().join("env-results");
    let out = diffloss_env(&["grid", "--config", s(&cfg)], &[("DIFFLOSS_OUTPUT_DIR", &results)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(results.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 6);
}

#[test]
fn grid_slice_and_plots() {
    let dir = TempDir::new().unwrap();
    let cfg = grid_config(dir.path(), SMALL);
    let results = dir.path().join("results");
    let out = diffloss(&["grid", "--config", s(&cfg), "--jobs", "2", "--out", s(&results)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(results.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    let run = "001-diffusion-se-l0.5";
    assert!(results.join(run).join("slice_x2.csv").is_file());

    let sliced = dir.path().join("slice.csv");
    let out = diffloss(&["slice", "--results", s(&results), "--run", run, "--dense-factor", "2", "--out", s(&sliced)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&sliced).unwrap().lines().count(), 1 + 9);

    for kind in ["convergence", "slice", "lengthscales", "losses"] {
        let a = dir.path().join(format!("{kind}-a.svg"));
        let b = dir.path().join(format!("{kind}-b.svg"));
        for p in [&a, &b] {
            let out = diffloss(&["plot", "--results", s(&results), "--kind", kind, "--out", s(p)]);
            assert_eq!(code(&out), 0, "{kind}: {}", stderr(&out));
        }
        let text = fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("<!-- diffloss "), "{kind}");
        assert!(text.contains("<svg") && text.trim_end().ends_with("</svg>"));
        assert_eq!(text, fs::read_to_string(&b).unwrap());
    }
    let conv = fs::read_to_string(dir.path().join("convergence-a.svg")).unwrap();
    assert!(conv.contains(">training<") && conv.contains(">diffusion<"));
    assert_eq!(conv.matches("<polyline").count(), 2);
}

#[test]
fn plotting_an_empty_results_dir_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let svg = dir.path().join("p.svg");
    let out = diffloss(&["plot", "--results", s(&empty), "--kind", "losses", "--out", s(&svg)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("summary.csv"));
    assert!(!svg.exists());
}
