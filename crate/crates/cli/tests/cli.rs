use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robustprep"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const PREPARE_4Q: &str = r#"{
  "schema_version": 1,
  "experiment": "prepare",
  "seed": 3,
  "target": {"kind": "haar"},
  "n_qubits": 4,
  "n_blocks": 12,
  "noise": {},
  "train": {"noise_free_steps": 500, "noise_aware_steps": 5}
}"#;

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (i, text) in [
        r#"{"schema_version": 1, "experiment": "prepare", "#,
        r#"{"schema_version": 1, "experiment": "prepare", "n_qubits": 4}"#,
        r#"{"schema_version": 1, "experiment": "prepare", "target": {"kind": "haar"}, "n_qubits": 4, "n_blocks": 2, "noise": {"p1": 1.5}}"#,
        r#"{"schema_version": 1, "experiment": "prepare", "target": {"kind": "haar"}, "n_qubits": 4, "n_blocks": 2, "train": {"lr": -1.0}}"#,
        r#"{"schema_version": 1, "experiment": "prepare", "target": {"kind": "haar"}, "n_qubits": 4, "n_blocks": 2, "train": {"learning_rate": 0.1}}"#,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), text);
        let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}\n{}", String::from_utf8_lossy(&o.stderr));
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
        assert!(!out.exists(), "partial outputs after {text}");
    }
}

#[test]
fn missing_output_dir_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", PREPARE_4Q);
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_thread_count_exits_2() {
    let o = bin().env("ROBUSTPREP_THREADS", "many").args(["gen-target", "sine", "--qubits", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn prepare_noise_free_reaches_high_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", PREPARE_4Q);
    let out = dir.path().join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("summary.json"));
    assert!(summary["sim_fidelity"].as_f64().unwrap() >= 0.99, "{summary}");
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["config"]["seed"], 3);
    for name in manifest["outputs"].as_array().unwrap() {
        assert!(out.join(name.as_str().unwrap()).is_file(), "{name}");
    }
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 505);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", PREPARE_4Q);
    let out = dir.path().join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "11"]);
    assert!(o.status.success());
    assert_eq!(json(&out.join("manifest.json"))["config"]["seed"], 11);
}

#[test]
fn reruns_are_byte_identical_apart_from_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "f.json",
        r#"{"schema_version": 1, "experiment": "finetune", "seed": 5, "repeats": 2,
            "target": {"kind": "sine"}, "n_qubits": 3, "n_blocks": 4,
            "noise": {"p2": 0.01}, "train": {"noise_free_steps": 200, "noise_aware_steps": 4}}"#,
    );
    let outs: Vec<PathBuf> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    let a = files_under(&outs[0]);
    let b = files_under(&outs[1]);
    let rel = |root: &Path, files: &[PathBuf]| files.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect::<Vec<_>>();
    assert_eq!(rel(&outs[0], &a), rel(&outs[1], &b));
    assert!(outs[0].join("run_001/report.csv").is_file());
    for (pa, pb) in a.iter().zip(&b) {
        if pa.ends_with("manifest.json") {
            let mut ma = json(pa);
            let mut mb = json(pb);
            ma.as_object_mut().unwrap().remove("wall_time_seconds");
            mb.as_object_mut().unwrap().remove("wall_time_seconds");
            assert_eq!(ma, mb);
        } else {
            assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap(), "{}", pa.display());
        }
    }
}

#[test]
fn outputs_stay_inside_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", PREPARE_4Q);
    let out = dir.path().join("nested/out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let mut top: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    top.sort();
    assert_eq!(top, vec!["nested", "p.json"]);
    assert_eq!(files_under(&out).len(), 5);
}

#[test]
fn compare_ad_reports_both_gate_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ad");
    let o = run(&["compare-ad", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("summary.json"));
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row["ansatz_two_qubit"], 20);
        assert!(row["mottonen_two_qubit"].as_u64().unwrap() > 20);
    }
}

#[test]
fn compare_ad_rejects_config_of_another_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", PREPARE_4Q);
    let o = run(&["compare-ad", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grad_check_is_accurate() {
    let o = run(&["grad-check", "--qubits", "4", "--trials", "50"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let line = stdout.lines().find(|l| l.contains("finite differences")).expect("report line");
    let err: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err < 1e-5, "{stdout}");
}

#[test]
fn gen_target_prints_normalized_amplitudes() {
    let o = run(&["gen-target", "sine", "--qubits", "3"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 8);
    let norm: f64 = lines
        .iter()
        .map(|l| {
            let (re, im) = l.split_once(',').unwrap();
            let (re, im): (f64, f64) = (re.parse().unwrap(), im.parse().unwrap());
            re * re + im * im
        })
        .sum();
    assert!((norm - 1.0).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen-target", "sine", "--qubits", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("target.amp")).unwrap(), stdout);

    assert_eq!(run(&["gen-target", "teleport", "--qubits", "3"]).status.code(), Some(2));
}

#[test]
fn compare_optimizers_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "experiment": "compare_optimizers", "n_qubits": 4, "n_blocks": 4,
            "train": {"noise_free_steps": 200},
            "compare_optimizers": {"budget_tomographies": 48, "grid_stride": 8}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["compare-optimizers", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("compare_optimizers.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "task,tomographies,device_shots,robust_state,parameter_shift,nelder_mead");
    assert_eq!(json(&out.join("summary.json"))["tasks"].as_array().unwrap().len(), 4);
}
