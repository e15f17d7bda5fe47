use std::path::Path;
use std::process::{Command, Output};

use pvclust::commands::sha256_file;

fn pvclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvclust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn gen(dir: &Path, seed: &str) -> Output {
    pvclust(&[
        "gen-data", "--n", "200", "--k", "4", "--views", "2", "--dims", "12,9", "--seed", seed,
        "--out-dir", dir.to_str().unwrap(),
    ])
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn gen_data_writes_views_labels_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(gen(&a, "7").status.success());
    assert!(gen(&b, "7").status.success());
    assert_eq!(files(&a), ["labels.txt", "manifest.json", "view_0.csv", "view_1.csv"]);
    for f in ["labels.txt", "view_0.csv", "view_1.csv"] {
        assert_eq!(sha256_file(&a.join(f)).unwrap(), sha256_file(&b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn dims_arity_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pvclust(&["gen-data", "--views", "2", "--dims", "20", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--dims"));
}

#[test]
fn bad_flag_values_and_missing_data_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let out_dir = tmp.path().join("run");
    let run = |extra: &[&str]| {
        let mut args = vec!["train", "--data", missing.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        pvclust(&args).status.code()
    };
    assert_eq!(run(&[]), Some(3));
    assert_eq!(run(&["--tau", "0"]), Some(2));
    assert_eq!(run(&["--ablate", "no_such_thing"]), Some(2));
}

#[test]
fn train_is_deterministic_and_records_config() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(gen(&data, "3").status.success());
    let mut metrics = Vec::new();
    for run in ["r1", "r2"] {
        let out = tmp.path().join(run);
        let status = pvclust(&[
            "train", "--data", data.to_str().unwrap(), "--eta", "0.5", "--seed", "1",
            "--preset", "small-synthetic", "--epochs", "5", "--ablate", "no_guidance",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        for f in ["metrics.json", "loss_log.csv", "graph_edges.csv", "graph_meta.json", "checkpoint.bin", "config_echo.toml", "manifest.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
        let echo = std::fs::read_to_string(out.join("config_echo.toml")).unwrap();
        assert!(echo.contains("no_guidance"));
        metrics.push(std::fs::read(out.join("metrics.json")).unwrap());
    }
    assert_eq!(metrics[0], metrics[1]);
    let parsed: serde_json::Value = serde_json::from_slice(&metrics[0]).unwrap();
    for key in ["acc", "nmi", "ari"] {
        assert!(parsed[key].is_f64(), "{key}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(gen(&data, "4").status.success());
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "epochs = 3\nlambda1 = 0.5\nhidden_dims = [16]\n").unwrap();
    let out = tmp.path().join("run");
    let status = pvclust(&[
        "train", "--config", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(),
        "--lambda1", "2.5", "--batch-size", "50", "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let echo = std::fs::read_to_string(out.join("config_echo.toml")).unwrap();
    assert!(echo.contains("epochs = 3"));
    assert!(echo.contains("lambda1 = 2.5"));
}

#[test]
fn selfcheck_passes_and_catches_injected_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = pvclust(&["selfcheck", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(clean.status.code(), Some(0), "{}", String::from_utf8_lossy(&clean.stdout));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("selfcheck.json")).unwrap()).unwrap();
    for check in report["checks"].as_array().unwrap() {
        assert!(check["max_error"].is_number());
    }
    let faulty = pvclust(&["selfcheck", "--inject-fault", "gradient-scale"]);
    assert_ne!(faulty.status.code(), Some(0));
}

#[test]
fn compare_matching_table_has_two_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(gen(&data, "5").status.success());
    let out = tmp.path().join("cmp");
    let status = pvclust(&[
        "compare-matching", "--data", data.to_str().unwrap(), "--eta", "0.5", "--preset", "small-synthetic",
        "--epochs", "3", "--seeds", "0,1", "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(out.join("compare_matching.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("compare_matching.json").exists());
}
