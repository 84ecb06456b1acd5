use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn glimmer(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glimmer"))
        .current_dir(dir)
        .env("GLIMMER_THREADS", "1")
        .args(args)
        .output()
        .expect("run glimmer")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = glimmer(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    glimmer(dir, args).status.code().unwrap()
}

const FAST: &[&str] = &["--runs", "1", "--epochs", "2", "--stride", "16"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn synth_rows_and_determinism() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--seed", "7", "--days", "14", "--out", "a.csv"]);
    ok(tmp.path(), &["synth", "--seed", "7", "--days", "14", "--out", "b.csv"]);
    let a = fs::read(tmp.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 4032);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(tmp.path(), &["synth", "--days", "0", "--out", "x.csv"]), 2);
    assert_eq!(code(tmp.path(), &["train", "--data", "missing.csv"]), 2);
    assert_eq!(code(tmp.path(), &["train"]), 2);
    assert_eq!(code(tmp.path(), &["frobnicate"]), 2);
    assert_eq!(code(tmp.path(), &["synth", "--out", "x.csv", "--t-hypo", "200"]), 2);
}

#[test]
fn data_error_exit_1() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("bad.csv"),
        "timestamp,glucose_mgdl,basal_u_per_hr,bolus_u,carbs_g\n2024-01-01T00:00:00Z,abc,0,0,0\n",
    )
    .unwrap();
    let out = glimmer(tmp.path(), &["train", "--data", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    ok(tmp.path(), &["synth", "--days", "1", "--out", "short.csv"]);
    assert_eq!(code(tmp.path(), &with(&["train", "--data", "short.csv"], FAST)), 1);
}

#[test]
fn overflowing_inputs_exit_3() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--days", "10", "--out", "a.csv"]);
    let text = fs::read_to_string(tmp.path().join("a.csv")).unwrap();
    let mut huge = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            huge.push_str(line);
        } else {
            let mut cols: Vec<&str> = line.split(',').collect();
            cols[1] = "1e307";
            huge.push_str(&cols.join(","));
        }
        huge.push('\n');
    }
    fs::write(tmp.path().join("huge.csv"), huge).unwrap();
    assert_eq!(code(tmp.path(), &with(&["train", "--data", "huge.csv"], FAST)), 3);
}

#[test]
fn train_eval_predict_round() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--seed", "3", "--days", "30", "--out", "a.csv"]);
    ok(
        d,
        &["train", "--data", "a.csv", "--runs", "2", "--stride", "32", "--loss", "weighted", "--w-hypo", "3.296", "--w-hyper", "2.382", "--out", "run"],
    );
    for seed in [0, 1] {
        assert!(d.join(format!("run/checkpoint_seed{seed}.json")).is_file());
        let hist = fs::read_to_string(d.join(format!("run/history_seed{seed}.csv"))).unwrap();
        assert_eq!(hist.lines().count(), 31, "30 epochs plus header");
    }

    ok(d, &["eval", "--data", "a.csv", "--checkpoint-dir", "run", "--out", "run"]);
    let csv = fs::read_to_string(d.join("run/report.csv")).unwrap();
    assert!(csv.starts_with("metric,mean,std,seed_0,seed_1\n"));
    let rmse: Vec<&str> = csv.lines().find(|l| l.starts_with("rmse,")).unwrap().split(',').collect();
    assert_eq!(rmse.len(), 5);
    assert!(rmse[1].parse::<f64>().unwrap() > 0.0);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(d.join("run/report.json")).unwrap()).unwrap();
    assert_eq!(json["seeds"].as_array().unwrap().len(), 2);
    let pairs = fs::read_to_string(d.join("run/ceg_pairs_seed1.csv")).unwrap();
    assert!(pairs.starts_with("ref,pred,zone\n"));

    // 84 data rows -> one forecast of 12 values
    let text = fs::read_to_string(d.join("a.csv")).unwrap();
    let head: Vec<&str> = text.lines().take(85).collect();
    fs::write(d.join("recent.csv"), head.join("\n") + "\n").unwrap();
    ok(d, &["predict", "--checkpoint", "run/checkpoint_seed0.json", "--data", "recent.csv", "--out", "f.csv"]);
    let f = fs::read_to_string(d.join("f.csv")).unwrap();
    let lines: Vec<&str> = f.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), 13);
    assert!(lines[1].starts_with("2024-01-01T05:55:00Z,"));
    assert!(lines[1].split(',').skip(1).all(|v| v.parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn checkpoint_errors_exit_4() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--days", "10", "--out", "a.csv"]);
    ok(d, &with(&["train", "--data", "a.csv", "--out", "run"], FAST));
    assert_eq!(
        code(d, &["eval", "--data", "a.csv", "--checkpoint", "run/checkpoint_seed0.json", "--lstm-units", "4"]),
        4
    );
    let text = fs::read_to_string(d.join("run/checkpoint_seed0.json")).unwrap();
    fs::write(d.join("v9.json"), text.replacen("\"format_version\":1", "\"format_version\":9", 1)).unwrap();
    assert_eq!(code(d, &["predict", "--checkpoint", "v9.json", "--data", "a.csv", "--out", "f.csv"]), 4);
    fs::write(d.join("cut.json"), &text[..text.len() / 3]).unwrap();
    assert_eq!(code(d, &["predict", "--checkpoint", "cut.json", "--data", "a.csv", "--out", "f.csv"]), 4);
}

#[test]
fn config_file_and_flag_override() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--days", "10", "--out", "a.csv"]);
    fs::write(
        d.join("run.conf"),
        "# quick run\ndata = a.csv\nepochs = 4\nruns = 1\nstride = 16\nloss = plain\nout = cfg\n",
    )
    .unwrap();
    ok(d, &["train", "--config", "run.conf", "--epochs", "2"]);
    let hist = fs::read_to_string(d.join("cfg/history_seed0.csv")).unwrap();
    assert_eq!(hist.lines().count(), 3);

    fs::write(d.join("bad.conf"), "not_a_flag = 3\n").unwrap();
    assert_eq!(code(d, &["train", "--config", "bad.conf"]), 2);
}

#[test]
fn tune_surrogate_and_training_modes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["tune", "--surrogate", "--seed", "4", "--out", "s"]);
    let log = fs::read_to_string(d.join("s/ga_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 26);
    let best: serde_json::Value = serde_json::from_slice(&fs::read(d.join("s/best_weights.json")).unwrap()).unwrap();
    let (h, y) = (best["w_hypo"].as_f64().unwrap(), best["w_hyper"].as_f64().unwrap());
    assert!(((h - 3.0).powi(2) + (y - 2.0).powi(2)).sqrt() < 0.5, "({h}, {y})");

    ok(d, &["synth", "--days", "10", "--out", "a.csv"]);
    ok(
        d,
        &["tune", "--data", "a.csv", "--population", "4", "--generations", "3", "--fitness-epochs", "1", "--stride", "16", "--out", "t"],
    );
    let log = fs::read_to_string(d.join("t/ga_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);
    let best: serde_json::Value = serde_json::from_slice(&fs::read(d.join("t/best_weights.json")).unwrap()).unwrap();
    for key in ["w_hypo", "w_hyper"] {
        let w = best[key].as_f64().unwrap();
        assert!((1.0..=10.0).contains(&w), "{key} = {w}");
    }
}

#[test]
fn per_patient_glob_writes_patient_and_pooled_reports() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--seed", "1", "--days", "8", "--out", "pts/p1.csv"]);
    ok(d, &["synth", "--seed", "2", "--days", "8", "--out", "pts/p2.csv"]);
    ok(d, &with(&["train", "--glob", "pts/*.csv", "--out", "run"], FAST));
    ok(d, &["eval", "--glob", "pts/*.csv", "--checkpoint-dir", "run", "--out", "run"]);
    for f in ["run/p1/report.json", "run/p2/report.csv", "run/report_pooled.json", "run/report_pooled.csv"] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let p1: serde_json::Value = serde_json::from_slice(&fs::read(d.join("run/p1/report.json")).unwrap()).unwrap();
    let pooled: serde_json::Value = serde_json::from_slice(&fs::read(d.join("run/report_pooled.json")).unwrap()).unwrap();
    assert_eq!(pooled["n_samples"].as_u64().unwrap(), 2 * p1["n_samples"].as_u64().unwrap());

    ok(d, &with(&["train", "--glob", "pts/*.csv", "--pooled", "--out", "pooled"], FAST));
    assert!(d.join("pooled/checkpoint_seed0.json").is_file());
}
