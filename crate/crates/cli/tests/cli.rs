use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tsimg::io::{read_pgm, read_results_csv};

fn tsimg() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tsimg"));
    c.env_remove("TSIMG_SEED");
    c
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_ett(path: &Path, steps: usize) {
    let mut s = String::from("date,HUFL,OT\n");
    for t in 0..steps {
        let v = (std::f64::consts::TAU * t as f64 / 24.0).sin();
        s.push_str(&format!("2016-07-{:02} {:02}:00:00,{v},{}\n", 1 + t / 24, t % 24, 2.0 * v + 1.0));
    }
    fs::write(path, s).unwrap();
}

const SMALL_MODEL: [&str; 8] = ["--image-size", "16", "--patch-size", "8", "--embed-dim", "8", "--heads", "2"];

fn train_forecaster(out: &Path) -> Output {
    tsimg()
        .args(["train", "--task", "forecast-linear", "--arch", "wolvm", "--imaging", "uvh"])
        .args(["--synthetic", "sine", "--period", "8", "--length", "400", "--segment", "8"])
        .args(["--lookback", "32", "--horizon", "8", "--stride", "4", "--epochs", "2", "--jobs", "1"])
        .args(SMALL_MODEL)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn render_gaf_is_square_in_window_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.pgm");
    let o = tsimg()
        .args(["render", "--synthetic", "sine", "--method", "gaf", "--window", "100"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let img = read_pgm(&out).unwrap();
    assert_eq!((img.height(), img.width()), (100, 100));
    let csv = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(csv.lines().count(), 100);
    assert!(dir.path().join("g.config.txt").exists());
    assert_eq!(stdout(&o), "height,width\n100,100\n");
}

#[test]
fn render_uvh_on_ett_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ett.csv");
    write_ett(&input, 240);
    let out = dir.path().join("u.pgm");
    let o = tsimg()
        .args(["render", "--method", "uvh", "--L", "24", "--variate", "1"])
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let img = read_pgm(&out).unwrap();
    assert_eq!((img.height(), img.width()), (24, 10));
}

#[test]
fn render_rejects_bad_variate_and_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.pgm");
    let o = tsimg()
        .args(["render", "--synthetic", "sine", "--method", "mosaic"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = tsimg()
        .args(["render", "--synthetic", "sine", "--method", "gaf", "--variate", "3"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsimg()
        .args(["train", "--task", "forecast-linear", "--arch", "wolvm", "--imaging", "uvh"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsimg()
        .args(["render", "--method", "gaf", "--input", "/nonexistent/ett.csv"])
        .arg("--out")
        .arg(dir.path().join("x.pgm"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reconstruction_with_gaf_explains_routing() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsimg()
        .args(["train", "--task", "forecast-reconstruct", "--arch", "minimae", "--imaging", "gaf"])
        .args(["--synthetic", "sine"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("raw values"), "{}", stderr(&o));
}

#[test]
fn train_writes_a_complete_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = train_forecaster(&out);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["checkpoint.bin", "history.csv", "metrics.csv", "timings.csv", "config.txt", "seed", "version"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("segment = 8\n"));
    assert!(config.contains("task = forecast-linear\n"));
    let rows = read_results_csv(&out.join("metrics.csv")).unwrap();
    assert!(rows[0].mse.unwrap().is_finite());
}

#[test]
fn eval_reproduces_training_metrics_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(train_forecaster(&out).status.success());
    let trained = read_results_csv(&out.join("metrics.csv")).unwrap();
    let eval = || {
        tsimg()
            .arg("eval")
            .arg("--checkpoint")
            .arg(out.join("checkpoint.bin"))
            .args(["--perturb", "sf-all", "--seed", "9"])
            .output()
            .unwrap()
    };
    let (a, b) = (eval(), eval());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("clean,test,"));
    assert!(lines[2].starts_with("sf-all,test,"));
    assert!(lines[3].starts_with("sf-all-drop-percent,test,"));
    let clean_mse: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(clean_mse.to_bits(), trained[0].mse.unwrap().to_bits());
}

#[test]
fn eval_without_run_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsimg()
        .arg("eval")
        .arg("--checkpoint")
        .arg(dir.path().join("checkpoint.bin"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn classify_with_gaf_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.csv");
    let mut s = String::new();
    for n in 0..20 {
        let vals: Vec<String> = (0..16).map(|t| format!("{}", ((t * (n % 2 + 1)) as f64).sin())).collect();
        s.push_str(&format!("{},{}\n", vals.join(","), n % 2));
    }
    fs::write(&input, s).unwrap();
    let out = dir.path().join("run");
    let o = tsimg()
        .args(["train", "--task", "classify", "--arch", "lvm2attn", "--imaging", "gaf", "--format", "windows"])
        .args(["--epochs", "2", "--jobs", "1"])
        .args(SMALL_MODEL)
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("history.csv").exists());
    let rows = read_results_csv(&out.join("metrics.csv")).unwrap();
    let acc = rows[0].accuracy.unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "# small lemma run\nk = 4\ni_max = 3   # trailing comment\n",
    )
    .unwrap();
    let o = tsimg().arg("lemma").arg("--config").arg(&cfg).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("4,1,"));
    let o = tsimg().arg("lemma").arg("--config").arg(&cfg).args(["--k", "6"]).output().unwrap();
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("6,1,"));
}

#[test]
fn malformed_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "k 4\n").unwrap();
    let o = tsimg().arg("lemma").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = tsimg()
        .env("TSIMG_SEED", "77")
        .args(["train", "--task", "forecast-linear", "--arch", "wolvm", "--imaging", "mvh"])
        .args(["--synthetic", "ar1", "--length", "600", "--lookback", "32", "--horizon", "4"])
        .args(["--epochs", "1", "--stride", "8", "--jobs", "1"])
        .args(SMALL_MODEL)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("seed")).unwrap().trim(), "77");
}

#[test]
fn lemma_prints_closed_form_row() {
    let o = tsimg().args(["lemma", "--k", "6", "--i-max", "12"]).output().unwrap();
    assert!(o.status.success());
    let n: Vec<usize> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(n, vec![6, 3, 2, 3, 6, 1, 6, 3, 2, 3, 6, 1]);
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn lemma_rejects_zero() {
    let o = tsimg().args(["lemma", "--k", "6", "--i-max", "0"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = tsimg().args(["lemma", "--k", "0", "--i-max", "3"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lemma_full_table_agrees() {
    let o = tsimg().args(["lemma", "--k", "24", "--i-max", "24", "--all-k"]).output().unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1 + 24 * 24);
}

#[test]
fn sweep_rejects_unknown_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsimg()
        .args(["sweep", "--kind", "horizon", "--synthetic", "sine"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn segment_sweep_emits_rows_with_n_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = tsimg()
        .args(["sweep", "--kind", "segment", "--k", "6", "--i-max", "12", "--segment", "24"])
        .args(["--synthetic", "sine", "--length", "3000", "--lookback", "96", "--horizon", "24"])
        .args(["--image-size", "16", "--patch-size", "4", "--embed-dim", "8", "--heads", "2"])
        .args(["--epochs", "1", "--stride", "16"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_results_csv(&out.join("results.csv")).unwrap();
    let seg: Vec<_> = rows.iter().filter(|r| r.experiment_id == "segment").collect();
    assert_eq!(seg.len(), 12);
    let axis: Vec<String> = seg.iter().map(|r| r.axis_value.clone()).collect();
    assert_eq!(axis, (1..=12).map(|i| (4 * i).to_string()).collect::<Vec<_>>());
    assert!(seg.iter().all(|r| r.seconds.is_none() && r.n_value.is_some()));
    assert!(rows.iter().any(|r| r.experiment_id == "segment-zero-estimate"));
    let timings = fs::read_to_string(out.join("timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 13);
}

#[test]
fn segment_sweep_needs_integer_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsimg()
        .args(["sweep", "--kind", "segment", "--k", "5", "--i-max", "3", "--segment", "24"])
        .args(["--synthetic", "sine", "--length", "3000"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn lookback_sweep_skips_lengths_that_do_not_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lb");
    let o = tsimg()
        .args(["sweep", "--kind", "lookback", "--task", "forecast-linear", "--arch", "wolvm"])
        .args(["--synthetic", "sine", "--length", "1200", "--horizon", "24", "--segment", "24"])
        .args(["--epochs", "1", "--stride", "16"])
        .args(SMALL_MODEL)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_results_csv(&out.join("results.csv")).unwrap();
    let axis: Vec<&str> = rows.iter().map(|r| r.axis_value.as_str()).collect();
    assert_eq!(axis, ["48", "96"]);
    let skipped = fs::read_to_string(out.join("skipped.csv")).unwrap();
    assert_eq!(skipped.lines().count(), 7);
}
