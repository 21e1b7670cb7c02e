use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use tsimg::evaluation::{
    evaluate_classification, evaluate_forecast, forecast_windows, lemma_table, lookback_sweep, performance_drop,
    run_forecast, segment_sweep, Better, PerturbMode, SweepResult, STUDY_LOOKBACKS,
};
use tsimg::framework::{check_routing, render_window, ImagingMethod, Pipeline};
use tsimg::io::{load_checkpoint, results_to_string, save_checkpoint, write_pgm, write_pixels_csv, write_results_csv, ResultRow};
use tsimg::models::{Arch, Model, TaskKind};
use tsimg::series::WindowSample;
use tsimg::training::{train, History, TrainConfig};
use tsimg::Exec;

use crate::args::{Cli, Command, EvalArgs, LemmaArgs, RenderArgs, Split, SweepArgs, SweepKind, TrainArgs};
use crate::config::{pairs_to_flags, parse_config, render_config, set_pair, write_run_record};
use crate::data::{forecast_job, imaging_params, load_labeled, load_series, model_config, train_config, ForecastJob};
use crate::UsageError;

pub fn run(cmd: Command, pairs: Vec<(String, String)>) -> Result<()> {
    match cmd {
        Command::Render(a) => cmd_render(&a, pairs),
        Command::Train(a) => cmd_train(&a, pairs),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a, pairs),
        Command::Lemma(a) => cmd_lemma(&a),
    }
}

fn exec_for(jobs: usize) -> Result<Exec> {
    if jobs == 1 {
        return Ok(Exec::Sequential);
    }
    tsimg::exec::configure_threads(jobs)?;
    Ok(Exec::Parallel)
}

fn required<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| UsageError(format!("{flag} is required")).into())
}

fn results_text(rows: &[ResultRow], dir: &Path, name: &str) -> Result<String> {
    write_results_csv(&dir.join(name), rows)?;
    Ok(results_to_string(rows)?)
}

fn record_input(pairs: &mut Vec<(String, String)>, input: &Option<PathBuf>) {
    if let Some(p) = input {
        if let Ok(abs) = fs::canonicalize(p) {
            set_pair(pairs, "input", abs.display().to_string());
        }
    }
}

fn cmd_render(a: &RenderArgs, mut pairs: Vec<(String, String)>) -> Result<()> {
    let method = required(a.imaging.method, "--method")?;
    let series = load_series(&a.data, a.seed)?;
    if a.variate >= series.dims() {
        bail!(UsageError(format!("--variate {} but the series has {} variates", a.variate, series.dims())));
    }
    let end = match a.window {
        Some(w) => a.start + w,
        None => series.len(),
    };
    if a.start >= end || end > series.len() {
        bail!(UsageError(format!("steps {}..{end} are outside a series of length {}", a.start, series.len())));
    }
    let rows: Vec<Vec<f64>> = if method.is_multivariate() {
        series.rows().iter().map(|r| r[a.start..end].to_vec()).collect()
    } else {
        vec![series.variate(a.variate)[a.start..end].to_vec()]
    };
    let img = render_window(method, &rows, &imaging_params(&a.imaging))?.remove(0);
    write_pgm(&img, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_pixels_csv(&img, &a.out.with_extension("csv"))?;
    record_input(&mut pairs, &a.data.input);
    fs::write(a.out.with_extension("config.txt"), render_config(&pairs))?;
    println!("height,width\n{},{}", img.height(), img.width());
    Ok(())
}

enum Job {
    Forecast(ForecastJob),
    Classify {
        pipeline: Pipeline,
        splits: [Vec<WindowSample>; 3],
        fit: TrainConfig,
    },
}

/// Validates routing, loads data and builds the pipeline. Resolved values
/// that were not given as flags are added to `pairs`.
fn prepare(a: &TrainArgs, pairs: &mut Vec<(String, String)>) -> Result<Job> {
    let task = required(a.model.task, "--task")?;
    let arch = required(a.model.arch, "--arch")?;
    let method = required(a.imaging.method, "--imaging")?;
    check_routing(task, arch, method)?;
    let exec = exec_for(a.run.jobs)?;
    let fit = train_config(&a.fit, task, a.run.seed, exec);
    fit.validate()?;
    let mut model = model_config(&a.model, arch, task);
    if task == TaskKind::Classify {
        let (splits, classes) = load_labeled(&a.data)?;
        model.num_classes = classes.max(2);
        let variates = splits[0][0].lookback.len();
        let pipeline = Pipeline::new(method, imaging_params(&a.imaging), model, variates, 0)?;
        return Ok(Job::Classify { pipeline, splits, fit });
    }
    let job = forecast_job(&a.data, &a.imaging, method, model, fit, &a.forecast)?;
    if let Some(l) = job.setup.imaging.period {
        set_pair(pairs, "segment", l.to_string());
    }
    Ok(job).map(Job::Forecast)
}

fn cmd_train(a: &TrainArgs, mut pairs: Vec<(String, String)>) -> Result<()> {
    let job = prepare(a, &mut pairs)?;
    record_input(&mut pairs, &a.data.input);
    write_run_record(&a.out, &pairs, a.run.seed)?;
    let (model, history, row, seconds): (Model, History, ResultRow, f64) = match job {
        Job::Forecast(job) => {
            let run = run_forecast(&job.setup, &job.data)?;
            let row = ResultRow {
                experiment_id: "train".into(),
                axis_value: "test".into(),
                mse: Some(run.scores.mse),
                mae: Some(run.scores.mae),
                ..Default::default()
            };
            (run.model, run.history, row, run.train_seconds)
        }
        Job::Classify { pipeline, splits, fit } => {
            let tr = pipeline.examples_batch(&splits[0], fit.exec)?;
            let va = pipeline.examples_batch(&splits[1], fit.exec)?;
            let start = Instant::now();
            let (params, history) = train(&pipeline.model, &tr, &va, &fit)?;
            let seconds = start.elapsed().as_secs_f64();
            let model = Model::from_params(pipeline.model.clone(), params)?;
            let acc = evaluate_classification(&pipeline, &model, &splits[2], None, fit.exec)?;
            let row = ResultRow {
                experiment_id: "train".into(),
                axis_value: "test".into(),
                accuracy: Some(acc),
                ..Default::default()
            };
            (model, history, row, seconds)
        }
    };
    save_checkpoint(&model.params, &a.out.join("checkpoint.bin"))?;
    fs::write(a.out.join("history.csv"), history.to_csv())?;
    fs::write(a.out.join("timings.csv"), format!("experiment_id,axis_value,seconds\ntrain,test,{seconds}\n"))?;
    let text = results_text(&[row], &a.out, "metrics.csv")?;
    eprintln!(
        "trained {} epochs (best {}) in {seconds:.1}s",
        history.epochs.len(),
        history.best_epoch
    );
    print!("{text}");
    Ok(())
}

/// Rebuilds the training invocation recorded next to `checkpoint`.
fn recorded_train_args(checkpoint: &Path) -> Result<TrainArgs> {
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let path = dir.join("config.txt");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut argv: Vec<std::ffi::OsString> = vec!["tsimg".into(), "train".into()];
    argv.extend(pairs_to_flags(&parse_config(&text)?));
    match Cli::try_parse_from(argv).with_context(|| format!("{} is not a train config", path.display()))? {
        Cli {
            command: Command::Train(t),
            ..
        } => Ok(t),
        _ => bail!("{} is not a train config", path.display()),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut t = recorded_train_args(&a.checkpoint)?;
    t.run.jobs = a.jobs;
    let job = prepare(&t, &mut Vec::new())?;
    let params = load_checkpoint(&a.checkpoint).with_context(|| format!("reading {}", a.checkpoint.display()))?;
    let split = match a.split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    };
    let mode = a.perturb.map(|k| PerturbMode::new(k, a.seed));
    let mut rows = Vec::new();
    match job {
        Job::Forecast(job) => {
            let series = match a.split {
                Split::Train => &job.data.train,
                Split::Val => &job.data.val,
                Split::Test => &job.data.test,
            };
            let pipeline = job.setup.pipeline(job.data.variates())?;
            let model = Model::from_params(pipeline.model.clone(), params)?;
            let exec = job.setup.train.exec;
            let windows = forecast_windows(series, job.setup.lookback, job.setup.horizon, job.setup.eval_stride)?;
            let clean = evaluate_forecast(&pipeline, &model, &windows, None, exec)?;
            rows.push(ResultRow {
                experiment_id: "clean".into(),
                axis_value: split.into(),
                mse: Some(clean.mse),
                mae: Some(clean.mae),
                ..Default::default()
            });
            if let Some(m) = mode {
                let p = evaluate_forecast(&pipeline, &model, &windows, Some(m), exec)?;
                let drop_mse = performance_drop(clean.mse, p.mse, Better::Lower)?;
                rows.push(ResultRow {
                    experiment_id: m.kind.to_string(),
                    axis_value: split.into(),
                    mse: Some(p.mse),
                    mae: Some(p.mae),
                    ..Default::default()
                });
                rows.push(ResultRow {
                    experiment_id: format!("{}-drop-percent", m.kind),
                    axis_value: split.into(),
                    mse: Some(drop_mse),
                    mae: Some(performance_drop(clean.mae, p.mae, Better::Lower)?),
                    ..Default::default()
                });
                eprintln!("{}: mse {:.4} -> {:.4} ({drop_mse:+.1}%)", m.kind, clean.mse, p.mse);
            }
        }
        Job::Classify { pipeline, splits, fit } => {
            let samples = &splits[a.split as usize];
            let model = Model::from_params(pipeline.model.clone(), params)?;
            let clean = evaluate_classification(&pipeline, &model, samples, None, fit.exec)?;
            rows.push(ResultRow {
                experiment_id: "clean".into(),
                axis_value: split.into(),
                accuracy: Some(clean),
                ..Default::default()
            });
            if let Some(m) = mode {
                let p = evaluate_classification(&pipeline, &model, samples, Some(m), fit.exec)?;
                rows.push(ResultRow {
                    experiment_id: m.kind.to_string(),
                    axis_value: split.into(),
                    accuracy: Some(p),
                    ..Default::default()
                });
                if clean > 0.0 {
                    rows.push(ResultRow {
                        experiment_id: format!("{}-drop-percent", m.kind),
                        axis_value: split.into(),
                        accuracy: Some(performance_drop(clean, p, Better::Higher)?),
                        ..Default::default()
                    });
                }
            }
        }
    }
    if let Some(path) = &a.out {
        write_results_csv(path, &rows)?;
    }
    let text = results_to_string(&rows)?;
    print!("{text}");
    Ok(())
}

fn sweep_rows(res: &SweepResult) -> Vec<ResultRow> {
    res.rows
        .iter()
        .map(|r| ResultRow {
            experiment_id: res.experiment_id.clone(),
            axis_value: r.axis_value.to_string(),
            mse: Some(r.mse),
            mae: Some(r.mae),
            n_value: r.n_value,
            normalized_mse: Some(r.normalized_mse),
            ..Default::default()
        })
        .collect()
}

fn cmd_sweep(a: &SweepArgs, mut pairs: Vec<(String, String)>) -> Result<()> {
    let task = a.model.task.unwrap_or(TaskKind::ForecastReconstruct);
    let arch = a.model.arch.unwrap_or(Arch::MiniMae);
    let method = a.imaging.method.unwrap_or(ImagingMethod::Uvh);
    if task == TaskKind::Classify {
        bail!(UsageError("sweeps train forecasters; use forecast-linear or forecast-reconstruct".into()));
    }
    if a.kind == SweepKind::Segment && method != ImagingMethod::Uvh {
        bail!(UsageError(format!("a segment sweep varies the UVH segment length; --imaging {method} has none")));
    }
    check_routing(task, arch, method)?;
    let exec = exec_for(a.run.jobs)?;
    let fit = train_config(&a.fit, task, a.run.seed, exec);
    fit.validate()?;
    let model = model_config(&a.model, arch, task);
    let job = forecast_job(&a.data, &a.imaging, method, model, fit, &a.forecast)?;
    if let Some(l) = job.setup.imaging.period {
        set_pair(&mut pairs, "segment", l.to_string());
    }
    record_input(&mut pairs, &a.data.input);
    write_run_record(&a.out, &pairs, a.run.seed)?;

    let mut rows;
    let res = match a.kind {
        SweepKind::Segment => {
            let period = job.setup.imaging.period.expect("uvh period is resolved");
            let i_values: Vec<usize> = (1..=a.i_max as usize).collect();
            let res = segment_sweep(&job.setup, &job.data, period, a.k as usize, &i_values, exec)?;
            rows = sweep_rows(&res);
            if let Some(est) = res.zero_length_estimate(period) {
                let lo = res.rows.iter().map(|r| r.mse).fold(f64::INFINITY, f64::min);
                let hi = res.rows.iter().map(|r| r.mse).fold(f64::NEG_INFINITY, f64::max);
                rows.push(ResultRow {
                    experiment_id: "segment-zero-estimate".into(),
                    axis_value: "0".into(),
                    mse: Some(est),
                    normalized_mse: Some(if hi > lo { (est - lo) / (hi - lo) } else { 0.0 }),
                    ..Default::default()
                });
            }
            res
        }
        SweepKind::Lookback => {
            let lengths = if a.lengths.is_empty() { STUDY_LOOKBACKS.to_vec() } else { a.lengths.clone() };
            let res = lookback_sweep(&job.setup, &job.data, &lengths, exec)?;
            rows = sweep_rows(&res);
            let mut skipped = String::from("axis_value,reason\n");
            for (h, why) in &res.skipped {
                eprintln!("skipped look-back {h}: {why}");
                let _ = writeln!(skipped, "{h},\"{}\"", why.replace('"', "'"));
            }
            fs::write(a.out.join("skipped.csv"), skipped)?;
            res
        }
    };
    let mut timings = String::from("experiment_id,axis_value,seconds\n");
    for r in &res.rows {
        let _ = writeln!(timings, "{},{},{}", res.experiment_id, r.axis_value, r.seconds);
    }
    fs::write(a.out.join("timings.csv"), timings)?;
    let text = results_text(&rows, &a.out, "results.csv")?;
    print!("{text}");
    Ok(())
}

fn cmd_lemma(a: &LemmaArgs) -> Result<()> {
    let (k, i_max) = (a.k as usize, a.i_max as usize);
    let rows = lemma_table(k, i_max, exec_for(a.jobs)?)?;
    let mut out = String::from("k,i,closed_form,brute_force,agrees\n");
    let mut bad = 0;
    for r in rows.iter().filter(|r| a.all_k || r.k == k) {
        bad += usize::from(!r.agrees());
        let _ = writeln!(out, "{},{},{},{},{}", r.k, r.i, r.closed_form, r.brute_force, r.agrees());
    }
    print!("{out}");
    let curve: Vec<usize> = rows.iter().filter(|r| r.k == k).map(|r| r.closed_form).collect();
    eprintln!("n for k={k}: {curve:?}");
    if bad > 0 {
        bail!("{bad} cells disagree with simulation");
    }
    Ok(())
}
