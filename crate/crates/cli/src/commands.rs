//! The `synth`, `train`, `eval` and `experiment` commands.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use ncpdrive::data::{write_episode, Condition, Episode};
use ncpdrive::models::{Model, Variant};
use ncpdrive::training::{evaluate_prepared, fit_with, prepare_all, Prepared, TrainReport};
use ncpdrive::Error;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{DataSource, RunConfig};

pub const CHECKPOINT_FILE: &str = "model.ncpd";
pub const REPORT_FILE: &str = "report.txt";
pub const SUMMARY_FILE: &str = "report.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const TABLE_FILE: &str = "table.txt";
pub const RESULTS_HEADER: &str = "model,train_condition,eval_condition,mse";

/// Writes `n` synthetic frames and their drive log to `out_dir`.
pub fn cmd_synth(condition: Condition, n: usize, seed: u64, out_dir: &Path) -> anyhow::Result<Episode> {
    let episode = ncpdrive::data::synth_generate(condition, n, seed)?;
    write_episode(out_dir, &episode).with_context(|| format!("writing to {}", out_dir.display()))?;
    Ok(episode)
}

fn write_report(dir: &Path, stem: &str, report: &TrainReport) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.txt")), report.to_lines())?;
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    Ok(())
}

fn print_epoch(label: &str) -> impl FnMut(&ncpdrive::training::EpochRecord) + '_ {
    move |r| {
        let val = r.val_mse.map_or_else(|| "-".into(), |v| format!("{v:.6}"));
        eprintln!(
            "{label} epoch {:>2}: train {:.6} val {val} ({} steps)",
            r.epoch, r.train_mse, r.steps
        );
    }
}

pub struct TrainOutcome {
    pub model: Model,
    pub report: TrainReport,
    pub checkpoint: PathBuf,
}

/// Trains `config.variant` and writes the best-epoch checkpoint plus the
/// report into `config.out_dir`. A diverged run still leaves its partial
/// report behind.
pub fn cmd_train(config: &RunConfig) -> anyhow::Result<TrainOutcome> {
    config.validate()?;
    let episode = config.train_data.load()?;
    let mut model = Model::new(config.spec(config.variant, config.seed))?;
    let train = config.train_config(config.seed);
    let label = config.variant.to_string();
    let report = match fit_with(&mut model, &[episode], &train, print_epoch(&label)) {
        Ok(r) => r,
        Err(Error::Diverged(partial)) => {
            write_report(&config.out_dir, "report", &partial)?;
            return Err(Error::Diverged(partial).into());
        }
        Err(e) => return Err(e.into()),
    };
    write_report(&config.out_dir, "report", &report)?;
    let checkpoint = config.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&model, Some(config.train_data.condition), &checkpoint)?;
    Ok(TrainOutcome {
        model,
        report,
        checkpoint,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub train_condition: String,
    pub eval_condition: String,
    pub mse: f64,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{}",
            self.model, self.train_condition, self.eval_condition, self.mse
        )
    }
}

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_results(path: &Path, rows: &[ResultRow]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut text = String::new();
    if fresh {
        text.push_str(RESULTS_HEADER);
        text.push('\n');
    }
    for r in rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Evaluates a checkpoint on one data source, appending the result to
/// `results` when given.
pub fn cmd_eval(checkpoint: &Path, data: &DataSource, results: Option<&Path>) -> anyhow::Result<ResultRow> {
    let (model, meta) = load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let episode = data.load()?;
    let mse = evaluate_prepared(&model, &prepare_all(&[episode]))?;
    let row = ResultRow {
        model: model.spec().variant.to_string(),
        train_condition: meta.train_condition.map_or_else(|| "unknown".into(), |c| c.to_string()),
        eval_condition: data.condition.to_string(),
        mse,
    };
    if let Some(path) = results {
        append_results(path, std::slice::from_ref(&row))?;
    }
    Ok(row)
}

/// One trained model of an experiment.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    /// Best-epoch training MSE from the report.
    pub train_mse: f64,
    /// Stateful evaluation on the training condition, then each eval source.
    pub eval: Vec<(Condition, f64)>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunResult>,
    pub failures: Vec<(Variant, u64, String)>,
    pub table: String,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cell(xs: &[f64]) -> String {
    if xs.is_empty() {
        return "-".into();
    }
    let (m, s) = mean_std(xs);
    format!("{m:.5} ± {s:.5}")
}

/// Comparison table: per model, training MSE, MSE on every condition, and
/// the generalisation gap (eval on condition − eval on training condition),
/// each as mean ± sample standard deviation over seeds.
pub fn comparison_table(
    variants: &[Variant],
    train_condition: Condition,
    eval_conditions: &[Condition],
    runs: &[RunResult],
    failures: &[(Variant, u64, String)],
) -> String {
    let mut header = vec!["model".to_string(), "runs".into(), "train_mse".into()];
    header.push(format!("eval_{train_condition}"));
    header.extend(eval_conditions.iter().map(|c| format!("eval_{c}")));
    header.extend(eval_conditions.iter().map(|c| format!("gap_{c}")));
    let mut rows = vec![header];
    for &v in variants {
        let mine: Vec<&RunResult> = runs.iter().filter(|r| r.variant == v).collect();
        let col = |i: usize| mine.iter().map(|r| r.eval[i].1).collect::<Vec<_>>();
        let mut row = vec![v.to_string(), mine.len().to_string()];
        row.push(cell(&mine.iter().map(|r| r.train_mse).collect::<Vec<_>>()));
        for i in 0..=eval_conditions.len() {
            row.push(cell(&col(i)));
        }
        for i in 1..=eval_conditions.len() {
            let gaps: Vec<f64> = mine.iter().map(|r| r.eval[i].1 - r.eval[0].1).collect();
            row.push(cell(&gaps));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    for (v, seed, msg) in failures {
        let _ = writeln!(out, "failed: {v} seed {seed}: {msg}");
    }
    out
}

/// Trains every configured variant for every seed on the training source,
/// evaluates on the training condition and each eval source, and writes
/// `results.csv`, `table.txt` and per-run reports under `out_dir`. Failed
/// runs are listed under the table instead of aborting the experiment.
pub fn cmd_experiment(config: &RunConfig) -> anyhow::Result<ExperimentOutcome> {
    config.validate()?;
    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let train_episode = config.train_data.load()?;
    let train_condition = config.train_data.condition;
    let mut eval_sets: Vec<(Condition, Vec<Prepared>)> =
        vec![(train_condition, prepare_all(std::slice::from_ref(&train_episode)))];
    for source in &config.eval_data {
        eval_sets.push((source.condition, prepare_all(&[source.load()?])));
    }
    eprintln!("data ready in {:.1}s", start.elapsed().as_secs_f64());

    let train_eps = [train_episode];
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for &seed in &config.experiment.seeds {
        for &variant in &config.experiment.variants {
            let label = format!("{variant} seed {seed}");
            let run = || -> anyhow::Result<RunResult> {
                let mut model = Model::new(config.spec(variant, seed))?;
                let report = fit_with(&mut model, &train_eps, &config.train_config(seed), print_epoch(&label));
                let report = match report {
                    Err(Error::Diverged(partial)) => {
                        write_report(&out.join("reports"), &format!("{variant}-seed{seed}"), &partial)?;
                        return Err(Error::Diverged(partial).into());
                    }
                    r => r?,
                };
                write_report(&out.join("reports"), &format!("{variant}-seed{seed}"), &report)?;
                let eval = eval_sets
                    .iter()
                    .map(|(c, set)| Ok((*c, evaluate_prepared(&model, set)?)))
                    .collect::<anyhow::Result<Vec<_>>>()?;
                let train_mse = report.best().map_or(f64::NAN, |b| b.train_mse);
                Ok(RunResult {
                    variant,
                    seed,
                    train_mse,
                    eval,
                })
            };
            let t = Instant::now();
            match run() {
                Ok(r) => {
                    eprintln!("{label} done in {:.1}s", t.elapsed().as_secs_f64());
                    rows.extend(r.eval.iter().map(|&(c, mse)| ResultRow {
                        model: variant.to_string(),
                        train_condition: train_condition.to_string(),
                        eval_condition: c.to_string(),
                        mse,
                    }));
                    runs.push(r);
                }
                Err(e) => {
                    eprintln!("{label} failed: {e:#}");
                    failures.push((variant, seed, format!("{e:#}")));
                }
            }
        }
    }
    let results = out.join(RESULTS_FILE);
    if results.exists() {
        fs::remove_file(&results)?;
    }
    append_results(&results, &rows)?;
    let eval_conditions: Vec<Condition> = config.eval_data.iter().map(|d| d.condition).collect();
    let table = comparison_table(
        &config.experiment.variants,
        train_condition,
        &eval_conditions,
        &runs,
        &failures,
    );
    fs::write(out.join(TABLE_FILE), &table)?;
    eprintln!("experiment finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(ExperimentOutcome { runs, failures, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_reports_gaps_and_failures() {
        let runs = vec![RunResult {
            variant: Variant::Cnn,
            seed: 0,
            train_mse: 0.01,
            eval: vec![(Condition::Sunny, 0.02), (Condition::Night, 0.05)],
        }];
        let failures = vec![(Variant::CnnNcp, 0, "boom".to_string())];
        let t = comparison_table(
            &[Variant::Cnn, Variant::CnnNcp],
            Condition::Sunny,
            &[Condition::Night],
            &runs,
            &failures,
        );
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("model"));
        assert!(lines[0].contains("gap_night"));
        assert!(lines[1].contains("0.03000 ± 0.00000"));
        assert!(lines[2].starts_with("cnn-ncp"));
        assert!(lines[3].contains("boom"));
    }

    #[test]
    fn results_header_written_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let row = ResultRow {
            model: "cnn".into(),
            train_condition: "sunny".into(),
            eval_condition: "night".into(),
            mse: 0.5,
        };
        append_results(&path, std::slice::from_ref(&row)).unwrap();
        append_results(&path, &[row]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            format!("{RESULTS_HEADER}\ncnn,sunny,night,0.5\ncnn,sunny,night,0.5\n")
        );
    }
}
