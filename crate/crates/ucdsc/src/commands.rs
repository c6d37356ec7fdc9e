//! The five subcommands. Each validates its whole input before creating
//! any output file.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use ucdsc_core::data::{relabel_for_trial, TrialSplit};
use ucdsc_core::eval::{aggregate_trials, MetricsReport, ScoreMode};
use ucdsc_core::simplex::build_simplex;
use ucdsc_core::SimplexCenters;

use crate::config::{AblationGrid, PreparedRun, RunConfig};
use crate::error::CliError;
use crate::experiment::{evaluate_predictions, predictions, run_suite, splits, train_knowns_view, train_trial, TrialRun};
use crate::formats::{read_json, write_centers, write_curve, write_json, write_label_map, write_loss_history, ModelCheckpoint};

/// Options shared by every subcommand; `seed` and `score_mode` override the
/// config file.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub score_mode: Option<ScoreMode>,
}

impl Common {
    fn config_path(&self) -> Result<&Path, CliError> {
        self.config
            .as_deref()
            .ok_or_else(|| CliError::Usage("--config <path> is required".into()))
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Usage("--out <dir> is required".into()))
    }

    fn apply(&self, config: &mut RunConfig, base: &Path) {
        config.resolve_paths(base);
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(mode) = self.score_mode {
            config.score_mode = mode;
        }
    }

    fn load_run(&self) -> Result<PreparedRun, CliError> {
        let path = self.config_path()?;
        let mut config = RunConfig::from_path(path)?;
        self.apply(&mut config, parent(path));
        config.prepare()
    }
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CliError::Runtime)
}

/// Builds the simplex and reports how far it is from the ideal one.
pub fn simplex_check(num_classes: usize, feature_dim: usize, radius: f64) -> Result<String, CliError> {
    let centers = build_simplex(num_classes, feature_dim, radius).map_err(|e| CliError::Usage(e.to_string()))?;
    let dev = centers.deviation();
    let mut report = String::new();
    let _ = writeln!(report, "classes {num_classes}, dim {feature_dim}, radius {radius}");
    let _ = writeln!(report, "max equinorm deviation     {:.3e}", dev.equinorm);
    let _ = writeln!(report, "max equiangular deviation  {:.3e}", dev.equiangular);
    let _ = writeln!(report, "zero-sum deviation         {:.3e}", dev.zero_sum);
    let _ = writeln!(
        report,
        "mean pairwise dot          {} (target {})",
        dev.mean_pairwise_dot,
        -radius * radius / (num_classes as f64 - 1.0)
    );
    if dev.within(1e-9) {
        Ok(report)
    } else {
        Err(CliError::Runtime(anyhow::anyhow!("simplex invariants violated\n{report}")))
    }
}

fn write_training(dir: &Path, prep: &PreparedRun, run_split: &TrialSplit, outcome: &ucdsc_core::network::TrainOutcome) -> anyhow::Result<()> {
    let config = &prep.config;
    let ck = ModelCheckpoint::new(&outcome.model, config.expand_factor, outcome.centers.num_classes());
    write_json(&dir.join("model.json"), &ck)?;
    write_centers(&dir.join("centers.json"), &outcome.centers)?;
    write_loss_history(&dir.join("loss_history.csv"), &outcome.history)?;
    write_json(&dir.join("split.json"), run_split)?;
    Ok(())
}

fn write_label_map_if_any(dir: &Path, prep: &PreparedRun) -> anyhow::Result<()> {
    if let Some(map) = &prep.data.label_map {
        log::warn!("dataset labels were not 0..K; wrote the remapping to label_map.json");
        write_label_map(&dir.join("label_map.json"), map)?;
    }
    Ok(())
}

fn write_evaluation(dir: &Path, eval: &crate::experiment::Evaluation) -> anyhow::Result<()> {
    let report = aggregate_trials(&[eval.metrics])?;
    write_json(&dir.join("metrics.json"), &report)?;
    write_curve(&dir.join("roc.csv"), &eval.roc)?;
    write_curve(&dir.join("oscr.csv"), &eval.oscr)?;
    Ok(())
}

/// Trains trial 0 of the protocol and writes its checkpoint.
pub fn train(common: &Common) -> Result<(), CliError> {
    let prep = common.load_run()?;
    let out = common.out_dir()?;
    let split = splits(&prep)?.swap_remove(0);
    let (outcome, _) = train_trial(&prep, &split)?;
    create_out(out)?;
    write_training(out, &prep, &split, &outcome)?;
    write_label_map_if_any(out, &prep)?;
    Ok(())
}

/// Which samples `eval` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum View {
    /// Held-out knowns and all unknowns.
    #[default]
    Test,
    /// Training knowns and all unknowns.
    Train,
}

/// Evaluates a checkpoint directory written by `train`.
pub fn eval(common: &Common, checkpoint: &Path, split: Option<&Path>, view: View) -> Result<(), CliError> {
    let prep = common.load_run()?;
    let out = common.out_dir()?;
    let ck: ModelCheckpoint = read_json(&checkpoint.join("model.json"))?;
    let model = ck.to_model()?;
    let centers: SimplexCenters = read_json(&checkpoint.join("centers.json"))?;
    let split_path = split.map(Path::to_path_buf).unwrap_or_else(|| checkpoint.join("split.json"));
    let split: TrialSplit = read_json(&split_path)?;

    let data = &prep.data.dataset;
    if model.input_dim() != data.dim() {
        return Err(CliError::config(format!(
            "checkpoint expects {} input features, dataset has {}",
            model.input_dim(),
            data.dim()
        )));
    }
    if model.output_dim() != centers.feature_dim() || centers.num_classes() != split.known_classes.len() {
        return Err(CliError::config(
            "checkpoint, centers and split disagree on feature width or class count",
        ));
    }
    let (train_view, test_view) = relabel_for_trial(data, &split).map_err(CliError::config)?;
    if test_view.num_unknown() == 0 {
        return Err(CliError::config("the split has no unknown samples to evaluate against"));
    }
    let view = match view {
        View::Test => test_view,
        View::Train => train_knowns_view(&train_view, &test_view)?,
    };
    let preds = predictions(&model, &centers, &view, prep.config.score_mode)?;
    let evaluation = evaluate_predictions(&preds)?;
    create_out(out)?;
    write_evaluation(out, &evaluation)?;
    Ok(())
}

fn write_trial(dir: &Path, prep: &PreparedRun, run: &TrialRun) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_training(dir, prep, &run.split, &run.outcome)?;
    write_evaluation(dir, &run.evaluation)
}

/// Runs every trial of the protocol and writes `trial_k/` plus `summary.json`.
pub fn trials(common: &Common) -> Result<MetricsReport, CliError> {
    let prep = common.load_run()?;
    let out = common.out_dir()?;
    let (runs, report) = run_suite(&prep)?;
    create_out(out)?;
    for run in &runs {
        write_trial(&out.join(format!("trial_{}", run.split.trial_index)), &prep, run)?;
    }
    write_json(&out.join("summary.json"), &report)?;
    write_label_map_if_any(out, &prep)?;
    Ok(report)
}

/// Runs the trial suite for every grid cell and writes `ablation.csv`.
pub fn ablate(common: &Common) -> Result<(), CliError> {
    let path = common.config_path()?;
    let out = common.out_dir()?;
    let mut grid = AblationGrid::from_path(path)?;
    common.apply(&mut grid.base, parent(path));
    let cells = grid.cells()?;
    let prepared = cells
        .iter()
        .map(|c| c.config.prepare())
        .collect::<Result<Vec<_>, _>>()?;
    log::info!("ablation over {} cells", cells.len());

    let reports = prepared
        .par_iter()
        .map(|p| run_suite(p).map(|(_, report)| report))
        .collect::<Result<Vec<_>, _>>()?;

    let mut text = String::new();
    let names: Vec<&str> = cells[0].values.iter().map(|(n, _)| *n).collect();
    let _ = writeln!(text, "{},auroc,oscr,acc", names.join(","));
    for (cell, report) in cells.iter().zip(&reports) {
        for (_, v) in &cell.values {
            let _ = write!(text, "{v},");
        }
        let m = report.mean;
        let _ = writeln!(text, "{},{},{}", m.auroc, m.oscr, m.acc);
    }
    create_out(out)?;
    let csv_path = out.join("ablation.csv");
    let mut f = fs::File::create(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))?;
    f.write_all(text.as_bytes()).context("writing ablation.csv")?;
    Ok(())
}
