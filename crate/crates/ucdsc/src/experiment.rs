//! Training and evaluation of single trials, in memory.

use anyhow::Context;
use ucdsc_core::data::{make_trials, relabel_for_trial, LabeledDataset, TestView, TrialSplit, Truth};
use ucdsc_core::eval::{
    aggregate_trials, attach_truths, evaluate, oscr, roc_points, score_samples, CurvePoint, MetricsReport,
    ScoreMode, ScoredPrediction, TrialMetrics,
};
use ucdsc_core::network::{train, MlpModel, TrainOutcome};
use ucdsc_core::SimplexCenters;

use crate::config::PreparedRun;
use crate::error::CliError;

/// Metrics and curves of one evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: TrialMetrics,
    pub roc: Vec<CurvePoint>,
    pub oscr: Vec<CurvePoint>,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub split: TrialSplit,
    pub outcome: TrainOutcome,
    pub evaluation: Evaluation,
}

pub fn splits(prep: &PreparedRun) -> Result<Vec<TrialSplit>, CliError> {
    let c = &prep.config;
    make_trials(
        prep.data.dataset.total_classes,
        c.protocol.num_known,
        c.protocol.num_trials,
        c.seed,
    )
    .map_err(CliError::config)
}

pub fn train_trial(prep: &PreparedRun, split: &TrialSplit) -> anyhow::Result<(TrainOutcome, TestView)> {
    let (train_view, test_view) =
        relabel_for_trial(&prep.data.dataset, split).with_context(|| format!("splitting trial {}", split.trial_index))?;
    let config = prep.config.train_config(train_view.dim(), split.trial_index);
    log::info!(
        "trial {}: known {:?}, {} training samples, seed {}",
        split.trial_index,
        split.known_classes,
        train_view.len(),
        config.seed
    );
    let outcome = train(&train_view, &prep.background, &config)
        .with_context(|| format!("training trial {}", split.trial_index))?;
    if let Some(last) = outcome.history.last() {
        log::info!("trial {}: final mean loss {:.6}", split.trial_index, last.total);
    }
    Ok((outcome, test_view))
}

pub fn predictions(
    model: &MlpModel,
    centers: &SimplexCenters,
    view: &TestView,
    mode: ScoreMode,
) -> anyhow::Result<Vec<ScoredPrediction>> {
    let features = model.embed(&view.samples)?;
    let scored = score_samples(&features, centers, mode)?;
    Ok(attach_truths(&scored, &view.truths)?)
}

pub fn evaluate_predictions(preds: &[ScoredPrediction]) -> anyhow::Result<Evaluation> {
    let metrics = evaluate(preds)?;
    let roc = roc_points(preds)?;
    let (oscr, _) = oscr(preds)?;
    Ok(Evaluation { metrics, roc, oscr })
}

pub fn run_trial(prep: &PreparedRun, split: &TrialSplit) -> anyhow::Result<TrialRun> {
    let (outcome, test_view) = train_trial(prep, split)?;
    let preds = predictions(&outcome.model, &outcome.centers, &test_view, prep.config.score_mode)?;
    let evaluation = evaluate_predictions(&preds)?;
    log::info!(
        "trial {}: acc {:.4} auroc {:.4} oscr {:.4}",
        split.trial_index,
        evaluation.metrics.acc,
        evaluation.metrics.auroc,
        evaluation.metrics.oscr
    );
    Ok(TrialRun {
        split: split.clone(),
        outcome,
        evaluation,
    })
}

/// Trains and evaluates every trial of the protocol in order.
pub fn run_suite(prep: &PreparedRun) -> Result<(Vec<TrialRun>, MetricsReport), CliError> {
    let runs = splits(prep)?
        .iter()
        .map(|s| run_trial(prep, s))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let metrics: Vec<TrialMetrics> = runs.iter().map(|r| r.evaluation.metrics).collect();
    let report = aggregate_trials(&metrics).map_err(anyhow::Error::from)?;
    Ok((runs, report))
}

/// Training-set knowns together with the test view's unknowns.
pub fn train_knowns_view(train: &LabeledDataset, test: &TestView) -> anyhow::Result<TestView> {
    let unknown: Vec<usize> = (0..test.len()).filter(|&i| !test.truths[i].is_known()).collect();
    let mut rows: Vec<Vec<f64>> = train.samples.to_rows();
    rows.extend(test.samples.select_rows(&unknown).to_rows());
    let mut truths: Vec<Truth> = train.labels.iter().map(|&l| Truth::Known(l)).collect();
    truths.extend(unknown.iter().map(|_| Truth::Unknown));
    let samples = ucdsc_core::Matrix::from_rows(&rows)?;
    Ok(TestView { samples, truths })
}
