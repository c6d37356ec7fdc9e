//! On-disk formats: CSV datasets, JSON checkpoints and reports, CSV curves
//! and loss histories.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use ucdsc_core::data::LabeledDataset;
use ucdsc_core::eval::CurvePoint;
use ucdsc_core::network::{EpochLoss, MlpModel};
use ucdsc_core::{Matrix, SimplexCenters};

use crate::error::CliError;

/// A CSV-ingested dataset and, when the file's labels were not already
/// `0..K`, the mapping from original to dense labels.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub dataset: LabeledDataset,
    pub label_map: Option<BTreeMap<i64, usize>>,
}

/// Reads a header-less CSV whose first column is an integer label and whose
/// remaining columns are features.
pub fn load_csv(path: &Path) -> Result<CsvDataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| CliError::Parse(format!("{}: line {line}: {e}", path.display())))?;
        if record.len() < 2 {
            return Err(CliError::Parse(format!(
                "{}: line {line}: expected a label and at least one feature",
                path.display()
            )));
        }
        let w = record.len() - 1;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(CliError::Parse(format!(
                    "{}: line {line}: ragged row with {w} features, expected {expected}",
                    path.display()
                )))
            }
            _ => {}
        }
        let label: i64 = record[0].parse().map_err(|_| {
            CliError::Parse(format!(
                "{}: line {line}: label `{}` is not an integer",
                path.display(),
                &record[0]
            ))
        })?;
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Parse(format!("{}: line {line}: `{field}` is not a number", path.display()))
            })?;
            data.push(v);
        }
    }
    let width = width.ok_or_else(|| CliError::Parse(format!("{}: file has no rows", path.display())))?;

    let distinct: BTreeSet<i64> = labels.iter().copied().collect();
    let dense = distinct.iter().copied().eq(0..distinct.len() as i64);
    let label_map = (!dense).then(|| {
        distinct
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect::<BTreeMap<i64, usize>>()
    });
    let remapped: Vec<usize> = match &label_map {
        Some(map) => labels.iter().map(|l| map[l]).collect(),
        None => labels.iter().map(|&l| l as usize).collect(),
    };
    let samples = Matrix::from_vec(labels.len(), width, data).map_err(|e| CliError::Parse(e.to_string()))?;
    let dataset = LabeledDataset::new(samples, remapped, distinct.len()).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(CsvDataset { dataset, label_map })
}

/// Writes a dataset in the format read by [`load_csv`], with shortest
/// round-trip decimal rendering.
pub fn write_csv(path: &Path, dataset: &LabeledDataset) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for (row, label) in dataset.samples.iter_rows().zip(&dataset.labels) {
        let mut record = Vec::with_capacity(row.len() + 1);
        record.push(label.to_string());
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// `{"original_label": remapped}`.
pub fn write_label_map(path: &Path, map: &BTreeMap<i64, usize>) -> anyhow::Result<()> {
    let as_strings: BTreeMap<String, usize> = map.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    write_json(path, &as_strings)
}

/// Model checkpoint. Each weight matrix is stored flat, row-major, with
/// shape `[layer_dims[l + 1], layer_dims[l]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCheckpoint {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub expand_factor: f64,
    pub num_classes: usize,
}

impl ModelCheckpoint {
    pub fn new(model: &MlpModel, expand_factor: f64, num_classes: usize) -> Self {
        Self {
            layer_dims: model.layer_dims().to_vec(),
            weights: model.weights().iter().map(|w| w.as_slice().to_vec()).collect(),
            biases: model.biases().to_vec(),
            expand_factor,
            num_classes,
        }
    }

    pub fn to_model(&self) -> Result<MlpModel, CliError> {
        let dims = &self.layer_dims;
        if dims.len() < 2 || self.weights.len() != dims.len() - 1 {
            return Err(CliError::Parse("checkpoint weights do not match layer_dims".into()));
        }
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(l, w)| Matrix::from_vec(dims[l + 1], dims[l], w.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Parse(format!("checkpoint: {e}")))?;
        MlpModel::from_parts(dims.clone(), weights, self.biases.clone())
            .map_err(|e| CliError::Parse(format!("checkpoint: {e}")))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn write_centers(path: &Path, centers: &SimplexCenters) -> anyhow::Result<()> {
    write_json(path, centers)
}

/// `epoch,mean_total,mean_intra,mean_outlier,mean_uncertainty`.
pub fn write_loss_history(path: &Path, history: &[EpochLoss]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "epoch,mean_total,mean_intra,mean_outlier,mean_uncertainty")?;
    for h in history {
        writeln!(w, "{},{},{},{},{}", h.epoch, h.total, h.intra, h.outlier, h.uncertainty)?;
    }
    w.flush()?;
    Ok(())
}

/// `threshold,x,y`; the `+inf` anchor threshold is written as `inf`.
pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "threshold,x,y")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.threshold, p.x, p.y)?;
    }
    w.flush()?;
    Ok(())
}
