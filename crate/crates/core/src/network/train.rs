use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{uniform_matrix, LabeledDataset};
use crate::error::{check_dim, invalid, Error, Result};
use crate::losses::{total_loss_parts, BackgroundBatch, FeatureBatch, LossWeights};
use crate::matrix::Matrix;
use crate::network::mlp::MlpModel;
use crate::network::optim::{OptimizerState, RmsPropConfig};
use crate::simplex::{build_simplex, SimplexCenters};

/// Where the background samples of each step come from (input space).
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundSource {
    None,
    /// Fresh uniform noise in `[low, high)` every step.
    Uniform { low: f64, high: f64 },
    /// Rows drawn with replacement from a fixed pool.
    Pool(Matrix),
}

impl BackgroundSource {
    fn draw<R: Rng>(&self, count: usize, dim: usize, rng: &mut R) -> Result<Option<Matrix>> {
        match self {
            BackgroundSource::None => Ok(None),
            BackgroundSource::Uniform { low, high } => uniform_matrix(count, dim, *low, *high, rng).map(Some),
            BackgroundSource::Pool(pool) => {
                let idx: Vec<usize> = (0..count).map(|_| rng.random_range(0..pool.rows())).collect();
                Ok(Some(pool.select_rows(&idx)))
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            BackgroundSource::None => Ok(()),
            BackgroundSource::Uniform { low, high } => {
                if low < high && low.is_finite() && high.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(alloc::format!("invalid background range [{low}, {high}]")))
                }
            }
            BackgroundSource::Pool(pool) => {
                if pool.rows() == 0 {
                    return Err(invalid("background pool is empty"));
                }
                check_dim("background pool width", dim, pool.cols())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `[input, hidden..., feature_dim]`.
    pub layer_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub weights: LossWeights,
    /// Radius of the simplex the class centers sit on.
    pub expand_factor: f64,
    pub background_per_batch: usize,
}

impl TrainConfig {
    /// Checks everything that can be checked before touching data.
    pub fn validate(&self, num_classes: usize, input_dim: usize, background: &BackgroundSource) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.background_per_batch == 0 {
            return Err(invalid("epochs, batch_size and background_per_batch must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(self.expand_factor > 0.0 && self.expand_factor.is_finite()) {
            return Err(invalid("expand_factor must be positive"));
        }
        self.weights.validate()?;
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return Err(invalid("layer_dims needs at least two positive entries"));
        }
        check_dim("network input width vs data", input_dim, self.layer_dims[0])?;
        let feature_dim = *self.layer_dims.last().unwrap_or(&0);
        if num_classes < 2 {
            return Err(invalid("training needs at least two known classes"));
        }
        if feature_dim + 1 < num_classes {
            return Err(Error::SimplexDimension {
                num_classes,
                feature_dim,
            });
        }
        if self.weights.lambda_o > 0.0 && matches!(background, BackgroundSource::None) {
            return Err(invalid("lambda_o > 0 needs a background source"));
        }
        background.validate(input_dim)
    }
}

/// Per-epoch sample-weighted means of the loss and its unweighted parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub intra: f64,
    pub outlier: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub centers: SimplexCenters,
    pub history: Vec<EpochLoss>,
}

/// Stream id of the shuffling/background generator (model init uses stream 0).
const DATA_STREAM: u64 = 1;

/// Trains a feature extractor towards the fixed simplex centers.
///
/// Each epoch shuffles the training set once; every mini-batch (the last one
/// may be short) is embedded together with `background_per_batch` background
/// samples in a single forward pass, and one RMSProp step is taken on the
/// combined loss. Everything is a function of `config.seed`.
pub fn train(dataset: &LabeledDataset, background: &BackgroundSource, config: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let c = dataset.total_classes;
    config.validate(c, dataset.dim(), background)?;

    let feature_dim = *config.layer_dims.last().unwrap_or(&0);
    let centers = build_simplex(c, feature_dim, config.expand_factor)?;
    let mut model = MlpModel::init(&config.layer_dims, config.seed)?;
    let mut optim = OptimizerState::new(&model, RmsPropConfig::with_learning_rate(config.learning_rate))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(DATA_STREAM);

    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 4];
        for chunk in order.chunks(config.batch_size) {
            let step = train_step(
                &mut model,
                &mut optim,
                &centers,
                dataset,
                chunk,
                background,
                config,
                &mut rng,
            )?;
            let w = chunk.len() as f64;
            for (s, v) in sums.iter_mut().zip(step) {
                *s += w * v;
            }
        }
        let inv = 1.0 / n as f64;
        let entry = EpochLoss {
            epoch,
            total: sums[0] * inv,
            intra: sums[1] * inv,
            outlier: sums[2] * inv,
            uncertainty: sums[3] * inv,
        };
        if !entry.total.is_finite() {
            return Err(invalid(alloc::format!("loss diverged in epoch {epoch}")));
        }
        history.push(entry);
    }

    Ok(TrainOutcome {
        model,
        centers,
        history,
    })
}

#[allow(clippy::too_many_arguments)]
fn train_step<R: Rng>(
    model: &mut MlpModel,
    optim: &mut OptimizerState,
    centers: &SimplexCenters,
    dataset: &LabeledDataset,
    chunk: &[usize],
    background: &BackgroundSource,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<[f64; 4]> {
    let known = dataset.samples.select_rows(chunk);
    let labels: Vec<usize> = chunk.iter().map(|&i| dataset.labels[i]).collect();
    let bg = background.draw(config.background_per_batch, dataset.dim(), rng)?;

    let n = known.rows();
    let inputs = match &bg {
        Some(b) => {
            let mut data = known.into_vec();
            data.extend_from_slice(b.as_slice());
            Matrix::from_vec(n + b.rows(), dataset.dim(), data)?
        }
        None => known,
    };
    let (features, cache) = model.forward(&inputs)?;
    let d = features.cols();
    let all = features.as_slice();
    let batch = FeatureBatch::new(Matrix::from_vec(n, d, all[..n * d].to_vec())?, labels)?;
    let bg_features = match &bg {
        Some(b) => BackgroundBatch::new(Matrix::from_vec(b.rows(), d, all[n * d..].to_vec())?),
        None => BackgroundBatch::empty(d),
    };

    let (loss, parts) = total_loss_parts(&batch, &bg_features, centers, &config.weights)?;
    let mut grad = loss.grad_features.into_vec();
    match loss.grad_background {
        Some(gb) => grad.extend_from_slice(gb.as_slice()),
        None => grad.resize(features.rows() * d, 0.0),
    }
    let grads = model.backward(&cache, &Matrix::from_vec(features.rows(), d, grad)?)?;
    optim.step(model, &grads)?;
    Ok([loss.value, parts.intra, parts.outlier, parts.uncertainty])
}
