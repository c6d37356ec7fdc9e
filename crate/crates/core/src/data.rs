//! Synthetic datasets, background noise, and the known/unknown trial protocol.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::matrix::Matrix;

/// Label encoding of unknown-class samples in test views and files.
pub const UNKNOWN_LABEL: i64 = -1;

/// Ground truth of an evaluation sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Truth {
    /// A known class, already remapped to `[0, C)`.
    Known(usize),
    Unknown,
}

impl Truth {
    pub fn as_label(self) -> i64 {
        match self {
            Truth::Known(c) => c as i64,
            Truth::Unknown => UNKNOWN_LABEL,
        }
    }

    pub fn from_label(label: i64) -> Result<Self> {
        match label {
            UNKNOWN_LABEL => Ok(Truth::Unknown),
            l if l >= 0 => Ok(Truth::Known(l as usize)),
            l => Err(invalid(alloc::format!("invalid label {l}"))),
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, Truth::Known(_))
    }
}

/// Samples with dense labels in `[0, total_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Matrix,
    pub labels: Vec<usize>,
    pub total_classes: usize,
}

impl LabeledDataset {
    /// Checks label range and density; every class must occur at least once.
    pub fn new(samples: Matrix, labels: Vec<usize>, total_classes: usize) -> Result<Self> {
        check_dim("labels vs sample rows", samples.rows(), labels.len())?;
        if total_classes == 0 {
            return Err(invalid("dataset needs at least one class"));
        }
        let mut seen = alloc::vec![false; total_classes];
        for &l in &labels {
            if l >= total_classes {
                return Err(invalid(alloc::format!(
                    "label {l} out of range for {total_classes} classes"
                )));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(invalid(alloc::format!("labels are not dense: class {missing} has no samples")));
        }
        Ok(Self {
            samples,
            labels,
            total_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    /// Sample indices of each class, in dataset order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.total_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Evaluation samples: known classes remapped, unknowns marked.
#[derive(Debug, Clone, PartialEq)]
pub struct TestView {
    pub samples: Matrix,
    pub truths: Vec<Truth>,
}

impl TestView {
    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }

    pub fn num_unknown(&self) -> usize {
        self.truths.iter().filter(|t| !t.is_known()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub center_scale: f64,
    pub noise_std: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts_ok = self.num_classes > 0 && self.dim > 0 && self.samples_per_class > 0;
        let reals_ok = self.center_scale > 0.0
            && self.noise_std > 0.0
            && self.center_scale.is_finite()
            && self.noise_std.is_finite();
        if counts_ok && reals_ok {
            Ok(())
        } else {
            Err(invalid(alloc::format!("invalid synthetic spec: {self:?}")))
        }
    }
}

/// Draws the class centers used by [`generate_blobs`] for `seed`.
pub fn blob_centers(spec: &SyntheticSpec, seed: u64) -> Result<Matrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_centers(spec, &mut rng))
}

fn draw_centers(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Matrix {
    let mut centers = Matrix::zeros(spec.num_classes, spec.dim);
    for c in 0..spec.num_classes {
        let row = centers.row_mut(c);
        loop {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let n = crate::matrix::norm(row);
            if n > 1e-9 {
                row.iter_mut().for_each(|v| *v *= spec.center_scale / n);
                break;
            }
        }
    }
    centers
}

/// Isotropic Gaussian blobs around random centers of norm `center_scale`.
///
/// Samples are ordered class by class.
pub fn generate_blobs(spec: &SyntheticSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = draw_centers(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|_| invalid("bad noise_std"))?;
    let n = spec.num_classes * spec.samples_per_class;
    let mut samples = Matrix::zeros(n, spec.dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.num_classes {
        for k in 0..spec.samples_per_class {
            let row = samples.row_mut(c * spec.samples_per_class + k);
            for (v, mu) in row.iter_mut().zip(centers.row(c)) {
                *v = mu + noise.sample(&mut rng);
            }
            labels.push(c);
        }
    }
    LabeledDataset::new(samples, labels, spec.num_classes)
}

/// i.i.d. uniform noise in `[low, high)`, used as stand-in background samples.
pub fn generate_background(count: usize, dim: usize, low: f64, high: f64, seed: u64) -> Result<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uniform_matrix(count, dim, low, high, &mut rng)
}

pub(crate) fn uniform_matrix<R: Rng>(count: usize, dim: usize, low: f64, high: f64, rng: &mut R) -> Result<Matrix> {
    if count == 0 || dim == 0 {
        return Err(invalid("background count and dimension must be positive"));
    }
    if !low.is_finite() || !high.is_finite() || low >= high {
        return Err(invalid(alloc::format!("invalid background range [{low}, {high}]")));
    }
    let data = (0..count * dim).map(|_| rng.random_range(low..high)).collect();
    Matrix::from_vec(count, dim, data)
}

/// One random partition of the classes into known and unknown sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSplit {
    /// Original class ids; position `i` becomes training label `i`.
    pub known_classes: Vec<usize>,
    pub unknown_classes: Vec<usize>,
    pub trial_index: usize,
    pub seed: u64,
}

impl TrialSplit {
    pub fn validate(&self, total_classes: usize) -> Result<()> {
        if self.known_classes.is_empty() {
            return Err(invalid("trial split has no known classes"));
        }
        let mut seen = alloc::vec![false; total_classes];
        for &c in self.known_classes.iter().chain(&self.unknown_classes) {
            if c >= total_classes {
                return Err(invalid(alloc::format!(
                    "trial split references class {c}, dataset has {total_classes}"
                )));
            }
            if seen[c] {
                return Err(invalid(alloc::format!("class {c} appears twice in the trial split")));
            }
            seen[c] = true;
        }
        Ok(())
    }

    /// Original class id -> training label.
    pub fn known_map(&self) -> BTreeMap<usize, usize> {
        self.known_classes.iter().enumerate().map(|(i, &c)| (c, i)).collect()
    }
}

/// `num_trials` splits; trial `k` draws its classes with seed `seed + k`.
///
/// Both class lists are sorted ascending.
pub fn make_trials(total_classes: usize, num_known: usize, num_trials: usize, seed: u64) -> Result<Vec<TrialSplit>> {
    if num_known == 0 || num_known >= total_classes {
        return Err(invalid(alloc::format!(
            "need 1 <= num_known < total_classes, got {num_known} of {total_classes}"
        )));
    }
    if num_trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    Ok((0..num_trials)
        .map(|k| {
            let trial_seed = seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let mut classes: Vec<usize> = (0..total_classes).collect();
            classes.shuffle(&mut rng);
            let mut known = classes[..num_known].to_vec();
            let mut unknown = classes[num_known..].to_vec();
            known.sort_unstable();
            unknown.sort_unstable();
            TrialSplit {
                known_classes: known,
                unknown_classes: unknown,
                trial_index: k,
                seed: trial_seed,
            }
        })
        .collect())
}

/// Share of each known class held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

/// Splits a dataset for one trial.
///
/// Known classes are relabelled by their position in `known_classes`; each
/// is shuffled with the split seed and `floor(0.2 * count)` of its samples go
/// to the test view. Every sample of an unknown class goes to the test view
/// as [`Truth::Unknown`]. Classes in neither list are dropped.
pub fn relabel_for_trial(dataset: &LabeledDataset, split: &TrialSplit) -> Result<(LabeledDataset, TestView)> {
    split.validate(dataset.total_classes)?;
    let by_class = dataset.indices_by_class();
    let mut rng = ChaCha8Rng::seed_from_u64(split.seed);

    let mut train_idx = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_idx = Vec::new();
    let mut truths = Vec::new();
    for (new_label, &class) in split.known_classes.iter().enumerate() {
        let mut idx = by_class[class].clone();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * TEST_FRACTION) as usize;
        let (test, train) = idx.split_at(n_test);
        if train.is_empty() {
            return Err(invalid(alloc::format!("known class {class} has no training samples")));
        }
        test_idx.extend_from_slice(test);
        truths.extend(core::iter::repeat_n(Truth::Known(new_label), test.len()));
        train_idx.extend_from_slice(train);
        train_labels.extend(core::iter::repeat_n(new_label, train.len()));
    }
    for &class in &split.unknown_classes {
        test_idx.extend_from_slice(&by_class[class]);
        truths.extend(core::iter::repeat_n(Truth::Unknown, by_class[class].len()));
    }

    let train = LabeledDataset::new(
        dataset.samples.select_rows(&train_idx),
        train_labels,
        split.known_classes.len(),
    )?;
    let test = TestView {
        samples: dataset.samples.select_rows(&test_idx),
        truths,
    };
    Ok((train, test))
}
