//! Training objective: intra-class pull, background triplet hinge and the
//! uncertainty-ratio penalty, with exact gradients w.r.t. the features.
//!
//! Centers are constants; no gradient flows into them.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::simplex::{ratio_parts, SimplexCenters};

/// Embedded known samples with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl FeatureBatch {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(invalid("feature batch is empty"));
        }
        check_dim("labels vs feature rows", features.rows(), labels.len())?;
        Ok(Self { features, labels })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn validate(&self, centers: &SimplexCenters) -> Result<()> {
        check_dim("feature batch width", centers.feature_dim(), self.features.cols())?;
        check_dim("labels vs feature rows", self.features.rows(), self.labels.len())?;
        if self.is_empty() {
            return Err(invalid("feature batch is empty"));
        }
        let c = centers.num_classes();
        match self.labels.iter().find(|&&y| y >= c) {
            Some(&label) => Err(Error::LabelOutOfRange {
                label,
                num_classes: c,
            }),
            None => Ok(()),
        }
    }
}

/// Embedded background (auxiliary) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundBatch {
    pub features: Matrix,
}

impl BackgroundBatch {
    pub fn new(features: Matrix) -> Self {
        Self { features }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            features: Matrix::zeros(0, dim),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }
}

/// Coefficients of the combined objective and the hinge margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_o: f64,
    pub lambda_u: f64,
    pub margin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_o: 1.0,
            lambda_u: 5.0,
            margin: 38.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.lambda_o) && ok(self.lambda_u) && ok(self.margin) {
            Ok(())
        } else {
            Err(invalid(alloc::format!(
                "loss weights must be finite and non-negative: {self:?}"
            )))
        }
    }
}

/// A loss value with its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad_features: Matrix,
    /// Present only for terms that depend on background samples.
    pub grad_background: Option<Matrix>,
}

/// Unweighted component values of the combined loss.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub intra: f64,
    pub outlier: f64,
    pub uncertainty: f64,
}

/// Mean squared distance of each feature to its class center.
pub fn intra_loss(batch: &FeatureBatch, centers: &SimplexCenters) -> Result<LossValue> {
    batch.validate(centers)?;
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, centers.feature_dim());
    let mut value = 0.0;
    for (i, (f, &y)) in batch.features.iter_rows().zip(&batch.labels).enumerate() {
        let s = centers.center(y);
        let g = grad.row_mut(i);
        for ((gk, fk), sk) in g.iter_mut().zip(f).zip(s) {
            let diff = fk - sk;
            value += diff * diff;
            *gk = 2.0 * inv_n * diff;
        }
    }
    Ok(LossValue {
        value: value * inv_n,
        grad_features: grad,
        grad_background: None,
    })
}

/// Triplet hinge over every (known, background) pair in the batch, averaged
/// over the `n * K` pairs:
/// `max(0, m + |f_i - s_{y_i}|^2 - |b_k - s_{y_i}|^2)`.
///
/// A pair whose hinge argument is exactly zero is inactive.
pub fn outlier_loss(
    batch: &FeatureBatch,
    background: &BackgroundBatch,
    centers: &SimplexCenters,
    margin: f64,
) -> Result<LossValue> {
    batch.validate(centers)?;
    if background.is_empty() {
        return Err(invalid("outlier loss needs at least one background sample"));
    }
    check_dim("background width", centers.feature_dim(), background.features.cols())?;
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(invalid(alloc::format!("margin must be non-negative, got {margin}")));
    }

    let n = batch.len();
    let k_bg = background.len();
    let c = centers.num_classes();
    let d = centers.feature_dim();
    let scale = 1.0 / (n as f64 * k_bg as f64);

    // bg_dist[k * c + class] = |b_k - s_class|^2
    let bg_dist: Vec<f64> = background
        .features
        .iter_rows()
        .flat_map(|b| centers.vertices().iter_rows().map(move |s| sq_dist(b, s)))
        .collect();

    let mut value = 0.0;
    let mut grad_f = Matrix::zeros(n, d);
    // active[k * c + class]: active pairs between background k and knowns of `class`
    let mut active = vec![0usize; k_bg * c];
    for (i, (f, &y)) in batch.features.iter_rows().zip(&batch.labels).enumerate() {
        let s = centers.center(y);
        let own = sq_dist(f, s);
        let mut count = 0usize;
        for k in 0..k_bg {
            let arg = margin + own - bg_dist[k * c + y];
            if arg > 0.0 {
                value += arg;
                count += 1;
                active[k * c + y] += 1;
            }
        }
        if count > 0 {
            let factor = 2.0 * scale * count as f64;
            for ((g, fk), sk) in grad_f.row_mut(i).iter_mut().zip(f).zip(s) {
                *g = factor * (fk - sk);
            }
        }
    }

    let mut grad_b = Matrix::zeros(k_bg, d);
    for (k, b) in background.features.iter_rows().enumerate() {
        let g = grad_b.row_mut(k);
        for class in 0..c {
            let count = active[k * c + class];
            if count == 0 {
                continue;
            }
            let factor = -2.0 * scale * count as f64;
            for ((gk, bk), sk) in g.iter_mut().zip(b).zip(centers.center(class)) {
                *gk += factor * (bk - sk);
            }
        }
    }

    Ok(LossValue {
        value: value * scale,
        grad_features: grad_f,
        grad_background: Some(grad_b),
    })
}

/// Mean uncertainty ratio over the batch (labels are not used).
///
/// The nearest center is held fixed when differentiating, and the gradient
/// of the numerator is taken as zero when a feature sits on its center.
pub fn uncertainty_loss(batch: &FeatureBatch, centers: &SimplexCenters) -> Result<LossValue> {
    check_dim("feature batch width", centers.feature_dim(), batch.features.cols())?;
    if batch.features.rows() == 0 {
        return Err(invalid("feature batch is empty"));
    }
    let n = batch.features.rows();
    let c = centers.num_classes();
    let d = centers.feature_dim();
    let inv_n = 1.0 / n as f64;
    let inv_others = 1.0 / (c as f64 - 1.0);

    let mut value = 0.0;
    let mut grad = Matrix::zeros(n, d);
    let mut grad_den = vec![0.0; d];
    for (i, f) in batch.features.iter_rows().enumerate() {
        let sq: Vec<f64> = centers
            .vertices()
            .iter_rows()
            .map(|s| sq_dist(f, s))
            .collect();
        let parts = ratio_parts(&sq)?;
        value += parts.ratio;

        let a = parts.numerator;
        let b = parts.denominator;
        grad_den.iter_mut().for_each(|v| *v = 0.0);
        for (j, s) in centers.vertices().iter_rows().enumerate() {
            if j == parts.nearest {
                continue;
            }
            let dist = libm::sqrt(sq[j]);
            if dist < 1e-12 {
                continue;
            }
            let w = inv_others / dist;
            for ((g, fk), sk) in grad_den.iter_mut().zip(f).zip(s) {
                *g += w * (fk - sk);
            }
        }
        let s_near = centers.center(parts.nearest);
        let inv_a = if a < 1e-12 { 0.0 } else { 1.0 / a };
        let inv_b2 = 1.0 / (b * b);
        let row = grad.row_mut(i);
        for k in 0..d {
            let grad_num = (f[k] - s_near[k]) * inv_a;
            row[k] = inv_n * (grad_num * b - a * grad_den[k]) * inv_b2;
        }
    }
    Ok(LossValue {
        value: value * inv_n,
        grad_features: grad,
        grad_background: None,
    })
}

/// `intra + lambda_o * outlier + lambda_u * uncertainty`.
///
/// The background batch may be empty only when `lambda_o == 0`; in that case
/// the outlier term is skipped and no background gradient is returned.
pub fn total_loss(
    batch: &FeatureBatch,
    background: &BackgroundBatch,
    centers: &SimplexCenters,
    weights: &LossWeights,
) -> Result<LossValue> {
    total_loss_parts(batch, background, centers, weights).map(|(v, _)| v)
}

/// [`total_loss`] together with the unweighted component values.
pub fn total_loss_parts(
    batch: &FeatureBatch,
    background: &BackgroundBatch,
    centers: &SimplexCenters,
    weights: &LossWeights,
) -> Result<(LossValue, LossParts)> {
    weights.validate()?;
    let intra = intra_loss(batch, centers)?;

    let outlier = if background.is_empty() {
        if weights.lambda_o != 0.0 {
            return Err(invalid("lambda_o > 0 requires a non-empty background batch"));
        }
        None
    } else {
        Some(outlier_loss(batch, background, centers, weights.margin)?)
    };
    let uncertainty = uncertainty_loss(batch, centers)?;

    let parts = LossParts {
        intra: intra.value,
        outlier: outlier.as_ref().map_or(0.0, |o| o.value),
        uncertainty: uncertainty.value,
    };
    let value = parts.intra + weights.lambda_o * parts.outlier + weights.lambda_u * parts.uncertainty;

    let mut grad = intra.grad_features;
    grad.add_scaled(&uncertainty.grad_features, weights.lambda_u)?;
    let grad_background = match outlier {
        Some(o) => {
            grad.add_scaled(&o.grad_features, weights.lambda_o)?;
            let mut gb = o.grad_background.unwrap_or_else(|| Matrix::zeros(0, 0));
            gb.scale(weights.lambda_o);
            Some(gb)
        }
        None => None,
    };

    Ok((
        LossValue {
            value,
            grad_features: grad,
            grad_background,
        },
        parts,
    ))
}
