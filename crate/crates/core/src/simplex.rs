//! Class centers fixed at the vertices of a regular simplex inscribed in a
//! sphere of radius `r` (the expand factor).
//!
//! Row `j` of the vertex matrix is the center of class `j`. Every row has
//! norm `r`, every pair of rows has inner product `-r^2 / (C - 1)`, and the
//! rows sum to zero, so the origin is the point equidistant from all classes.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::{dot, norm, sq_dist, Matrix};

/// Relative gap below which two squared distances count as a tie.
///
/// Vertices are only equidistant from a point up to rounding, so exact
/// float comparison would make the lowest-index rule depend on the last ulp.
pub const TIE_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Smallest admissible mean distance to the non-nearest centers.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimplexRepr", into = "SimplexRepr")]
pub struct SimplexCenters {
    num_classes: usize,
    feature_dim: usize,
    radius: f64,
    vertices: Matrix,
}

/// Deviations of a vertex set from the ideal simplex, all relative to `r` or `r^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexDeviation {
    /// `max_j | |s_j| - r | / r`
    pub equinorm: f64,
    /// `max_{i != j} | <s_i, s_j> + r^2/(C-1) | / (r^2/(C-1))`
    pub equiangular: f64,
    /// `|sum_j s_j| / r`
    pub zero_sum: f64,
    /// Mean off-diagonal inner product.
    pub mean_pairwise_dot: f64,
}

impl SimplexDeviation {
    pub fn within(&self, tol: f64) -> bool {
        self.equinorm < tol && self.equiangular < tol && self.zero_sum < tol
    }
}

/// Builds the simplex for `num_classes` classes in `feature_dim` dimensions.
///
/// The centered standard basis columns `e_j - 1/C` are scaled to unit norm,
/// expressed in an orthonormal basis of the hyperplane orthogonal to the
/// all-ones vector (taken from the Householder reflection that maps `e_0`
/// onto `1/sqrt(C)`), zero-padded up to `feature_dim` and scaled by `radius`.
pub fn build_simplex(num_classes: usize, feature_dim: usize, radius: f64) -> Result<SimplexCenters> {
    if num_classes < 2 {
        return Err(invalid(alloc::format!(
            "a simplex needs at least 2 classes, got {num_classes}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(alloc::format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    if feature_dim + 1 < num_classes {
        return Err(Error::SimplexDimension {
            num_classes,
            feature_dim,
        });
    }

    let c = num_classes;
    let cf = c as f64;
    let inv_sqrt_c = 1.0 / libm::sqrt(cf);
    let col_scale = libm::sqrt(cf / (cf - 1.0));

    // Householder vector v = e_0 - 1/sqrt(C); H = I - 2 v v^T / (v^T v).
    let mut v = vec![-inv_sqrt_c; c];
    v[0] += 1.0;
    let vv = dot(&v, &v);

    let mut vertices = Matrix::zeros(c, feature_dim);
    let mut x = vec![0.0; c];
    for j in 0..c {
        for (i, xi) in x.iter_mut().enumerate() {
            let e = if i == j { 1.0 } else { 0.0 };
            *xi = col_scale * (e - 1.0 / cf);
        }
        let coef = 2.0 * dot(&v, &x) / vv;
        // (Hx)_0 is the component along the all-ones direction and vanishes.
        let row = vertices.row_mut(j);
        for k in 1..c {
            row[k - 1] = radius * (x[k] - coef * v[k]);
        }
    }

    Ok(SimplexCenters {
        num_classes,
        feature_dim,
        radius,
        vertices,
    })
}

impl SimplexCenters {
    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn vertices(&self) -> &Matrix {
        &self.vertices
    }

    #[inline]
    pub fn center(&self, class: usize) -> &[f64] {
        self.vertices.row(class)
    }

    /// Wraps an arbitrary vertex matrix, checking only shapes.
    ///
    /// Used for rotated copies of a simplex and for deserialization; call
    /// [`SimplexCenters::deviation`] to check the geometry.
    pub fn from_vertices(radius: f64, vertices: Matrix) -> Result<Self> {
        let num_classes = vertices.rows();
        let feature_dim = vertices.cols();
        if num_classes < 2 {
            return Err(invalid("a simplex needs at least 2 vertices"));
        }
        if feature_dim + 1 < num_classes {
            return Err(Error::SimplexDimension {
                num_classes,
                feature_dim,
            });
        }
        if !(radius > 0.0 && radius.is_finite()) || !vertices.is_finite() {
            return Err(invalid("radius and vertices must be finite, radius positive"));
        }
        Ok(Self {
            num_classes,
            feature_dim,
            radius,
            vertices,
        })
    }

    pub fn deviation(&self) -> SimplexDeviation {
        let r = self.radius;
        let target = -r * r / (self.num_classes as f64 - 1.0);
        let mut equinorm: f64 = 0.0;
        let mut equiangular: f64 = 0.0;
        let mut dot_sum = 0.0;
        let mut pairs = 0usize;
        let mut sum = vec![0.0; self.feature_dim];
        for i in 0..self.num_classes {
            let si = self.center(i);
            equinorm = equinorm.max((norm(si) - r).abs() / r);
            for (acc, v) in sum.iter_mut().zip(si) {
                *acc += v;
            }
            for j in (i + 1)..self.num_classes {
                let d = dot(si, self.center(j));
                equiangular = equiangular.max((d - target).abs() / target.abs());
                dot_sum += d;
                pairs += 1;
            }
        }
        SimplexDeviation {
            equinorm,
            equiangular,
            zero_sum: norm(&sum) / r,
            mean_pairwise_dot: dot_sum / pairs as f64,
        }
    }

    /// Squared distance from `feature` to every center.
    pub fn sq_distances(&self, feature: &[f64]) -> Result<Vec<f64>> {
        check_dim("feature width", self.feature_dim, feature.len())?;
        Ok(self
            .vertices
            .iter_rows()
            .map(|s| sq_dist(feature, s))
            .collect())
    }
}

/// Index of the closest center and the squared distance to it.
pub fn nearest_center(feature: &[f64], centers: &SimplexCenters) -> Result<(usize, f64)> {
    let dists = centers.sq_distances(feature)?;
    Ok(argmin_lowest(&dists))
}

/// Argmin with ties (within [`TIE_RELATIVE_TOLERANCE`]) resolved to the lowest index.
pub(crate) fn argmin_lowest(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_val = values[0];
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < best_val - TIE_RELATIVE_TOLERANCE * best_val.abs().max(v.abs()) {
            best = j;
            best_val = v;
        }
    }
    (best, best_val)
}

/// Distance to the nearest center divided by the mean distance to the others.
///
/// 0 at a center, 1 at a point equidistant from all centers.
pub fn uncertainty_ratio(feature: &[f64], centers: &SimplexCenters) -> Result<f64> {
    let dists = centers.sq_distances(feature)?;
    Ok(ratio_parts(&dists)?.ratio)
}

pub(crate) struct RatioParts {
    pub nearest: usize,
    /// Distance to the nearest center.
    pub numerator: f64,
    /// Mean distance to the remaining centers.
    pub denominator: f64,
    pub ratio: f64,
}

pub(crate) fn ratio_parts(sq_dists: &[f64]) -> Result<RatioParts> {
    let (nearest, min_sq) = argmin_lowest(sq_dists);
    let others = (sq_dists.len() - 1) as f64;
    let denominator = sq_dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != nearest)
        .map(|(_, &d)| libm::sqrt(d))
        .sum::<f64>()
        / others;
    if denominator.is_nan() || denominator < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateDenominator(denominator));
    }
    let numerator = libm::sqrt(min_sq);
    // numerator <= every other distance, so the ratio can only exceed 1 by rounding
    let ratio = (numerator / denominator).min(1.0);
    Ok(RatioParts {
        nearest,
        numerator,
        denominator,
        ratio,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimplexRepr {
    num_classes: usize,
    feature_dim: usize,
    radius: f64,
    vertices: Vec<Vec<f64>>,
}

impl From<SimplexCenters> for SimplexRepr {
    fn from(s: SimplexCenters) -> Self {
        Self {
            num_classes: s.num_classes,
            feature_dim: s.feature_dim,
            radius: s.radius,
            vertices: s.vertices.to_rows(),
        }
    }
}

impl TryFrom<SimplexRepr> for SimplexCenters {
    type Error = Error;

    fn try_from(r: SimplexRepr) -> Result<Self> {
        let vertices = Matrix::from_rows(&r.vertices)?;
        check_dim("num_classes vs vertex rows", r.num_classes, vertices.rows())?;
        check_dim("feature_dim vs vertex width", r.feature_dim, vertices.cols())?;
        SimplexCenters::from_vertices(r.radius, vertices)
    }
}
