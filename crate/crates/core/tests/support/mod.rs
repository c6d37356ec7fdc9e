//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the code paths it is used to check: gradients are
//! central differences of the scalar loss, AUROC is the all-pairs count, and
//! OSCR recounts every threshold from scratch.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ucdsc_core::data::Truth;
use ucdsc_core::eval::ScoredPrediction;
use ucdsc_core::Matrix;

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `max_i |a_i - b_i| / max(|a|_inf, |b|_inf)`, or the absolute gap when both vanish.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale < 1e-12 {
        gap
    } else {
        gap / scale
    }
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| { let z: f64 = StandardNormal.sample(rng); scale * z })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Random orthogonal matrix by Gram-Schmidt on Gaussian rows.
pub fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    loop {
        let g = gaussian_matrix(d, d, 1.0, rng);
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut ok = true;
        for row in g.iter_rows() {
            let mut v = row.to_vec();
            for u in &q {
                let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
            let n = l2(&v);
            if n < 1e-6 {
                ok = false;
                break;
            }
            v.iter_mut().for_each(|a| *a /= n);
            q.push(v);
        }
        if ok {
            return Matrix::from_rows(&q).unwrap();
        }
    }
}

/// Applies `x -> Q x` to every row.
pub fn rotate_rows(m: &Matrix, q: &Matrix) -> Matrix {
    m.matmul_transposed(q).unwrap()
}

/// AUROC by enumerating every (known, unknown) pair.
pub fn auroc_all_pairs(preds: &[ScoredPrediction]) -> f64 {
    let known: Vec<f64> = preds.iter().filter(|p| p.truth.is_known()).map(|p| p.score).collect();
    let unknown: Vec<f64> = preds.iter().filter(|p| !p.truth.is_known()).map(|p| p.score).collect();
    let mut wins = 0.0;
    for &k in &known {
        for &u in &unknown {
            wins += if k > u {
                1.0
            } else if k == u {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (known.len() * unknown.len()) as f64
}

/// OSCR area by recounting CCR and FPR from scratch at every candidate threshold.
pub fn oscr_enumerated(preds: &[ScoredPrediction]) -> f64 {
    let n_known = preds.iter().filter(|p| p.truth.is_known()).count() as f64;
    let n_unknown = preds.iter().filter(|p| !p.truth.is_known()).count() as f64;
    let mut thresholds: Vec<f64> = preds.iter().map(|p| p.score).collect();
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let ccr = preds
                .iter()
                .filter(|p| p.score >= t && p.truth == Truth::Known(p.predicted))
                .count() as f64
                / n_known;
            let fpr = preds
                .iter()
                .filter(|p| p.score >= t && !p.truth.is_known())
                .count() as f64
                / n_unknown;
            (fpr, ccr)
        })
        .collect();
    let mut area = 0.0;
    for w in points.windows(2) {
        area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
    }
    let last = points.last().unwrap();
    area + (1.0 - last.0) * last.1
}

/// Random prediction list with at least one known and one unknown sample.
///
/// Scores come from a small grid so that ties are frequent.
pub fn random_predictions(rng: &mut ChaCha8Rng, max_len: usize, num_classes: usize) -> Vec<ScoredPrediction> {
    let n = rng.random_range(2..=max_len);
    let levels = rng.random_range(1..=n.max(2));
    let mut preds: Vec<ScoredPrediction> = (0..n)
        .map(|_| {
            let truth = if rng.random_bool(0.5) {
                Truth::Known(rng.random_range(0..num_classes))
            } else {
                Truth::Unknown
            };
            let predicted = match truth {
                Truth::Known(c) if rng.random_bool(0.7) => c,
                _ => rng.random_range(0..num_classes),
            };
            ScoredPrediction {
                score: rng.random_range(0..levels) as f64 / levels as f64 - 0.5,
                predicted,
                truth,
            }
        })
        .collect();
    preds[0].truth = Truth::Known(preds[0].predicted);
    preds[1].truth = Truth::Unknown;
    preds
}

/// Plain closed-set accuracy by counting.
pub fn accuracy_counted(preds: &[ScoredPrediction]) -> f64 {
    let known: Vec<_> = preds.iter().filter(|p| p.truth.is_known()).collect();
    known.iter().filter(|p| p.truth == Truth::Known(p.predicted)).count() as f64 / known.len() as f64
}

/// Central differences with a separate step per coordinate.
pub fn central_diff_steps(f: impl Fn(&[f64]) -> f64, x: &[f64], steps: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + steps[i];
            let up = f(&probe);
            probe[i] = x[i] - steps[i];
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * steps[i])
        })
        .collect()
}

/// Per-coordinate step `1e-5 * (1 + |row|)` for every entry of a matrix.
pub fn row_scaled_steps(m: &Matrix) -> Vec<f64> {
    m.iter_rows()
        .flat_map(|r| std::iter::repeat_n(1e-5 * (1.0 + l2(r)), r.len()))
        .collect()
}

/// A random loss-evaluation instance.
pub struct LossInstance {
    pub centers: ucdsc_core::SimplexCenters,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub background: Matrix,
    pub margin: f64,
}

impl LossInstance {
    /// Draws an instance; knowns scatter around their centers, background
    /// around the origin, margin in `[0, 2 r^2)`.
    pub fn random(num_classes: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let radius = rng.random_range(0.5..5.0);
        let centers = ucdsc_core::simplex::build_simplex(num_classes, dim, radius).unwrap();
        let n = rng.random_range(1..6);
        let k = rng.random_range(1..6);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..num_classes)).collect();
        let mut features = gaussian_matrix(n, dim, 0.6 * radius, rng);
        for (i, &y) in labels.iter().enumerate() {
            for (v, s) in features.row_mut(i).iter_mut().zip(centers.center(y)) {
                *v += s;
            }
        }
        let background = gaussian_matrix(k, dim, radius, rng);
        let margin = rng.random_range(0.0..2.0 * radius * radius);
        Self {
            centers,
            features,
            labels,
            background,
            margin,
        }
    }

    /// True when no finite-difference probe can cross a hinge kink, a
    /// nearest-center switch, or the non-smooth point of a distance.
    pub fn is_smooth(&self) -> bool {
        let gap_floor: f64 = 1e-3;
        let fsteps = row_scaled_steps(&self.features);
        let bsteps = row_scaled_steps(&self.background);
        let d = self.centers.feature_dim();
        for (i, f) in self.features.iter_rows().enumerate() {
            let h = fsteps[i * d];
            let mut dists: Vec<f64> = self.centers.vertices().iter_rows().map(|s| dist(f, s)).collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if dists[0] < gap_floor.max(100.0 * h) || dists[1] - dists[0] < gap_floor.max(100.0 * h) {
                return false;
            }
            let s = self.centers.center(self.labels[i]);
            let own = sq(f, s);
            for (k, b) in self.background.iter_rows().enumerate() {
                let hb = bsteps[k * d];
                let arg = self.margin + own - sq(b, s);
                let slack = 100.0 * (h + hb) * (1.0 + 2.0 * (dist(f, s) + dist(b, s)));
                if arg.abs() < gap_floor.max(slack) {
                    return false;
                }
            }
        }
        true
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq(a, b).sqrt()
}

/// Worst relative gradient error of intra, outlier, uncertainty and total
/// loss on one instance, each against central differences of its value.
pub fn loss_gradient_errors(inst: &LossInstance, lambda_o: f64, lambda_u: f64) -> [f64; 4] {
    use ucdsc_core::losses::*;
    let (n, d) = (inst.features.rows(), inst.features.cols());
    let k = inst.background.rows();
    let weights = LossWeights {
        lambda_o,
        lambda_u,
        margin: inst.margin,
    };
    let batch_of = |x: &[f64]| FeatureBatch::new(Matrix::from_vec(n, d, x.to_vec()).unwrap(), inst.labels.clone()).unwrap();
    let bg_of = |x: &[f64]| BackgroundBatch::new(Matrix::from_vec(k, d, x.to_vec()).unwrap());
    let f0 = inst.features.as_slice();
    let b0 = inst.background.as_slice();
    let fsteps = row_scaled_steps(&inst.features);
    let bsteps = row_scaled_steps(&inst.background);
    let batch = batch_of(f0);
    let bg = bg_of(b0);
    let c = &inst.centers;

    let intra = intra_loss(&batch, c).unwrap();
    let num = central_diff_steps(|x| intra_loss(&batch_of(x), c).unwrap().value, f0, &fsteps);
    let e_intra = max_relative_error(intra.grad_features.as_slice(), &num);

    let unc = uncertainty_loss(&batch, c).unwrap();
    let num = central_diff_steps(|x| uncertainty_loss(&batch_of(x), c).unwrap().value, f0, &fsteps);
    let e_unc = max_relative_error(unc.grad_features.as_slice(), &num);

    // outlier and total: gradient w.r.t. the concatenation (features, background)
    let joint: Vec<f64> = f0.iter().chain(b0).copied().collect();
    let steps: Vec<f64> = fsteps.iter().chain(&bsteps).copied().collect();
    let split = |x: &[f64]| (batch_of(&x[..n * d]), bg_of(&x[n * d..]));

    let out = outlier_loss(&batch, &bg, c, inst.margin).unwrap();
    let analytic: Vec<f64> = out
        .grad_features
        .as_slice()
        .iter()
        .chain(out.grad_background.as_ref().unwrap().as_slice())
        .copied()
        .collect();
    let num = central_diff_steps(
        |x| {
            let (fb, bb) = split(x);
            outlier_loss(&fb, &bb, c, inst.margin).unwrap().value
        },
        &joint,
        &steps,
    );
    let e_out = max_relative_error(&analytic, &num);

    let tot = total_loss(&batch, &bg, c, &weights).unwrap();
    let analytic: Vec<f64> = tot
        .grad_features
        .as_slice()
        .iter()
        .chain(tot.grad_background.as_ref().unwrap().as_slice())
        .copied()
        .collect();
    let num = central_diff_steps(
        |x| {
            let (fb, bb) = split(x);
            total_loss(&fb, &bb, c, &weights).unwrap().value
        },
        &joint,
        &steps,
    );
    let e_tot = max_relative_error(&analytic, &num);

    [e_intra, e_out, e_unc, e_tot]
}

/// Draws smooth instances until `count` are collected and returns the worst
/// error per loss term over all of them.
pub fn worst_loss_gradient_errors(count: usize, seed: u64) -> [f64; 4] {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: Vec<(usize, usize)> = [2usize, 4, 8]
        .iter()
        .flat_map(|&c| [3usize, 8, 16].into_iter().map(move |d| (c, d)))
        .filter(|&(c, d)| d + 1 >= c)
        .collect();
    let mut worst = [0.0f64; 4];
    let mut checked = 0;
    while checked < count {
        let (c, d) = shapes[checked % shapes.len()];
        let inst = LossInstance::random(c, d, &mut rng);
        if !inst.is_smooth() {
            continue;
        }
        let lo = rng.random_range(0.1..1.5);
        let lu = rng.random_range(1.0..10.0);
        let errs = loss_gradient_errors(&inst, lo, lu);
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
        checked += 1;
    }
    worst
}

/// Relative error of the end-to-end parameter gradient of the total loss
/// through a small MLP, against central differences with step `1e-6`.
///
/// Returns `None` when a ReLU pre-activation, a hinge or a nearest-center
/// choice sits too close to its kink.
pub fn mlp_gradient_error(layer_dims: &[usize], seed: u64) -> Option<f64> {
    use rand::SeedableRng;
    use ucdsc_core::losses::*;
    use ucdsc_core::network::MlpModel;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = MlpModel::init(layer_dims, seed).unwrap();
    let input_dim = layer_dims[0];
    let d = *layer_dims.last().unwrap();
    let classes = 3.min(d + 1);
    let centers = ucdsc_core::simplex::build_simplex(classes, d, 2.0).unwrap();
    let n = 4;
    let k = 3;
    let inputs = gaussian_matrix(n + k, input_dim, 1.0, &mut rng);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let weights = LossWeights {
        lambda_o: 0.7,
        lambda_u: 3.0,
        margin: 2.0,
    };

    let loss_at = |m: &MlpModel| -> (f64, Matrix) {
        let feats = m.embed(&inputs).unwrap();
        let all = feats.as_slice();
        let fb = FeatureBatch::new(Matrix::from_vec(n, d, all[..n * d].to_vec()).unwrap(), labels.clone()).unwrap();
        let bb = BackgroundBatch::new(Matrix::from_vec(k, d, all[n * d..].to_vec()).unwrap());
        let l = total_loss(&fb, &bb, &centers, &weights).unwrap();
        let mut g = l.grad_features.into_vec();
        g.extend_from_slice(l.grad_background.unwrap().as_slice());
        (l.value, Matrix::from_vec(n + k, d, g).unwrap())
    };

    let (_, cache) = model.forward(&inputs).unwrap();
    let last = cache.pre_activations().len() - 1;
    for (l, z) in cache.pre_activations().iter().enumerate() {
        if l < last && z.as_slice().iter().any(|v| v.abs() < 1e-3) {
            return None;
        }
    }
    let feats = model.embed(&inputs).unwrap();
    let embedded = LossInstance {
        centers: centers.clone(),
        features: Matrix::from_vec(n, d, feats.as_slice()[..n * d].to_vec()).unwrap(),
        labels: labels.clone(),
        background: Matrix::from_vec(k, d, feats.as_slice()[n * d..].to_vec()).unwrap(),
        margin: weights.margin,
    };
    if !embedded.is_smooth() {
        return None;
    }
    let (_, upstream) = loss_at(&model);
    let analytic = model.backward(&cache, &upstream).unwrap().flatten();
    let p0 = model.parameters();
    let numeric = central_diff(
        |p| {
            let mut m = model.clone();
            m.set_parameters(p).unwrap();
            loss_at(&m).0
        },
        &p0,
        1e-6,
    );
    Some(max_relative_error(&analytic, &numeric))
}
