//! Open-set evaluation: known-ness scores, closed-set accuracy, ROC/AUROC
//! and the OSCR curve.
//!
//! Scores are "higher means more confidently known". The predicted label is
//! always a known class; rejection only ever happens by thresholding a score.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::Truth;
use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::Matrix;
use crate::simplex::{argmin_lowest, ratio_parts, SimplexCenters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Negative squared distance to the nearest center.
    #[default]
    NegMinDist,
    /// One minus the uncertainty ratio.
    OneMinusU,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::NegMinDist => "neg_min_dist",
            ScoreMode::OneMinusU => "one_minus_u",
        }
    }
}

impl core::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neg_min_dist" => Ok(ScoreMode::NegMinDist),
            "one_minus_u" => Ok(ScoreMode::OneMinusU),
            other => Err(invalid(alloc::format!(
                "unknown score mode `{other}` (expected neg_min_dist or one_minus_u)"
            ))),
        }
    }
}

/// Nearest-center prediction and score of one sample, before truths are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub predicted: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPrediction {
    pub score: f64,
    pub predicted: usize,
    pub truth: Truth,
}

impl ScoredPrediction {
    fn correct(&self) -> bool {
        self.truth == Truth::Known(self.predicted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Closed-set accuracy, AUROC and OSCR of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialMetrics {
    pub acc: f64,
    pub auroc: f64,
    pub oscr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub trials: Vec<TrialMetrics>,
    pub mean: TrialMetrics,
}

pub fn score_samples(features: &Matrix, centers: &SimplexCenters, mode: ScoreMode) -> Result<Vec<Scored>> {
    check_dim("feature width", centers.feature_dim(), features.cols())?;
    features
        .iter_rows()
        .map(|f| {
            let sq = centers.sq_distances(f)?;
            match mode {
                ScoreMode::NegMinDist => {
                    let (predicted, d) = argmin_lowest(&sq);
                    Ok(Scored { predicted, score: -d })
                }
                ScoreMode::OneMinusU => {
                    let parts = ratio_parts(&sq)?;
                    Ok(Scored {
                        predicted: parts.nearest,
                        score: 1.0 - parts.ratio,
                    })
                }
            }
        })
        .collect()
}

pub fn attach_truths(scored: &[Scored], truths: &[Truth]) -> Result<Vec<ScoredPrediction>> {
    check_dim("truths vs scored samples", scored.len(), truths.len())?;
    Ok(scored
        .iter()
        .zip(truths)
        .map(|(s, &truth)| ScoredPrediction {
            score: s.score,
            predicted: s.predicted,
            truth,
        })
        .collect())
}

/// Fraction of known-truth samples whose predicted label is right.
///
/// Unknown-truth samples are ignored.
pub fn closed_set_accuracy(preds: &[ScoredPrediction]) -> Result<f64> {
    let (known, correct) = preds
        .iter()
        .filter(|p| p.truth.is_known())
        .fold((0usize, 0usize), |(k, c), p| (k + 1, c + p.correct() as usize));
    if known == 0 {
        return Err(Error::MissingSamples("closed-set accuracy needs known samples"));
    }
    Ok(correct as f64 / known as f64)
}

struct Group {
    threshold: f64,
    known: usize,
    correct: usize,
    unknown: usize,
}

/// Collapses predictions into groups of equal score, in descending score order.
fn descending_groups(preds: &[ScoredPrediction]) -> Result<(Vec<Group>, usize, usize)> {
    if let Some(p) = preds.iter().find(|p| !p.score.is_finite()) {
        return Err(invalid(alloc::format!("non-finite score {}", p.score)));
    }
    let n_known = preds.iter().filter(|p| p.truth.is_known()).count();
    let n_unknown = preds.len() - n_known;
    if n_known == 0 {
        return Err(Error::MissingSamples("no known samples"));
    }
    if n_unknown == 0 {
        return Err(Error::MissingSamples("no unknown samples"));
    }
    let mut sorted: Vec<&ScoredPrediction> = preds.iter().collect();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
    let mut groups: Vec<Group> = Vec::new();
    for p in sorted {
        let fresh = groups.last().is_none_or(|g| g.threshold != p.score);
        if fresh {
            groups.push(Group {
                threshold: p.score,
                known: 0,
                correct: 0,
                unknown: 0,
            });
        }
        let g = groups.last_mut().expect("group pushed above");
        if p.truth.is_known() {
            g.known += 1;
            g.correct += p.correct() as usize;
        } else {
            g.unknown += 1;
        }
    }
    Ok((groups, n_known, n_unknown))
}

/// Probability that a random known sample outscores a random unknown one,
/// ties counting one half. Computed from score groups in `O(N log N)`; the
/// pair count is accumulated in integers (doubled), so the result is exact.
pub fn auroc(preds: &[ScoredPrediction]) -> Result<f64> {
    let (groups, n_known, n_unknown) = descending_groups(preds)?;
    let mut twice_pairs: u128 = 0;
    let mut unknown_below = n_unknown as u128;
    for g in &groups {
        unknown_below -= g.unknown as u128;
        twice_pairs += g.known as u128 * (2 * unknown_below + g.unknown as u128);
    }
    Ok(twice_pairs as f64 / (2.0 * n_known as f64 * n_unknown as f64))
}

/// TPR (known accepted) against FPR (unknown accepted) at every distinct
/// score, starting from the empty acceptance set at `+inf`.
pub fn roc_points(preds: &[ScoredPrediction]) -> Result<Vec<CurvePoint>> {
    let (groups, n_known, n_unknown) = descending_groups(preds)?;
    Ok(cumulative_curve(&groups, n_known, n_unknown, |g| g.known))
}

/// The CCR-vs-FPR curve and its area.
///
/// At threshold `t`, CCR is the share of known samples that are correctly
/// classified and score at least `t`; FPR is the share of unknown samples
/// scoring at least `t`. The curve starts at `(0, 0)` for `t = +inf`, reaches
/// FPR 1 at the lowest score, and is integrated with the trapezoidal rule.
pub fn oscr(preds: &[ScoredPrediction]) -> Result<(Vec<CurvePoint>, f64)> {
    let (groups, n_known, n_unknown) = descending_groups(preds)?;
    let curve = cumulative_curve(&groups, n_known, n_unknown, |g| g.correct);
    let area = trapezoid_area(&curve);
    Ok((curve, area))
}

fn cumulative_curve(groups: &[Group], n_known: usize, n_unknown: usize, hits: impl Fn(&Group) -> usize) -> Vec<CurvePoint> {
    let mut curve = Vec::with_capacity(groups.len() + 1);
    curve.push(CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    for g in groups {
        tp += hits(g);
        fp += g.unknown;
        curve.push(CurvePoint {
            threshold: g.threshold,
            x: fp as f64 / n_unknown as f64,
            y: tp as f64 / n_known as f64,
        });
    }
    curve
}

/// Trapezoidal area under a curve sorted by `x`; extended flat to `x = 1`.
pub fn trapezoid_area(curve: &[CurvePoint]) -> f64 {
    let mut area = curve
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) * 0.5)
        .sum::<f64>();
    if let Some(last) = curve.last() {
        if last.x < 1.0 {
            area += (1.0 - last.x) * last.y;
        }
    }
    area
}

/// Accuracy, AUROC and OSCR of one prediction list.
pub fn evaluate(preds: &[ScoredPrediction]) -> Result<TrialMetrics> {
    Ok(TrialMetrics {
        acc: closed_set_accuracy(preds)?,
        auroc: auroc(preds)?,
        oscr: oscr(preds)?.1,
    })
}

/// Per-trial metrics plus their arithmetic means.
pub fn aggregate_trials(trials: &[TrialMetrics]) -> Result<MetricsReport> {
    if trials.is_empty() {
        return Err(invalid("cannot aggregate zero trials"));
    }
    let k = trials.len() as f64;
    let sum = trials.iter().fold(TrialMetrics::default(), |acc, t| TrialMetrics {
        acc: acc.acc + t.acc,
        auroc: acc.auroc + t.auroc,
        oscr: acc.oscr + t.oscr,
    });
    Ok(MetricsReport {
        trials: trials.to_vec(),
        mean: TrialMetrics {
            acc: sum.acc / k,
            auroc: sum.auroc / k,
            oscr: sum.oscr / k,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::build_simplex;

    fn p(score: f64, predicted: usize, truth: Truth) -> ScoredPrediction {
        ScoredPrediction { score, predicted, truth }
    }

    const K0: Truth = Truth::Known(0);
    const U: Truth = Truth::Unknown;

    #[test]
    fn scores_at_centers_and_centroid() {
        let s = build_simplex(3, 3, 2.0).unwrap();
        let feats = Matrix::from_rows(&[s.center(1), &[0.0, 0.0, 0.0]]).unwrap();
        let d = score_samples(&feats, &s, ScoreMode::NegMinDist).unwrap();
        assert_eq!(d[0], Scored { predicted: 1, score: -0.0 });
        let u = score_samples(&feats, &s, ScoreMode::OneMinusU).unwrap();
        assert_eq!(u[0].score, 1.0);
        assert!(u[1].score.abs() < 1e-12);
    }

    #[test]
    fn line_midpoint_score() {
        let s = build_simplex(2, 1, 1.0).unwrap();
        let sign = s.center(0)[0].signum();
        let f = Matrix::from_vec(1, 1, alloc::vec![0.5 * sign]).unwrap();
        let u = score_samples(&f, &s, ScoreMode::OneMinusU).unwrap();
        assert_eq!(u[0].predicted, 0);
        assert!((u[0].score - 2.0 / 3.0).abs() < 1e-15);
        assert!(score_samples(&Matrix::zeros(1, 2), &s, ScoreMode::NegMinDist).is_err());
    }

    #[test]
    fn score_mode_parsing() {
        assert_eq!("one_minus_u".parse::<ScoreMode>().unwrap(), ScoreMode::OneMinusU);
        assert_eq!(ScoreMode::NegMinDist.as_str().parse::<ScoreMode>().unwrap(), ScoreMode::NegMinDist);
        assert!("max_logit".parse::<ScoreMode>().is_err());
    }

    #[test]
    fn accuracy_counts() {
        let all = [p(0.0, 0, K0), p(0.0, 1, Truth::Known(1))];
        assert_eq!(closed_set_accuracy(&all).unwrap(), 1.0);
        let none = [p(0.0, 1, K0), p(0.0, 0, Truth::Known(1))];
        assert_eq!(closed_set_accuracy(&none).unwrap(), 0.0);
        let three = [p(0.0, 0, K0), p(0.0, 0, K0), p(0.0, 0, K0), p(0.0, 1, K0), p(0.0, 0, U)];
        assert_eq!(closed_set_accuracy(&three).unwrap(), 0.75);
        assert!(closed_set_accuracy(&[p(0.0, 0, U)]).is_err());
        assert!(closed_set_accuracy(&[]).is_err());
    }

    #[test]
    fn auroc_examples() {
        let perfect = [p(0.9, 0, K0), p(0.8, 0, K0), p(0.1, 0, U)];
        assert_eq!(auroc(&perfect).unwrap(), 1.0);
        let ties = [p(0.5, 0, K0), p(0.5, 0, U), p(0.5, 0, U)];
        assert_eq!(auroc(&ties).unwrap(), 0.5);
        let mixed = [p(0.9, 0, K0), p(0.4, 0, K0), p(0.5, 0, U)];
        assert_eq!(auroc(&mixed).unwrap(), 0.5);
        assert!(matches!(auroc(&[p(0.1, 0, K0)]), Err(Error::MissingSamples(_))));
        assert!(auroc(&[p(f64::NAN, 0, K0), p(0.0, 0, U)]).is_err());
    }

    #[test]
    fn oscr_examples() {
        let perfect = [p(0.9, 0, K0), p(0.8, 0, K0), p(0.1, 0, U)];
        assert_eq!(oscr(&perfect).unwrap().1, 1.0);

        let wrong = Truth::Known(1);
        let partial = [
            p(0.9, 0, K0),
            p(0.8, 0, wrong),
            p(0.7, 0, K0),
            p(0.6, 0, K0),
            p(0.2, 0, U),
            p(0.1, 0, U),
        ];
        let (curve, area) = oscr(&partial).unwrap();
        assert_eq!(area, 0.75);
        assert_eq!(curve.first().unwrap().threshold, f64::INFINITY);
        assert_eq!(curve.last().unwrap().x, 1.0);
        assert!(curve.windows(2).all(|w| w[0].x <= w[1].x));
    }

    #[test]
    fn roc_examples() {
        let perfect = [p(0.9, 0, K0), p(0.8, 0, K0), p(0.1, 0, U)];
        let pts = roc_points(&perfect).unwrap();
        assert!(pts.iter().any(|c| c.x == 0.0 && c.y == 1.0));
        assert_eq!(trapezoid_area(&pts), 1.0);

        let reversed = [p(0.1, 0, K0), p(0.2, 0, K0), p(0.9, 0, U)];
        assert_eq!(trapezoid_area(&roc_points(&reversed).unwrap()), 0.0);
        assert_eq!(auroc(&reversed).unwrap(), 0.0);
    }

    #[test]
    fn aggregate_means() {
        let t = |v: f64| TrialMetrics { acc: v, auroc: v, oscr: v };
        let r = aggregate_trials(&[t(0.8), t(0.9)]).unwrap();
        assert!((r.mean.acc - 0.85).abs() < 1e-15);
        assert_eq!(aggregate_trials(&[t(0.3)]).unwrap().mean, t(0.3));
        let three = aggregate_trials(&[t(0.5), t(0.7), t(0.6)]).unwrap();
        assert!((three.mean.oscr - 0.6).abs() < 1e-15);
        assert!(aggregate_trials(&[]).is_err());
    }
}
