//! Fairness and utility measurement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Mode};

/// Numerical slack applied to every pairwise Lipschitz check.
pub const AUDIT_EPSILON: f64 = 1e-9;

/// Positions of `m >= 2` individuals and their likelihood scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    geometry: Geometry,
    scores: Vec<f64>,
}

impl ScoredDataset {
    pub fn new(geometry: Geometry, scores: Vec<f64>) -> Result<Self> {
        if geometry.len() != scores.len() {
            return Err(Error::LengthMismatch {
                left: geometry.len(),
                right: scores.len(),
            });
        }
        if scores.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                got: scores.len(),
            });
        }
        validate_scores(&scores)?;
        Ok(ScoredDataset { geometry, scores })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn mode(&self) -> Mode {
        self.geometry.mode()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub(crate) fn validate_scores(scores: &[f64]) -> Result<()> {
    for (row, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite { row });
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange { row, value: s });
        }
    }
    Ok(())
}

/// Total-variation distance between two Bernoulli outcome distributions.
pub fn statistical_distance(score_i: f64, score_j: f64) -> Result<f64> {
    for (row, s) in [score_i, score_j].into_iter().enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange { row, value: s });
        }
    }
    Ok((score_i - score_j).abs())
}

/// Root-mean-square difference between original and adjusted scores.
pub fn fitting_error(original: &[f64], mapped: &[f64]) -> Result<f64> {
    if original.len() != mapped.len() {
        return Err(Error::LengthMismatch {
            left: original.len(),
            right: mapped.len(),
        });
    }
    if original.is_empty() {
        return Err(Error::Empty);
    }
    let sum: f64 = original
        .iter()
        .zip(mapped)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / original.len() as f64).sqrt())
}

pub fn clamp_score(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Suppresses out-of-range scores to 0 and 1. Clamping is 1-Lipschitz.
pub fn clamp_scores(raw: &[f64]) -> Vec<f64> {
    raw.iter().copied().map(clamp_score).collect()
}

/// Uniform pair sampling for datasets too large for an exhaustive audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSampling {
    pub pairs: u64,
    pub seed: u64,
}

/// Outcome of a pairwise Lipschitz audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub total_pairs: u64,
    pub violated_pairs: u64,
    pub unfairness_pct: f64,
    /// Largest `|s_i - s_j| - c * d(i, j)` observed, floored at zero.
    pub max_violation: f64,
    pub c_used: f64,
    pub sampled: bool,
}

impl AuditReport {
    pub fn is_fair(&self) -> bool {
        self.violated_pairs == 0
    }
}

#[derive(Clone, Copy)]
struct Tally {
    violated: u64,
    worst: f64,
}

impl Tally {
    const EMPTY: Tally = Tally {
        violated: 0,
        worst: 0.0,
    };

    fn merge(self, other: Tally) -> Tally {
        Tally {
            violated: self.violated + other.violated,
            worst: self.worst.max(other.worst),
        }
    }
}

#[inline]
fn check_pair(geometry: &Geometry, scores: &[f64], c: f64, i: usize, j: usize) -> Tally {
    let excess = (scores[i] - scores[j]).abs() - c * geometry.pair_distance(i, j);
    Tally {
        violated: u64::from(excess > AUDIT_EPSILON),
        worst: excess.max(0.0),
    }
}

/// Counts pairs whose score gap exceeds `c` times their distance.
///
/// Exhaustive over all `m(m-1)/2` pairs unless `sample` is given. The result
/// does not depend on the number of rayon workers.
pub fn pairwise_audit(
    geometry: &Geometry,
    scores: &[f64],
    c: f64,
    sample: Option<PairSampling>,
) -> Result<AuditReport> {
    let m = geometry.len();
    if scores.len() != m {
        return Err(Error::LengthMismatch {
            left: m,
            right: scores.len(),
        });
    }
    if m < 2 {
        return Err(Error::TooFewRows { needed: 2, got: m });
    }
    if !(c.is_finite() && c >= 1.0) {
        return Err(Error::InvalidFairnessConstant(c));
    }
    if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { row });
    }

    let (total, tally) = match sample {
        None => {
            let total = (m as u64) * (m as u64 - 1) / 2;
            let tally = (0..m)
                .into_par_iter()
                .map(|i| {
                    (i + 1..m).fold(Tally::EMPTY, |acc, j| {
                        acc.merge(check_pair(geometry, scores, c, i, j))
                    })
                })
                .reduce(|| Tally::EMPTY, Tally::merge);
            (total, tally)
        }
        Some(PairSampling { pairs, seed }) => {
            if pairs == 0 {
                return Err(Error::InvalidParameter("sample size must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let drawn: Vec<(usize, usize)> = (0..pairs)
                .map(|_| {
                    let i = rng.gen_range(0..m);
                    let mut j = rng.gen_range(0..m - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i, j)
                })
                .collect();
            let tally = drawn
                .par_iter()
                .map(|&(i, j)| check_pair(geometry, scores, c, i, j))
                .reduce(|| Tally::EMPTY, Tally::merge);
            (pairs, tally)
        }
    };

    Ok(AuditReport {
        total_pairs: total,
        violated_pairs: tally.violated,
        unfairness_pct: 100.0 * tally.violated as f64 / total as f64,
        max_violation: tally.worst,
        c_used: c,
        sampled: sample.is_some(),
    })
}
