//! Oracles and data generators shared by the integration tests. Nothing here
//! calls into the solver or the polynomial evaluators it checks.

#![allow(dead_code)]

use cfair::{DtRVector, Geometry, NormOrder, NormalizedPoints, ScoredDataset, SpatialPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sum_j a_j x^j` by explicit powers.
pub fn naive_univariate(coefficients: &[f64], x: f64) -> f64 {
    coefficients
        .iter()
        .enumerate()
        .map(|(j, a)| a * x.powi(j as i32))
        .sum()
}

/// `a_0 + sum_i sum_j a_ij x_i^j` by explicit powers.
pub fn naive_separable(intercept: f64, components: &[Vec<f64>], point: &[f64]) -> f64 {
    intercept
        + components
            .iter()
            .zip(point)
            .map(|(comp, &x)| {
                comp.iter()
                    .enumerate()
                    .map(|(j, a)| a * x.powi(j as i32 + 1))
                    .sum::<f64>()
            })
            .sum::<f64>()
}

pub fn naive_pnorm(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Solves `(A^T A) x = A^T b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn normal_equations(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let q = a[0].len();
    let mut m = vec![vec![0.0; q + 1]; q];
    for (row, &rhs) in a.iter().zip(b) {
        for i in 0..q {
            for j in 0..q {
                m[i][j] += row[i] * row[j];
            }
            m[i][q] += row[i] * rhs;
        }
    }
    for col in 0..q {
        let pivot = (col..q)
            .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for r in col + 1..q {
            let f = m[r][col] / m[col][col];
            for c in col..=q {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; q];
    for r in (0..q).rev() {
        let tail: f64 = (r + 1..q).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][q] - tail) / m[r][r];
    }
    x
}

pub fn uniform_dtr(m: usize, seed: u64) -> DtRVector {
    let mut rng = rng(seed);
    let mut distances: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
    distances[0] = 1.0;
    DtRVector::from_normalized(distances, NormOrder::EUCLIDEAN).unwrap()
}

pub fn uniform_points(m: usize, k: usize, seed: u64) -> NormalizedPoints {
    let mut rng = rng(seed);
    let points = (0..m)
        .map(|_| SpatialPoint::new((0..k).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap())
        .collect();
    NormalizedPoints::assume_normalized(points).unwrap()
}

/// Scores with a sharp spatial boundary plus noise, the shape that gives
/// thresholded classifiers their location bias.
pub fn boundary_scores<R: AsRef<[f64]>>(rows: &[R], seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    rows.iter()
        .map(|row| {
            let s: f64 = row.as_ref().iter().sum::<f64>() / row.as_ref().len() as f64;
            let base = if s > 0.1 { 0.8 } else { 0.25 };
            (base + rng.gen_range(-0.15..0.15) + 0.1 * (7.0 * s).sin()).clamp(0.0, 1.0)
        })
        .collect()
}

pub fn distance_dataset(m: usize, seed: u64) -> ScoredDataset {
    let dtr = uniform_dtr(m, seed);
    let rows: Vec<[f64; 1]> = dtr.distances().iter().map(|&l| [2.0 * l - 1.0]).collect();
    let scores = boundary_scores(&rows, seed + 1);
    ScoredDataset::new(Geometry::Distance(dtr), scores).unwrap()
}

pub fn zone_dataset(m: usize, k: usize, p: f64, seed: u64) -> ScoredDataset {
    let points = uniform_points(m, k, seed);
    let scores = boundary_scores(points.points(), seed + 1);
    ScoredDataset::new(
        Geometry::Zone {
            points,
            p: NormOrder::new(p).unwrap(),
        },
        scores,
    )
    .unwrap()
}

/// Brute-force count of Lipschitz violations, independent of `pairwise_audit`.
pub fn brute_force_violations(geometry: &Geometry, scores: &[f64], c: f64) -> u64 {
    let mut count = 0;
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let d = match geometry {
                Geometry::Distance(dtr) => (dtr.distances()[i] - dtr.distances()[j]).abs(),
                Geometry::Zone { points, p } => naive_pnorm(
                    points.points()[i].coords(),
                    points.points()[j].coords(),
                    p.value(),
                ),
            };
            if (scores[i] - scores[j]).abs() > c * d + 1e-9 {
                count += 1;
            }
        }
    }
    count
}

/// Logistic-regression style scores: a sigmoid of the mean coordinate plus noise.
pub fn logistic_scores<R: AsRef<[f64]>>(rows: &[R], steepness: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    rows.iter()
        .map(|row| {
            let s: f64 = row.as_ref().iter().sum::<f64>() / row.as_ref().len() as f64;
            (1.0 / (1.0 + (-steepness * s).exp()) + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0)
        })
        .collect()
}

pub fn logistic_distance_dataset(m: usize, steepness: f64, seed: u64) -> ScoredDataset {
    let dtr = uniform_dtr(m, seed);
    let rows: Vec<[f64; 1]> = dtr.distances().iter().map(|&l| [2.0 * l - 1.0]).collect();
    let scores = logistic_scores(&rows, steepness, seed + 1);
    ScoredDataset::new(Geometry::Distance(dtr), scores).unwrap()
}

pub fn logistic_zone_dataset(m: usize, k: usize, p: f64, steepness: f64, seed: u64) -> ScoredDataset {
    let points = uniform_points(m, k, seed);
    let scores = logistic_scores(points.points(), steepness, seed + 1);
    ScoredDataset::new(
        Geometry::Zone {
            points,
            p: NormOrder::new(p).unwrap(),
        },
        scores,
    )
    .unwrap()
}
