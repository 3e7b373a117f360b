//! Bounded-variable least squares: `min ||L a - b||_2` subject to `lo <= a <= hi`.
//!
//! Active-set iteration in the style of Stark and Parker. Each step solves the
//! unconstrained problem on the free variables with the pinned ones held at
//! their bounds, then walks from the current point toward that solution until
//! the first free variable reaches a bound. When the free-set solution is
//! feasible, the variable whose gradient most strongly points into the box is
//! released. Every step moves along a segment toward a subspace minimizer, so
//! the objective never increases.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::CoefficientBounds;
use crate::error::{Error, Result};

/// Tolerance, relative to `||L^T b||`, on the gradient at a reported optimum.
pub const KKT_TOLERANCE: f64 = 1e-6;

// stricter level required before a small relative change may end the solve
const EARLY_STOP_KKT: f64 = 1e-9;
const RELEASE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative change in `||L a - b||` under which a KKT-consistent point is accepted.
    pub tolerance: f64,
    /// Draws the starting point uniformly inside the box instead of starting at zero.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 300,
            tolerance: 1e-2,
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Where a coefficient ended relative to its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundState {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Number of free-set least-squares solves.
    pub iterations: usize,
    /// Final `||L a - b||_2`.
    pub objective: f64,
    pub converged: bool,
    pub active: Vec<BoundState>,
    /// A free-set system was rank deficient and solved in the least-norm sense.
    pub rank_deficient: bool,
    /// Fewer rows than columns.
    pub underdetermined: bool,
    /// Objective after every step, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coefficients: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

pub fn bvls_solve(
    design: &DMatrix<f64>,
    b: &[f64],
    bounds: &CoefficientBounds,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    let (m, q) = design.shape();
    if b.len() != m {
        return Err(Error::LengthMismatch { left: m, right: b.len() });
    }
    if bounds.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: bounds.len(),
        });
    }
    if q == 0 || m == 0 {
        return Err(Error::Empty);
    }
    if let Some(row) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row });
    }
    if let Some(idx) = design.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: idx % m });
    }

    let lo = bounds.lower();
    let hi = bounds.upper();
    let target = DVector::from_column_slice(b);
    let scale = (design.transpose() * &target).norm();
    let release_floor = (RELEASE_THRESHOLD * scale).max(f64::MIN_POSITIVE);
    let target_norm = target.norm();
    let column_norms: Vec<f64> = (0..q).map(|j| design.column(j).norm()).collect();

    let mut x = starting_point(lo, hi, config.seed);
    let mut state: Vec<BoundState> = (0..q).map(|j| classify(x[j], lo[j], hi[j])).collect();
    let mut blocked = vec![false; q];
    let mut rank_deficient = false;
    let mut iterations = 0;
    let mut trace = vec![objective(design, &x, &target)];
    let mut previous_outer: Option<f64> = None;
    let mut last_release: Option<(usize, BoundState, f64)> = None;

    let converged = 'outer: loop {
        // drive the free variables to their subspace optimum
        loop {
            let free: Vec<usize> = (0..q).filter(|&j| state[j] == BoundState::Free).collect();
            if free.is_empty() {
                break;
            }
            if iterations >= config.max_iterations {
                break 'outer false;
            }
            iterations += 1;

            let (z, deficient) = free_set_solve(design, &target, &x, &free);
            rank_deficient |= deficient;

            let mut alpha = 1.0_f64;
            for (t, &j) in free.iter().enumerate() {
                let bound = if z[t] < lo[j] {
                    lo[j]
                } else if z[t] > hi[j] {
                    hi[j]
                } else {
                    continue;
                };
                let step = (bound - x[j]) / (z[t] - x[j]);
                alpha = alpha.min(step.max(0.0));
            }

            if alpha >= 1.0 {
                for (t, &j) in free.iter().enumerate() {
                    x[j] = z[t];
                }
                trace.push(objective(design, &x, &target));
                break;
            }

            for (t, &j) in free.iter().enumerate() {
                let violated = if z[t] < lo[j] {
                    Some((lo[j], BoundState::Lower))
                } else if z[t] > hi[j] {
                    Some((hi[j], BoundState::Upper))
                } else {
                    None
                };
                if let Some((bound, pinned)) = violated {
                    let step = (bound - x[j]) / (z[t] - x[j]);
                    if step <= alpha * (1.0 + 1e-12) + 1e-15 {
                        x[j] = bound;
                        state[j] = pinned;
                        continue;
                    }
                }
                x[j] = (x[j] + alpha * (z[t] - x[j])).clamp(lo[j], hi[j]);
            }
            trace.push(objective(design, &x, &target));
        }

        let f = objective(design, &x, &target);
        if let Some((j, pinned, before)) = last_release.take() {
            // a released variable that bounced straight back is numerically optimal there
            if state[j] == pinned && f >= before {
                blocked[j] = true;
            } else {
                blocked.iter_mut().for_each(|b| *b = false);
            }
        }
        let gradient = descent_direction(design, &x, &target);

        if let Some(prev) = previous_outer {
            let relative = if prev > 0.0 { (prev - f) / prev } else { 0.0 };
            if relative < config.tolerance
                && kkt_violation_from(&gradient, &x, lo, hi) <= EARLY_STOP_KKT * scale
            {
                break true;
            }
        }
        previous_outer = Some(f);

        let mut release: Option<(usize, f64)> = None;
        for j in 0..q {
            if blocked[j] || lo[j] == hi[j] {
                continue;
            }
            let noise = 16.0 * f64::EPSILON * column_norms[j] * (target_norm + f);
            let threshold = release_floor.max(noise.min(1e-9 * scale));
            let pull = match state[j] {
                BoundState::Lower if gradient[j] > threshold => gradient[j],
                BoundState::Upper if gradient[j] < -threshold => -gradient[j],
                _ => continue,
            };
            if release.is_none_or(|(_, best)| pull > best) {
                release = Some((j, pull));
            }
        }
        let Some((j, _)) = release else {
            break true;
        };

        last_release = Some((j, state[j], f));
        state[j] = BoundState::Free;
    };

    let objective_value = objective(design, &x, &target);
    Ok(Solution {
        diagnostics: SolveDiagnostics {
            iterations,
            objective: objective_value,
            converged,
            active: (0..q).map(|j| classify(x[j], lo[j], hi[j])).collect(),
            rank_deficient,
            underdetermined: m < q,
            objective_trace: trace,
        },
        coefficients: x.iter().copied().collect(),
    })
}

fn classify(x: f64, lo: f64, hi: f64) -> BoundState {
    if x <= lo {
        BoundState::Lower
    } else if x >= hi {
        BoundState::Upper
    } else {
        BoundState::Free
    }
}

fn starting_point(lo: &[f64], hi: &[f64], seed: Option<u64>) -> DVector<f64> {
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    DVector::from_iterator(
        lo.len(),
        lo.iter().zip(hi).map(|(&l, &h)| match rng.as_mut() {
            Some(rng) if l.is_finite() && h.is_finite() && l < h => rng.gen_range(l..=h),
            _ => 0.0_f64.clamp(l, h),
        }),
    )
}

fn objective(design: &DMatrix<f64>, x: &DVector<f64>, target: &DVector<f64>) -> f64 {
    (design * x - target).norm()
}

/// `L^T (b - L x)`, i.e. minus half the gradient of `||L x - b||^2`.
fn descent_direction(design: &DMatrix<f64>, x: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
    design.tr_mul(&(target - design * x))
}

fn kkt_violation_from(descent: &DVector<f64>, x: &DVector<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    (0..x.len())
        .map(|j| {
            // gradient component is -2 * descent[j]
            let g = -2.0 * descent[j];
            match classify(x[j], lo[j], hi[j]) {
                BoundState::Free => g.abs(),
                BoundState::Upper => g.max(0.0),
                BoundState::Lower => (-g).max(0.0),
            }
        })
        .fold(0.0, f64::max)
}

/// Largest violation of the first-order conditions at `x`, and the scale `||L^T b||`.
///
/// For free coefficients the gradient `2 L^T (L a - b)` must vanish; at an upper
/// bound it must be `<= 0` and at a lower bound `>= 0`.
pub fn kkt_violation(
    design: &DMatrix<f64>,
    b: &[f64],
    coefficients: &[f64],
    bounds: &CoefficientBounds,
) -> Result<KktCheck> {
    let (m, q) = design.shape();
    if b.len() != m {
        return Err(Error::LengthMismatch { left: m, right: b.len() });
    }
    if coefficients.len() != q || bounds.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: coefficients.len().min(bounds.len()),
        });
    }
    let target = DVector::from_column_slice(b);
    let x = DVector::from_column_slice(coefficients);
    let descent = descent_direction(design, &x, &target);
    Ok(KktCheck {
        max_violation: kkt_violation_from(&descent, &x, bounds.lower(), bounds.upper()),
        scale: (design.transpose() * &target).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktCheck {
    pub max_violation: f64,
    pub scale: f64,
}

impl KktCheck {
    pub fn holds(&self, relative_tolerance: f64) -> bool {
        self.max_violation <= relative_tolerance * self.scale
    }
}

/// Least squares on the free columns with pinned columns moved to the right-hand side.
fn free_set_solve(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    x: &DVector<f64>,
    free: &[usize],
) -> (DVector<f64>, bool) {
    let m = design.nrows();
    let mut rhs = target.clone();
    for j in 0..design.ncols() {
        if !free.contains(&j) && x[j] != 0.0 {
            rhs.axpy(-x[j], &design.column(j), 1.0);
        }
    }
    let sub = DMatrix::from_fn(m, free.len(), |r, c| design[(r, free[c])]);
    least_squares(sub, rhs)
}

fn least_squares(a: DMatrix<f64>, mut rhs: DVector<f64>) -> (DVector<f64>, bool) {
    let (m, n) = a.shape();
    if m >= n {
        let qr = a.clone().qr();
        let r = qr.r();
        let largest = r.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let cutoff = largest * f64::EPSILON * (m.max(n) as f64);
        if largest > 0.0 && r.diagonal().iter().all(|v| v.abs() > cutoff) {
            qr.q_tr_mul(&mut rhs);
            let head = rhs.rows(0, n).into_owned();
            if let Some(z) = r.solve_upper_triangular(&head) {
                return (z, false);
            }
        }
    }
    let svd = a.svd(true, true);
    let largest = svd.singular_values.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let eps = largest * f64::EPSILON * (m.max(n) as f64);
    let z = svd
        .solve(&rhs, eps)
        .unwrap_or_else(|_| DVector::zeros(n));
    (z, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vandermonde(xs: &[f64], n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), n + 1, |r, c| xs[r].powi(c as i32))
    }

    fn grid(m: usize) -> Vec<f64> {
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn zero_target_gives_zero() {
        let l = vandermonde(&grid(20), 3);
        let bounds = CoefficientBounds::new(vec![-1.0; 4], vec![1.0; 4]).unwrap();
        let sol = bvls_solve(&l, &[0.0; 20], &bounds, &SolverConfig::default()).unwrap();
        assert!(sol.coefficients.iter().all(|&a| a == 0.0));
        assert_eq!(sol.diagnostics.objective, 0.0);
        assert!(sol.diagnostics.converged);
    }

    #[test]
    fn one_sided_bound_binds() {
        // unconstrained slope would be 2; box caps it at 1
        let xs = grid(11);
        let l = vandermonde(&xs, 1);
        let b: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let bounds =
            CoefficientBounds::new(vec![f64::NEG_INFINITY, -1.0], vec![f64::INFINITY, 1.0]).unwrap();
        let sol = bvls_solve(&l, &b, &bounds, &SolverConfig::default()).unwrap();
        assert_eq!(sol.coefficients[1], 1.0);
        // intercept then fits mean(2x - x) = 0.5
        assert!((sol.coefficients[0] - 0.5).abs() < 1e-12);
        assert_eq!(sol.diagnostics.active[1], BoundState::Upper);
        assert!(kkt_violation(&l, &b, &sol.coefficients, &bounds).unwrap().holds(1e-9));
    }

    #[test]
    fn random_start_is_deterministic() {
        let xs = grid(30);
        let l = vandermonde(&xs, 4);
        let b: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin() * 0.5 + 0.5).collect();
        let bounds = CoefficientBounds::new(
            vec![f64::NEG_INFINITY, -0.1, -0.2, -0.3, -0.4],
            vec![f64::INFINITY, 0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let config = SolverConfig {
            seed: Some(42),
            ..SolverConfig::default()
        };
        let a = bvls_solve(&l, &b, &bounds, &config).unwrap();
        let b2 = bvls_solve(&l, &b, &bounds, &config).unwrap();
        assert_eq!(a, b2);
        let zero_start = bvls_solve(&l, &b, &bounds, &SolverConfig::default()).unwrap();
        assert!((a.diagnostics.objective - zero_start.diagnostics.objective).abs() < 1e-9);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let l = vandermonde(&grid(5), 2);
        let bounds = CoefficientBounds::unbounded(3);
        let config = SolverConfig::default();
        assert!(matches!(bvls_solve(&l, &[0.0; 4], &bounds, &config), Err(Error::LengthMismatch { .. })));
        assert!(matches!(
            bvls_solve(&l, &[0.0; 5], &CoefficientBounds::unbounded(2), &config),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut b = [0.0; 5];
        b[2] = f64::NAN;
        assert!(matches!(bvls_solve(&l, &b, &bounds, &config), Err(Error::NonFinite { row: 2 })));
        let bad = SolverConfig {
            max_iterations: 0,
            ..config
        };
        assert!(bvls_solve(&l, &[0.0; 5], &bounds, &bad).is_err());
    }

    #[test]
    fn duplicated_column_is_flagged_not_fatal() {
        let xs = grid(10);
        let l = DMatrix::from_fn(10, 3, |r, c| if c == 0 { 1.0 } else { xs[r] });
        let b: Vec<f64> = xs.iter().map(|x| 0.2 + 0.4 * x).collect();
        let sol = bvls_solve(&l, &b, &CoefficientBounds::unbounded(3), &SolverConfig::default()).unwrap();
        assert!(sol.diagnostics.rank_deficient);
        assert!(sol.diagnostics.objective < 1e-10);
        assert!((sol.coefficients[1] - sol.coefficients[2]).abs() < 1e-9);
    }

    #[test]
    fn underdetermined_is_reported() {
        let l = vandermonde(&[0.0, 0.5], 3);
        let sol = bvls_solve(&l, &[0.1, 0.3], &CoefficientBounds::unbounded(4), &SolverConfig::default())
            .unwrap();
        assert!(sol.diagnostics.underdetermined);
        assert!(sol.diagnostics.objective < 1e-12);
    }

    #[test]
    fn iteration_cap_clears_converged() {
        let xs = grid(40);
        let l = vandermonde(&xs, 6);
        let b: Vec<f64> = xs.iter().map(|x| if *x < 0.5 { 0.0 } else { 1.0 }).collect();
        let bounds = CoefficientBounds::new(
            std::iter::once(f64::NEG_INFINITY).chain(std::iter::repeat_n(-0.01, 6)).collect(),
            std::iter::once(f64::INFINITY).chain(std::iter::repeat_n(0.01, 6)).collect(),
        )
        .unwrap();
        let config = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::default()
        };
        let sol = bvls_solve(&l, &b, &bounds, &config).unwrap();
        assert!(!sol.diagnostics.converged);
        assert!(bounds.contains(&sol.coefficients));
    }
}
