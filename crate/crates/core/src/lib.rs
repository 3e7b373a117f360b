//! Individual spatial fairness for classifier likelihood scores.
//!
//! Scores are replaced by the values of a *c-fair polynomial*: a polynomial
//! whose coefficients lie inside box bounds that guarantee
//! `|P(x) - P(y)| <= c * d(x, y)` over the whole normalized domain. Fitting is
//! a bounded-variable least-squares problem, so fairness holds for every pair
//! of individuals without generating a single pairwise constraint.
//!
//! Two settings are supported:
//!
//! * **distance-based**: each individual is a scalar distance to a reference
//!   point, normalized to `[0, 1]`, and `d(l_i, l_j) = |l_i - l_j|`;
//! * **zone-based**: each individual is a point in `[-1, 1]^k` and `d` is a
//!   Minkowski `p`-norm. The fitted polynomial is a sum of one univariate
//!   polynomial per coordinate.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod mechanisms;
pub mod metrics;
pub mod polynomial;
pub mod solver;

pub use bounds::{derive_bounds, CoefficientBounds, FairnessConfig, TheoremVariant};
pub use error::{Error, Result};
pub use geometry::{
    compute_dtr, minkowski_distance, normalize_coords, AffineTransform, DtRVector, Geometry, Mode,
    NormOrder, NormalizedPoints, SpatialPoint,
};
pub use mechanisms::{
    baseline_threshold, fit, fit_distance_fair, fit_zone_fair, select_degree, sweep_tradeoff,
    BaselineParams, FairModel, FitOptions, FitReport, Normalization,
};
pub use metrics::{
    clamp_scores, fitting_error, pairwise_audit, statistical_distance, AuditReport, PairSampling,
    ScoredDataset,
};
pub use polynomial::{FairPolynomial, SeparablePolynomial, UnivariatePolynomial};
pub use solver::{bvls_solve, SolveDiagnostics, SolverConfig};
