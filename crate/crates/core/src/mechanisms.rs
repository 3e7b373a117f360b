//! End-to-end fairness mechanisms, degree selection and the threshold baseline.

use std::ops::RangeInclusive;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{derive_bounds, FairnessConfig, TheoremVariant};
use crate::error::{Error, Result};
use crate::geometry::{
    minkowski, AffineTransform, DtRVector, Geometry, Mode, NormOrder, NormalizedPoints,
};
use crate::metrics::{
    clamp_score, clamp_scores, fitting_error, pairwise_audit, validate_scores, AuditReport,
    PairSampling, ScoredDataset,
};
use crate::polynomial::{design_for, FairPolynomial};
use crate::solver::{bvls_solve, SolveDiagnostics, SolverConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOptions {
    pub solver: SolverConfig,
    /// Audit a uniform sample of pairs instead of all of them.
    pub audit_sample: Option<PairSampling>,
}

/// How raw inputs reach the normalized domain of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// DtR values: `||x - reference||_p / gamma`. Without a reference the
    /// model expects already-normalized distances.
    Distance {
        gamma: f64,
        p: NormOrder,
        reference: Option<Vec<f64>>,
    },
    Zone(AffineTransform),
}

impl Normalization {
    fn of(geometry: &Geometry) -> Normalization {
        match geometry {
            Geometry::Distance(dtr) => Normalization::Distance {
                gamma: dtr.gamma(),
                p: dtr.p(),
                reference: dtr.reference().map(<[f64]>::to_vec),
            },
            Geometry::Zone { points, .. } => Normalization::Zone(points.transform().clone()),
        }
    }
}

/// Score for one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    /// The query fell outside the training domain and was clipped onto it.
    pub clipped: bool,
}

/// A fitted fair polynomial with everything needed to score new points.
#[derive(Debug, Clone, PartialEq)]
pub struct FairModel {
    pub polynomial: FairPolynomial,
    pub config: FairnessConfig,
    pub variant: TheoremVariant,
    pub normalization: Normalization,
}

impl FairModel {
    /// Scores a point already in normalized space, clipping it onto the domain.
    pub fn predict_normalized(&self, query: &[f64]) -> Result<Prediction> {
        let (lo, hi) = match self.config.mode() {
            Mode::Distance => (0.0, 1.0),
            Mode::Zone => (-1.0, 1.0),
        };
        let mut clipped = false;
        let inside: Vec<f64> = query
            .iter()
            .map(|&v| {
                let c = v.clamp(lo, hi);
                clipped |= c != v;
                c
            })
            .collect();
        let score = clamp_score(self.polynomial.eval(&inside)?);
        Ok(Prediction { score, clipped })
    }

    /// Scores a raw point: coordinates for zone models or for distance models
    /// with a reference point, otherwise a single DtR value.
    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0 });
        }
        match &self.normalization {
            Normalization::Distance {
                gamma,
                p,
                reference: Some(reference),
            } => {
                if reference.len() != query.len() {
                    return Err(Error::DimensionMismatch {
                        expected: reference.len(),
                        got: query.len(),
                    });
                }
                let l = minkowski(query, reference, p.value()) / gamma;
                self.predict_normalized(&[l])
            }
            Normalization::Distance { reference: None, .. } => self.predict_normalized(query),
            Normalization::Zone(transform) => self.predict_normalized(&transform.apply(query)?),
        }
    }

    /// Scores many raw points; returns the scores and how many were clipped.
    pub fn predict_batch<Q: AsRef<[f64]>>(&self, queries: &[Q]) -> Result<(Vec<f64>, usize)> {
        let mut clipped = 0;
        let scores = queries
            .iter()
            .map(|q| {
                let p = self.predict(q.as_ref())?;
                clipped += usize::from(p.clipped);
                Ok(p.score)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((scores, clipped))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: FairModel,
    /// Polynomial predictions clamped to `[0, 1]`, aligned with the input rows.
    pub fair_scores: Vec<f64>,
    pub fitting_error: f64,
    pub diagnostics: SolveDiagnostics,
    /// Audit of `fair_scores` at the fitting level `c`.
    pub audit: AuditReport,
    pub coefficients: Vec<f64>,
}

fn fit_geometry(
    geometry: &Geometry,
    scores: &[f64],
    config: FairnessConfig,
    options: &FitOptions,
) -> Result<FitReport> {
    if scores.len() != geometry.len() {
        return Err(Error::LengthMismatch {
            left: geometry.len(),
            right: scores.len(),
        });
    }
    validate_scores(scores)?;
    let design = design_for(geometry, config.degree())?;
    let bounds = derive_bounds(&config);
    let solution = bvls_solve(design.matrix(), scores, &bounds, &options.solver)?;
    let polynomial = design.polynomial(&solution.coefficients)?;
    let fair_scores = clamp_scores(&design.apply(&solution.coefficients)?);
    let error = fitting_error(scores, &fair_scores)?;
    let audit = pairwise_audit(geometry, &fair_scores, config.c(), options.audit_sample)?;
    Ok(FitReport {
        model: FairModel {
            polynomial,
            config,
            variant: bounds.variant().expect("theorem bounds carry a variant"),
            normalization: Normalization::of(geometry),
        },
        fair_scores,
        fitting_error: error,
        diagnostics: solution.diagnostics,
        audit,
        coefficients: solution.coefficients,
    })
}

/// Fits a univariate `c`-fair polynomial of degree `n` to scores over DtR values.
pub fn fit_distance_fair(
    dtr: &DtRVector,
    scores: &[f64],
    c: f64,
    degree: usize,
    options: &FitOptions,
) -> Result<FitReport> {
    let config = FairnessConfig::distance(c, degree)?;
    fit_geometry(&Geometry::Distance(dtr.clone()), scores, config, options)
}

/// Fits a separable `c`-fair polynomial to scores over normalized coordinates.
pub fn fit_zone_fair(
    points: &NormalizedPoints,
    scores: &[f64],
    config: &FairnessConfig,
    options: &FitOptions,
) -> Result<FitReport> {
    if config.mode() != Mode::Zone {
        return Err(Error::InvalidParameter("zone fit needs a zone-based config".into()));
    }
    if config.dim() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.dim(),
            got: points.dim(),
        });
    }
    let geometry = Geometry::Zone {
        points: points.clone(),
        p: config.p(),
    };
    fit_geometry(&geometry, scores, *config, options)
}

/// The fairness config a dataset implies for a given `c` and degree.
pub fn config_for(dataset: &ScoredDataset, c: f64, degree: usize) -> Result<FairnessConfig> {
    match dataset.geometry() {
        Geometry::Distance(_) => FairnessConfig::distance(c, degree),
        Geometry::Zone { points, p } => FairnessConfig::zone(c, degree, points.dim(), *p),
    }
}

/// Fits whichever mechanism the dataset's geometry calls for.
pub fn fit(dataset: &ScoredDataset, c: f64, degree: usize, options: &FitOptions) -> Result<FitReport> {
    let config = config_for(dataset, c, degree)?;
    fit_geometry(dataset.geometry(), dataset.scores(), config, options)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub degree: usize,
    /// `sum e_i^2 / (m - q)` with `q` fitted coefficients; `None` when skipped.
    pub criterion: Option<f64>,
    pub fitting_error: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSelection {
    pub best: usize,
    pub rows: Vec<DegreeRow>,
}

/// Picks the degree minimizing the residual variance `sum e_i^2 / (m - n - 1)`.
///
/// For `k` coordinates the denominator uses all `k n + 1` coefficients.
/// Degrees leaving no residual degrees of freedom are skipped. Near-ties go
/// to the smaller degree.
pub fn select_degree(
    dataset: &ScoredDataset,
    c: f64,
    degrees: RangeInclusive<usize>,
    options: &FitOptions,
) -> Result<DegreeSelection> {
    if degrees.is_empty() || *degrees.start() < 1 {
        return Err(Error::InvalidParameter("degree range must be non-empty and start at 1".into()));
    }
    let m = dataset.len();
    let k = dataset.geometry().dim();
    let rows: Vec<DegreeRow> = degrees
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let params = k * n + 1;
            if m <= params {
                return Ok(DegreeRow {
                    degree: n,
                    criterion: None,
                    fitting_error: None,
                    skipped: Some(format!("{m} rows leave no residual degrees of freedom for {params} coefficients")),
                });
            }
            let config = config_for(dataset, c, n)?;
            let design = design_for(dataset.geometry(), n)?;
            let bounds = derive_bounds(&config);
            let solution = bvls_solve(design.matrix(), dataset.scores(), &bounds, &options.solver)?;
            let fitted = design.apply(&solution.coefficients)?;
            let sse: f64 = dataset
                .scores()
                .iter()
                .zip(&fitted)
                .map(|(s, p)| (s - p) * (s - p))
                .sum();
            Ok(DegreeRow {
                degree: n,
                criterion: Some(sse / (m - params) as f64),
                fitting_error: Some(fitting_error(dataset.scores(), &clamp_scores(&fitted))?),
                skipped: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(usize, f64)> = None;
    for row in &rows {
        let Some(criterion) = row.criterion else { continue };
        let better = match best {
            None => true,
            Some((_, held)) => criterion < held * (1.0 - 1e-9) - 1e-18,
        };
        if better {
            best = Some((row.degree, criterion));
        }
    }
    let (best, _) = best.ok_or(Error::TooFewRows {
        needed: k * rows[0].degree + 2,
        got: m,
    })?;
    Ok(DegreeSelection { best, rows })
}

/// Threshold `t` and per-score allowance `alpha` for the baseline mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    threshold: f64,
    alpha: f64,
}

impl BaselineParams {
    pub fn new(threshold: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidParameter(format!("threshold {threshold} outside [0, 1]")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} must be >= 0")));
        }
        Ok(BaselineParams { threshold, alpha })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub scores: Vec<f64>,
    pub audit: AuditReport,
    pub fitting_error: f64,
}

/// Target each score is pushed toward: `t` over DtR, `sum x_i / sqrt(k)` clamped
/// to `[0, 1]` over coordinates.
fn baseline_target(geometry: &Geometry, row: usize, threshold: f64) -> f64 {
    match geometry {
        Geometry::Distance(_) => threshold,
        Geometry::Zone { points, .. } => {
            let coords = points.points()[row].coords();
            let sum: f64 = coords.iter().sum();
            clamp_score(sum / (coords.len() as f64).sqrt())
        }
    }
}

/// Moves each score toward its target by at most `alpha`, never overshooting.
pub fn baseline_threshold(
    dataset: &ScoredDataset,
    params: BaselineParams,
    c: f64,
    sample: Option<PairSampling>,
) -> Result<BaselineOutcome> {
    let geometry = dataset.geometry();
    let scores: Vec<f64> = dataset
        .scores()
        .iter()
        .enumerate()
        .map(|(row, &m)| {
            if params.alpha == 0.0 {
                return m;
            }
            let target = baseline_target(geometry, row, params.threshold);
            let gap = target - m;
            if gap.abs() <= params.alpha {
                target
            } else {
                m + gap.signum() * params.alpha
            }
        })
        .collect();
    let audit = pairwise_audit(geometry, &scores, c, sample)?;
    let error = fitting_error(dataset.scores(), &scores)?;
    Ok(BaselineOutcome {
        scores,
        audit,
        fitting_error: error,
    })
}

/// One cell of a `(c, n)` trade-off sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    pub degree: usize,
    /// Audited at the fitting level `c`.
    pub unfairness_pct: f64,
    /// Audited at `c = 1` for comparison across cells.
    pub unfairness_pct_c1: f64,
    pub fitting_error: f64,
    pub solve_time_ms: f64,
    pub iterations: usize,
    pub final_cost: f64,
    pub converged: bool,
    pub variant: Option<TheoremVariant>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(c: f64, degree: usize, error: Error) -> SweepRow {
        SweepRow {
            c,
            degree,
            unfairness_pct: f64::NAN,
            unfairness_pct_c1: f64::NAN,
            fitting_error: f64::NAN,
            solve_time_ms: f64::NAN,
            iterations: 0,
            final_cost: f64::NAN,
            converged: false,
            variant: None,
            error: Some(error.to_string()),
        }
    }
}

/// Fits every `(c, n)` cell. Rows come back in grid order (`c` outer, `n` inner);
/// a failing cell records its error and the sweep continues.
pub fn sweep_tradeoff(
    dataset: &ScoredDataset,
    c_values: &[f64],
    degrees: &[usize],
    options: &FitOptions,
) -> Result<Vec<SweepRow>> {
    if c_values.is_empty() || degrees.is_empty() {
        return Err(Error::Empty);
    }
    let cells: Vec<(f64, usize)> = c_values
        .iter()
        .flat_map(|&c| degrees.iter().map(move |&n| (c, n)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(c, n)| {
            let started = Instant::now();
            let report = match fit(dataset, c, n, options) {
                Ok(report) => report,
                Err(e) => return SweepRow::failed(c, n, e),
            };
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            let at_unit = if c == 1.0 {
                Ok(report.audit.clone())
            } else {
                pairwise_audit(dataset.geometry(), &report.fair_scores, 1.0, options.audit_sample)
            };
            match at_unit {
                Ok(unit) => SweepRow {
                    c,
                    degree: n,
                    unfairness_pct: report.audit.unfairness_pct,
                    unfairness_pct_c1: unit.unfairness_pct,
                    fitting_error: report.fitting_error,
                    solve_time_ms: elapsed,
                    iterations: report.diagnostics.iterations,
                    final_cost: report.diagnostics.objective,
                    converged: report.diagnostics.converged,
                    variant: Some(report.model.variant),
                    error: None,
                },
                Err(e) => SweepRow::failed(c, n, e),
            }
        })
        .collect())
}
