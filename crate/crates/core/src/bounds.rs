//! Coefficient box bounds that make a polynomial `c`-fair.
//!
//! A univariate polynomial on `|x| <= 1` is `c`-fair whenever
//! `sum_i i |a_i| <= c`. Spreading that budget over the coefficients by
//! maximizing `sum a_i` gives the linear box `|a_i| <= 6 i c / (n (n+1) (2n+1))`,
//! which is tight: `sum_i i * 6 i c / (n (n+1) (2n+1)) = c`.
//!
//! For `k` coordinates compared under a `p`-norm, Hölder gives
//! `||v||_p >= ||v||_1 / k^((p-1)/p)`, so each separable component gets the
//! budget `c / k^((p-1)/p)`. The intercept cancels in every difference and is
//! never bounded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mode, NormOrder};
use crate::polynomial::{Column, SeparablePolynomial, Structure, UnivariatePolynomial};

/// Slack used when judging the nonlinear sufficient condition.
pub const CONDITION_EPSILON: f64 = 1e-9;

/// Fairness level, polynomial shape and metric for one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    c: f64,
    degree: usize,
    dim: usize,
    p: NormOrder,
    mode: Mode,
}

impl FairnessConfig {
    pub fn new(c: f64, degree: usize, dim: usize, p: NormOrder, mode: Mode) -> Result<Self> {
        if !(c.is_finite() && c >= 1.0) {
            return Err(Error::InvalidFairnessConstant(c));
        }
        if degree < 1 {
            return Err(Error::InvalidDegree(degree));
        }
        if dim < 1 {
            return Err(Error::Empty);
        }
        if mode == Mode::Distance && dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: dim,
            });
        }
        Ok(FairnessConfig {
            c,
            degree,
            dim,
            p,
            mode,
        })
    }

    /// Distance-based fairness over scalar DtR values, `d = |l_i - l_j|`.
    pub fn distance(c: f64, degree: usize) -> Result<Self> {
        FairnessConfig::new(c, degree, 1, NormOrder::MANHATTAN, Mode::Distance)
    }

    /// Zone-based fairness over `dim` coordinates under a `p`-norm.
    pub fn zone(c: f64, degree: usize, dim: usize, p: NormOrder) -> Result<Self> {
        FairnessConfig::new(c, degree, dim, p, Mode::Zone)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> NormOrder {
        self.p
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn structure(&self) -> Structure {
        match self.mode {
            Mode::Distance => Structure::Univariate,
            Mode::Zone => Structure::Separable { dim: self.dim },
        }
    }

    /// `k^((p-1)/p)`, the norm-equivalence factor between the 1-norm and the `p`-norm.
    pub fn norm_factor(&self) -> f64 {
        let p = self.p.value();
        (self.dim as f64).powf((p - 1.0) / p)
    }

    /// Budget for `sum_j j |a_ij|` on each variable.
    pub fn component_budget(&self) -> f64 {
        self.c / self.norm_factor()
    }
}

/// Which sufficient condition produced a set of bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremVariant {
    /// One variable, any degree: `6 i c / (n (n+1) (2n+1))`.
    UnivariateLinearized,
    /// Two variables, Euclidean, degree one: `c / sqrt(2)`.
    PlanarEuclidean,
    /// `k` variables, Euclidean, degree one: `c / sqrt(k)`.
    EuclideanLinear,
    /// `k` variables, `p`-norm, degree one: `c / k^((p-1)/p)`.
    PNormLinear,
    /// `k` variables, `p`-norm, any degree, separable components.
    SeparablePNorm,
}

impl TheoremVariant {
    pub const ALL: [TheoremVariant; 5] = [
        TheoremVariant::UnivariateLinearized,
        TheoremVariant::PlanarEuclidean,
        TheoremVariant::EuclideanLinear,
        TheoremVariant::PNormLinear,
        TheoremVariant::SeparablePNorm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremVariant::UnivariateLinearized => "univariate-linearized",
            TheoremVariant::PlanarEuclidean => "planar-euclidean",
            TheoremVariant::EuclideanLinear => "euclidean-linear",
            TheoremVariant::PNormLinear => "p-norm-linear",
            TheoremVariant::SeparablePNorm => "separable-p-norm",
        }
    }

    pub fn applies_to(self, config: &FairnessConfig) -> bool {
        let (k, n, p) = (config.dim, config.degree, config.p.value());
        match self {
            TheoremVariant::UnivariateLinearized => k == 1,
            TheoremVariant::PlanarEuclidean => k == 2 && p == 2.0 && n == 1,
            TheoremVariant::EuclideanLinear => p == 2.0 && n == 1,
            TheoremVariant::PNormLinear => n == 1,
            TheoremVariant::SeparablePNorm => true,
        }
    }

    /// Bound on the coefficient of `x_i^power`, or `None` if the variant does not apply.
    pub fn bound(self, config: &FairnessConfig, power: usize) -> Option<f64> {
        if !self.applies_to(config) || power == 0 || power > config.degree {
            return None;
        }
        let c = config.c;
        let k = config.dim as f64;
        Some(match self {
            TheoremVariant::UnivariateLinearized => univariate_bound(power, config.degree, c),
            TheoremVariant::PlanarEuclidean => c / std::f64::consts::SQRT_2,
            TheoremVariant::EuclideanLinear => c / k.sqrt(),
            TheoremVariant::PNormLinear => c / config.norm_factor(),
            TheoremVariant::SeparablePNorm => {
                univariate_bound(power, config.degree, c) / config.norm_factor()
            }
        })
    }
}

impl std::fmt::Display for TheoremVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TheoremVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown theorem variant '{s}'")))
    }
}

/// `6 i c / (n (n+1) (2n+1))`.
pub fn univariate_bound(power: usize, degree: usize, c: f64) -> f64 {
    let n = degree as f64;
    6.0 * power as f64 * c / (n * (n + 1.0) * (2.0 * n + 1.0))
}

/// Per-column box constraints aligned with a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    columns: Vec<Column>,
    variant: Option<TheoremVariant>,
}

impl CoefficientBounds {
    /// Arbitrary boxes, e.g. for solver tests. Requires `lower <= upper`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidParameter("bounds need lower <= upper".into()));
        }
        Ok(CoefficientBounds {
            lower,
            upper,
            columns: Vec::new(),
            variant: None,
        })
    }

    pub fn unbounded(columns: usize) -> Self {
        CoefficientBounds::new(vec![f64::NEG_INFINITY; columns], vec![f64::INFINITY; columns])
            .expect("infinite box is valid")
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Column map for theorem-derived bounds; empty for hand-built boxes.
    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn variant(&self) -> Option<TheoremVariant> {
        self.variant
    }

    pub fn contains(&self, coefficients: &[f64]) -> bool {
        coefficients.len() == self.len()
            && coefficients
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(a, (l, u))| l <= a && a <= u)
    }
}

fn bounds_for(config: &FairnessConfig, variant: TheoremVariant) -> Option<Vec<f64>> {
    config
        .structure()
        .columns(config.degree)
        .into_iter()
        .map(|column| match column {
            Column::Intercept => Some(f64::INFINITY),
            Column::Term { power, .. } => variant.bound(config, power),
        })
        .collect()
}

/// Box bounds from the applicable theorem with the widest box.
///
/// Variants are tried most specific first; a later variant only wins if its
/// box is strictly wider in every coordinate, so ties keep the specific one.
pub fn derive_bounds(config: &FairnessConfig) -> CoefficientBounds {
    let order: &[TheoremVariant] = if config.dim == 1 {
        &[
            TheoremVariant::UnivariateLinearized,
            TheoremVariant::PNormLinear,
            TheoremVariant::SeparablePNorm,
        ]
    } else {
        &[
            TheoremVariant::PlanarEuclidean,
            TheoremVariant::EuclideanLinear,
            TheoremVariant::PNormLinear,
            TheoremVariant::SeparablePNorm,
        ]
    };
    let mut best: Option<(TheoremVariant, Vec<f64>)> = None;
    for &variant in order {
        let Some(upper) = bounds_for(config, variant) else {
            continue;
        };
        let wider = match &best {
            None => true,
            Some((_, current)) => upper
                .iter()
                .zip(current)
                .skip(1)
                .all(|(candidate, held)| candidate > held),
        };
        if wider {
            best = Some((variant, upper));
        }
    }
    let (variant, upper) = best.expect("separable variant always applies");
    let lower = upper.iter().map(|b| -b).collect();
    CoefficientBounds {
        lower,
        upper,
        columns: config.structure().columns(config.degree),
        variant: Some(variant),
    }
}

/// Whether a sufficient condition holds, and by how much.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub satisfied: bool,
    /// `budget - sum_j j |a_j|`; negative when violated.
    pub slack: f64,
}

fn weighted_sum(coefficients: &[f64]) -> f64 {
    coefficients
        .iter()
        .enumerate()
        .map(|(j, a)| (j + 1) as f64 * a.abs())
        .sum()
}

/// Evaluates `sum_{i>=1} i |a_i| <= c`.
pub fn check_nonlinear_condition(poly: &UnivariatePolynomial, c: f64) -> ConditionCheck {
    let slack = c - weighted_sum(&poly.coefficients()[1..]);
    ConditionCheck {
        satisfied: slack >= -CONDITION_EPSILON,
        slack,
    }
}

/// Per-variable check of `sum_j j |a_ij| <= c / k^((p-1)/p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableCheck {
    pub satisfied: bool,
    pub slacks: Vec<f64>,
}

pub fn check_separable_condition(
    poly: &SeparablePolynomial,
    config: &FairnessConfig,
) -> Result<SeparableCheck> {
    if poly.dim() != config.dim {
        return Err(Error::DimensionMismatch {
            expected: config.dim,
            got: poly.dim(),
        });
    }
    if poly.degree() != config.degree {
        return Err(Error::DimensionMismatch {
            expected: config.degree,
            got: poly.degree(),
        });
    }
    let budget = config.component_budget();
    let slacks: Vec<f64> = poly
        .components()
        .iter()
        .map(|component| budget - weighted_sum(component))
        .collect();
    Ok(SeparableCheck {
        satisfied: slacks.iter().all(|&s| s >= -CONDITION_EPSILON),
        slacks,
    })
}
