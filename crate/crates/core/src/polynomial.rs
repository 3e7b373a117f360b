//! Power-basis polynomials and their least-squares design matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

const NORMALIZED_SLACK: f64 = 1e-12;

/// `a_0 + a_1 x + ... + a_n x^n`, degree `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariatePolynomial {
    coefficients: Vec<f64>,
}

impl UnivariatePolynomial {
    /// `coefficients[i]` multiplies `x^i`.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidDegree(coefficients.len().saturating_sub(1)));
        }
        Ok(UnivariatePolynomial { coefficients })
    }

    /// The Lipschitz-`c` family `c x^n / n`.
    pub fn scaled_monomial(c: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDegree(0));
        }
        let mut coefficients = vec![0.0; n + 1];
        coefficients[n] = c / n as f64;
        Ok(UnivariatePolynomial { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coefficients, x)
    }
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// `a_0 + sum_i sum_j a_ij x_i^j`: one univariate component per variable, no cross terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparablePolynomial {
    intercept: f64,
    /// `components[i][j - 1]` multiplies `x_i^j`.
    components: Vec<Vec<f64>>,
}

impl SeparablePolynomial {
    pub fn new(intercept: f64, components: Vec<Vec<f64>>) -> Result<Self> {
        let n = components.first().ok_or(Error::Empty)?.len();
        if n == 0 {
            return Err(Error::InvalidDegree(0));
        }
        if let Some(bad) = components.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(SeparablePolynomial {
            intercept,
            components,
        })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn degree(&self) -> usize {
        self.components[0].len()
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(self.eval_unchecked(point))
    }

    pub(crate) fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(point)
            .fold(self.intercept, |acc, (component, &x)| {
                // component has no constant term: x * (a_1 + a_2 x + ...)
                acc + x * horner(component, x)
            })
    }
}

/// A fitted fair polynomial of either shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FairPolynomial {
    Univariate(UnivariatePolynomial),
    Separable(SeparablePolynomial),
}

impl FairPolynomial {
    pub fn dim(&self) -> usize {
        match self {
            FairPolynomial::Univariate(_) => 1,
            FairPolynomial::Separable(p) => p.dim(),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            FairPolynomial::Univariate(p) => p.degree(),
            FairPolynomial::Separable(p) => p.degree(),
        }
    }

    pub fn intercept(&self) -> f64 {
        match self {
            FairPolynomial::Univariate(p) => p.coefficients()[0],
            FairPolynomial::Separable(p) => p.intercept(),
        }
    }

    /// Non-intercept coefficients, one row per variable, powers `1..=n`.
    pub fn components(&self) -> Vec<Vec<f64>> {
        match self {
            FairPolynomial::Univariate(p) => vec![p.coefficients()[1..].to_vec()],
            FairPolynomial::Separable(p) => p.components().to_vec(),
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        match self {
            FairPolynomial::Univariate(p) => match point {
                [x] => Ok(p.eval(*x)),
                _ => Err(Error::DimensionMismatch {
                    expected: 1,
                    got: point.len(),
                }),
            },
            FairPolynomial::Separable(p) => p.eval(point),
        }
    }
}

/// What a design-matrix column encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    Intercept,
    Term { variable: usize, power: usize },
}

/// Shape of the fitted polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Univariate,
    Separable { dim: usize },
}

impl Structure {
    pub fn columns(self, degree: usize) -> Vec<Column> {
        let dim = match self {
            Structure::Univariate => 1,
            Structure::Separable { dim } => dim,
        };
        std::iter::once(Column::Intercept)
            .chain((0..dim).flat_map(|variable| {
                (1..=degree).map(move |power| Column::Term { variable, power })
            }))
            .collect()
    }
}

/// Dense `m x q` least-squares matrix with its column map.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    columns: Vec<Column>,
    structure: Structure,
    degree: usize,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `L a` for a coefficient vector aligned with the column map.
    pub fn apply(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        if coefficients.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                got: coefficients.len(),
            });
        }
        let a = DVector::from_column_slice(coefficients);
        Ok((&self.matrix * a).iter().copied().collect())
    }

    /// Reassembles a polynomial from a coefficient vector aligned with the column map.
    pub fn polynomial(&self, coefficients: &[f64]) -> Result<FairPolynomial> {
        if coefficients.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                got: coefficients.len(),
            });
        }
        match self.structure {
            Structure::Univariate => Ok(FairPolynomial::Univariate(UnivariatePolynomial::new(
                coefficients.to_vec(),
            )?)),
            Structure::Separable { .. } => {
                let components = coefficients[1..]
                    .chunks(self.degree)
                    .map(<[f64]>::to_vec)
                    .collect();
                Ok(FairPolynomial::Separable(SeparablePolynomial::new(
                    coefficients[0],
                    components,
                )?))
            }
        }
    }
}

/// Builds the design matrix over rows of normalized inputs.
///
/// Univariate rows are `(1, l, l^2, ..., l^n)`; separable rows are
/// `(1, x_1, ..., x_1^n, x_2, ..., x_k^n)`.
pub fn build_design_matrix<R: AsRef<[f64]>>(
    rows: &[R],
    degree: usize,
    structure: Structure,
) -> Result<DesignMatrix> {
    if degree < 1 {
        return Err(Error::InvalidDegree(degree));
    }
    let dim = match structure {
        Structure::Univariate => 1,
        Structure::Separable { dim } => dim,
    };
    if dim == 0 {
        return Err(Error::Empty);
    }
    let columns = structure.columns(degree);
    let q = columns.len();
    let mut matrix = DMatrix::zeros(rows.len(), q);
    for (r, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        matrix[(r, 0)] = 1.0;
        for (variable, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { row: r });
            }
            if x.abs() > 1.0 + NORMALIZED_SLACK {
                return Err(Error::NotNormalized { row: r, value: x });
            }
            let mut power = 1.0;
            for j in 0..degree {
                power *= x;
                matrix[(r, 1 + variable * degree + j)] = power;
            }
        }
    }
    Ok(DesignMatrix {
        matrix,
        columns,
        structure,
        degree,
    })
}

/// Design matrix for a geometry: univariate for DtR, separable for coordinates.
pub fn design_for(geometry: &Geometry, degree: usize) -> Result<DesignMatrix> {
    match geometry {
        Geometry::Distance(dtr) => {
            let rows: Vec<[f64; 1]> = dtr.distances().iter().map(|&l| [l]).collect();
            build_design_matrix(&rows, degree, Structure::Univariate)
        }
        Geometry::Zone { points, .. } => build_design_matrix(
            points.points(),
            degree,
            Structure::Separable { dim: points.dim() },
        ),
    }
}
