//! Distances, coordinate normalization and distance-to-reference (DtR) construction.
//!
//! Every fairness bound in this crate assumes its inputs satisfy `|x| <= 1`.
//! Coordinates are therefore mapped per dimension onto `[-1, 1]`, and scalar
//! distances to the reference point are divided by their dataset maximum so
//! they land in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order `p >= 1` of a Minkowski norm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormOrder(f64);

impl NormOrder {
    pub const MANHATTAN: NormOrder = NormOrder(1.0);
    pub const EUCLIDEAN: NormOrder = NormOrder(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(NormOrder(p))
        } else {
            Err(Error::InvalidNormOrder(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for NormOrder {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        NormOrder::new(p)
    }
}

impl From<NormOrder> for f64 {
    fn from(p: NormOrder) -> f64 {
        p.0
    }
}

/// A location in `k`-dimensional space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialPoint {
    coords: Vec<f64>,
}

impl SpatialPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty);
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0 });
        }
        Ok(SpatialPoint { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl AsRef<[f64]> for SpatialPoint {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// Minkowski distance of order `p` between two points of equal dimension.
pub fn minkowski_distance(a: &SpatialPoint, b: &SpatialPoint, p: NormOrder) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(minkowski(a.coords(), b.coords(), p.value()))
}

/// Unchecked Minkowski distance over slices of equal length.
///
/// The sum is scaled by the largest absolute difference so that large `p`
/// neither overflows nor underflows.
pub(crate) fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if p == 1.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    }
    if p == 2.0 {
        return a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
    }
    let largest = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0_f64, f64::max);
    if largest == 0.0 {
        return 0.0;
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| ((x - y).abs() / largest).powf(p))
        .sum();
    largest * sum.powf(1.0 / p)
}

/// Normalized distances to a reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtRVector {
    distances: Vec<f64>,
    gamma: f64,
    p: NormOrder,
    reference: Option<Vec<f64>>,
}

impl DtRVector {
    /// Wraps distances that were normalized upstream. `gamma` is recorded as 1.
    pub fn from_normalized(distances: Vec<f64>, p: NormOrder) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::Empty);
        }
        for (row, &d) in distances.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::NonFinite { row });
            }
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::NotNormalized { row, value: d });
            }
        }
        Ok(DtRVector {
            distances,
            gamma: 1.0,
            p,
            reference: None,
        })
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p(&self) -> NormOrder {
        self.p
    }

    pub fn reference(&self) -> Option<&[f64]> {
        self.reference.as_deref()
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Distance of every point to `reference`, divided by the largest such distance.
pub fn compute_dtr(points: &[SpatialPoint], reference: &SpatialPoint, p: NormOrder) -> Result<DtRVector> {
    if points.is_empty() {
        return Err(Error::Empty);
    }
    let mut raw = Vec::with_capacity(points.len());
    for point in points {
        raw.push(minkowski_distance(point, reference, p)?);
    }
    let gamma = raw.iter().copied().fold(0.0_f64, f64::max);
    if gamma <= 0.0 {
        return Err(Error::DegenerateReference);
    }
    let distances = raw.into_iter().map(|d| d / gamma).collect();
    Ok(DtRVector {
        distances,
        gamma,
        p,
        reference: Some(reference.coords().to_vec()),
    })
}

/// Per-dimension range used by the affine map onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionRange {
    pub min: f64,
    pub max: f64,
}

impl DimensionRange {
    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.max - self.min)
    }
}

/// Affine map of each coordinate onto `[-1, 1]`. Constant dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    ranges: Vec<DimensionRange>,
}

impl AffineTransform {
    pub fn identity(dim: usize) -> Self {
        AffineTransform {
            ranges: vec![DimensionRange { min: -1.0, max: 1.0 }; dim],
        }
    }

    pub fn from_ranges(ranges: Vec<DimensionRange>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Empty);
        }
        if ranges
            .iter()
            .any(|r| !r.min.is_finite() || !r.max.is_finite() || r.max < r.min)
        {
            return Err(Error::InvalidParameter(
                "dimension ranges must be finite with min <= max".into(),
            ));
        }
        Ok(AffineTransform { ranges })
    }

    pub fn ranges(&self) -> &[DimensionRange] {
        &self.ranges
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn degenerate_dims(&self) -> Vec<usize> {
        self.ranges
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_degenerate())
            .map(|(i, _)| i)
            .collect()
    }

    /// Maps raw coordinates into normalized space. Values are not clipped.
    pub fn apply(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(coords)?;
        Ok(coords
            .iter()
            .zip(&self.ranges)
            .map(|(&x, r)| {
                if r.is_degenerate() {
                    0.0
                } else {
                    (x - r.center()) / r.half_width()
                }
            })
            .collect())
    }

    /// Maps normalized coordinates back. Degenerate dimensions return their constant.
    pub fn invert(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(coords)?;
        Ok(coords
            .iter()
            .zip(&self.ranges)
            .map(|(&x, r)| {
                if r.is_degenerate() {
                    r.min
                } else {
                    x * r.half_width() + r.center()
                }
            })
            .collect())
    }

    fn check_dim(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        Ok(())
    }
}

/// Points whose coordinates all lie in `[-1, 1]`, with the map that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPoints {
    points: Vec<SpatialPoint>,
    transform: AffineTransform,
}

impl NormalizedPoints {
    /// Accepts points that are already normalized, recording an identity transform.
    pub fn assume_normalized(points: Vec<SpatialPoint>) -> Result<Self> {
        let dim = common_dim(&points)?;
        for (row, point) in points.iter().enumerate() {
            if let Some(&value) = point.coords().iter().find(|v| v.abs() > 1.0 + 1e-12) {
                return Err(Error::NotNormalized { row, value });
            }
        }
        Ok(NormalizedPoints {
            points,
            transform: AffineTransform::identity(dim),
        })
    }

    pub fn points(&self) -> &[SpatialPoint] {
        &self.points
    }

    pub fn transform(&self) -> &AffineTransform {
        &self.transform
    }

    pub fn dim(&self) -> usize {
        self.transform.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn common_dim(points: &[SpatialPoint]) -> Result<usize> {
    let first = points.first().ok_or(Error::Empty)?;
    let dim = first.dim();
    if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.dim(),
        });
    }
    Ok(dim)
}

/// Maps each dimension affinely onto `[-1, 1]`.
pub fn normalize_coords(points: &[SpatialPoint]) -> Result<NormalizedPoints> {
    let dim = common_dim(points)?;
    let mut ranges = vec![
        DimensionRange {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        dim
    ];
    for point in points {
        for (range, &x) in ranges.iter_mut().zip(point.coords()) {
            range.min = range.min.min(x);
            range.max = range.max.max(x);
        }
    }
    let transform = AffineTransform { ranges };
    let normalized = points
        .iter()
        .map(|p| {
            let mut coords = transform.apply(p.coords())?;
            // roundoff at the extremes
            for v in &mut coords {
                *v = v.clamp(-1.0, 1.0);
            }
            SpatialPoint::new(coords)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizedPoints {
        points: normalized,
        transform,
    })
}

/// Which fairness problem a dataset poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Scalar distances to a reference point, compared by `|l_i - l_j|`.
    Distance,
    /// Raw coordinates, compared by a `p`-norm.
    Zone,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Distance => "distance",
            Mode::Zone => "zone",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(Mode::Distance),
            "zone" => Ok(Mode::Zone),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Individual positions together with the metric used to compare them.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Distance(DtRVector),
    Zone { points: NormalizedPoints, p: NormOrder },
}

impl Geometry {
    pub fn mode(&self) -> Mode {
        match self {
            Geometry::Distance(_) => Mode::Distance,
            Geometry::Zone { .. } => Mode::Zone,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Geometry::Distance(dtr) => dtr.len(),
            Geometry::Zone { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of variables a fair polynomial takes over this geometry.
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Distance(_) => 1,
            Geometry::Zone { points, .. } => points.dim(),
        }
    }

    pub fn p(&self) -> NormOrder {
        match self {
            Geometry::Distance(dtr) => dtr.p(),
            Geometry::Zone { p, .. } => *p,
        }
    }

    /// Coordinates of row `i` in normalized space.
    pub fn row(&self, i: usize) -> &[f64] {
        match self {
            Geometry::Distance(dtr) => std::slice::from_ref(&dtr.distances()[i]),
            Geometry::Zone { points, .. } => points.points()[i].coords(),
        }
    }

    /// Individual-fairness distance `d(i, j)`.
    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        match self {
            Geometry::Distance(dtr) => (dtr.distances()[i] - dtr.distances()[j]).abs(),
            Geometry::Zone { points, p } => minkowski(
                points.points()[i].coords(),
                points.points()[j].coords(),
                p.value(),
            ),
        }
    }
}
