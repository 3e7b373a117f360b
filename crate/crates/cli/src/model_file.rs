//! Versioned TOML persistence for fitted models.

use std::path::Path;

use cfair::geometry::DimensionRange;
use cfair::{
    derive_bounds, AffineTransform, FairModel, FairPolynomial, FairnessConfig, Mode, NormOrder,
    Normalization, SeparablePolynomial, SolverConfig, TheoremVariant, UnivariatePolynomial,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub mode: Mode,
    pub k: usize,
    /// Norm order of the distances: the DtR norm in distance mode, the zone metric otherwise.
    pub p: f64,
    pub n: usize,
    pub c: f64,
    pub variant: TheoremVariant,
    /// Intercept, then the powers `1..=n` of each variable in turn.
    pub coefficients: Vec<f64>,
    pub normalization: NormalizationRecord,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NormalizationRecord {
    Distance {
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
    },
    Zone {
        min: Vec<f64>,
        max: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_sha256: String,
    /// Seconds since the Unix epoch; only written on request so reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    pub converged: bool,
    pub solver: SolverRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub max_iterations: usize,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_start_seed: Option<u64>,
}

impl From<SolverConfig> for SolverRecord {
    fn from(s: SolverConfig) -> Self {
        SolverRecord {
            max_iterations: s.max_iterations,
            tolerance: s.tolerance,
            random_start_seed: s.seed,
        }
    }
}

fn flatten(polynomial: &FairPolynomial) -> Vec<f64> {
    match polynomial {
        FairPolynomial::Univariate(p) => p.coefficients().to_vec(),
        FairPolynomial::Separable(p) => std::iter::once(p.intercept())
            .chain(p.components().iter().flatten().copied())
            .collect(),
    }
}

impl ModelFile {
    pub fn from_model(model: &FairModel, provenance: Provenance) -> ModelFile {
        let config = &model.config;
        let (p, normalization) = match &model.normalization {
            Normalization::Distance { gamma, p, reference } => (
                p.value(),
                NormalizationRecord::Distance {
                    gamma: *gamma,
                    reference: reference.clone(),
                },
            ),
            Normalization::Zone(transform) => (
                config.p().value(),
                NormalizationRecord::Zone {
                    min: transform.ranges().iter().map(|r| r.min).collect(),
                    max: transform.ranges().iter().map(|r| r.max).collect(),
                },
            ),
        };
        ModelFile {
            format_version: FORMAT_VERSION,
            mode: config.mode(),
            k: config.dim(),
            p,
            n: config.degree(),
            c: config.c(),
            variant: model.variant,
            coefficients: flatten(&model.polynomial),
            normalization,
            provenance,
        }
    }

    /// Rebuilds the model, rejecting files whose coefficients leave the fairness box.
    pub fn to_model(&self) -> Result<FairModel> {
        let bad = |m: String| Err(CliError::Data(format!("model file: {m}")));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        let p = NormOrder::new(self.p)?;
        let (config, normalization) = match (&self.normalization, self.mode) {
            (NormalizationRecord::Distance { gamma, reference }, Mode::Distance) => {
                if self.k != 1 {
                    return bad(format!("distance models have k = 1, found {}", self.k));
                }
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return bad(format!("gamma {gamma} must be positive"));
                }
                let normalization = Normalization::Distance {
                    gamma: *gamma,
                    p,
                    reference: reference.clone(),
                };
                (FairnessConfig::distance(self.c, self.n)?, normalization)
            }
            (NormalizationRecord::Zone { min, max }, Mode::Zone) => {
                if min.len() != self.k || max.len() != self.k {
                    return bad(format!("normalization ranges do not have k = {} entries", self.k));
                }
                let ranges = min
                    .iter()
                    .zip(max)
                    .map(|(&min, &max)| DimensionRange { min, max })
                    .collect();
                let transform = AffineTransform::from_ranges(ranges)?;
                (FairnessConfig::zone(self.c, self.n, self.k, p)?, Normalization::Zone(transform))
            }
            _ => return bad("normalization kind does not match mode".into()),
        };

        let expected = self.k * self.n + 1;
        if self.coefficients.len() != expected {
            return bad(format!("expected {expected} coefficients, found {}", self.coefficients.len()));
        }
        let bounds = derive_bounds(&config);
        if bounds.variant() != Some(self.variant) {
            return bad(format!(
                "variant {} does not match the bounds derived for this configuration",
                self.variant
            ));
        }
        if !bounds.contains(&self.coefficients) {
            return bad("coefficients lie outside the c-fair bounds".into());
        }
        let polynomial = match self.mode {
            Mode::Distance => FairPolynomial::Univariate(UnivariatePolynomial::new(self.coefficients.clone())?),
            Mode::Zone => FairPolynomial::Separable(SeparablePolynomial::new(
                self.coefficients[0],
                self.coefficients[1..].chunks(self.n).map(<[f64]>::to_vec).collect(),
            )?),
        };
        Ok(FairModel {
            polynomial,
            config,
            variant: self.variant,
            normalization,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Data(format!("model file: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<ModelFile> {
        toml::from_str(text).map_err(|e| CliError::Data(format!("model file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        ModelFile::from_toml(&text)
    }
}
