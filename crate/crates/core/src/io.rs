//! Instance files and solution reports.
//!
//! Instances are JSON documents:
//!
//! ```json
//! {"dimension": 2,
//!  "balls": [{"center": [-1.0, 0.0], "radius": 1.4142135623730951},
//!            {"center": [1.0, 0.0], "radius": 1.4142135623730951}],
//!  "target": {"center": [0.0, 0.0], "radius": 1.0}}
//! ```
//!
//! `target` is optional and only read by the joint numerical range tools.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SebError};
use crate::types::{Ball, Certificate, Instance, Regime, Solution, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallFile {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dimension: usize,
    pub balls: Vec<BallFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BallFile>,
}

impl BallFile {
    pub fn to_ball(&self) -> Result<Ball> {
        Ball::from_slice(&self.center, self.radius)
    }

    pub fn from_ball(b: &Ball) -> Self {
        Self {
            center: b.center().iter().copied().collect(),
            radius: b.radius(),
        }
    }
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SebError::InvalidArgument(format!("malformed instance: {e}")))
    }

    pub fn to_instance(&self) -> Result<Instance> {
        let balls = self
            .balls
            .iter()
            .map(BallFile::to_ball)
            .collect::<Result<Vec<_>>>()?;
        let instance = Instance::new(self.dimension, balls)?;
        if let Some(t) = &self.target {
            let t = t.to_ball()?;
            if t.dim() != self.dimension {
                return Err(SebError::DimensionMismatch {
                    expected: self.dimension,
                    actual: t.dim(),
                });
            }
        }
        Ok(instance)
    }

    pub fn target_ball(&self) -> Result<Option<Ball>> {
        self.target.as_ref().map(BallFile::to_ball).transpose()
    }

    pub fn from_instance(instance: &Instance, target: Option<&Ball>) -> Self {
        Self {
            dimension: instance.dimension(),
            balls: instance.balls().iter().map(BallFile::from_ball).collect(),
            target: target.map(BallFile::from_ball),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<(Instance, Option<Ball>)> {
    let file = InstanceFile::parse(text)?;
    let instance = file.to_instance()?;
    Ok((instance, file.target_ball()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub rank_centers: usize,
    pub rank_shifted: Option<usize>,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub alpha: f64,
    pub offdiag_norm: f64,
    pub beta: f64,
    pub psd_ok: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub fw_gap: f64,
    pub iterations: usize,
    /// Largest `|sum mu_i g_i(x) - g(x)| / (1 + |x|^2)` over the probe points.
    pub identity_residual_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub seed: u64,
    /// `max(|x - a| - r, 0)` over the samples.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub multipliers: Vec<f64>,
    pub qp_value: f64,
    pub status: Status,
    pub regime: RegimeReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    pub diagnostics: Diagnostics,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

impl SolutionReport {
    pub fn new(solution: &Solution, certificate: Option<&Certificate>, diagnostics: Diagnostics) -> Self {
        Self {
            center: to_vec(&solution.center),
            radius: solution.radius,
            multipliers: to_vec(&solution.multipliers),
            qp_value: solution.qp_value,
            status: solution.status,
            regime: RegimeReport {
                rank_centers: solution.regime.rank_centers,
                rank_shifted: solution.regime.rank_shifted,
                regime: solution.regime.regime,
            },
            certificate: certificate.map(|c| CertificateReport {
                alpha: c.alpha,
                offdiag_norm: c.offdiag.norm(),
                beta: c.beta,
                psd_ok: c.psd_ok,
                residual: c.residual,
            }),
            diagnostics,
        }
    }
}
