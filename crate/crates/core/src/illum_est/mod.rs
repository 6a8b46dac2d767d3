//! Statistical illuminant estimation: the Minkowski-norm / Gaussian-derivative
//! family covering Gray-World, White-Patch, Shades-of-Gray, General Gray-World
//! and the first- and second-order Gray-Edge estimators.
//!
//! Every member computes, per channel,
//!
//! ```text
//! e_c ∝ ( mean over valid pixels of |D^{n,σ} I_c|^p )^{1/p}
//! ```
//!
//! with `p = ∞` taking the channel maximum. Estimators are reached by name
//! through [`EstimatorRegistry`].

mod filter;
mod registry;

pub use filter::{gaussian_derivative, GaussianKernels};
pub use registry::{EstimatorOverrides, EstimatorRegistry, IlluminantEstimator, MinkowskiEstimator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Minkowski norm exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinkowskiNorm {
    P(f64),
    /// `p = ∞`: per-channel maximum.
    Max,
}

impl MinkowskiNorm {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "max" => Ok(MinkowskiNorm::Max),
            other => other
                .parse::<f64>()
                .map(MinkowskiNorm::P)
                .map_err(|_| Error::Config(format!("invalid Minkowski norm {s:?}"))),
        }
    }
}

impl std::fmt::Display for MinkowskiNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinkowskiNorm::P(p) => write!(f, "{p}"),
            MinkowskiNorm::Max => f.write_str("inf"),
        }
    }
}

/// One member of the estimator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub name: String,
    pub order: u8,
    pub norm: MinkowskiNorm,
    pub sigma: f64,
    /// Pixels with any channel at or above this level are left out of the
    /// estimate. `None` keeps every valid pixel.
    #[serde(default)]
    pub saturation_level: Option<f64>,
}

impl EstimatorSpec {
    pub fn new(name: impl Into<String>, order: u8, norm: MinkowskiNorm, sigma: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            order,
            norm,
            sigma,
            saturation_level: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order > 2 {
            return Err(Error::Config(format!("derivative order {} not in 0..=2", self.order)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.sigma == 0.0 && self.order != 0 {
            return Err(Error::Config(
                "sigma = 0 is only allowed with derivative order 0".into(),
            ));
        }
        if let MinkowskiNorm::P(p) = self.norm {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::Config(format!("Minkowski p must be >= 1, got {p}")));
            }
        }
        Ok(())
    }

    /// Named presets: gw, wp, sog, ggw, ge1, ge2.
    pub fn preset(name: &str) -> Result<Self> {
        let (order, norm, sigma) = match name {
            "gw" => (0, MinkowskiNorm::P(1.0), 0.0),
            "wp" => (0, MinkowskiNorm::Max, 0.0),
            "sog" => (0, MinkowskiNorm::P(4.0), 0.0),
            "ggw" => (0, MinkowskiNorm::P(4.0), 9.0),
            "ge1" => (1, MinkowskiNorm::P(1.0), 6.0),
            "ge2" => (2, MinkowskiNorm::P(1.0), 1.0),
            other => return Err(Error::Config(format!("unknown estimator preset {other:?}"))),
        };
        Self::new(name, order, norm, sigma)
    }

    pub const PRESET_NAMES: [&'static str; 6] = ["gw", "wp", "sog", "ggw", "ge1", "ge2"];
}

/// Estimated illuminant color in camera space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminantEstimate {
    /// Unit-norm illuminant direction.
    pub rgb: Vec<f64>,
    /// Per-channel Minkowski means before normalization.
    pub raw: Vec<f64>,
}

impl IlluminantEstimate {
    /// Normalizes `raw` to unit Euclidean length.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("illuminant estimate".into()));
        }
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::DegenerateEstimate);
        }
        Ok(Self {
            rgb: raw.iter().map(|v| v / norm).collect(),
            raw,
        })
    }

    pub fn raw_magnitude(&self) -> f64 {
        self.raw.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Run one estimator over the valid pixels of a camera-raw image.
pub fn minkowski_estimate(img: &PlanarImage, spec: &EstimatorSpec) -> Result<IlluminantEstimate> {
    spec.validate()?;
    let mut mask = img.mask().to_vec();
    if let Some(level) = spec.saturation_level {
        for (i, m) in mask.iter_mut().enumerate() {
            if img.channels().iter().any(|p| p[i] >= level) {
                *m = false;
            }
        }
    }
    let n_valid = mask.iter().filter(|&&m| m).count();
    if n_valid == 0 {
        return Err(Error::EmptyMask);
    }
    let response = gaussian_derivative(img, spec.sigma, spec.order)?;
    let raw = response
        .channels()
        .iter()
        .map(|plane| {
            let values = plane.iter().zip(&mask).filter(|(_, &m)| m).map(|(v, _)| v.abs());
            match spec.norm {
                MinkowskiNorm::Max => values.fold(0.0, f64::max),
                MinkowskiNorm::P(p) if p == 1.0 => values.sum::<f64>() / n_valid as f64,
                MinkowskiNorm::P(p) => (values.map(|v| v.powf(p)).sum::<f64>() / n_valid as f64).powf(1.0 / p),
            }
        })
        .collect();
    IlluminantEstimate::from_raw(raw)
}
