use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mat3::{self, Mat3};
use super::{calibrate_cst, calibrate_cst_white_preserving};
use crate::data;
use crate::error::{Error, Result};
use crate::spectral::{flat_field_color, SensitivitySet, Spectrum, WavelengthGrid};

/// Two calibrated CSTs and the CCTs they were calibrated at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CstPreset {
    pub m_lo: Mat3,
    pub cct_lo: f64,
    pub m_hi: Mat3,
    pub cct_hi: f64,
}

impl CstPreset {
    pub fn new(m_lo: Mat3, cct_lo: f64, m_hi: Mat3, cct_hi: f64) -> Result<Self> {
        let p = Self {
            m_lo,
            cct_lo,
            m_hi,
            cct_hi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cct_lo > 0.0 && self.cct_lo < self.cct_hi) {
            return Err(Error::Config(format!(
                "CST anchors must satisfy 0 < cct_lo < cct_hi, got {} and {}",
                self.cct_lo, self.cct_hi
            )));
        }
        for m in [&self.m_lo, &self.m_hi] {
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("CST matrix".into()));
            }
            let d = mat3::det(m);
            if d.abs() <= 1e-9 {
                return Err(Error::Singular(d.abs()));
            }
        }
        Ok(())
    }
}

/// Calibration record kept with a profile.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationProvenance {
    pub chart: String,
    pub patches: usize,
    pub white_preserving: bool,
    pub residual_rms_lo: f64,
    pub residual_rms_hi: f64,
}

/// A 3-channel camera and the CST presets calibrated for it.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraProfile {
    pub name: String,
    pub sensitivities: SensitivitySet,
    pub cst: CstPreset,
    pub provenance: CalibrationProvenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileDocument {
    name: String,
    sensitivity_csv: PathBuf,
    m_lo: Vec<f64>,
    cct_lo: f64,
    m_hi: Vec<f64>,
    cct_hi: f64,
    #[serde(default)]
    provenance: CalibrationProvenance,
}

impl CameraProfile {
    pub fn new(name: impl Into<String>, sensitivities: SensitivitySet, cst: CstPreset) -> Result<Self> {
        if sensitivities.n_channels() != 3 {
            return Err(Error::InvalidArgument(format!(
                "camera profile needs 3 channels, got {}",
                sensitivities.n_channels()
            )));
        }
        cst.validate()?;
        Ok(Self {
            name: name.into(),
            sensitivities,
            cst,
            provenance: CalibrationProvenance::default(),
        })
    }

    /// Write the profile JSON and its sensitivity CSV (named
    /// `<stem>_sensitivities.csv`, next to the JSON).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("profile");
        let csv_name = PathBuf::from(format!("{stem}_sensitivities.csv"));
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        self.sensitivities.to_tabulated().write_csv_path(dir.join(&csv_name))?;
        let doc = ProfileDocument {
            name: self.name.clone(),
            sensitivity_csv: csv_name,
            m_lo: mat3::to_row_major(&self.cst.m_lo),
            cct_lo: self.cst.cct_lo,
            m_hi: mat3::to_row_major(&self.cst.m_hi),
            cct_hi: self.cst.cct_hi,
            provenance: self.provenance.clone(),
        };
        let text = serde_json::to_string_pretty(&doc)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Load a profile JSON; the sensitivity CSV path is resolved relative to
    /// the JSON file and resampled onto `grid`.
    pub fn load(path: impl AsRef<Path>, grid: &WavelengthGrid) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ProfileDocument = serde_json::from_str(&text)?;
        let csv = if doc.sensitivity_csv.is_absolute() {
            doc.sensitivity_csv.clone()
        } else {
            path.parent()
                .unwrap_or_else(|| Path::new("."))
                .join(&doc.sensitivity_csv)
        };
        let sens = SensitivitySet::read_csv_path(&csv, grid)?;
        let parse = |v: &[f64], which: &str| {
            mat3::from_row_major(v).ok_or_else(|| Error::Format(format!("{which} must have 9 entries")))
        };
        let cst = CstPreset::new(
            parse(&doc.m_lo, "m_lo")?,
            doc.cct_lo,
            parse(&doc.m_hi, "m_hi")?,
            doc.cct_hi,
        )?;
        let mut profile = Self::new(doc.name, sens, cst)?;
        profile.provenance = doc.provenance;
        Ok(profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub cct_lo: f64,
    pub cct_hi: f64,
    /// Constrain each fit so a perfect white maps exactly onto the D65 white.
    pub white_preserving: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            cct_lo: 2500.0,
            cct_hi: 6500.0,
            white_preserving: true,
        }
    }
}

/// Calibrate both CST presets for a camera by rendering the built-in 24-patch
/// chart under Planckian illuminants at the two anchor CCTs. Camera triples
/// are von Kries balanced with the true flat-field color; targets are the
/// patch XYZ values under luminance-normalized D65.
pub fn build_camera_profile(
    name: &str,
    sensitivities: &SensitivitySet,
    cmf: &SensitivitySet,
    d65: &Spectrum,
    options: &ProfileOptions,
) -> Result<CameraProfile> {
    let grid = *sensitivities.grid();
    let chart = data::colorchecker24(&grid)?;
    let d65n = d65.normalized_luminance(cmf)?;
    let white_xyz = to3(&flat_field_color(&d65n, cmf)?);
    let targets: Vec<[f64; 3]> = chart
        .iter()
        .map(|(_, r)| patch_response(r, &d65n, cmf))
        .collect::<Result<_>>()?;

    let fit_at = |kelvin: f64| -> Result<super::CstFit> {
        let illum = data::planck(&grid, kelvin)?.normalized_luminance(cmf)?;
        let ff = to3(&flat_field_color(&illum, sensitivities)?);
        let est = crate::illum_est::IlluminantEstimate::from_raw(ff.to_vec())?;
        let d: Vec<f64> = est.rgb.iter().map(|e| e * super::SQRT_3).collect();
        let pairs: Vec<([f64; 3], [f64; 3])> = chart
            .iter()
            .zip(&targets)
            .map(|((_, r), x)| {
                let raw = patch_response(r, &illum, sensitivities)?;
                Ok(([raw[0] / d[0], raw[1] / d[1], raw[2] / d[2]], *x))
            })
            .collect::<Result<_>>()?;
        if options.white_preserving {
            let white_cam = [ff[0] / d[0], ff[1] / d[1], ff[2] / d[2]];
            calibrate_cst_white_preserving(&pairs, white_cam, white_xyz)
        } else {
            calibrate_cst(&pairs)
        }
    };
    let lo = fit_at(options.cct_lo)?;
    let hi = fit_at(options.cct_hi)?;
    let mut profile = CameraProfile::new(
        name,
        sensitivities.clone(),
        CstPreset::new(lo.matrix, options.cct_lo, hi.matrix, options.cct_hi)?,
    )?;
    profile.provenance = CalibrationProvenance {
        chart: "colorchecker24".into(),
        patches: chart.len(),
        white_preserving: options.white_preserving,
        residual_rms_lo: lo.residual_rms,
        residual_rms_hi: hi.residual_rms,
    };
    Ok(profile)
}

fn to3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Sensor response to one reflectance spectrum.
fn patch_response(reflectance: &[f64], illum: &Spectrum, sens: &SensitivitySet) -> Result<[f64; 3]> {
    let dl = illum.grid().step();
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = reflectance
            .iter()
            .zip(illum.values())
            .zip(sens.channel(c))
            .map(|((r, e), s)| r * e * s * dl)
            .sum();
    }
    Ok(out)
}
