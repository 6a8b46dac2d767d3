//! The traditional two-stage correction path: white balancing (illuminant
//! estimation + von Kries scaling) followed by a color-space transform
//! interpolated between two calibrated presets by correlated color temperature.

pub mod mat3;
mod profile;

pub use mat3::Mat3;
pub use profile::{build_camera_profile, CameraProfile, CstPreset, ProfileOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::illum_est::{IlluminantEstimate, IlluminantEstimator};
use crate::image::{ColorSpace, PlanarImage};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Divide channel `c` by `est.rgb[c]·√3`. A neutral estimate `(1,1,1)/√3`
/// leaves the image unchanged, and a pixel equal to `est.rgb·√3` maps to `(1,1,1)`.
pub fn von_kries_correct(img: &PlanarImage, est: &IlluminantEstimate) -> Result<PlanarImage> {
    img.ensure_color_space(ColorSpace::CameraRaw)?;
    if img.n_channels() != 3 || est.rgb.len() != 3 {
        return Err(Error::DimensionMismatch("von Kries correction needs 3 channels".into()));
    }
    if est.rgb.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "illuminant estimate has a non-positive component: {:?}",
            est.rgb
        )));
    }
    let divisors: Vec<f64> = est.rgb.iter().map(|e| e * SQRT_3).collect();
    let mut out = img.clone();
    for (c, d) in divisors.iter().enumerate() {
        for v in out.channel_mut(c) {
            *v /= d;
        }
    }
    Ok(out)
}

/// McCamy's cubic approximation of CCT from CIE 1931 chromaticity.
pub fn mccamy_cct(x: f64, y: f64) -> f64 {
    let n = (x - 0.3320) / (0.1858 - y);
    449.0 * n.powi(3) + 3525.0 * n.powi(2) + 6823.3 * n + 5520.33
}

pub const CCT_MIN: f64 = 1000.0;
pub const CCT_MAX: f64 = 25000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CctEstimate {
    pub kelvin: f64,
    /// The polynomial result fell outside `[1000, 25000]` K and was clamped.
    pub clamped: bool,
    /// Chromaticity was undefined or sat on the `y = 0.1858` singularity; the
    /// upper bound was returned.
    pub singular: bool,
}

/// CCT of an illuminant estimate, taking its camera color to XYZ through the
/// high-CCT preset matrix.
pub fn estimate_cct(est: &IlluminantEstimate, profile: &CameraProfile) -> CctEstimate {
    let rgb = [est.rgb[0], est.rgb[1], est.rgb[2]];
    cct_from_xyz(mat3::mul_vec(&profile.cst.m_hi, rgb))
}

pub fn cct_from_xyz(xyz: [f64; 3]) -> CctEstimate {
    let sum = xyz[0] + xyz[1] + xyz[2];
    let singular = |kelvin| CctEstimate {
        kelvin,
        clamped: true,
        singular: true,
    };
    if !(sum > 0.0) || !sum.is_finite() {
        return singular(CCT_MAX);
    }
    let (x, y) = (xyz[0] / sum, xyz[1] / sum);
    if (0.1858 - y).abs() < 1e-12 {
        return singular(CCT_MAX);
    }
    let raw = mccamy_cct(x, y);
    if !raw.is_finite() {
        return singular(CCT_MAX);
    }
    let kelvin = raw.clamp(CCT_MIN, CCT_MAX);
    CctEstimate {
        kelvin,
        clamped: kelvin != raw,
        singular: false,
    }
}

/// Result of a least-squares CST fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CstFit {
    pub matrix: Mat3,
    pub residual_rms: f64,
}

fn normal_equations(pairs: &[([f64; 3], [f64; 3])]) -> Result<(Mat3, Mat3)> {
    if pairs.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "{} patch pairs; at least 3 are needed",
            pairs.len()
        )));
    }
    // A = Σ v vᵀ, B = Σ x vᵀ, so that M A = B.
    let mut a = [[0.0; 3]; 3];
    let mut b = [[0.0; 3]; 3];
    for (v, x) in pairs {
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += v[r] * v[c];
                b[r][c] += x[r] * v[c];
            }
        }
    }
    let scale = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if !(scale > 0.0) || mat3::det(&a) / scale.powi(3) < 1e-12 {
        return Err(Error::RankDeficient(
            "camera triples span fewer than 3 dimensions".into(),
        ));
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1e-12;
    }
    let a_inv = mat3::inverse(&a).ok_or(Error::Singular(0.0))?;
    Ok((a_inv, b))
}

fn residual_rms(m: &Mat3, pairs: &[([f64; 3], [f64; 3])]) -> f64 {
    let ss: f64 = pairs
        .iter()
        .map(|(v, x)| {
            let p = mat3::mul_vec(m, *v);
            (0..3).map(|k| (p[k] - x[k]).powi(2)).sum::<f64>()
        })
        .sum();
    (ss / (3 * pairs.len()) as f64).sqrt()
}

/// Least-squares `M` minimizing `Σ‖M·v_i − x_i‖²` over (white-balanced camera,
/// target XYZ) pairs.
pub fn calibrate_cst(pairs: &[([f64; 3], [f64; 3])]) -> Result<CstFit> {
    let (a_inv, b) = normal_equations(pairs)?;
    let matrix = mat3::mul(&b, &a_inv);
    Ok(CstFit {
        matrix,
        residual_rms: residual_rms(&matrix, pairs),
    })
}

/// Least squares subject to `M·white_camera = white_xyz` exactly, so neutral
/// inputs land on the target white chromaticity.
pub fn calibrate_cst_white_preserving(
    pairs: &[([f64; 3], [f64; 3])],
    white_camera: [f64; 3],
    white_xyz: [f64; 3],
) -> Result<CstFit> {
    let (a_inv, b) = normal_equations(pairs)?;
    let m0 = mat3::mul(&b, &a_inv);
    let au = mat3::mul_vec(&a_inv, white_camera);
    let denom: f64 = (0..3).map(|k| white_camera[k] * au[k]).sum();
    if !(denom > 0.0) {
        return Err(Error::Numerical("white constraint is degenerate".into()));
    }
    let miss = mat3::mul_vec(&m0, white_camera);
    let mut matrix = m0;
    for r in 0..3 {
        let lambda = (miss[r] - white_xyz[r]) / denom;
        for c in 0..3 {
            matrix[r][c] -= lambda * au[c];
        }
    }
    Ok(CstFit {
        matrix,
        residual_rms: residual_rms(&matrix, pairs),
    })
}

/// Interpolation weight of the low-CCT matrix, linear in reciprocal CCT.
pub fn cst_weight(preset: &CstPreset, cct: f64) -> f64 {
    let w = (1.0 / cct - 1.0 / preset.cct_hi) / (1.0 / preset.cct_lo - 1.0 / preset.cct_hi);
    w.clamp(0.0, 1.0)
}

pub fn interpolate_cst(preset: &CstPreset, cct: f64) -> Mat3 {
    let w = cst_weight(preset, cct);
    if w == 1.0 {
        return preset.m_lo;
    }
    if w == 0.0 {
        return preset.m_hi;
    }
    mat3::lerp(&preset.m_lo, &preset.m_hi, w)
}

/// Apply a 3×3 matrix to every pixel, tagging the result as `tag`.
pub fn apply_matrix(img: &PlanarImage, m: &Mat3, tag: ColorSpace) -> Result<PlanarImage> {
    if img.n_channels() != 3 {
        return Err(Error::DimensionMismatch("matrix application needs 3 channels".into()));
    }
    Ok(img.map_pixels(3, tag, |src, dst| {
        let v = mat3::mul_vec(m, [src[0], src[1], src[2]]);
        dst.copy_from_slice(&v);
    }))
}

/// What the traditional pipeline decided for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub estimate: IlluminantEstimate,
    pub cct: CctEstimate,
    pub matrix: Mat3,
}

/// White balance with a given estimate, then the CCT-interpolated CST.
pub fn correct_with_estimate(
    img: &PlanarImage,
    profile: &CameraProfile,
    est: IlluminantEstimate,
) -> Result<(PlanarImage, Provenance)> {
    let wb = von_kries_correct(img, &est)?;
    let cct = estimate_cct(&est, profile);
    let matrix = interpolate_cst(&profile.cst, cct.kelvin);
    let out = apply_matrix(&wb, &matrix, ColorSpace::Xyz)?;
    Ok((
        out,
        Provenance {
            estimate: est,
            cct,
            matrix,
        },
    ))
}

/// Full traditional correction of a camera-raw image to XYZ (D65).
pub fn traditional_correct(
    img: &PlanarImage,
    profile: &CameraProfile,
    estimator: &dyn IlluminantEstimator,
) -> Result<(PlanarImage, Provenance)> {
    img.ensure_color_space(ColorSpace::CameraRaw)?;
    if img.n_channels() != 3 {
        return Err(Error::DimensionMismatch("traditional pipeline needs 3 channels".into()));
    }
    let est = estimator.estimate(img)?;
    correct_with_estimate(img, profile, est)
}
