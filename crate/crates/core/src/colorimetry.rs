//! CIE L*a*b* conversion, color-difference and angular metrics, image-level
//! metric averaging, and sRGB encoding for visualization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ColorSpace, PlanarImage};

/// Reference white tristimulus with `Y` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WhitePoint {
    /// CIE D65, 2° observer.
    pub const D65: WhitePoint = WhitePoint {
        x: 0.95047,
        y: 1.0,
        z: 1.08883,
    };

    /// Normalizes `xyz` so that `Y = 1`.
    pub fn from_xyz(xyz: [f64; 3]) -> Result<Self> {
        if !xyz.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "white point components must be positive, got {xyz:?}"
            )));
        }
        Ok(Self {
            x: xyz[0] / xyz[1],
            y: 1.0,
            z: xyz[2] / xyz[1],
        })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn chromaticity(&self) -> (f64, f64) {
        let s = self.x + self.y + self.z;
        (self.x / s, self.y / s)
    }
}

impl Default for WhitePoint {
    fn default() -> Self {
        Self::D65
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

const DELTA: f64 = 6.0 / 29.0;

/// CIE L*a*b* companding function.
#[inline]
pub fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Derivative of [`lab_f`]; the branch point is `t = (6/29)^3`.
#[inline]
pub fn lab_f_prime(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        1.0 / (3.0 * t.cbrt() * t.cbrt())
    } else {
        1.0 / (3.0 * DELTA * DELTA)
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    if f > DELTA {
        f * f * f
    } else {
        3.0 * DELTA * DELTA * (f - 4.0 / 29.0)
    }
}

/// Conversion without input validation, for hot loops over finite data.
#[inline]
pub fn xyz_to_lab_unchecked(xyz: [f64; 3], white: &WhitePoint) -> Lab {
    let fx = lab_f(xyz[0] / white.x);
    let fy = lab_f(xyz[1] / white.y);
    let fz = lab_f(xyz[2] / white.z);
    Lab {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

pub fn xyz_to_lab(xyz: [f64; 3], white: &WhitePoint) -> Result<Lab> {
    if !xyz.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("XYZ input".into()));
    }
    Ok(xyz_to_lab_unchecked(xyz, white))
}

/// Analytic inverse of [`xyz_to_lab`].
pub fn lab_to_xyz(lab: Lab, white: &WhitePoint) -> [f64; 3] {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    [
        white.x * lab_f_inv(fx),
        white.y * lab_f_inv(fy),
        white.z * lab_f_inv(fz),
    ]
}

/// CIE 1976 color difference: Euclidean distance in L*a*b*.
pub fn delta_e76(p: Lab, q: Lab) -> f64 {
    let (dl, da, db) = (p.l - q.l, p.a - q.a, p.b - q.b);
    (dl * dl + da * da + db * db).sqrt()
}

/// CIEDE2000 with unit parametric factors.
pub fn delta_e00(p: Lab, q: Lab) -> f64 {
    delta_e00_weighted(p, q, 1.0, 1.0, 1.0)
}

/// Full CIEDE2000 color difference with parametric factors `kL`, `kC`, `kH`.
pub fn delta_e00_weighted(p: Lab, q: Lab, kl: f64, kc: f64, kh: f64) -> f64 {
    const POW25_7: f64 = 6_103_515_625.0; // 25^7

    let c1 = p.a.hypot(p.b);
    let c2 = q.a.hypot(q.b);
    let c_mean = 0.5 * (c1 + c2);
    let c_mean7 = c_mean.powi(7);
    let g = 0.5 * (1.0 - (c_mean7 / (c_mean7 + POW25_7)).sqrt());

    let a1 = (1.0 + g) * p.a;
    let a2 = (1.0 + g) * q.a;
    let c1p = a1.hypot(p.b);
    let c2p = a2.hypot(q.b);
    let hue = |b: f64, a: f64| {
        if a == 0.0 && b == 0.0 {
            0.0
        } else {
            let h = b.atan2(a).to_degrees();
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(p.b, a1);
    let h2p = hue(q.b, a2);

    let dl = q.l - p.l;
    let dc = c2p - c1p;
    let chroma_prod = c1p * c2p;
    let dh_angle = if chroma_prod == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d.abs() <= 180.0 {
            d
        } else if d > 180.0 {
            d - 360.0
        } else {
            d + 360.0
        }
    };
    let dh = 2.0 * chroma_prod.sqrt() * (0.5 * dh_angle).to_radians().sin();

    let l_mean = 0.5 * (p.l + q.l);
    let cp_mean = 0.5 * (c1p + c2p);
    let hp_mean = if chroma_prod == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        0.5 * (h1p + h2p)
    } else if h1p + h2p < 360.0 {
        0.5 * (h1p + h2p + 360.0)
    } else {
        0.5 * (h1p + h2p - 360.0)
    };

    let t = 1.0 - 0.17 * (hp_mean - 30.0).to_radians().cos()
        + 0.24 * (2.0 * hp_mean).to_radians().cos()
        + 0.32 * (3.0 * hp_mean + 6.0).to_radians().cos()
        - 0.20 * (4.0 * hp_mean - 63.0).to_radians().cos();
    let d_theta = 30.0 * (-((hp_mean - 275.0) / 25.0).powi(2)).exp();
    let cp_mean7 = cp_mean.powi(7);
    let rc = 2.0 * (cp_mean7 / (cp_mean7 + POW25_7)).sqrt();
    let l50 = (l_mean - 50.0).powi(2);
    let sl = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let sc = 1.0 + 0.045 * cp_mean;
    let sh = 1.0 + 0.015 * cp_mean * t;
    let rt = -(2.0 * d_theta).to_radians().sin() * rc;

    let tl = dl / (kl * sl);
    let tc = dc / (kc * sc);
    let th = dh / (kh * sh);
    (tl * tl + tc * tc + th * th + rt * tc * th).max(0.0).sqrt()
}

/// Angle between two channel vectors, in degrees.
///
/// Evaluated as `2·atan2(‖û − v̂‖, ‖û + v̂‖)` on the normalized vectors, which
/// equals `arccos(û·v̂)` but stays accurate for nearly parallel inputs.
pub fn angular_error(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(nu > 0.0 && nv > 0.0) || !(nu.is_finite() && nv.is_finite()) {
        return Err(Error::ZeroNorm);
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a / nu, b / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees())
}

/// Reproduction error: angle between `pred ⊘ gt` and the achromatic axis, in degrees.
pub fn reproduction_error(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch("pred and gt differ in length".into()));
    }
    if gt.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidArgument(
            "reproduction error needs strictly positive ground truth".into(),
        ));
    }
    let ratio: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| p / g).collect();
    angular_error(&ratio, &vec![1.0; ratio.len()])
}

/// Per-pixel metrics that can be averaged over an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    De00,
    De76,
    Reproduction,
    Angular,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::De00 => "de00",
            Metric::De76 => "de76",
            Metric::Reproduction => "reproduction",
            Metric::Angular => "angular",
        }
    }
}

/// Floating-point summation order for image means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Summation {
    /// Left-to-right accumulation.
    Naive,
    /// Compensated (Kahan–Babuška) summation in pixel order.
    #[default]
    Kahan,
}

impl Summation {
    pub fn sum<I: IntoIterator<Item = f64>>(self, values: I) -> f64 {
        match self {
            Summation::Naive => values.into_iter().sum(),
            Summation::Kahan => {
                let mut sum = 0.0f64;
                let mut comp = 0.0f64;
                for v in values {
                    let t = sum + v;
                    if sum.abs() >= v.abs() {
                        comp += (sum - t) + v;
                    } else {
                        comp += (v - t) + sum;
                    }
                    sum = t;
                }
                sum + comp
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMean {
    pub mean: f64,
    pub pixels: usize,
}

/// Metric value for one pixel pair. For the angular metrics, negative
/// predictions are clipped to zero and pixels whose ground truth is not
/// strictly positive (or whose prediction is all zero) yield `None`.
#[inline]
pub fn pixel_metric(metric: Metric, pred: [f64; 3], gt: [f64; 3], white: &WhitePoint) -> Option<f64> {
    match metric {
        Metric::De00 => Some(delta_e00(
            xyz_to_lab_unchecked(pred, white),
            xyz_to_lab_unchecked(gt, white),
        )),
        Metric::De76 => Some(delta_e76(
            xyz_to_lab_unchecked(pred, white),
            xyz_to_lab_unchecked(gt, white),
        )),
        Metric::Reproduction => {
            let p = pred.map(|v| v.max(0.0));
            reproduction_error(&p, &gt).ok()
        }
        Metric::Angular => {
            let p = pred.map(|v| v.max(0.0));
            angular_error(&p, &gt).ok()
        }
    }
}

/// Mean of a per-pixel metric over the intersection of both masks (further
/// restricted, for the angular metrics, to pixels where the metric is defined).
pub fn image_metric_mean(
    predicted: &PlanarImage,
    reference: &PlanarImage,
    metric: Metric,
    white: &WhitePoint,
    summation: Summation,
) -> Result<MetricMean> {
    predicted.ensure_same_dims(reference)?;
    if predicted.n_channels() != 3 || reference.n_channels() != 3 {
        return Err(Error::DimensionMismatch("metrics need 3-channel images".into()));
    }
    if matches!(metric, Metric::De00 | Metric::De76) {
        predicted.ensure_color_space(ColorSpace::Xyz)?;
        reference.ensure_color_space(ColorSpace::Xyz)?;
    }
    let mut values = Vec::with_capacity(predicted.n_pixels());
    let (pm, rm) = (predicted.mask(), reference.mask());
    for i in 0..predicted.n_pixels() {
        if !(pm[i] && rm[i]) {
            continue;
        }
        let p = [
            predicted.channel(0)[i],
            predicted.channel(1)[i],
            predicted.channel(2)[i],
        ];
        let r = [
            reference.channel(0)[i],
            reference.channel(1)[i],
            reference.channel(2)[i],
        ];
        if let Some(v) = pixel_metric(metric, p, r, white) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = values.len();
    Ok(MetricMean {
        mean: summation.sum(values) / n as f64,
        pixels: n,
    })
}

/// XYZ (D65) to linear sRGB.
pub const XYZ_TO_LINEAR_SRGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

/// sRGB transfer curve applied to a linear value in `[0, 1]`.
#[inline]
pub fn srgb_encode(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Linear sRGB of an XYZ triple, before clipping.
#[inline]
pub fn xyz_to_linear_srgb(xyz: [f64; 3]) -> [f64; 3] {
    let m = &XYZ_TO_LINEAR_SRGB;
    [
        m[0][0] * xyz[0] + m[0][1] * xyz[1] + m[0][2] * xyz[2],
        m[1][0] * xyz[0] + m[1][1] * xyz[1] + m[1][2] * xyz[2],
        m[2][0] * xyz[0] + m[2][1] * xyz[1] + m[2][2] * xyz[2],
    ]
}

/// Encode an XYZ image as display sRGB: matrix, clip to `[0, 1]`, transfer curve.
pub fn xyz_to_srgb_encode(img: &PlanarImage) -> Result<PlanarImage> {
    img.ensure_color_space(ColorSpace::Xyz)?;
    if img.n_channels() != 3 {
        return Err(Error::DimensionMismatch("XYZ image must have 3 channels".into()));
    }
    Ok(img.map_pixels(3, ColorSpace::SrgbEncoded, |src, dst| {
        let lin = xyz_to_linear_srgb([src[0], src[1], src[2]]);
        for (d, v) in dst.iter_mut().zip(lin) {
            *d = srgb_encode(v.clamp(0.0, 1.0));
        }
    }))
}
