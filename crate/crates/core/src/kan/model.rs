use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bspline::{self, local_basis, LocalBasis, N_BASIS, SPLINE_ORDER};
use crate::colorimetry::{delta_e76, lab_f_prime, xyz_to_lab_unchecked, WhitePoint};
use crate::error::{Error, Result};

pub const RGB_INPUTS: usize = 3;
pub const OUTPUTS: usize = 3;

/// Trainable parameter groups; the unit of freezing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    MsEncoder,
    Splines,
    Bypass,
    Bias,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] = [
        ParamGroup::MsEncoder,
        ParamGroup::Splines,
        ParamGroup::Bypass,
        ParamGroup::Bias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::MsEncoder => "ms_encoder",
            ParamGroup::Splines => "splines",
            ParamGroup::Bypass => "bypass",
            ParamGroup::Bias => "bias",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter group {s:?}")))
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape of a model: MS channels in, spectral features out of the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KanDims {
    pub c_ms: usize,
    pub k_features: usize,
}

impl KanDims {
    /// Inputs to the KAN layer, `3 + K`.
    pub fn d(&self) -> usize {
        RGB_INPUTS + self.k_features
    }

    fn sizes(&self) -> [usize; 4] {
        let d = self.d();
        [self.k_features * self.c_ms, OUTPUTS * d * N_BASIS, OUTPUTS * d, OUTPUTS]
    }

    pub fn n_params(&self) -> usize {
        self.sizes().iter().sum()
    }

    /// Index range of a group in the flat parameter vector.
    pub fn range(&self, group: ParamGroup) -> std::ops::Range<usize> {
        let s = self.sizes();
        let idx = ParamGroup::ALL.iter().position(|&g| g == group).unwrap();
        let start: usize = s[..idx].iter().sum();
        start..start + s[idx]
    }
}

/// One global KAN layer fed by squashed RGB and a learned linear projection
/// of the MS context. Parameters live in one flat vector laid out as
/// `[ms_encoder (K×C) | spline coefficients (3×D×8) | bypass (3×D) | bias (3)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KanParams {
    dims: KanDims,
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[inline]
fn squash(x: f64) -> f64 {
    x / (1.0 + x)
}

#[inline]
fn squash_prime(x: f64) -> f64 {
    1.0 / ((1.0 + x) * (1.0 + x))
}

impl KanParams {
    pub fn zeros(dims: KanDims) -> Self {
        Self {
            dims,
            knots: bspline::clamped_knots(),
            values: vec![0.0; dims.n_params()],
        }
    }

    pub fn from_parts(dims: KanDims, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        bspline::validate_knots(&knots)?;
        if values.len() != dims.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters for {dims:?}, got {}",
                dims.n_params(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("KAN parameters".into()));
        }
        Ok(Self { dims, knots, values })
    }

    /// Start close to "XYZ = camera raw": each RGB input drives its own
    /// output through a spline fitted to the inverse squash, the encoder gets
    /// small positive random weights, everything else is zero.
    pub fn identity_init(dims: KanDims, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(dims);
        let coeffs = fit_spline(&p.knots, |x| x / (1.0 - x), 0.0, 0.8)?;
        for q in 0..OUTPUTS {
            p.coeffs_mut(q, q).copy_from_slice(&coeffs);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / dims.c_ms.max(1) as f64;
        for w in p.group_mut(ParamGroup::MsEncoder) {
            *w = rng.gen_range(0.0..scale);
        }
        Ok(p)
    }

    pub fn dims(&self) -> KanDims {
        self.dims
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn group(&self, group: ParamGroup) -> &[f64] {
        &self.values[self.dims.range(group)]
    }

    pub fn group_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        let r = self.dims.range(group);
        &mut self.values[r]
    }

    pub fn ms_encoder(&self) -> &[f64] {
        self.group(ParamGroup::MsEncoder)
    }

    pub fn spline_coeffs(&self) -> &[f64] {
        self.group(ParamGroup::Splines)
    }

    pub fn bypass(&self) -> &[f64] {
        self.group(ParamGroup::Bypass)
    }

    pub fn bias(&self) -> &[f64] {
        self.group(ParamGroup::Bias)
    }

    fn coeff_offset(&self, q: usize, j: usize) -> usize {
        self.dims.range(ParamGroup::Splines).start + (q * self.dims.d() + j) * N_BASIS
    }

    /// Coefficients of the edge from input `j` to output `q`.
    pub fn coeffs(&self, q: usize, j: usize) -> &[f64] {
        let o = self.coeff_offset(q, j);
        &self.values[o..o + N_BASIS]
    }

    pub fn coeffs_mut(&mut self, q: usize, j: usize) -> &mut [f64] {
        let o = self.coeff_offset(q, j);
        &mut self.values[o..o + N_BASIS]
    }

    /// Drop the spectral path: the encoder is zeroed so the spectral features
    /// are constant and the output depends on RGB only.
    pub fn zero_encoder(&mut self) {
        self.group_mut(ParamGroup::MsEncoder).fill(0.0);
    }

    /// The same parameters rounded to `f32`, as stored in checkpoints.
    pub fn quantized(&self) -> Self {
        Self {
            dims: self.dims,
            knots: self.knots.clone(),
            values: self.values.iter().map(|&v| v as f32 as f64).collect(),
        }
    }
}

/// Least-squares spline coefficients for `f` sampled on `[lo, hi]`.
fn fit_spline(knots: &[f64], f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<[f64; N_BASIS]> {
    let samples = 400;
    let mut ata = [[0.0; N_BASIS]; N_BASIS];
    let mut atb = [0.0; N_BASIS];
    for s in 0..=samples {
        let x = lo + (hi - lo) * s as f64 / samples as f64;
        let b = bspline::bspline_basis(x, knots);
        let y = f(x);
        for i in 0..N_BASIS {
            atb[i] += b[i] * y;
            for j in 0..N_BASIS {
                ata[i][j] += b[i] * b[j];
            }
        }
    }
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += 1e-9;
    }
    solve_spd(ata, atb)
}

/// Cholesky solve of a small symmetric positive-definite system.
fn solve_spd<const N: usize>(a: [[f64; N]; N], b: [f64; N]) -> Result<[f64; N]> {
    let mut l = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Numerical("spline fit matrix is not positive definite".into()));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; N];
    for i in 0..N {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = [0.0; N];
    for i in (0..N).rev() {
        x[i] = (y[i] - (i + 1..N).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Ok(x)
}

/// Features plus the pre-squash encoder outputs needed for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrace {
    pub features: Vec<f64>,
    /// `max(0, W·ms)` per spectral feature.
    pub projections: Vec<f64>,
}

/// `[s(r), s(g), s(b), s(max(0, W·ms)_1), …]` with `s(x) = x/(1+x)`.
/// Negative projections are clamped to zero before squashing so that every
/// feature stays in `[0, 1)`.
pub fn build_features(rgb: &[f64; 3], ms: &[f64], params: &KanParams) -> Result<Vec<f64>> {
    Ok(trace_features(rgb, ms, params)?.features)
}

pub fn trace_features(rgb: &[f64; 3], ms: &[f64], params: &KanParams) -> Result<FeatureTrace> {
    let dims = params.dims;
    if ms.len() != dims.c_ms {
        return Err(Error::DimensionMismatch(format!(
            "MS context has {} channels, model expects {}",
            ms.len(),
            dims.c_ms
        )));
    }
    let mut features = Vec::with_capacity(dims.d());
    let mut projections = Vec::with_capacity(dims.k_features);
    fill_features(rgb, ms, params, &mut features, &mut projections);
    Ok(FeatureTrace { features, projections })
}

pub(crate) fn fill_features(
    rgb: &[f64; 3],
    ms: &[f64],
    params: &KanParams,
    features: &mut Vec<f64>,
    projections: &mut Vec<f64>,
) {
    features.clear();
    projections.clear();
    features.extend(rgb.iter().map(|&v| squash(v.max(0.0))));
    let c = params.dims.c_ms;
    for row in params.ms_encoder().chunks_exact(c.max(1)).take(params.dims.k_features) {
        let z: f64 = row.iter().zip(ms).map(|(w, m)| w * m).sum();
        let z = z.max(0.0);
        projections.push(z);
        features.push(squash(z));
    }
}

/// Spline bases for every input, computed once per pixel.
pub(crate) fn feature_bases(params: &KanParams, features: &[f64], out: &mut Vec<LocalBasis>) {
    out.clear();
    out.extend(features.iter().map(|&x| local_basis(&params.knots, x)));
}

/// `y_q = bias_q + Σ_j [bypass_{q,j}·x_j + Σ_i c_{q,j,i}·B_i(x_j)]`.
pub fn kan_forward(params: &KanParams, features: &[f64]) -> Result<[f64; 3]> {
    check_features(params, features)?;
    let mut bases = Vec::with_capacity(features.len());
    feature_bases(params, features, &mut bases);
    Ok(forward_with_bases(params, features, &bases))
}

fn check_features(params: &KanParams, features: &[f64]) -> Result<()> {
    if features.len() != params.dims.d() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} features, got {}",
            params.dims.d(),
            features.len()
        )));
    }
    Ok(())
}

pub(crate) fn forward_with_bases(params: &KanParams, features: &[f64], bases: &[LocalBasis]) -> [f64; 3] {
    let d = params.dims.d();
    let bias = params.bias();
    let bypass = params.bypass();
    let mut out = [0.0; 3];
    for (q, o) in out.iter_mut().enumerate() {
        let mut acc = bias[q];
        for j in 0..d {
            acc += bypass[q * d + j] * features[j];
            let c = params.coeffs(q, j);
            let lb = &bases[j];
            for r in 0..=SPLINE_ORDER {
                acc += c[lb.first + r] * lb.values[r];
            }
        }
        *o = acc;
    }
    out
}

/// Gradients of `upstream · kan_forward(params, features)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KanGradients {
    /// Same layout as the flat parameter vector (encoder entries are zero).
    pub params: Vec<f64>,
    pub features: Vec<f64>,
}

pub fn kan_backward(params: &KanParams, features: &[f64], upstream: [f64; 3]) -> Result<KanGradients> {
    check_features(params, features)?;
    let mut bases = Vec::with_capacity(features.len());
    feature_bases(params, features, &mut bases);
    let mut grads = vec![0.0; params.dims.n_params()];
    let mut fgrad = vec![0.0; features.len()];
    backward_with_bases(params, features, &bases, upstream, &mut grads, &mut fgrad);
    Ok(KanGradients {
        params: grads,
        features: fgrad,
    })
}

/// Accumulates parameter gradients into `grads` and overwrites `fgrad`.
pub(crate) fn backward_with_bases(
    params: &KanParams,
    features: &[f64],
    bases: &[LocalBasis],
    upstream: [f64; 3],
    grads: &mut [f64],
    fgrad: &mut [f64],
) {
    let dims = params.dims;
    let d = dims.d();
    let splines = dims.range(ParamGroup::Splines).start;
    let bypass_at = dims.range(ParamGroup::Bypass).start;
    let bias_at = dims.range(ParamGroup::Bias).start;
    let bypass = params.bypass();
    fgrad.fill(0.0);
    for (q, &g) in upstream.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grads[bias_at + q] += g;
        for j in 0..d {
            let lb = &bases[j];
            grads[bypass_at + q * d + j] += g * features[j];
            let c = params.coeffs(q, j);
            let base = splines + (q * d + j) * N_BASIS + lb.first;
            let mut slope = bypass[q * d + j];
            for r in 0..=SPLINE_ORDER {
                grads[base + r] += g * lb.values[r];
                slope += c[lb.first + r] * lb.derivs[r];
            }
            fgrad[j] += g * slope;
        }
    }
}

/// Chain spectral-feature gradients through the squash and the encoder.
pub(crate) fn encoder_backward(params: &KanParams, ms: &[f64], projections: &[f64], fgrad: &[f64], grads: &mut [f64]) {
    let c = params.dims.c_ms;
    let start = params.dims.range(ParamGroup::MsEncoder).start;
    for (k, &z) in projections.iter().enumerate() {
        if z <= 0.0 {
            continue;
        }
        let g = fgrad[RGB_INPUTS + k] * squash_prime(z);
        if g == 0.0 {
            continue;
        }
        let row = &mut grads[start + k * c..start + (k + 1) * c];
        for (w, m) in row.iter_mut().zip(ms) {
            *w += g * m;
        }
    }
}

/// Full per-pixel forward from raw inputs.
pub fn predict_pixel(params: &KanParams, rgb: &[f64; 3], ms: &[f64]) -> Result<[f64; 3]> {
    let f = build_features(rgb, ms, params)?;
    kan_forward(params, &f)
}

/// ΔE76 between `pred` and `gt` after conversion to Lab, and its gradient
/// with respect to `pred`. At `pred == gt` the loss is 0 and the returned
/// subgradient is 0.
pub fn loss_de76(pred: [f64; 3], gt: [f64; 3], white: &WhitePoint) -> (f64, [f64; 3]) {
    let lp = xyz_to_lab_unchecked(pred, white);
    let lg = xyz_to_lab_unchecked(gt, white);
    let loss = delta_e76(lp, lg);
    if loss == 0.0 {
        return (0.0, [0.0; 3]);
    }
    let (dl, da, db) = ((lp.l - lg.l) / loss, (lp.a - lg.a) / loss, (lp.b - lg.b) / loss);
    let w = white.as_array();
    let fx = lab_f_prime(pred[0] / w[0]) / w[0];
    let fy = lab_f_prime(pred[1] / w[1]) / w[1];
    let fz = lab_f_prime(pred[2] / w[2]) / w[2];
    // L = 116 fy − 16, a = 500 (fx − fy), b = 200 (fy − fz)
    let gx = 500.0 * da * fx;
    let gy = (116.0 * dl - 500.0 * da + 200.0 * db) * fy;
    let gz = -200.0 * db * fz;
    (loss, [gx, gy, gz])
}
