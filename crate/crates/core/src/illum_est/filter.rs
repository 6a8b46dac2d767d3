//! Separable Gaussian and Gaussian-derivative filtering with replicate borders.

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Sampled 1-D kernels on `[-r, r]`, `r = ceil(3σ)`: the normalized Gaussian
/// and its first and second analytic derivatives (scaled by the same
/// normalization, the second one made zero-sum).
#[derive(Debug, Clone)]
pub struct GaussianKernels {
    pub radius: usize,
    pub g: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl GaussianKernels {
    pub fn new(sigma: f64) -> Self {
        let radius = (3.0 * sigma).ceil() as usize;
        let s2 = sigma * sigma;
        let offsets = || (-(radius as isize)..=radius as isize).map(|i| i as f64);
        let raw: Vec<f64> = offsets().map(|x| (-x * x / (2.0 * s2)).exp()).collect();
        let norm: f64 = raw.iter().sum();
        let g: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let d1 = offsets().zip(&g).map(|(x, g)| -x / s2 * g).collect();
        let mut d2: Vec<f64> = offsets()
            .zip(&g)
            .map(|(x, g)| (x * x / (s2 * s2) - 1.0 / s2) * g)
            .collect();
        // sampled and truncated, the second derivative no longer sums to zero;
        // remove the residual DC response so flat regions give exactly 0
        let dc: f64 = d2.iter().sum();
        for (d, gv) in d2.iter_mut().zip(&g) {
            *d -= dc * gv;
        }
        Self { radius, g, d1, d2 }
    }
}

/// Convolve every row (`horizontal`) or column with `kernel`, replicating the border.
fn convolve_1d(src: &[f64], h: usize, w: usize, kernel: &[f64], horizontal: bool) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                // convolution: out[x] = Σ_i k[i] · src[x - i]
                let off = k as isize - r;
                let (sy, sx) = if horizontal {
                    (y as isize, (x as isize - off).clamp(0, w as isize - 1))
                } else {
                    ((y as isize - off).clamp(0, h as isize - 1), x as isize)
                };
                acc += kv * src[sy as usize * w + sx as usize];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn separable(src: &[f64], h: usize, w: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let tmp = convolve_1d(src, h, w, kx, true);
    convolve_1d(&tmp, h, w, ky, false)
}

/// Gaussian-derivative response of every channel.
///
/// * order 0: Gaussian blur (identity when `sigma == 0`);
/// * order 1: gradient magnitude `sqrt(Gx² + Gy²)`;
/// * order 2: `sqrt(Gxx² + 2·Gxy² + Gyy²)`.
pub fn gaussian_derivative(img: &PlanarImage, sigma: f64, order: u8) -> Result<PlanarImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if order > 2 {
        return Err(Error::InvalidArgument(format!("derivative order {order} not in 0..=2")));
    }
    if order > 0 && sigma == 0.0 {
        return Err(Error::InvalidArgument("derivative filtering needs sigma > 0".into()));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let (h, w) = (img.height(), img.width());
    let k = GaussianKernels::new(sigma);
    let channels = img
        .channels()
        .iter()
        .map(|plane| match order {
            0 => separable(plane, h, w, &k.g, &k.g),
            1 => {
                let gx = separable(plane, h, w, &k.d1, &k.g);
                let gy = separable(plane, h, w, &k.g, &k.d1);
                gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect()
            }
            _ => {
                let gxx = separable(plane, h, w, &k.d2, &k.g);
                let gyy = separable(plane, h, w, &k.g, &k.d2);
                let gxy = separable(plane, h, w, &k.d1, &k.d1);
                (0..h * w)
                    .map(|i| (gxx[i] * gxx[i] + 2.0 * gxy[i] * gxy[i] + gyy[i] * gyy[i]).sqrt())
                    .collect()
            }
        })
        .collect();
    PlanarImage::new(h, w, img.color_space(), channels, img.mask().to_vec())
}
