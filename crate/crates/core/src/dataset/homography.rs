use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::pipeline::mat3::{self, Mat3};

/// Bounds of the parametric misalignment distribution. Translations are in MS
/// pixels, rotation in degrees, scale jitter as a fraction, perspective terms
/// per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomographyParams {
    pub max_translation: f64,
    pub max_rotation: f64,
    pub scale_jitter: f64,
    pub max_perspective: f64,
    pub seed: u64,
}

impl Default for HomographyParams {
    fn default() -> Self {
        Self {
            max_translation: 2.0,
            max_rotation: 1.0,
            scale_jitter: 0.02,
            max_perspective: 1e-4,
            seed: 0,
        }
    }
}

impl HomographyParams {
    pub fn validate(&self) -> Result<()> {
        let bounds = [
            self.max_translation,
            self.max_rotation,
            self.scale_jitter,
            self.max_perspective,
        ];
        if bounds.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::Config("homography bounds must be finite and >= 0".into()));
        }
        if self.scale_jitter >= 1.0 {
            return Err(Error::Config("scale jitter must be < 1".into()));
        }
        Ok(())
    }
}

const MAX_TRIES: usize = 16;

fn symmetric(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.gen_range(-bound..=bound)
    }
}

/// Draw homography number `index` of the stream defined by `params.seed`, for
/// an image of `width`×`height` pixels. The matrix is
/// `T(c + t) · A · T(−c)` with `A` holding rotation, isotropic scale and the
/// perspective row, `c` the image center; it is normalized so `H[2][2] = 1`.
pub fn sample_homography(params: &HomographyParams, index: u64, width: usize, height: usize) -> Result<Mat3> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index);
    let cx = 0.5 * (width as f64 - 1.0);
    let cy = 0.5 * (height as f64 - 1.0);
    for _ in 0..MAX_TRIES {
        let theta = symmetric(&mut rng, params.max_rotation).to_radians();
        let s = 1.0 + symmetric(&mut rng, params.scale_jitter);
        let tx = symmetric(&mut rng, params.max_translation);
        let ty = symmetric(&mut rng, params.max_translation);
        let p1 = symmetric(&mut rng, params.max_perspective);
        let p2 = symmetric(&mut rng, params.max_perspective);
        let (sin, cos) = theta.sin_cos();
        let a = [[s * cos, -s * sin, 0.0], [s * sin, s * cos, 0.0], [p1, p2, 1.0]];
        let to_origin = [[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]];
        let back = [[1.0, 0.0, cx + tx], [0.0, 1.0, cy + ty], [0.0, 0.0, 1.0]];
        let mut h = mat3::mul(&back, &mat3::mul(&a, &to_origin));
        let k = h[2][2];
        if k == 0.0 || !k.is_finite() {
            continue;
        }
        if k != 1.0 {
            for v in h.iter_mut().flatten() {
                *v /= k;
            }
        }
        if mat3::det(&h).abs() > 1e-6 {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "no invertible homography after {MAX_TRIES} draws"
    )))
}

#[inline]
pub fn apply_homography(h: &Mat3, x: f64, y: f64) -> (f64, f64) {
    let p = mat3::mul_vec(h, [x, y, 1.0]);
    (p[0] / p[2], p[1] / p[2])
}

/// Warp an image by `h` (output = source mapped forward by `h`): inverse
/// mapping with bilinear sampling and replicate borders. The mask is sampled
/// nearest-neighbour and cleared where the source point falls outside the image.
pub fn warp_ms(img: &PlanarImage, h: &Mat3) -> Result<PlanarImage> {
    let d = mat3::det(h);
    if d.abs() <= 1e-12 || !d.is_finite() {
        return Err(Error::Singular(d.abs()));
    }
    let inv = mat3::inverse(h).ok_or(Error::Singular(d.abs()))?;
    let (hgt, wid) = (img.height(), img.width());
    let n = hgt * wid;
    let mut channels = vec![vec![0.0; n]; img.n_channels()];
    let mut mask = vec![false; n];
    let mut buf = vec![0.0; img.n_channels()];
    let eps = 1e-9;
    for y in 0..hgt {
        for x in 0..wid {
            let (sx, sy) = apply_homography(&inv, x as f64, y as f64);
            let i = y * wid + x;
            if !(sx.is_finite() && sy.is_finite()) {
                continue;
            }
            img.sample_bilinear(sx, sy, &mut buf);
            for (plane, &v) in channels.iter_mut().zip(&buf) {
                plane[i] = v;
            }
            let inside = sx >= -eps && sy >= -eps && sx <= (wid - 1) as f64 + eps && sy <= (hgt - 1) as f64 + eps;
            if inside {
                let nx = (sx.round().max(0.0) as usize).min(wid - 1);
                let ny = (sy.round().max(0.0) as usize).min(hgt - 1);
                mask[i] = img.mask()[ny * wid + nx];
            }
        }
    }
    PlanarImage::new(hgt, wid, img.color_space(), channels, mask)
}
