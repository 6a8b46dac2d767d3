use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ReflectanceCube, WavelengthGrid};

pub const REFLECTANCE_FLOOR: f64 = 0.02;
pub const REFLECTANCE_CEIL: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneSource {
    Synthetic,
    Ingested,
}

/// A scene and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub cube: ReflectanceCube,
    pub source: SceneSource,
    pub mask_note: String,
}

/// Smooth synthetic reflectance: a mildly tilted gray background plus
/// `n_blobs` spatial Gaussian blobs, each carrying a Gaussian bump in
/// wavelength, clipped to `[0.02, 0.98]`. Deterministic in `seed`.
pub fn synth_scene(seed: u64, h: usize, w: usize, grid: &WavelengthGrid, n_blobs: usize) -> Result<ReflectanceCube> {
    if h < 8 || w < 8 {
        return Err(Error::InvalidArgument(format!(
            "synthetic scenes need at least 8x8 pixels, got {h}x{w}"
        )));
    }
    if n_blobs == 0 {
        return Err(Error::InvalidArgument("synthetic scenes need at least one blob".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wl: Vec<f64> = grid.wavelengths().collect();
    let (lo, hi) = (grid.lambda_min(), grid.lambda_max());
    let mid = 0.5 * (lo + hi);
    let half_span = 0.5 * (hi - lo);

    let level = rng.gen_range(0.1..0.5);
    let tilt = rng.gen_range(-0.4..0.4);
    let background: Vec<f64> = wl
        .iter()
        .map(|l| level * (1.0 + tilt * (l - mid) / half_span))
        .collect();

    struct Blob {
        cx: f64,
        cy: f64,
        inv_2s2: f64,
        profile: Vec<f64>,
    }
    let extent = h.min(w) as f64;
    let blobs: Vec<Blob> = (0..n_blobs)
        .map(|_| {
            let cx = rng.gen_range(0.0..w as f64);
            let cy = rng.gen_range(0.0..h as f64);
            let s = rng.gen_range(0.1..0.35) * extent;
            let center = rng.gen_range(lo..hi);
            let fwhm = rng.gen_range(60.0..200.0);
            let amp = rng.gen_range(-0.4..0.8);
            let sl = fwhm / 2.354_820_045;
            Blob {
                cx,
                cy,
                inv_2s2: 1.0 / (2.0 * s * s),
                profile: wl
                    .iter()
                    .map(|l| amp * (-0.5 * ((l - center) / sl).powi(2)).exp())
                    .collect(),
            }
        })
        .collect();

    let n = h * w;
    let mut planes: Vec<Vec<f64>> = background.iter().map(|&b| vec![b; n]).collect();
    for blob in &blobs {
        for y in 0..h {
            for x in 0..w {
                let d2 = (x as f64 - blob.cx).powi(2) + (y as f64 - blob.cy).powi(2);
                let weight = (-d2 * blob.inv_2s2).exp();
                if weight < 1e-12 {
                    continue;
                }
                let i = y * w + x;
                for (plane, p) in planes.iter_mut().zip(&blob.profile) {
                    plane[i] += weight * p;
                }
            }
        }
    }
    for v in planes.iter_mut().flatten() {
        *v = v.clamp(REFLECTANCE_FLOOR, REFLECTANCE_CEIL);
    }
    ReflectanceCube::new(h, w, *grid, planes, vec![true; n])
}

/// Paint a flat white calibration target of `size`×`size` pixels into the
/// top-left corner and exclude it through the mask.
pub fn add_white_reference(cube: &ReflectanceCube, size: usize) -> Result<ReflectanceCube> {
    if size == 0 || size > cube.height() || size > cube.width() {
        return Err(Error::InvalidArgument(format!(
            "white reference size {size} does not fit the scene"
        )));
    }
    let w = cube.width();
    let mut planes = cube.planes().to_vec();
    let mut mask = cube.mask().to_vec();
    for y in 0..size {
        for x in 0..size {
            let i = y * w + x;
            for plane in planes.iter_mut() {
                plane[i] = REFLECTANCE_CEIL;
            }
            mask[i] = false;
        }
    }
    ReflectanceCube::new(cube.height(), w, *cube.grid(), planes, mask)
}

/// Ingestion checks for externally supplied cubes: finiteness and `[0, 1]`
/// range on valid pixels (enforced by the cube constructor), and at least one
/// valid pixel.
pub fn ingest_scene(scene_id: &str, cube: ReflectanceCube, grid: &WavelengthGrid) -> Result<SceneRecord> {
    let cube = cube.resample(grid)?;
    if !cube.mask().iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    Ok(SceneRecord {
        scene_id: scene_id.to_owned(),
        cube,
        source: SceneSource::Ingested,
        mask_note: "mask taken from the source cube".into(),
    })
}
