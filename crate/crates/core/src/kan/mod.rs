//! Pointwise B-spline KAN color corrector fed by camera RGB and a learned
//! projection of the co-located MS measurements, trained from scratch with
//! hand-written gradients.

pub mod bspline;
mod model;
mod optim;
mod train;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use model::{
    build_features, kan_backward, kan_forward, loss_de76, predict_pixel, trace_features, FeatureTrace, KanDims,
    KanGradients, KanParams, ParamGroup, OUTPUTS, RGB_INPUTS,
};
pub use optim::{adam_step, cosine_lr, OptimizerState, BETA1, BETA2, EPSILON};
pub use train::{
    ms_context, train, train_on, EarlyStopping, EpochRecord, SpectralPath, StopReason, TrainConfig, TrainOutcome,
    TrainingLog,
};

use crate::error::{Error, Result};
use crate::image::{ColorSpace, PlanarImage};

/// Integer factor `f` with `rgb = f × ms` in both dimensions.
pub fn resolution_factor(rgb: &PlanarImage, ms: &PlanarImage) -> Result<usize> {
    let (h, w) = (rgb.height(), rgb.width());
    let (mh, mw) = (ms.height(), ms.width());
    if mh == 0 || mw == 0 || h % mh != 0 || w % mw != 0 || h / mh != w / mw {
        return Err(Error::DimensionMismatch(format!(
            "RGB {h}x{w} is not an integer multiple of MS {mh}x{mw}"
        )));
    }
    Ok(h / mh)
}

/// Apply the model to every pixel. The MS image is sampled bilinearly at each
/// RGB pixel; outputs are clipped at zero and the RGB mask is kept.
pub fn predict_image(params: &KanParams, rgb: &PlanarImage, ms: &PlanarImage) -> Result<PlanarImage> {
    rgb.ensure_color_space(ColorSpace::CameraRaw)?;
    if rgb.n_channels() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "RGB image has {} channels",
            rgb.n_channels()
        )));
    }
    resolution_factor(rgb, ms)?;
    let dims = params.dims();
    if dims.k_features > 0 && ms.n_channels() != dims.c_ms {
        return Err(Error::DimensionMismatch(format!(
            "MS image has {} channels, model expects {}",
            ms.n_channels(),
            dims.c_ms
        )));
    }
    let (h, w) = (rgb.height(), rgb.width());
    let rows: Vec<Vec<[f64; 3]>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut ctx = vec![0.0; ms.n_channels()];
            let mut features = Vec::new();
            let mut proj = Vec::new();
            let mut bases = Vec::new();
            (0..w)
                .map(|x| {
                    let i = y * w + x;
                    let px = [rgb.channel(0)[i], rgb.channel(1)[i], rgb.channel(2)[i]];
                    ms_context(ms, h, w, y, x, &mut ctx);
                    model::fill_features(&px, &ctx, params, &mut features, &mut proj);
                    model::feature_bases(params, &features, &mut bases);
                    model::forward_with_bases(params, &features, &bases).map(|v| v.max(0.0))
                })
                .collect()
        })
        .collect();
    let mut channels = vec![vec![0.0; h * w]; 3];
    for (y, row) in rows.iter().enumerate() {
        for (x, v) in row.iter().enumerate() {
            for c in 0..3 {
                channels[c][y * w + x] = v[c];
            }
        }
    }
    PlanarImage::new(h, w, ColorSpace::Xyz, channels, rgb.mask().to_vec())
}

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"KAN1";
const CHECKPOINT_FORMAT: &str = "msfuse-kan-1";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    c_ms: usize,
    k_features: usize,
    spline_order: usize,
    grid_size: usize,
    knots: Vec<f64>,
    n_params: usize,
    config_hash: String,
}

/// Magic, `u32` header length, JSON header, then the flat parameter vector
/// as little-endian `f32`.
pub fn encode_checkpoint(params: &KanParams, config_hash: &str) -> Result<Vec<u8>> {
    let dims = params.dims();
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        c_ms: dims.c_ms,
        k_features: dims.k_features,
        spline_order: bspline::SPLINE_ORDER,
        grid_size: bspline::GRID_SIZE,
        knots: params.knots().to_vec(),
        n_params: dims.n_params(),
        config_hash: config_hash.to_owned(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(8 + json.len() + 4 * dims.n_params());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for &v in params.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(buf)
}

/// Returns the parameters and the stored config hash.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(KanParams, String)> {
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            needed: 8,
            found: bytes.len(),
        });
    }
    if bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            expected: "KAN1".into(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + hlen {
        return Err(Error::Truncated {
            needed: 8 + hlen,
            found: bytes.len(),
        });
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[8..8 + hlen])?;
    if header.format != CHECKPOINT_FORMAT
        || header.spline_order != bspline::SPLINE_ORDER
        || header.grid_size != bspline::GRID_SIZE
    {
        return Err(Error::Format(format!(
            "unsupported checkpoint {:?} (order {}, grid {})",
            header.format, header.spline_order, header.grid_size
        )));
    }
    let dims = KanDims {
        c_ms: header.c_ms,
        k_features: header.k_features,
    };
    if header.n_params != dims.n_params() {
        return Err(Error::Format(format!(
            "checkpoint declares {} parameters, dimensions imply {}",
            header.n_params,
            dims.n_params()
        )));
    }
    let payload = &bytes[8 + hlen..];
    if payload.len() != 4 * header.n_params {
        return Err(if payload.len() < 4 * header.n_params {
            Error::Truncated {
                needed: 8 + hlen + 4 * header.n_params,
                found: bytes.len(),
            }
        } else {
            Error::Format("trailing bytes after checkpoint payload".into())
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((KanParams::from_parts(dims, header.knots, values)?, header.config_hash))
}

pub fn save_checkpoint(params: &KanParams, config_hash: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, encode_checkpoint(params, config_hash)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(KanParams, String)> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
