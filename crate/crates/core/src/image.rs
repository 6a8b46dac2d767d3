//! Planar multichannel rasters shared by every pipeline stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the values of a [`PlanarImage`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorSpace {
    CameraRaw,
    MsRaw,
    Xyz,
    Lab,
    SrgbEncoded,
}

impl ColorSpace {
    /// Code used by the MCI1 binary format.
    pub fn code(self) -> u8 {
        match self {
            ColorSpace::CameraRaw => 0,
            ColorSpace::MsRaw => 1,
            ColorSpace::Xyz => 2,
            ColorSpace::Lab => 3,
            ColorSpace::SrgbEncoded => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => ColorSpace::CameraRaw,
            1 => ColorSpace::MsRaw,
            2 => ColorSpace::Xyz,
            3 => ColorSpace::Lab,
            4 => ColorSpace::SrgbEncoded,
            _ => return None,
        })
    }

    /// Linear radiometric spaces, where exposure scaling is meaningful.
    pub fn is_linear(self) -> bool {
        matches!(self, ColorSpace::CameraRaw | ColorSpace::MsRaw | ColorSpace::Xyz)
    }
}

/// A linear (or encoded) raster stored plane by plane, with a validity mask.
///
/// Pixel `(y, x)` lives at index `y * width + x` in every plane and in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    height: usize,
    width: usize,
    color_space: ColorSpace,
    channels: Vec<Vec<f64>>,
    mask: Vec<bool>,
}

impl PlanarImage {
    pub fn new(
        height: usize,
        width: usize,
        color_space: ColorSpace,
        channels: Vec<Vec<f64>>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::DimensionMismatch("image must be non-empty".into()));
        }
        if channels.is_empty() {
            return Err(Error::DimensionMismatch("image needs at least one channel".into()));
        }
        let n = height * width;
        if channels.iter().any(|c| c.len() != n) || mask.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "every plane and the mask must hold {height}x{width} = {n} values"
            )));
        }
        Ok(Self {
            height,
            width,
            color_space,
            channels,
            mask,
        })
    }

    /// All-zero image with every pixel valid.
    pub fn zeros(height: usize, width: usize, n_channels: usize, color_space: ColorSpace) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            color_space,
            channels: vec![vec![0.0; n]; n_channels],
            mask: vec![true; n],
        }
    }

    /// Image whose every pixel equals `value`.
    pub fn constant(height: usize, width: usize, value: &[f64], color_space: ColorSpace) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            color_space,
            channels: value.iter().map(|&v| vec![v; n]).collect(),
            mask: vec![true; n],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn color_space(&self) -> ColorSpace {
        self.color_space
    }

    pub fn with_color_space(mut self, color_space: ColorSpace) -> Self {
        self.color_space = color_space;
        self
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.channels[c][y * self.width + x]
    }

    /// Copy pixel `idx` (flat index) into `out`.
    #[inline]
    pub fn pixel_into(&self, idx: usize, out: &mut [f64]) {
        for (o, plane) in out.iter_mut().zip(&self.channels) {
            *o = plane[idx];
        }
    }

    pub fn pixel(&self, idx: usize) -> Vec<f64> {
        self.channels.iter().map(|p| p[idx]).collect()
    }

    pub fn ensure_color_space(&self, expected: ColorSpace) -> Result<()> {
        if self.color_space != expected {
            return Err(Error::ColorSpace {
                expected,
                found: self.color_space,
            });
        }
        Ok(())
    }

    pub fn ensure_same_dims(&self, other: &PlanarImage) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.channels.iter().flatten().all(|v| v.is_finite())
    }

    /// Apply `f` to every pixel vector, producing an image with `out_channels` planes.
    /// The mask is carried over unchanged.
    pub fn map_pixels<F>(&self, out_channels: usize, color_space: ColorSpace, mut f: F) -> Self
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let n = self.n_pixels();
        let mut out = vec![vec![0.0; n]; out_channels];
        let mut src = vec![0.0; self.n_channels()];
        let mut dst = vec![0.0; out_channels];
        for i in 0..n {
            self.pixel_into(i, &mut src);
            f(&src, &mut dst);
            for (plane, &v) in out.iter_mut().zip(&dst) {
                plane[i] = v;
            }
        }
        Self {
            height: self.height,
            width: self.width,
            color_space,
            channels: out,
            mask: self.mask.clone(),
        }
    }

    /// Bilinear sample of every channel at continuous pixel coordinates, clamping
    /// to the border (replicate). Pixel centers sit at integer coordinates.
    #[inline]
    pub fn sample_bilinear(&self, sx: f64, sy: f64, out: &mut [f64]) {
        let maxx = (self.width - 1) as f64;
        let maxy = (self.height - 1) as f64;
        let sx = sx.clamp(0.0, maxx);
        let sy = sy.clamp(0.0, maxy);
        let x0 = sx.floor() as usize;
        let y0 = sy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let (i00, i01) = (y0 * self.width + x0, y0 * self.width + x1);
        let (i10, i11) = (y1 * self.width + x0, y1 * self.width + x1);
        for (o, p) in out.iter_mut().zip(&self.channels) {
            if fx == 0.0 && fy == 0.0 {
                *o = p[i00];
                continue;
            }
            let top = p[i00] * (1.0 - fx) + p[i01] * fx;
            let bottom = p[i10] * (1.0 - fx) + p[i11] * fx;
            *o = top * (1.0 - fy) + bottom * fy;
        }
    }

    /// Source coordinates of output pixel `(y, x)` when this image is resized
    /// to `out_h`×`out_w` with pixel-center alignment.
    #[inline]
    pub fn resize_coords(&self, out_h: usize, out_w: usize, y: usize, x: usize) -> (f64, f64) {
        let sx = (x as f64 + 0.5) * self.width as f64 / out_w as f64 - 0.5;
        let sy = (y as f64 + 0.5) * self.height as f64 / out_h as f64 - 0.5;
        (sx, sy)
    }

    /// Bilinear resize to `out_h`×`out_w`; the mask is sampled nearest-neighbour.
    pub fn upsample_bilinear(&self, out_h: usize, out_w: usize) -> Self {
        let n = out_h * out_w;
        let mut channels = vec![vec![0.0; n]; self.n_channels()];
        let mut mask = vec![false; n];
        let mut buf = vec![0.0; self.n_channels()];
        for y in 0..out_h {
            for x in 0..out_w {
                let (sx, sy) = self.resize_coords(out_h, out_w, y, x);
                self.sample_bilinear(sx, sy, &mut buf);
                let i = y * out_w + x;
                for (plane, &v) in channels.iter_mut().zip(&buf) {
                    plane[i] = v;
                }
                let nx = (sx.round().max(0.0) as usize).min(self.width - 1);
                let ny = (sy.round().max(0.0) as usize).min(self.height - 1);
                mask[i] = self.mask[ny * self.width + nx];
            }
        }
        Self {
            height: out_h,
            width: out_w,
            color_space: self.color_space,
            channels,
            mask,
        }
    }
}

/// Block-average downsampling. An output pixel is valid only when its whole
/// source block is valid.
pub fn downsample_area(img: &PlanarImage, factor: usize) -> Result<PlanarImage> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsample factor must be positive".into()));
    }
    if img.height % factor != 0 || img.width % factor != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not divisible by factor {factor}",
            img.height, img.width
        )));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let (oh, ow) = (img.height / factor, img.width / factor);
    let area = (factor * factor) as f64;
    let channels = img
        .channels
        .iter()
        .map(|plane| {
            let mut out = vec![0.0; oh * ow];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for dy in 0..factor {
                        let row = (oy * factor + dy) * img.width + ox * factor;
                        for v in &plane[row..row + factor] {
                            acc += v;
                        }
                    }
                    out[oy * ow + ox] = acc / area;
                }
            }
            out
        })
        .collect();
    let mut mask = vec![true; oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            mask[oy * ow + ox] = (0..factor).all(|dy| {
                let row = (oy * factor + dy) * img.width + ox * factor;
                img.mask[row..row + factor].iter().all(|&m| m)
            });
        }
    }
    PlanarImage::new(oh, ow, img.color_space, channels, mask)
}

/// Multiply every value of a linear image by `alpha`.
pub fn scale_exposure(img: &PlanarImage, alpha: f64) -> Result<PlanarImage> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exposure factor must be positive and finite, got {alpha}"
        )));
    }
    if !img.color_space.is_linear() {
        return Err(Error::InvalidArgument(format!(
            "exposure scaling needs a linear color space, got {:?}",
            img.color_space
        )));
    }
    let mut out = img.clone();
    if alpha != 1.0 {
        for plane in &mut out.channels {
            for v in plane.iter_mut() {
                *v *= alpha;
            }
        }
    }
    Ok(out)
}
