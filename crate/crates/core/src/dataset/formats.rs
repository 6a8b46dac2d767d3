//! Binary containers for cubes and images, plus 16-bit PNG export.
//!
//! `HSC1`: magic, `u32` height, width, bands, `f32` λ_min, `f32` step, then
//! band-planar `f32` samples and an `H×W` `u8` mask. `MCI1`: magic, `u32`
//! height, width, channels, `u8` color-space code, then channel-planar `f32`
//! samples and the mask. Everything little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{ColorSpace, PlanarImage};
use crate::spectral::{ReflectanceCube, WavelengthGrid};

pub const CUBE_MAGIC: [u8; 4] = *b"HSC1";
pub const IMAGE_MAGIC: [u8; 4] = *b"MCI1";

fn push_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} exceeds u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn push_planes(buf: &mut Vec<u8>, planes: &[Vec<f64>], mask: &[bool]) {
    for plane in planes {
        for &v in plane {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    buf.extend(mask.iter().map(|&m| m as u8));
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                needed: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = self.take(4)?;
        if found != expected {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(&expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn planes(&mut self, count: usize, n: usize, what: &str) -> Result<Vec<Vec<f64>>> {
        let needed = count
            .checked_mul(n)
            .and_then(|v| v.checked_mul(4))
            .and_then(|v| v.checked_add(n))
            .and_then(|v| v.checked_add(self.pos))
            .ok_or_else(|| Error::Format(format!("{what} dimensions overflow")))?;
        if needed > self.bytes.len() {
            return Err(Error::Truncated {
                needed,
                found: self.bytes.len(),
            });
        }
        let mut planes = Vec::with_capacity(count);
        for _ in 0..count {
            let raw = self.take(4 * n)?;
            let plane: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            if plane.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{what} samples")));
            }
            planes.push(plane);
        }
        Ok(planes)
    }

    fn mask(&mut self, n: usize) -> Result<Vec<bool>> {
        self.take(n)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Format(format!("mask byte {other} is not 0 or 1"))),
            })
            .collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_cube(cube: &ReflectanceCube) -> Result<Vec<u8>> {
    let (h, w, g) = (cube.height(), cube.width(), cube.grid());
    let mut buf = Vec::with_capacity(24 + h * w * (4 * g.count() + 1));
    buf.extend_from_slice(&CUBE_MAGIC);
    push_u32(&mut buf, h)?;
    push_u32(&mut buf, w)?;
    push_u32(&mut buf, g.count())?;
    buf.extend_from_slice(&(g.lambda_min() as f32).to_le_bytes());
    buf.extend_from_slice(&(g.step() as f32).to_le_bytes());
    push_planes(&mut buf, cube.planes(), cube.mask());
    Ok(buf)
}

pub fn decode_cube(bytes: &[u8]) -> Result<ReflectanceCube> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(CUBE_MAGIC)?;
    let (h, w, b) = (r.u32()?, r.u32()?, r.u32()?);
    let (lmin, step) = (r.f32()?, r.f32()?);
    let grid = WavelengthGrid::from_count(lmin as f64, step as f64, b)
        .map_err(|e| Error::Format(format!("cube header: {e}")))?;
    let planes = r.planes(b, h * w, "cube")?;
    let mask = r.mask(h * w)?;
    r.finish()?;
    ReflectanceCube::new(h, w, grid, planes, mask)
}

pub fn encode_image(img: &PlanarImage) -> Result<Vec<u8>> {
    let (h, w, c) = (img.height(), img.width(), img.n_channels());
    let mut buf = Vec::with_capacity(17 + h * w * (4 * c + 1));
    buf.extend_from_slice(&IMAGE_MAGIC);
    push_u32(&mut buf, h)?;
    push_u32(&mut buf, w)?;
    push_u32(&mut buf, c)?;
    buf.push(img.color_space().code());
    push_planes(&mut buf, img.channels(), img.mask());
    Ok(buf)
}

pub fn decode_image(bytes: &[u8]) -> Result<PlanarImage> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IMAGE_MAGIC)?;
    let (h, w, c) = (r.u32()?, r.u32()?, r.u32()?);
    let code = r.take(1)?[0];
    let cs = ColorSpace::from_code(code).ok_or_else(|| Error::Format(format!("unknown color-space code {code}")))?;
    let planes = r.planes(c, h * w, "image")?;
    let mask = r.mask(h * w)?;
    r.finish()?;
    PlanarImage::new(h, w, cs, planes, mask)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_cube(cube: &ReflectanceCube, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_cube(cube)?)
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<ReflectanceCube> {
    let path = path.as_ref();
    decode_cube(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_image(img: &PlanarImage, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_image(img)?)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    decode_image(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Write a 3-channel display-encoded image as a 16-bit RGB PNG. Values are
/// clipped to `[0, 1]`; masked pixels are written black.
pub fn export_png16(img: &PlanarImage, path: impl AsRef<Path>) -> Result<()> {
    img.ensure_color_space(ColorSpace::SrgbEncoded)?;
    if img.n_channels() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "PNG export needs 3 channels, got {}",
            img.n_channels()
        )));
    }
    let (h, w) = (img.height(), img.width());
    let mut data = Vec::with_capacity(h * w * 3);
    for i in 0..h * w {
        for c in 0..3 {
            let v = if img.mask()[i] { img.channel(c)[i] } else { 0.0 };
            data.push((v.clamp(0.0, 1.0) * 65535.0).round() as u16);
        }
    }
    let buffer = image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(w as u32, h as u32, data)
        .ok_or_else(|| Error::Format("PNG buffer size mismatch".into()))?;
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    buffer
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG encoding of {}: {e}", path.display())))
}
