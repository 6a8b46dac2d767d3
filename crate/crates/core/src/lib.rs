//! Spectral image synthesis and RGB + multispectral color correction.
//!
//! The crate renders hyperspectral reflectance into camera RGB, low-resolution
//! multispectral, and CIE XYZ (D65) ground truth; corrects camera RGB either
//! with the traditional white-balance + color-space-transform pipeline or with
//! a learned B-spline KAN corrector that fuses RGB with spectral features; and
//! evaluates both with CIEDE2000 and reproduction-error statistics.

pub mod colorimetry;
pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod illum_est;
pub mod image;
pub mod kan;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
