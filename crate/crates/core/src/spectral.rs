//! Wavelength grids, spectra, sensitivities, reflectance cubes, and the
//! discretized image-formation model
//!
//! ```text
//! I_c(x, y) = Σ_b R_b(x, y) · E_b · S_{c,b} · Δλ
//! ```
//!
//! evaluated with the rectangle rule on a uniform grid.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ColorSpace, PlanarImage};

const GRID_TOL: f64 = 1e-6;

/// Uniformly spaced wavelength samples, in nanometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    lambda_min: f64,
    step: f64,
    count: usize,
}

impl WavelengthGrid {
    pub fn new(lambda_min: f64, lambda_max: f64, step: f64) -> Result<Self> {
        if !(lambda_min.is_finite() && lambda_max.is_finite() && step.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds must be finite".into()));
        }
        if !(lambda_min < lambda_max) || !(step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid grid {lambda_min}..{lambda_max} step {step}"
            )));
        }
        let span = (lambda_max - lambda_min) / step;
        let count = span.round() as usize + 1;
        if (span - span.round()).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "range {lambda_min}..{lambda_max} is not a whole number of {step} nm steps"
            )));
        }
        Ok(Self {
            lambda_min,
            step,
            count,
        })
    }

    /// A grid with `count` samples starting at `lambda_min`. A single-sample
    /// grid is allowed here; its one band still integrates over `step`.
    pub fn from_count(lambda_min: f64, step: f64, count: usize) -> Result<Self> {
        if count == 0 || !(step > 0.0) || !lambda_min.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid grid start {lambda_min} step {step} count {count}"
            )));
        }
        Ok(Self {
            lambda_min,
            step,
            count,
        })
    }

    /// 400–700 nm at 10 nm (31 bands).
    pub fn visible_10nm() -> Self {
        Self {
            lambda_min: 400.0,
            step: 10.0,
            count: 31,
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.wavelength(self.count - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn wavelength(&self, i: usize) -> f64 {
        self.lambda_min + i as f64 * self.step
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.wavelength(i))
    }

    pub fn matches(&self, other: &WavelengthGrid) -> bool {
        self.count == other.count
            && (self.lambda_min - other.lambda_min).abs() < GRID_TOL
            && (self.step - other.step).abs() < GRID_TOL
    }

    fn ensure_matches(&self, other: &WavelengthGrid, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}..{} nm/{} vs {}..{} nm/{}",
                self.lambda_min,
                self.lambda_max(),
                self.step,
                other.lambda_min,
                other.lambda_max(),
                other.step
            )))
        }
    }
}

/// Piecewise-linear evaluation of tabulated samples with clamp-to-edge
/// extrapolation. `xs` must be strictly increasing.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // first index with xs[i] > x
    let hi = xs.partition_point(|&v| v <= x);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

/// Tabulated curves on an arbitrary strictly increasing wavelength list, as
/// read from CSV. Place them on a grid with [`Tabulated::resample`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub wavelengths: Vec<f64>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Tabulated {
    pub fn new(wavelengths: Vec<f64>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if wavelengths.is_empty() {
            return Err(Error::Format("tabulated data has no rows".into()));
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("wavelengths must be strictly increasing".into()));
        }
        if names.len() != columns.len() || columns.iter().any(|c| c.len() != wavelengths.len()) {
            return Err(Error::Format("ragged tabulated columns".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated data".into()));
        }
        Ok(Self {
            wavelengths,
            names,
            columns,
        })
    }

    /// Read a CSV whose first column is `wavelength_nm` and whose remaining
    /// columns are curves.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Format(
                "CSV needs a wavelength column and at least one value column".into(),
            ));
        }
        if headers.get(0) != Some("wavelength_nm") {
            return Err(Error::Format(format!(
                "first CSV column must be `wavelength_nm`, found {:?}",
                headers.get(0).unwrap_or("")
            )));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut wavelengths = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(Error::Format(format!("row {} has {} fields", row + 2, rec.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: cannot parse {s:?}", row + 2)))
            };
            wavelengths.push(parse(&rec[0])?);
            for (col, field) in columns.iter_mut().zip(rec.iter().skip(1)) {
                col.push(parse(field)?);
            }
        }
        Self::new(wavelengths, names, columns)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["wavelength_nm".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, wl) in self.wavelengths.iter().enumerate() {
            let mut rec = vec![format!("{wl}")];
            rec.extend(self.columns.iter().map(|c| format!("{}", c[i])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }

    fn ensure_overlap(&self, target: &WavelengthGrid) -> Result<()> {
        let (src_min, src_max) = (self.wavelengths[0], *self.wavelengths.last().unwrap());
        if src_max < target.lambda_min() || src_min > target.lambda_max() {
            return Err(Error::EmptyOverlap {
                src_min,
                src_max,
                dst_min: target.lambda_min(),
                dst_max: target.lambda_max(),
            });
        }
        Ok(())
    }

    /// Linear interpolation of column `col` at every target wavelength.
    pub fn resample_column(&self, col: usize, target: &WavelengthGrid) -> Result<Vec<f64>> {
        self.ensure_overlap(target)?;
        Ok(target
            .wavelengths()
            .map(|wl| interp_linear(&self.wavelengths, &self.columns[col], wl).max(0.0))
            .collect())
    }

    pub fn to_spectrum(&self, col: usize, target: &WavelengthGrid) -> Result<Spectrum> {
        Spectrum::new(*target, self.resample_column(col, target)?)
    }

    pub fn to_sensitivities(&self, target: &WavelengthGrid) -> Result<SensitivitySet> {
        let channels = (0..self.columns.len())
            .map(|c| self.resample_column(c, target))
            .collect::<Result<Vec<_>>>()?;
        SensitivitySet::new(*target, channels, self.names.clone())
    }
}

/// A non-negative function of wavelength sampled on a grid: an illuminant SPD
/// or any other spectral curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: WavelengthGrid,
    values: Arc<[f64]>,
}

impl Spectrum {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::GridMismatch(format!(
                "spectrum has {} samples, grid has {}",
                values.len(),
                grid.count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum".into()));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("spectrum values must be non-negative".into()));
        }
        Ok(Self {
            grid,
            values: values.into(),
        })
    }

    pub fn constant(grid: WavelengthGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.count()])
    }

    /// Spectrum defined by a function of wavelength.
    pub fn from_fn(grid: WavelengthGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.wavelengths().map(f).collect())
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Check the extra requirement placed on illuminants: some power somewhere.
    pub fn ensure_illuminant(&self) -> Result<()> {
        if self.values.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("illuminant SPD is zero everywhere".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * k).collect())
    }

    /// `a·self + b·other`, both on the same grid.
    pub fn combine(&self, a: f64, other: &Spectrum, b: f64) -> Result<Self> {
        self.grid.ensure_matches(&other.grid, "combine")?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    /// Scale so that a perfect white reflector has luminance `Y = 1` under the
    /// given color-matching functions (channel 1 must be ȳ).
    pub fn normalized_luminance(&self, cmf: &SensitivitySet) -> Result<Self> {
        let white = flat_field_color(self, cmf)?;
        let y = *white
            .get(1)
            .ok_or_else(|| Error::InvalidArgument("color-matching functions need at least two channels".into()))?;
        if !(y > 0.0) {
            return Err(Error::Numerical("illuminant has zero luminance".into()));
        }
        self.scaled(1.0 / y)
    }

    pub fn read_csv_path(path: impl AsRef<Path>, target: &WavelengthGrid) -> Result<Self> {
        let tab = Tabulated::read_csv_path(path)?;
        if tab.columns.len() != 1 || tab.names[0] != "value" {
            return Err(Error::Format(
                "spectrum CSV must have header `wavelength_nm,value`".into(),
            ));
        }
        tab.to_spectrum(0, target)
    }

    pub fn to_tabulated(&self) -> Tabulated {
        Tabulated {
            wavelengths: self.grid.wavelengths().collect(),
            names: vec!["value".into()],
            columns: vec![self.values.to_vec()],
        }
    }
}

/// Linear resampling of a spectrum onto another grid, clamp-to-edge outside
/// the source range.
pub fn resample_spectrum(spec: &Spectrum, target: &WavelengthGrid) -> Result<Spectrum> {
    let src = spec.to_tabulated();
    src.to_spectrum(0, target)
}

/// Per-channel spectral sensitivities of a camera or observer.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySet {
    grid: WavelengthGrid,
    channels: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl SensitivitySet {
    pub fn new(grid: WavelengthGrid, channels: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidArgument("sensitivity set has no channels".into()));
        }
        if names.len() != channels.len() {
            return Err(Error::InvalidArgument("one name per channel required".into()));
        }
        for (name, ch) in names.iter().zip(&channels) {
            if ch.len() != grid.count() {
                return Err(Error::GridMismatch(format!(
                    "channel {name} has {} samples, grid has {}",
                    ch.len(),
                    grid.count()
                )));
            }
            if ch.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "channel {name} must be finite and non-negative"
                )));
            }
            if !ch.iter().any(|&v| v > 0.0) {
                return Err(Error::InvalidArgument(format!("channel {name} is zero everywhere")));
            }
        }
        Ok(Self { grid, channels, names })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.grid,
            self.channels
                .iter()
                .map(|c| c.iter().map(|v| v * k).collect())
                .collect(),
            self.names.clone(),
        )
    }

    pub fn resample(&self, target: &WavelengthGrid) -> Result<Self> {
        self.to_tabulated().to_sensitivities(target)
    }

    pub fn read_csv_path(path: impl AsRef<Path>, target: &WavelengthGrid) -> Result<Self> {
        Tabulated::read_csv_path(path)?.to_sensitivities(target)
    }

    pub fn to_tabulated(&self) -> Tabulated {
        Tabulated {
            wavelengths: self.grid.wavelengths().collect(),
            names: self.names.clone(),
            columns: self.channels.clone(),
        }
    }
}

/// Hyperspectral surface reflectance of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceCube {
    height: usize,
    width: usize,
    grid: WavelengthGrid,
    planes: Vec<Vec<f64>>,
    mask: Vec<bool>,
}

impl ReflectanceCube {
    /// Builds a cube after checking shapes, finiteness, and that valid pixels
    /// hold reflectances in `[0, 1]`.
    pub fn new(
        height: usize,
        width: usize,
        grid: WavelengthGrid,
        planes: Vec<Vec<f64>>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let n = height * width;
        if n == 0 {
            return Err(Error::DimensionMismatch("cube must be non-empty".into()));
        }
        if planes.len() != grid.count() {
            return Err(Error::GridMismatch(format!(
                "cube has {} bands, grid has {}",
                planes.len(),
                grid.count()
            )));
        }
        if planes.iter().any(|p| p.len() != n) || mask.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "cube planes and mask must hold {n} values"
            )));
        }
        for plane in &planes {
            for (v, &valid) in plane.iter().zip(&mask) {
                if !v.is_finite() {
                    return Err(Error::NonFinite("reflectance cube".into()));
                }
                if valid && !(0.0..=1.0).contains(v) {
                    return Err(Error::InvalidArgument(format!(
                        "reflectance {v} outside [0, 1] on a valid pixel"
                    )));
                }
            }
        }
        Ok(Self {
            height,
            width,
            grid,
            planes,
            mask,
        })
    }

    /// Spatially uniform cube with the same reflectance spectrum everywhere.
    pub fn uniform(height: usize, width: usize, grid: WavelengthGrid, reflectance: &[f64]) -> Result<Self> {
        let n = height * width;
        Self::new(
            height,
            width,
            grid,
            reflectance.iter().map(|&r| vec![r; n]).collect(),
            vec![true; n],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn band(&self, b: usize) -> &[f64] {
        &self.planes[b]
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }

    /// Reflectance spectrum at flat pixel index `idx`.
    pub fn spectrum_at(&self, idx: usize) -> Vec<f64> {
        self.planes.iter().map(|p| p[idx]).collect()
    }

    /// Resample every pixel spectrum onto another grid (clamp-to-edge).
    pub fn resample(&self, target: &WavelengthGrid) -> Result<Self> {
        if self.grid.matches(target) {
            return Ok(self.clone());
        }
        let src: Vec<f64> = self.grid.wavelengths().collect();
        if src[src.len() - 1] < target.lambda_min() || src[0] > target.lambda_max() {
            return Err(Error::EmptyOverlap {
                src_min: src[0],
                src_max: src[src.len() - 1],
                dst_min: target.lambda_min(),
                dst_max: target.lambda_max(),
            });
        }
        let n = self.height * self.width;
        let mut planes = vec![vec![0.0; n]; target.count()];
        let mut buf = vec![0.0; src.len()];
        for idx in 0..n {
            for (b, p) in self.planes.iter().enumerate() {
                buf[b] = p[idx];
            }
            for (t, wl) in target.wavelengths().enumerate() {
                planes[t][idx] = interp_linear(&src, &buf, wl);
            }
        }
        Self::new(self.height, self.width, *target, planes, self.mask.clone())
    }
}

/// Per-band weights `E_b · S_{c,b} · Δλ` for every channel.
fn band_weights(illum: &Spectrum, sens: &SensitivitySet) -> Result<Vec<Vec<f64>>> {
    illum.grid.ensure_matches(&sens.grid, "illuminant vs sensitivities")?;
    let dl = illum.grid.step();
    Ok(sens
        .channels
        .iter()
        .map(|s| s.iter().zip(illum.values.iter()).map(|(s, e)| e * s * dl).collect())
        .collect())
}

/// Render a reflectance cube under an illuminant through a set of spectral
/// sensitivities. The output carries `tag` as its color space and the cube's mask.
pub fn render_image(
    cube: &ReflectanceCube,
    illum: &Spectrum,
    sens: &SensitivitySet,
    tag: ColorSpace,
) -> Result<PlanarImage> {
    cube.grid.ensure_matches(&illum.grid, "cube vs illuminant")?;
    let weights = band_weights(illum, sens)?;
    let n = cube.height * cube.width;
    let channels = weights
        .iter()
        .map(|w| {
            let mut out = vec![0.0; n];
            for (plane, &wb) in cube.planes.iter().zip(w) {
                if wb == 0.0 {
                    continue;
                }
                for (o, r) in out.iter_mut().zip(plane) {
                    *o += r * wb;
                }
            }
            out
        })
        .collect();
    PlanarImage::new(cube.height, cube.width, tag, channels, cube.mask.clone())
}

/// Camera response to a perfect white reflector: `Σ_b E_b · S_{c,b} · Δλ`.
pub fn flat_field_color(illum: &Spectrum, sens: &SensitivitySet) -> Result<Vec<f64>> {
    Ok(band_weights(illum, sens)?.iter().map(|w| w.iter().sum()).collect())
}
