//! Built-in spectral data: CIE 1931 2° color-matching functions, the CIE D65
//! SPD, 24-patch color-rendition chart reflectances, Planckian and synthetic
//! fluorescent illuminants, and synthetic Gaussian camera sensitivities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SensitivitySet, Spectrum, Tabulated, WavelengthGrid};

pub const CIE1931_CMF_CSV: &str = include_str!("../data/cie1931_2deg_cmf.csv");
pub const CIE_D65_CSV: &str = include_str!("../data/cie_d65.csv");
pub const COLORCHECKER24_CSV: &str = include_str!("../data/colorchecker24.csv");

fn parse_builtin(text: &str) -> Tabulated {
    Tabulated::read_csv(text.as_bytes()).expect("built-in CSV asset is well formed")
}

/// CIE 1931 2° observer (x̄, ȳ, z̄) on `grid`.
pub fn cie1931_cmf(grid: &WavelengthGrid) -> Result<SensitivitySet> {
    parse_builtin(CIE1931_CMF_CSV).to_sensitivities(grid)
}

/// CIE D65 relative SPD on `grid` (100 at 560 nm, as tabulated).
pub fn cie_d65(grid: &WavelengthGrid) -> Result<Spectrum> {
    parse_builtin(CIE_D65_CSV).to_spectrum(0, grid)
}

/// Reflectances of the 24 chart patches on `grid`, in chart order
/// (dark skin ... black). The last six are the neutral row.
pub fn colorchecker24(grid: &WavelengthGrid) -> Result<Vec<(String, Vec<f64>)>> {
    let tab = parse_builtin(COLORCHECKER24_CSV);
    (0..tab.columns.len())
        .map(|c| Ok((tab.names[c].clone(), tab.resample_column(c, grid)?)))
        .collect()
}

/// Blackbody spectral radiance at temperature `kelvin`, relative to its value at 560 nm.
pub fn planck(grid: &WavelengthGrid, kelvin: f64) -> Result<Spectrum> {
    if !(kelvin > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {kelvin}"
        )));
    }
    // second radiation constant, m·K
    const C2: f64 = 1.438_776_877e-2;
    let radiance = |nm: f64| {
        let l = nm * 1e-9;
        1.0 / (l.powi(5) * ((C2 / (l * kelvin)).exp() - 1.0))
    };
    let r560 = radiance(560.0);
    Spectrum::from_fn(*grid, |nm| radiance(nm) / r560)
}

fn gaussian(nm: f64, center: f64, fwhm: f64) -> f64 {
    let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    (-0.5 * ((nm - center) / sigma).powi(2)).exp()
}

/// Sensitivity set of Gaussian channels given as `(center_nm, fwhm_nm)`.
pub fn gaussian_sensitivities(grid: &WavelengthGrid, bands: &[(f64, f64)], prefix: &str) -> Result<SensitivitySet> {
    let channels = bands
        .iter()
        .map(|&(c, w)| grid.wavelengths().map(|nm| gaussian(nm, c, w)).collect())
        .collect();
    let names = (0..bands.len()).map(|i| format!("{prefix}{i}")).collect();
    SensitivitySet::new(*grid, channels, names)
}

/// Broadband synthetic RGB camera: red 605/90, green 540/90, blue 460/80 (center/FWHM, nm).
pub fn synthetic_rgb_camera(grid: &WavelengthGrid) -> Result<SensitivitySet> {
    gaussian_sensitivities(grid, &[(605.0, 90.0), (540.0, 90.0), (460.0, 80.0)], "ch")
}

/// Multispectral sensor: `n` Gaussian narrowband channels with centers equally
/// spaced over 410–690 nm and 25 nm FWHM.
pub fn synthetic_ms_sensor(grid: &WavelengthGrid, n: usize) -> Result<SensitivitySet> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "multispectral sensor needs at least two channels".into(),
        ));
    }
    let bands: Vec<_> = (0..n)
        .map(|i| (410.0 + 280.0 * i as f64 / (n - 1) as f64, 25.0))
        .collect();
    gaussian_sensitivities(grid, &bands, "ch")
}

/// Synthetic fluorescent lamp: low continuum plus narrow emission lines
/// given as `(center_nm, relative_power)`.
pub fn spiky_fluorescent(grid: &WavelengthGrid, lines: &[(f64, f64)]) -> Result<Spectrum> {
    Spectrum::from_fn(*grid, |nm| {
        0.3 + lines.iter().map(|&(c, a)| a * gaussian(nm, c, 12.0)).sum::<f64>()
    })
}

/// How a named bank illuminant is synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IlluminantSource {
    Blackbody { kelvin: f64 },
    D65,
    Fluorescent { lines: Vec<(f64, f64)> },
}

impl IlluminantSource {
    pub fn spectrum(&self, grid: &WavelengthGrid) -> Result<Spectrum> {
        match self {
            IlluminantSource::Blackbody { kelvin } => planck(grid, *kelvin),
            IlluminantSource::D65 => cie_d65(grid),
            IlluminantSource::Fluorescent { lines } => spiky_fluorescent(grid, lines),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedIlluminant {
    pub name: String,
    pub source: IlluminantSource,
}

/// The default illuminant bank: blackbodies from 2500 K to 7500 K in 500 K
/// steps, CIE D65, and two synthetic fluorescents (14 entries).
pub fn default_illuminant_bank() -> Vec<NamedIlluminant> {
    let mut bank: Vec<NamedIlluminant> = (0..11)
        .map(|i| {
            let k = 2500.0 + 500.0 * i as f64;
            NamedIlluminant {
                name: format!("bb{k:.0}"),
                source: IlluminantSource::Blackbody { kelvin: k },
            }
        })
        .collect();
    bank.push(NamedIlluminant {
        name: "d65".into(),
        source: IlluminantSource::D65,
    });
    bank.push(NamedIlluminant {
        name: "fl-tri".into(),
        source: IlluminantSource::Fluorescent {
            lines: vec![(440.0, 1.0), (545.0, 2.5), (610.0, 1.5)],
        },
    });
    bank.push(NamedIlluminant {
        name: "fl-cool".into(),
        source: IlluminantSource::Fluorescent {
            lines: vec![(405.0, 0.6), (436.0, 1.8), (546.0, 2.0), (578.0, 0.8)],
        },
    });
    bank
}

/// Look up bank entries by name, in the order requested.
pub fn select_illuminants(names: &[String]) -> Result<Vec<NamedIlluminant>> {
    let bank = default_illuminant_bank();
    names
        .iter()
        .map(|n| {
            bank.iter()
                .find(|b| &b.name == n)
                .cloned()
                .ok_or_else(|| Error::Config(format!("unknown illuminant {n:?}")))
        })
        .collect()
}
