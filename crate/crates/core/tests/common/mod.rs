//! Independent reference implementations and random-instance generators
//! shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use msfuse::colorimetry::{Lab, WhitePoint};
use msfuse::kan::{KanDims, KanParams, ParamGroup};
use msfuse::spectral::{ReflectanceCube, SensitivitySet, Spectrum, WavelengthGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut ChaCha8Rng) -> WavelengthGrid {
    let step = [5.0, 10.0, 20.0][rng.gen_range(0..3)];
    let count = rng.gen_range(4..40);
    WavelengthGrid::from_count(380.0 + 10.0 * rng.gen_range(0..5) as f64, step, count).unwrap()
}

pub fn random_cube(rng: &mut ChaCha8Rng, grid: &WavelengthGrid) -> ReflectanceCube {
    let (h, w) = (rng.gen_range(1..7), rng.gen_range(1..7));
    let planes = (0..grid.count())
        .map(|_| (0..h * w).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mask = (0..h * w).map(|_| rng.gen_bool(0.9)).collect();
    ReflectanceCube::new(h, w, grid.clone(), planes, mask).unwrap()
}

pub fn random_spectrum(rng: &mut ChaCha8Rng, grid: &WavelengthGrid) -> Spectrum {
    Spectrum::new(
        grid.clone(),
        (0..grid.count()).map(|_| rng.gen_range(0.01..2.0)).collect(),
    )
    .unwrap()
}

pub fn random_sensitivities(rng: &mut ChaCha8Rng, grid: &WavelengthGrid, channels: usize) -> SensitivitySet {
    let ch = (0..channels)
        .map(|_| (0..grid.count()).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let names = (0..channels).map(|c| format!("c{c}")).collect();
    SensitivitySet::new(grid.clone(), ch, names).unwrap()
}

/// `I_c(y, x) = Σ_b R(y, x, b) · E_b · S_{c,b} · Δλ`, one pixel and channel at a time.
pub fn render_triple_loop(cube: &ReflectanceCube, illum: &Spectrum, sens: &SensitivitySet) -> Vec<Vec<f64>> {
    let dl = cube.grid().step();
    let n = cube.height() * cube.width();
    let mut out = vec![vec![0.0; n]; sens.n_channels()];
    for (c, plane) in out.iter_mut().enumerate() {
        for (p, v) in plane.iter_mut().enumerate() {
            let mut acc = 0.0;
            for b in 0..cube.grid().count() {
                acc += cube.band(b)[p] * illum.values()[b] * sens.channel(c)[b] * dl;
            }
            *v = acc;
        }
    }
    out
}

/// Published CIEDE2000 verification pairs: `(L1, a1, b1, L2, a2, b2, ΔE00)`.
pub const CIEDE2000_PAIRS: [[f64; 7]; 34] = [
    [50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425],
    [50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615],
    [50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412],
    [50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669],
    [50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461],
    [50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065],
    [50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492],
    [50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977],
    [50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030],
    [50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000],
    [60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644],
    [63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630],
    [61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731],
    [35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645],
    [22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373],
    [36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146],
    [90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441],
    [90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381],
    [6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377],
    [2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082],
];

/// CIEDE2000 written out step by step in radians, with kL = kC = kH = 1.
pub fn ciede2000_reference(l1: f64, a1: f64, b1: f64, l2: f64, a2: f64, b2: f64) -> f64 {
    let cab = (a1 * a1 + b1 * b1).sqrt() / 2.0 + (a2 * a2 + b2 * b2).sqrt() / 2.0;
    let g = 0.5 * (1.0 - (cab.powf(7.0) / (cab.powf(7.0) + 25f64.powf(7.0))).sqrt());
    let ap1 = a1 * (1.0 + g);
    let ap2 = a2 * (1.0 + g);
    let cp1 = (ap1 * ap1 + b1 * b1).sqrt();
    let cp2 = (ap2 * ap2 + b2 * b2).sqrt();
    let angle = |b: f64, a: f64| {
        if b == 0.0 && a == 0.0 {
            0.0
        } else {
            b.atan2(a).rem_euclid(2.0 * PI)
        }
    };
    let hp1 = angle(b1, ap1);
    let hp2 = angle(b2, ap2);

    let delta_l = l2 - l1;
    let delta_c = cp2 - cp1;
    let mut delta_h = 0.0;
    if cp1 * cp2 != 0.0 {
        delta_h = hp2 - hp1;
        if delta_h > PI {
            delta_h -= 2.0 * PI;
        } else if delta_h < -PI {
            delta_h += 2.0 * PI;
        }
    }
    let delta_big_h = 2.0 * (cp1 * cp2).sqrt() * (delta_h / 2.0).sin();

    let lbar = (l1 + l2) / 2.0;
    let cbar = (cp1 + cp2) / 2.0;
    let hbar = if cp1 * cp2 == 0.0 {
        hp1 + hp2
    } else if (hp1 - hp2).abs() <= PI {
        (hp1 + hp2) / 2.0
    } else if hp1 + hp2 < 2.0 * PI {
        (hp1 + hp2 + 2.0 * PI) / 2.0
    } else {
        (hp1 + hp2 - 2.0 * PI) / 2.0
    };
    let deg = PI / 180.0;
    let t = 1.0 - 0.17 * (hbar - 30.0 * deg).cos() + 0.24 * (2.0 * hbar).cos() + 0.32 * (3.0 * hbar + 6.0 * deg).cos()
        - 0.20 * (4.0 * hbar - 63.0 * deg).cos();
    let dtheta = 30.0 * deg * (-((hbar / deg - 275.0) / 25.0).powf(2.0)).exp();
    let rc = 2.0 * (cbar.powf(7.0) / (cbar.powf(7.0) + 25f64.powf(7.0))).sqrt();
    let sl = 1.0 + (0.015 * (lbar - 50.0).powf(2.0)) / (20.0 + (lbar - 50.0).powf(2.0)).sqrt();
    let sc = 1.0 + 0.045 * cbar;
    let sh = 1.0 + 0.015 * cbar * t;
    let rt = -(2.0 * dtheta).sin() * rc;
    let x = delta_l / sl;
    let y = delta_c / sc;
    let z = delta_big_h / sh;
    (x * x + y * y + z * z + rt * y * z).sqrt()
}

pub fn random_lab(rng: &mut ChaCha8Rng) -> Lab {
    Lab::new(
        rng.gen_range(0.0..100.0),
        rng.gen_range(-100.0..100.0),
        rng.gen_range(-100.0..100.0),
    )
}

/// Random parameters that exercise every spline segment and the encoder.
pub fn random_params(rng: &mut ChaCha8Rng, dims: KanDims) -> KanParams {
    let mut p = KanParams::identity_init(dims, rng.gen()).unwrap();
    for v in p.values_mut() {
        *v += rng.gen_range(-0.3..0.3);
    }
    for v in p.group_mut(ParamGroup::MsEncoder) {
        *v = rng.gen_range(0.0..0.5);
    }
    p
}

/// Feature vector in the open unit interval, away from knots and the ends.
pub fn random_features(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| loop {
            let x: f64 = rng.gen_range(0.01..0.99);
            if ((x * 5.0) - (x * 5.0).round()).abs() > 1e-3 {
                break x;
            }
        })
        .collect()
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Random XYZ well inside the positive octant relative to the white point.
pub fn random_xyz(rng: &mut ChaCha8Rng, white: &WhitePoint) -> [f64; 3] {
    let w = white.as_array();
    [0, 1, 2].map(|c| w[c] * rng.gen_range(0.02..0.95))
}

/// Quantile by the closest-ranks rule written directly on 1-based ranks.
pub fn rank_quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = 1.0 + (sorted.len() as f64 - 1.0) * q;
    let below = rank.floor();
    let above = rank.ceil();
    let lo = sorted[below as usize - 1];
    let hi = sorted[above as usize - 1];
    lo + (rank - below) * (hi - lo)
}

/// A few small scenes for tests that need rendered triplets.
pub fn small_config() -> msfuse::dataset::DatasetConfig {
    msfuse::dataset::DatasetConfig {
        scenes: 10,
        height: 32,
        width: 32,
        white_reference: Some(4),
        illuminants: ["bb3000", "d65", "fl-tri"].map(String::from).to_vec(),
        ms_factor: 4,
        ..Default::default()
    }
}
