//! Synthetic scenes, rendered (RGB, MS, ground truth) triplets, splits,
//! simulated misregistration, and on-disk dataset layout.

mod formats;
mod homography;
mod scene;
mod split;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use formats::{
    decode_cube, decode_image, encode_cube, encode_image, export_png16, load_cube, load_image, save_cube, save_image,
    CUBE_MAGIC, IMAGE_MAGIC,
};
pub use homography::{apply_homography, sample_homography, warp_ms, HomographyParams};
pub use scene::{add_white_reference, ingest_scene, synth_scene, SceneRecord, SceneSource};
pub use split::{make_splits, Split, SplitManifest};

use crate::colorimetry::WhitePoint;
use crate::data;
use crate::error::{Error, Result};
use crate::image::{downsample_area, ColorSpace, PlanarImage};
use crate::pipeline::mat3::{self, Mat3};
use crate::pipeline::{build_camera_profile, CameraProfile, ProfileOptions};
use crate::spectral::{flat_field_color, render_image, ReflectanceCube, SensitivitySet, Spectrum, WavelengthGrid};

pub const CAMERA_NAME: &str = "synthetic-rgb";
pub const MANIFEST_FORMAT: &str = "msfuse-dataset-1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min: 400.0,
            max: 700.0,
            step: 10.0,
        }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<WavelengthGrid> {
        WavelengthGrid::new(self.min, self.max, self.step)
    }
}

/// Everything needed to synthesize and render a dataset. The defaults define
/// the built-in benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub scenes: usize,
    pub height: usize,
    pub width: usize,
    pub blobs: usize,
    /// Side of a masked white target painted into each scene, if any.
    pub white_reference: Option<usize>,
    pub illuminants: Vec<String>,
    pub ms_channels: usize,
    pub ms_factor: usize,
    pub grid: GridSpec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            scenes: 24,
            height: 128,
            width: 128,
            blobs: 5,
            white_reference: Some(8),
            illuminants: [
                "bb2500", "bb3000", "bb3500", "bb4500", "bb5500", "bb7500", "d65", "fl-tri",
            ]
            .map(String::from)
            .to_vec(),
            ms_channels: 15,
            ms_factor: 8,
            grid: GridSpec::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.illuminants.is_empty() {
            return Err(Error::Config(
                "dataset needs at least one scene and one illuminant".into(),
            ));
        }
        if self.ms_factor == 0 || self.height % self.ms_factor != 0 || self.width % self.ms_factor != 0 {
            return Err(Error::Config(format!(
                "image size {}x{} must be divisible by ms_factor {}",
                self.height, self.width, self.ms_factor
            )));
        }
        if self.ms_channels < 3 {
            return Err(Error::Config("ms_channels must be at least 3".into()));
        }
        data::select_illuminants(&self.illuminants)?;
        self.grid.grid()?;
        Ok(())
    }

    pub fn scene_ids(&self) -> Vec<String> {
        (0..self.scenes).map(|i| format!("scene{i:04}")).collect()
    }

    /// Per-scene generator seed.
    pub fn scene_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
    }

    pub fn synthesize_scenes(&self) -> Result<Vec<SceneRecord>> {
        self.validate()?;
        let grid = self.grid.grid()?;
        self.scene_ids()
            .into_par_iter()
            .enumerate()
            .map(|(i, id)| {
                let mut cube = synth_scene(self.scene_seed(i), self.height, self.width, &grid, self.blobs)?;
                let mut note = String::from("all pixels valid");
                if let Some(size) = self.white_reference {
                    cube = add_white_reference(&cube, size)?;
                    note = format!("{size}x{size} white reference at top-left masked out");
                }
                Ok(SceneRecord {
                    scene_id: id,
                    cube,
                    source: SceneSource::Synthetic,
                    mask_note: note,
                })
            })
            .collect()
    }
}

/// Sensors and reference spectra shared by every triplet of a dataset.
#[derive(Debug, Clone)]
pub struct RenderSetup {
    pub grid: WavelengthGrid,
    pub camera_name: String,
    pub camera: SensitivitySet,
    pub ms_sensor: SensitivitySet,
    pub cmf: SensitivitySet,
    /// D65 scaled to unit luminance; the ground-truth illuminant.
    pub d65: Spectrum,
    pub ms_factor: usize,
}

impl RenderSetup {
    pub fn synthetic(grid: &WavelengthGrid, ms_channels: usize, ms_factor: usize) -> Result<Self> {
        let cmf = data::cie1931_cmf(grid)?;
        let d65 = data::cie_d65(grid)?.normalized_luminance(&cmf)?;
        Ok(Self {
            grid: *grid,
            camera_name: CAMERA_NAME.into(),
            camera: data::synthetic_rgb_camera(grid)?,
            ms_sensor: data::synthetic_ms_sensor(grid, ms_channels)?,
            cmf,
            d65,
            ms_factor,
        })
    }

    /// XYZ of a perfect white under the ground-truth illuminant (Y = 1).
    pub fn white_point(&self) -> Result<WhitePoint> {
        let w = flat_field_color(&self.d65, &self.cmf)?;
        WhitePoint::from_xyz([w[0], w[1], w[2]])
    }

    pub fn camera_profile(&self) -> Result<CameraProfile> {
        build_camera_profile(
            &self.camera_name,
            &self.camera,
            &self.cmf,
            &data::cie_d65(&self.grid)?,
            &ProfileOptions::default(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletMeta {
    pub scene_id: String,
    pub illuminant: String,
    pub camera: String,
    /// Camera response to a perfect white under the capture illuminant.
    pub gt_illuminant_rgb: [f64; 3],
    /// Row-major homography applied to the MS image (identity when aligned).
    pub homography: [f64; 9],
}

impl TripletMeta {
    pub fn id(&self) -> String {
        format!("{}__{}", self.scene_id, self.illuminant)
    }

    pub fn homography_matrix(&self) -> Mat3 {
        mat3::from_row_major(&self.homography).expect("nine entries")
    }
}

/// Co-registered camera RGB, low-resolution MS and ground-truth XYZ under D65.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub meta: TripletMeta,
    pub rgb: PlanarImage,
    pub ms: PlanarImage,
    pub gt: PlanarImage,
}

/// Render one triplet. `illum` should already be luminance normalized.
pub fn generate_triplet(
    setup: &RenderSetup,
    scene_id: &str,
    cube: &ReflectanceCube,
    illum_name: &str,
    illum: &Spectrum,
) -> Result<Triplet> {
    let rgb = render_image(cube, illum, &setup.camera, ColorSpace::CameraRaw)?;
    let ms_full = render_image(cube, illum, &setup.ms_sensor, ColorSpace::MsRaw)?;
    let ms = downsample_area(&ms_full, setup.ms_factor)?;
    let gt = render_image(cube, &setup.d65, &setup.cmf, ColorSpace::Xyz)?;
    let ff = flat_field_color(illum, &setup.camera)?;
    Ok(Triplet {
        meta: TripletMeta {
            scene_id: scene_id.to_owned(),
            illuminant: illum_name.to_owned(),
            camera: setup.camera_name.clone(),
            gt_illuminant_rgb: [ff[0], ff[1], ff[2]],
            homography: mat3::to_row_major(&mat3::IDENTITY).try_into().unwrap(),
        },
        rgb,
        ms,
        gt,
    })
}

/// An in-memory dataset: triplets in scene-major order, scene-level splits,
/// the evaluation white point and the calibrated camera profile.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub triplets: Vec<Triplet>,
    pub splits: SplitManifest,
    pub white: WhitePoint,
    pub camera: CameraProfile,
    pub ms_factor: usize,
    pub grid: WavelengthGrid,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&Triplet> {
        let ids = self.splits.scenes(split);
        self.triplets
            .iter()
            .filter(|t| ids.iter().any(|id| *id == t.meta.scene_id))
            .collect()
    }

    pub fn illuminants(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.triplets {
            if !out.contains(&t.meta.illuminant) {
                out.push(t.meta.illuminant.clone());
            }
        }
        out
    }
}

/// Render every scene under every configured illuminant.
pub fn render_dataset(scenes: &[SceneRecord], config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let grid = config.grid.grid()?;
    let setup = RenderSetup::synthetic(&grid, config.ms_channels, config.ms_factor)?;
    let illums: Vec<(String, Spectrum)> = data::select_illuminants(&config.illuminants)?
        .into_iter()
        .map(|b| Ok((b.name, b.source.spectrum(&grid)?.normalized_luminance(&setup.cmf)?)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(&SceneRecord, &(String, Spectrum))> =
        scenes.iter().flat_map(|s| illums.iter().map(move |i| (s, i))).collect();
    let triplets = jobs
        .into_par_iter()
        .map(|(s, (name, spec))| {
            let cube = s.cube.resample(&grid)?;
            generate_triplet(&setup, &s.scene_id, &cube, name, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = scenes.iter().map(|s| s.scene_id.clone()).collect();
    Ok(Dataset {
        triplets,
        splits: make_splits(&ids, config.seed)?,
        white: setup.white_point()?,
        camera: setup.camera_profile()?,
        ms_factor: config.ms_factor,
        grid,
    })
}

/// Synthesize scenes and render them.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    render_dataset(&config.synthesize_scenes()?, config)
}

/// Warp every MS image by its own homography drawn from `params`, indexed by
/// the triplet's position in the dataset.
pub fn misalign_dataset(ds: &Dataset, params: &HomographyParams) -> Result<Dataset> {
    let triplets = ds
        .triplets
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let h = sample_homography(params, i as u64, t.ms.width(), t.ms.height())?;
            let mut out = t.clone();
            out.ms = warp_ms(&t.ms, &h)?;
            out.meta.homography = mat3::to_row_major(&h).try_into().unwrap();
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { triplets, ..ds.clone() })
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    scene_id: String,
    illuminant: String,
    dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    format: String,
    grid: GridSpec,
    white_point: [f64; 3],
    ms_factor: usize,
    camera_profile: PathBuf,
    triplets: Vec<ManifestEntry>,
    splits: SplitManifest,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Write a dataset under `dir`: `manifest.json`, `camera.json` and one
/// directory per triplet holding `rgb.mci`, `ms.mci`, `gt.mci`, `meta.json`.
/// Returns the manifest path.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    ds.camera.save(dir.join("camera.json"))?;
    let entries = ds
        .triplets
        .par_iter()
        .map(|t| {
            let id = t.meta.id();
            let rel = PathBuf::from("triplets").join(&id);
            let tdir = dir.join(&rel);
            std::fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
            save_image(&t.rgb, tdir.join("rgb.mci"))?;
            save_image(&t.ms, tdir.join("ms.mci"))?;
            save_image(&t.gt, tdir.join("gt.mci"))?;
            write_json(&t.meta, &tdir.join("meta.json"))?;
            Ok(ManifestEntry {
                id,
                scene_id: t.meta.scene_id.clone(),
                illuminant: t.meta.illuminant.clone(),
                dir: rel,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        grid: GridSpec {
            min: ds.grid.lambda_min(),
            max: ds.grid.lambda_max(),
            step: ds.grid.step(),
        },
        white_point: ds.white.as_array(),
        ms_factor: ds.ms_factor,
        camera_profile: "camera.json".into(),
        triplets: entries,
        splits: ds.splits.clone(),
    };
    let path = dir.join("manifest.json");
    write_json(&manifest, &path)?;
    Ok(path)
}

/// Load a dataset from its manifest path or the directory holding it.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let manifest_path = if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    };
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let m: DatasetManifest = read_json(&manifest_path)?;
    if m.format != MANIFEST_FORMAT {
        return Err(Error::Format(format!("unsupported manifest format {:?}", m.format)));
    }
    m.splits.validate()?;
    let grid = m.grid.grid()?;
    let camera = CameraProfile::load(dir.join(&m.camera_profile), &grid)?;
    let triplets = m
        .triplets
        .par_iter()
        .map(|e| {
            let tdir = dir.join(&e.dir);
            let meta: TripletMeta = read_json(&tdir.join("meta.json"))?;
            if meta.scene_id != e.scene_id || meta.illuminant != e.illuminant {
                return Err(Error::Format(format!(
                    "sidecar of {} disagrees with the manifest",
                    e.id
                )));
            }
            let t = Triplet {
                meta,
                rgb: load_image(tdir.join("rgb.mci"))?,
                ms: load_image(tdir.join("ms.mci"))?,
                gt: load_image(tdir.join("gt.mci"))?,
            };
            t.rgb.ensure_color_space(ColorSpace::CameraRaw)?;
            t.ms.ensure_color_space(ColorSpace::MsRaw)?;
            t.gt.ensure_color_space(ColorSpace::Xyz)?;
            t.rgb.ensure_same_dims(&t.gt)?;
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        triplets,
        splits: m.splits,
        white: WhitePoint::from_xyz(m.white_point)?,
        camera,
        ms_factor: m.ms_factor,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> DatasetConfig {
        DatasetConfig {
            scenes: 5,
            height: 16,
            width: 16,
            blobs: 3,
            white_reference: Some(2),
            illuminants: vec!["bb3000".into(), "d65".into()],
            ms_factor: 4,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn triplet_shapes_and_tags() {
        let ds = generate_dataset(&tiny_config()).unwrap();
        assert_eq!(ds.triplets.len(), 10);
        let t = &ds.triplets[0];
        assert_eq!((t.rgb.height(), t.ms.height(), t.ms.n_channels()), (16, 4, 15));
        assert_eq!(t.gt.color_space(), ColorSpace::Xyz);
        assert!(!t.rgb.mask()[0] && !t.ms.mask()[0] && t.ms.mask()[1]);
        assert!((ds.white.x - 0.9494).abs() < 1e-3);
        assert_eq!(ds.illuminants(), vec!["bb3000".to_string(), "d65".to_string()]);
        let n: usize = [Split::Train, Split::Val, Split::Test]
            .iter()
            .map(|&s| ds.split(s).len())
            .sum();
        assert_eq!(n, 10);
    }

    #[test]
    fn ground_truth_is_illuminant_independent() {
        let ds = generate_dataset(&tiny_config()).unwrap();
        assert_eq!(ds.triplets[0].gt, ds.triplets[1].gt);
        assert_ne!(ds.triplets[0].rgb, ds.triplets[1].rgb);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_dataset(&tiny_config()).unwrap();
        let b = generate_dataset(&tiny_config()).unwrap();
        assert_eq!(a.triplets, b.triplets);
        assert_eq!(a.splits, b.splits);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset(&tiny_config()).unwrap();
        let manifest = save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_eq!(back.triplets.len(), ds.triplets.len());
        assert_eq!(back.splits, ds.splits);
        assert_eq!(back.white, ds.white);
        for (a, b) in back.triplets.iter().zip(&ds.triplets) {
            assert_eq!(a.meta, b.meta);
            assert_eq!(encode_image(&a.ms).unwrap(), encode_image(&b.ms).unwrap());
        }
        let again = load_dataset(dir.path()).unwrap();
        assert_eq!(again.triplets, back.triplets);
    }

    #[test]
    fn misalignment_records_homography() {
        let ds = generate_dataset(&tiny_config()).unwrap();
        let mis = misalign_dataset(&ds, &HomographyParams::default()).unwrap();
        assert_ne!(mis.triplets[0].meta.homography, ds.triplets[0].meta.homography);
        assert_eq!(mis.triplets[0].rgb, ds.triplets[0].rgb);
        let zero = HomographyParams {
            max_translation: 0.0,
            max_rotation: 0.0,
            scale_jitter: 0.0,
            max_perspective: 0.0,
            seed: 1,
        };
        let same = misalign_dataset(&ds, &zero).unwrap();
        assert_eq!(same.triplets, ds.triplets);
    }

    #[test]
    fn config_validation() {
        let mut c = tiny_config();
        c.ms_factor = 3;
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.illuminants = vec!["nope".into()];
        assert!(c.validate().is_err());
        let parsed: DatasetConfig = serde_json::from_str(r#"{"scenes": 3}"#).unwrap();
        assert_eq!(parsed.scenes, 3);
        assert!(serde_json::from_str::<DatasetConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
