use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use msfuse::colorimetry::xyz_to_srgb_encode;
use msfuse::dataset::{
    self, export_png16, ingest_scene, load_cube, load_dataset, load_image, misalign_dataset, render_dataset, save_cube,
    save_dataset, save_image, DatasetConfig, HomographyParams, SceneRecord, Split, TripletMeta,
};
use msfuse::error::{Error, ErrorKind, Result};
use msfuse::eval::{
    encoder_only, evaluate_method, run_exposure_ablation, run_misalignment_experiment, AblationConfig, Corrector,
    KanCorrector, MethodContext, MethodRegistry, MethodSpec,
};
use msfuse::illum_est::{EstimatorOverrides, EstimatorRegistry, MinkowskiNorm};
use msfuse::image::ColorSpace;
use msfuse::kan::{self, ParamGroup, TrainConfig};
use msfuse::pipeline::{correct_with_estimate, traditional_correct, CameraProfile};
use msfuse::spectral::WavelengthGrid;

#[derive(Parser, Debug)]
#[command(name = "msfuse", version, about = "RGB + multispectral color correction toolkit")]
struct Cli {
    /// Seed overriding the one in the command's config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config for the command (dataset, homography, training or ablation settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run single-threaded unless --threads is given.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic reflectance cubes (HSC1) under <out>/scenes.
    MakeSyntheticScenes {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Render a directory of HSC1 cubes into a dataset under <out>.
    RenderDataset {
        #[arg(long)]
        scenes: PathBuf,
    },
    /// Warp every MS image of a dataset by a random homography; writes a new dataset under <out>.
    MisalignDataset {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Estimate the illuminant color of a camera-raw MCI1 image.
    EstimateIlluminant {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Color-correct one camera-raw image to XYZ.
    Correct(CorrectArgs),
    /// Train the KAN corrector on a dataset manifest.
    TrainKan {
        #[arg(long)]
        manifest: PathBuf,
        /// Initial checkpoint (fine-tuning).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Freeze every parameter group except the spectral encoder.
        #[arg(long)]
        freeze_all_but_spectral: bool,
    },
    /// Evaluate correction methods on a dataset split.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// traditional:<estimator>, oracle, kan:<checkpoint> or gt; repeatable.
        #[arg(long = "method", required = true)]
        methods: Vec<String>,
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        estimator: OverrideArgs,
    },
    /// Mean reproduction error per method under reduced exposure.
    AblateExposure {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "method", required = true)]
        methods: Vec<String>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Aligned-trained checkpoint on misaligned data, before and after encoder-only fine-tuning.
    AblateMisalignment {
        #[arg(long)]
        aligned: PathBuf,
        #[arg(long)]
        misaligned: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Convert an XYZ MCI1 image to a 16-bit sRGB PNG.
    ExportSrgb {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct OverrideArgs {
    /// Minkowski norm: a positive number or "inf".
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    order: Option<u8>,
}

impl OverrideArgs {
    fn overrides(&self) -> Result<EstimatorOverrides> {
        Ok(EstimatorOverrides {
            norm: self.p.as_deref().map(MinkowskiNorm::parse).transpose()?,
            sigma: self.sigma,
            order: self.order,
            ..Default::default()
        })
    }
}

#[derive(Args, Debug, Clone)]
struct EstimatorArgs {
    #[arg(long, default_value = "gw")]
    estimator: String,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Traditional,
    Kan,
    Oracle,
}

#[derive(Args, Debug)]
struct CorrectArgs {
    /// Camera-raw MCI1 image.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "traditional")]
    mode: Mode,
    /// Camera profile JSON (traditional and oracle modes).
    #[arg(long)]
    profile: Option<PathBuf>,
    /// KAN checkpoint (kan mode).
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// MS MCI1 image (kan mode).
    #[arg(long)]
    ms: Option<PathBuf>,
    /// Triplet sidecar JSON holding the true illuminant (oracle mode).
    #[arg(long)]
    meta: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Output MCI1 path (default <out>/corrected.mci).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn write_text(text: &str, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads.or(if cli.deterministic { Some(1) } else { None });
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let config = cli.config.as_deref();
    let out = cli.out.as_path();
    match cli.command {
        Command::MakeSyntheticScenes { count } => {
            let mut cfg: DatasetConfig = read_config(config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(n) = count {
                cfg.scenes = n;
            }
            make_scenes(&cfg, out)
        }
        Command::RenderDataset { scenes } => {
            let mut cfg: DatasetConfig = read_config(config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let records = read_scenes(&scenes, &cfg.grid.grid()?)?;
            cfg.scenes = records.len();
            let ds = render_dataset(&records, &cfg)?;
            let manifest = save_dataset(&ds, out)?;
            log::info!(
                "{} triplets written; manifest {}",
                ds.triplets.len(),
                manifest.display()
            );
            Ok(())
        }
        Command::MisalignDataset { manifest } => {
            let mut params: HomographyParams = read_config(config)?;
            if let Some(s) = cli.seed {
                params.seed = s;
            }
            let ds = load_dataset(&manifest)?;
            let mis = misalign_dataset(&ds, &params)?;
            let path = save_dataset(&mis, out)?;
            log::info!("misaligned dataset written; manifest {}", path.display());
            Ok(())
        }
        Command::EstimateIlluminant { input, estimator } => {
            let img = load_image(&input)?;
            img.ensure_color_space(ColorSpace::CameraRaw)?;
            let est =
                EstimatorRegistry::with_builtins().create(&estimator.estimator, &estimator.overrides.overrides()?)?;
            let e = est.estimate(&img)?;
            let doc = serde_json::json!({ "estimator": est.describe(), "rgb": e.rgb, "raw": e.raw });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(())
        }
        Command::Correct(args) => correct(args, out),
        Command::TrainKan {
            manifest,
            init,
            freeze_all_but_spectral,
        } => {
            let mut cfg: TrainConfig = read_config(config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if freeze_all_but_spectral {
                cfg.freeze = vec![ParamGroup::Splines, ParamGroup::Bypass, ParamGroup::Bias];
            }
            let ds = load_dataset(&manifest)?;
            let init = init
                .map(|p| kan::load_checkpoint(p).map(|(params, _)| params))
                .transpose()?;
            let outcome = kan::train(&ds, &cfg, init)?;
            kan::save_checkpoint(&outcome.params, &cfg.hash(), out.join("kan.ckpt"))?;
            write_json(&outcome.log, &out.join("training_log.json"))?;
            log::info!(
                "best epoch {} (val dE76 {:.4}); checkpoint {}",
                outcome.log.best_epoch,
                outcome.log.best_val_de76,
                out.join("kan.ckpt").display()
            );
            Ok(())
        }
        Command::Evaluate {
            manifest,
            methods,
            split,
            estimator,
        } => {
            let ds = load_dataset(&manifest)?;
            let split = Split::parse(&split)?;
            let correctors = build_methods(&methods, &ds.camera, estimator.overrides()?)?;
            for c in &correctors {
                let report = evaluate_method(&ds, split, c.as_ref())?;
                let stem = sanitize(&c.name());
                write_json(&report, &out.join(format!("report_{stem}.json")))?;
                let table = report.to_table();
                write_text(&table, &out.join(format!("report_{stem}.txt")))?;
                print!("{table}");
            }
            Ok(())
        }
        Command::AblateExposure {
            manifest,
            methods,
            split,
        } => {
            let cfg: AblationConfig = read_config(config)?;
            let ds = load_dataset(&manifest)?;
            let correctors = build_methods(&methods, &ds.camera, EstimatorOverrides::default())?;
            let refs: Vec<&dyn Corrector> = correctors.iter().map(|c| c.as_ref()).collect();
            let table = run_exposure_ablation(&ds, Split::parse(&split)?, &refs, &cfg)?;
            write_json(&table, &out.join("exposure_ablation.json"))?;
            write_text(&table.to_table(), &out.join("exposure_ablation.txt"))?;
            print!("{}", table.to_table());
            Ok(())
        }
        Command::AblateMisalignment {
            aligned,
            misaligned,
            ckpt,
        } => {
            let mut cfg: TrainConfig = read_config(config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let a = load_dataset(&aligned)?;
            let m = load_dataset(&misaligned)?;
            let (params, _) = kan::load_checkpoint(&ckpt)?;
            let outcome = run_misalignment_experiment(&a, &m, &params, &cfg)?;
            let report = &outcome.report;
            write_json(report, &out.join("misalignment_report.json"))?;
            kan::save_checkpoint(
                &outcome.finetuned,
                &encoder_only(&cfg).hash(),
                out.join("kan_finetuned.ckpt"),
            )?;
            let mut text = String::from("aligned model, aligned test\n");
            text.push_str(&report.aligned.to_table());
            text.push_str("\naligned model, misaligned test\n");
            text.push_str(&report.unadapted.to_table());
            text.push_str("\nencoder fine-tuned, misaligned test\n");
            text.push_str(&report.adapted.to_table());
            text.push_str(&format!("\ndelta mean dE00: {:+.4}\n", report.delta_mean_de00));
            write_text(&text, &out.join("misalignment_report.txt"))?;
            print!("{text}");
            Ok(())
        }
        Command::ExportSrgb { input, output } => {
            let img = load_image(&input)?;
            let srgb = xyz_to_srgb_encode(&img)?;
            let path = output.unwrap_or_else(|| {
                let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
                out.join(format!("{stem}.png"))
            });
            export_png16(&srgb, &path)?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn build_methods(
    methods: &[String],
    profile: &CameraProfile,
    overrides: EstimatorOverrides,
) -> Result<Vec<Box<dyn Corrector>>> {
    let registry = MethodRegistry::with_builtins();
    let estimators = EstimatorRegistry::with_builtins();
    let ctx = MethodContext {
        profile,
        estimators: &estimators,
        overrides,
    };
    methods
        .iter()
        .map(|m| registry.create(&MethodSpec::parse(m)?, &ctx))
        .collect()
}

fn make_scenes(cfg: &DatasetConfig, out: &Path) -> Result<()> {
    let scenes = cfg.synthesize_scenes()?;
    let dir = out.join("scenes");
    for s in &scenes {
        save_cube(&s.cube, dir.join(format!("{}.hsc", s.scene_id)))?;
    }
    let index: Vec<serde_json::Value> = scenes
        .iter()
        .map(|s| serde_json::json!({ "scene_id": s.scene_id, "source": s.source, "mask": s.mask_note }))
        .collect();
    write_json(
        &serde_json::json!({ "config": cfg, "scenes": index }),
        &dir.join("scenes.json"),
    )?;
    log::info!("{} scenes written to {}", scenes.len(), dir.display());
    Ok(())
}

fn read_scenes(dir: &Path, grid: &WavelengthGrid) -> Result<Vec<SceneRecord>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hsc"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .hsc cubes in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
            ingest_scene(id, load_cube(p)?, grid)
        })
        .collect()
}

fn correct(args: CorrectArgs, out: &Path) -> Result<()> {
    let rgb = load_image(&args.input)?;
    let grid = WavelengthGrid::visible_10nm();
    let need = |p: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
        p.clone()
            .ok_or_else(|| Error::Config(format!("--{what} is required in this mode")))
    };
    let xyz = match args.mode {
        Mode::Traditional => {
            let profile = CameraProfile::load(need(&args.profile, "profile")?, &grid)?;
            let est = EstimatorRegistry::with_builtins()
                .create(&args.estimator.estimator, &args.estimator.overrides.overrides()?)?;
            let (img, prov) = traditional_correct(&rgb, &profile, est.as_ref())?;
            log::info!("estimate {:?}, CCT {:.0} K", prov.estimate.rgb, prov.cct.kelvin);
            img
        }
        Mode::Oracle => {
            let profile = CameraProfile::load(need(&args.profile, "profile")?, &grid)?;
            let meta_path = need(&args.meta, "meta")?;
            let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            let meta: TripletMeta = serde_json::from_str(&text)?;
            let est = msfuse::illum_est::IlluminantEstimate::from_raw(meta.gt_illuminant_rgb.to_vec())?;
            correct_with_estimate(&rgb, &profile, est)?.0
        }
        Mode::Kan => {
            let (params, _) = kan::load_checkpoint(need(&args.ckpt, "ckpt")?)?;
            let ms = load_image(need(&args.ms, "ms")?)?;
            KanCorrector {
                label: "kan".into(),
                params,
            }
            .correct(&dataset::Triplet {
                meta: TripletMeta {
                    scene_id: String::new(),
                    illuminant: String::new(),
                    camera: String::new(),
                    gt_illuminant_rgb: [0.0; 3],
                    homography: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                },
                gt: rgb.clone(),
                rgb,
                ms,
            })?
        }
    };
    let path = args.output.unwrap_or_else(|| out.join("corrected.mci"));
    save_image(&xyz, &path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}
