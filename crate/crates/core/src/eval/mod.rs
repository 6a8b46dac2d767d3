//! Error statistics, evaluation reports and the experiment drivers.

mod methods;
mod stats;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use methods::{
    Corrector, GroundTruthCorrector, KanCorrector, MethodContext, MethodRegistry, MethodSpec, OracleCorrector,
    TraditionalCorrector,
};
pub use stats::{aggregate_stats, quantile_sorted, quartile_count, ErrorStats};

use crate::colorimetry::{image_metric_mean, Metric, Summation};
use crate::dataset::{Dataset, Split, Triplet};
use crate::error::{Error, Result};
use crate::image::scale_exposure;
use crate::kan::{self, KanParams, ParamGroup, TrainConfig, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub id: String,
    pub de00: f64,
    pub reproduction: f64,
}

/// Statistical conventions stamped into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub quantiles: String,
    pub quartile_means: String,
    pub per_image: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            quantiles: "linear interpolation between closest ranks, r = 1 + (n-1)q".into(),
            quartile_means: "mean of the ceil(n/4) lowest / highest values".into(),
            per_image: "mean over valid pixels, statistics over images".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub camera: String,
    pub split: Split,
    pub images: Vec<ImageResult>,
    pub de00: ErrorStats,
    pub reproduction: ErrorStats,
    pub fingerprint: String,
    pub conventions: Conventions,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text table with one row per metric.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "method: {}  camera: {}  images: {}\n",
            self.method, self.camera, self.de00.n
        );
        out.push_str(&table_header());
        out.push_str(&table_row("dE00", &self.de00));
        out.push_str(&table_row("Repr. (deg)", &self.reproduction));
        out
    }
}

pub fn table_header() -> String {
    let cols = ["Mean", "Med.", "Tri.", "B-25", "W-25", "95-P", "99-P", "Max"];
    let mut s = format!("{:<14}", "");
    for c in cols {
        let _ = write!(s, "{c:>8}");
    }
    s.push('\n');
    s
}

pub fn table_row(label: &str, st: &ErrorStats) -> String {
    let mut s = format!("{label:<14}");
    for v in [
        st.mean,
        st.median,
        st.trimean,
        st.best25_mean,
        st.worst25_mean,
        st.p95,
        st.p99,
        st.max,
    ] {
        let _ = write!(s, "{v:>8.3}");
    }
    s.push('\n');
    s
}

fn per_image(ds: &Dataset, t: &Triplet, corrector: &dyn Corrector) -> Result<ImageResult> {
    let pred = corrector.correct(t)?;
    let de00 = image_metric_mean(&pred, &t.gt, Metric::De00, &ds.white, Summation::Kahan)?.mean;
    let reproduction = image_metric_mean(&pred, &t.gt, Metric::Reproduction, &ds.white, Summation::Kahan)?.mean;
    Ok(ImageResult {
        id: t.meta.id(),
        de00,
        reproduction,
    })
}

fn fingerprint(ds: &Dataset, triplets: &[&Triplet], corrector: &dyn Corrector, split: Split) -> String {
    let mut h = Sha256::new();
    h.update(corrector.fingerprint().as_bytes());
    h.update(ds.camera.name.as_bytes());
    h.update(format!("{split:?}").as_bytes());
    for v in ds.white.as_array() {
        h.update(v.to_le_bytes());
    }
    for t in triplets {
        h.update(t.meta.id().as_bytes());
        for v in t.meta.homography {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Evaluate one method on a split: per-image mean ΔE00 and reproduction
/// error, then statistics over images.
pub fn evaluate_method(ds: &Dataset, split: Split, corrector: &dyn Corrector) -> Result<EvaluationReport> {
    let triplets = ds.split(split);
    if triplets.is_empty() {
        return Err(Error::InvalidArgument(format!("split {split:?} is empty")));
    }
    let images = triplets
        .par_iter()
        .map(|t| per_image(ds, t, corrector))
        .collect::<Result<Vec<_>>>()?;
    let de: Vec<f64> = images.iter().map(|r| r.de00).collect();
    let rep: Vec<f64> = images.iter().map(|r| r.reproduction).collect();
    Ok(EvaluationReport {
        method: corrector.name(),
        camera: ds.camera.name.clone(),
        split,
        de00: aggregate_stats(&de)?,
        reproduction: aggregate_stats(&rep)?,
        fingerprint: fingerprint(ds, &triplets, corrector, split),
        images,
        conventions: Conventions::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub exposure_alphas: Vec<f64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            exposure_alphas: vec![1.0, 0.75, 0.5],
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exposure_alphas.is_empty() || self.exposure_alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config(
                "exposure alphas must be a non-empty list of positive values".into(),
            ));
        }
        Ok(())
    }
}

/// Every image of the dataset (RGB, MS and ground truth) scaled by `alpha`.
pub fn scale_dataset(ds: &Dataset, alpha: f64) -> Result<Dataset> {
    let triplets = ds
        .triplets
        .par_iter()
        .map(|t| {
            Ok(Triplet {
                meta: t.meta.clone(),
                rgb: scale_exposure(&t.rgb, alpha)?,
                ms: scale_exposure(&t.ms, alpha)?,
                gt: scale_exposure(&t.gt, alpha)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { triplets, ..ds.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureRow {
    pub method: String,
    /// Mean reproduction error per alpha, in the order of `alphas`.
    pub reproduction: Vec<f64>,
    pub de00: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureTable {
    pub split: Split,
    pub alphas: Vec<f64>,
    pub rows: Vec<ExposureRow>,
}

impl ExposureTable {
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<24}", "mean repr. error (deg)");
        for a in &self.alphas {
            let _ = write!(s, "{:>12}", format!("a={a}"));
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{:<24}", r.method);
            for v in &r.reproduction {
                let _ = write!(s, "{v:>12.4}");
            }
            s.push('\n');
        }
        s
    }
}

/// Mean reproduction error (and ΔE00) of every method at every exposure.
pub fn run_exposure_ablation(
    ds: &Dataset,
    split: Split,
    methods: &[&dyn Corrector],
    config: &AblationConfig,
) -> Result<ExposureTable> {
    config.validate()?;
    let mut rows: Vec<ExposureRow> = methods
        .iter()
        .map(|m| ExposureRow {
            method: m.name(),
            reproduction: Vec::new(),
            de00: Vec::new(),
        })
        .collect();
    for &alpha in &config.exposure_alphas {
        let scaled = scale_dataset(ds, alpha)?;
        for (row, m) in rows.iter_mut().zip(methods) {
            let rep = evaluate_method(&scaled, split, *m)?;
            row.reproduction.push(rep.reproduction.mean);
            row.de00.push(rep.de00.mean);
        }
    }
    Ok(ExposureTable {
        split,
        alphas: config.exposure_alphas.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentReport {
    /// Aligned-trained model on the aligned test split.
    pub aligned: EvaluationReport,
    /// Aligned-trained model on the misaligned test split.
    pub unadapted: EvaluationReport,
    /// Encoder-only fine-tuned model on the misaligned test split.
    pub adapted: EvaluationReport,
    /// `adapted.mean − unadapted.mean` for ΔE00.
    pub delta_mean_de00: f64,
    pub finetune_log: TrainingLog,
}

/// The fine-tuning recipe: everything except the spectral encoder frozen.
pub fn encoder_only(config: &TrainConfig) -> TrainConfig {
    TrainConfig {
        freeze: vec![ParamGroup::Splines, ParamGroup::Bypass, ParamGroup::Bias],
        ..config.clone()
    }
}

fn same_scenes(a: &Dataset, b: &Dataset) -> Result<()> {
    let ids = |d: &Dataset| d.triplets.iter().map(|t| t.meta.id()).collect::<Vec<_>>();
    if ids(a) != ids(b) || a.splits != b.splits {
        return Err(Error::InvalidArgument(
            "aligned and misaligned datasets must hold the same triplets and splits".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MisalignmentOutcome {
    pub report: MisalignmentReport,
    pub finetuned: KanParams,
}

/// Evaluate an aligned-trained checkpoint on misaligned data before and
/// after fine-tuning only its spectral encoder on the misaligned train split.
pub fn run_misalignment_experiment(
    aligned: &Dataset,
    misaligned: &Dataset,
    params: &KanParams,
    finetune: &TrainConfig,
) -> Result<MisalignmentOutcome> {
    same_scenes(aligned, misaligned)?;
    let base = KanCorrector {
        label: "kan".into(),
        params: params.clone(),
    };
    let aligned_rep = evaluate_method(aligned, Split::Test, &base)?;
    let unadapted = evaluate_method(misaligned, Split::Test, &base)?;
    let outcome = kan::train(misaligned, &encoder_only(finetune), Some(params.clone()))?;
    let tuned = KanCorrector {
        label: "kan-finetuned".into(),
        params: outcome.params,
    };
    let adapted = evaluate_method(misaligned, Split::Test, &tuned)?;
    Ok(MisalignmentOutcome {
        report: MisalignmentReport {
            delta_mean_de00: adapted.de00.mean - unadapted.de00.mean,
            aligned: aligned_rep,
            unadapted,
            adapted,
            finetune_log: outcome.log,
        },
        finetuned: tuned.params,
    })
}
