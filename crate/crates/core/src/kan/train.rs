use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{
    backward_with_bases, encoder_backward, feature_bases, fill_features, forward_with_bases, loss_de76, KanDims,
    KanParams, ParamGroup,
};
use super::optim::{adam_step, cosine_lr, OptimizerState};
use crate::colorimetry::WhitePoint;
use crate::dataset::{Dataset, Split, Triplet};
use crate::error::{Error, Result};
use crate::image::PlanarImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralPath {
    Enabled,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Pixels per optimizer step.
    pub batch: usize,
    pub seed: u64,
    /// Parameter groups left untouched by the optimizer.
    pub freeze: Vec<ParamGroup>,
    pub k_features: usize,
    /// `disabled` trains an RGB-only model (no spectral features).
    pub spectral_path: SpectralPath,
    /// Pixels drawn (with replacement) from each training image per epoch.
    pub pixels_per_triplet: usize,
    /// Fixed, evenly strided validation pixels per image.
    pub val_pixels_per_triplet: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            max_epochs: 300,
            patience: 5,
            batch: 4096,
            seed: 0,
            freeze: Vec::new(),
            k_features: 6,
            spectral_path: SpectralPath::Enabled,
            pixels_per_triplet: 8192,
            val_pixels_per_triplet: 4096,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.patience == 0 || self.max_epochs == 0 || self.batch == 0 {
            return Err(Error::Config("patience, max_epochs and batch must be >= 1".into()));
        }
        if self.pixels_per_triplet == 0 || self.val_pixels_per_triplet == 0 {
            return Err(Error::Config("pixel sample counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn spectral_features(&self) -> usize {
        match self.spectral_path {
            SpectralPath::Enabled => self.k_features,
            SpectralPath::Disabled => 0,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Patience-based stopping on a metric to minimize.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Record `metric` for `epoch`; returns `(improved, stop)`.
    pub fn update(&mut self, epoch: usize, metric: f64) -> (bool, bool) {
        if metric < self.best {
            self.best = metric;
            self.best_epoch = epoch;
            self.stale = 0;
            (true, false)
        } else {
            self.stale += 1;
            (false, self.stale >= self.patience)
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_de76: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config_hash: String,
    pub train_images: usize,
    pub val_images: usize,
    /// Validation ΔE76 of the initial parameters.
    pub initial_val_de76: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch beat the initial parameters.
    pub best_epoch: usize,
    pub best_val_de76: f64,
    pub stop_reason: StopReason,
    /// Groups whose values differ between the initial and returned parameters.
    pub changed_groups: Vec<ParamGroup>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: KanParams,
    pub log: TrainingLog,
}

/// Per-pixel MS context: bilinear sample of `ms` at the location of RGB pixel
/// `(y, x)` in an `h`×`w` image (pixel-center alignment).
#[inline]
pub fn ms_context(ms: &PlanarImage, h: usize, w: usize, y: usize, x: usize, out: &mut [f64]) {
    let (sx, sy) = ms.resize_coords(h, w, y, x);
    ms.sample_bilinear(sx, sy, out);
}

/// Flat sample storage: `rgb` and `gt` as 3-vectors, `ms` as `c_ms`-vectors.
#[derive(Debug, Clone, Default)]
struct Samples {
    c_ms: usize,
    rgb: Vec<[f64; 3]>,
    gt: Vec<[f64; 3]>,
    ms: Vec<f64>,
}

impl Samples {
    fn with_channels(c_ms: usize) -> Self {
        Self {
            c_ms,
            ..Default::default()
        }
    }

    fn len(&self) -> usize {
        self.rgb.len()
    }

    fn push(&mut self, t: &Triplet, idx: usize, buf: &mut [f64]) {
        let (h, w) = (t.rgb.height(), t.rgb.width());
        self.rgb
            .push([t.rgb.channel(0)[idx], t.rgb.channel(1)[idx], t.rgb.channel(2)[idx]]);
        self.gt
            .push([t.gt.channel(0)[idx], t.gt.channel(1)[idx], t.gt.channel(2)[idx]]);
        ms_context(&t.ms, h, w, idx / w, idx % w, buf);
        self.ms.extend_from_slice(buf);
    }

    fn ms_at(&self, i: usize) -> &[f64] {
        &self.ms[i * self.c_ms..(i + 1) * self.c_ms]
    }
}

fn valid_indices(t: &Triplet) -> Vec<usize> {
    t.rgb
        .mask()
        .iter()
        .zip(t.gt.mask())
        .enumerate()
        .filter(|(_, (a, b))| **a && **b)
        .map(|(i, _)| i)
        .collect()
}

fn check_triplet(t: &Triplet, c_ms: usize) -> Result<()> {
    t.rgb.ensure_same_dims(&t.gt)?;
    if t.ms.n_channels() != c_ms {
        return Err(Error::DimensionMismatch(format!(
            "triplet {} has {} MS channels, expected {c_ms}",
            t.meta.id(),
            t.ms.n_channels()
        )));
    }
    Ok(())
}

fn validation_samples(val: &[&Triplet], per_image: usize, c_ms: usize) -> Samples {
    let mut s = Samples::with_channels(c_ms);
    let mut buf = vec![0.0; c_ms];
    for t in val {
        let valid = valid_indices(t);
        let take = per_image.min(valid.len());
        for k in 0..take {
            s.push(t, valid[k * valid.len() / take], &mut buf);
        }
    }
    s
}

fn epoch_samples(train: &[(&Triplet, Vec<usize>)], per_image: usize, c_ms: usize, seed: u64, epoch: usize) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut picks: Vec<(usize, usize)> = Vec::with_capacity(train.len() * per_image);
    for (ti, (_, valid)) in train.iter().enumerate() {
        if valid.is_empty() {
            continue;
        }
        for _ in 0..per_image {
            picks.push((ti, valid[rng.gen_range(0..valid.len())]));
        }
    }
    picks.shuffle(&mut rng);
    let mut s = Samples::with_channels(c_ms);
    let mut buf = vec![0.0; c_ms];
    for (ti, idx) in picks {
        s.push(train[ti].0, idx, &mut buf);
    }
    s
}

const CHUNK: usize = 256;

/// Mean ΔE76 over `range` and its gradient, reduced over fixed-size chunks
/// in a fixed order so the result does not depend on the thread count.
fn batch_gradient(
    params: &KanParams,
    s: &Samples,
    range: std::ops::Range<usize>,
    white: &WhitePoint,
) -> (f64, Vec<f64>) {
    let n = range.len() as f64;
    let n_params = params.dims().n_params();
    let starts: Vec<usize> = range.clone().step_by(CHUNK).collect();
    let partials: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + CHUNK).min(range.end);
            let mut grads = vec![0.0; n_params];
            let mut loss = 0.0;
            let mut features = Vec::new();
            let mut proj = Vec::new();
            let mut bases = Vec::new();
            let mut fgrad = vec![0.0; params.dims().d()];
            for i in start..end {
                let ms = s.ms_at(i);
                fill_features(&s.rgb[i], ms, params, &mut features, &mut proj);
                feature_bases(params, &features, &mut bases);
                let pred = forward_with_bases(params, &features, &bases);
                let (l, g) = loss_de76(pred, s.gt[i], white);
                loss += l;
                let up = [g[0] / n, g[1] / n, g[2] / n];
                backward_with_bases(params, &features, &bases, up, &mut grads, &mut fgrad);
                encoder_backward(params, ms, &proj, &fgrad, &mut grads);
            }
            (loss, grads)
        })
        .collect();
    let mut total = 0.0;
    let mut grads = vec![0.0; n_params];
    for (l, g) in partials {
        total += l;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
    }
    (total / n, grads)
}

fn mean_loss(params: &KanParams, s: &Samples, white: &WhitePoint) -> f64 {
    let starts: Vec<usize> = (0..s.len()).step_by(CHUNK).collect();
    let partials: Vec<f64> = starts
        .par_iter()
        .map(|&start| {
            let mut features = Vec::new();
            let mut proj = Vec::new();
            let mut bases = Vec::new();
            let mut acc = 0.0;
            for i in start..(start + CHUNK).min(s.len()) {
                fill_features(&s.rgb[i], s.ms_at(i), params, &mut features, &mut proj);
                feature_bases(params, &features, &mut bases);
                let pred = forward_with_bases(params, &features, &bases);
                acc += loss_de76(pred, s.gt[i], white).0;
            }
            acc
        })
        .collect();
    partials.iter().sum::<f64>() / s.len() as f64
}

fn changed_groups(a: &KanParams, b: &KanParams) -> Vec<ParamGroup> {
    ParamGroup::ALL
        .into_iter()
        .filter(|&g| a.group(g) != b.group(g))
        .collect()
}

/// Train on the dataset's train split, validating on its val split.
pub fn train(ds: &Dataset, config: &TrainConfig, init: Option<KanParams>) -> Result<TrainOutcome> {
    train_on(&ds.split(Split::Train), &ds.split(Split::Val), &ds.white, config, init)
}

/// Mini-batch Adam on ΔE76 with cosine-annealed learning rate and early
/// stopping on validation ΔE76. Returns the best validation checkpoint; the
/// initial parameters count as a candidate but do not drive patience.
pub fn train_on(
    train: &[&Triplet],
    val: &[&Triplet],
    white: &WhitePoint,
    config: &TrainConfig,
    init: Option<KanParams>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(
            "training needs non-empty train and val partitions".into(),
        ));
    }
    let c_ms = train[0].ms.n_channels();
    let mut params = match init {
        Some(p) => {
            if p.dims().k_features > 0 && p.dims().c_ms != c_ms {
                return Err(Error::DimensionMismatch(format!(
                    "checkpoint expects {} MS channels, data has {c_ms}",
                    p.dims().c_ms
                )));
            }
            p
        }
        None => KanParams::identity_init(
            KanDims {
                c_ms,
                k_features: config.spectral_features(),
            },
            config.seed,
        )?,
    };
    for t in train.iter().chain(val) {
        check_triplet(t, c_ms)?;
    }
    let pool: Vec<(&Triplet, Vec<usize>)> = train.iter().map(|t| (*t, valid_indices(t))).collect();
    if pool.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::EmptyMask);
    }
    let val_samples = validation_samples(val, config.val_pixels_per_triplet, c_ms);
    if val_samples.len() == 0 {
        return Err(Error::EmptyMask);
    }

    let initial = params.clone();
    let initial_val = mean_loss(&params, &val_samples, white);
    if !initial_val.is_finite() {
        return Err(Error::Numerical(
            "non-finite validation loss for the initial parameters".into(),
        ));
    }
    let mut best = params.clone();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut state = OptimizerState::new(params.dims().n_params(), config.lr);
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        state.lr = cosine_lr(config.lr, epoch - 1, config.max_epochs);
        let samples = epoch_samples(&pool, config.pixels_per_triplet, c_ms, config.seed, epoch);
        let mut loss_sum = 0.0;
        let mut start = 0;
        let mut batch_index = 0;
        while start < samples.len() {
            let end = (start + config.batch).min(samples.len());
            let (loss, grads) = batch_gradient(&params, &samples, start..end, white);
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite training loss at epoch {epoch}, batch {batch_index}"
                )));
            }
            adam_step(&mut params, &mut state, &grads, &config.freeze)?;
            loss_sum += loss * (end - start) as f64;
            start = end;
            batch_index += 1;
        }
        let val_metric = mean_loss(&params, &val_samples, white);
        if !val_metric.is_finite() {
            return Err(Error::Numerical(format!("non-finite validation loss at epoch {epoch}")));
        }
        let (improved, stop) = stopper.update(epoch, val_metric);
        if improved {
            best = params.clone();
        }
        log::debug!(
            "epoch {epoch}: lr {:.3e} train {:.4} val {:.4}",
            state.lr,
            loss_sum / samples.len() as f64,
            val_metric
        );
        epochs.push(EpochRecord {
            epoch,
            lr: state.lr,
            train_loss: loss_sum / samples.len() as f64,
            val_de76: val_metric,
            improved,
        });
        if stop {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    let (mut best_epoch, mut best_val) = stopper.best();
    if initial_val <= best_val {
        best = initial.clone();
        best_epoch = 0;
        best_val = initial_val;
    }
    let log = TrainingLog {
        config_hash: config.hash(),
        train_images: train.len(),
        val_images: val.len(),
        initial_val_de76: initial_val,
        epochs,
        best_epoch,
        best_val_de76: best_val,
        stop_reason,
        changed_groups: changed_groups(&initial, &best),
    };
    Ok(TrainOutcome { params: best, log })
}
