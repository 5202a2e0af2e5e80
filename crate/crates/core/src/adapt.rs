//! Speaker-specific classifiers built on top of the generic model.
//!
//! The generic model picks the most likely speaker box in every frame with
//! positive voice activity; that box becomes a positive sample for its track
//! and every other box in the frame a negative sample for its own track. The
//! generic model is imperfect, so each sample is weighted by temporal
//! continuity: the longer the streak of identical harvested labels around a
//! frame, the more the sample counts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::latent::TrainConfig;
use crate::model::{
    dot, select_best_box, FeatureVector, Label, ModelWeights, TrackId, TrackedDataset,
};
use crate::optim;
use crate::util::seconds_to_frames;

/// One harvested training sample for a speaker-specific model.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub features: FeatureVector,
    pub label: Label,
    /// Temporal continuity weight, in `[1, window]`.
    pub alpha: f64,
    pub frame_index: u64,
    pub track_id: TrackId,
}

#[derive(Debug, Clone)]
pub struct HarvestConfig {
    /// Width of the continuity window, converted to frames with the
    /// dataset's own frame rate.
    pub window_seconds: f64,
    /// With weighting disabled every sample gets `alpha = 1`.
    pub weighting_enabled: bool,
    /// Optionally harvest frames with negative voice activity as negative
    /// samples for every visible track. Off by default: only speaking frames
    /// are harvested.
    pub include_vad_negative_frames: bool,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            window_seconds: 3.0,
            weighting_enabled: true,
            include_vad_negative_frames: false,
        }
    }
}

impl HarvestConfig {
    fn validate(&self) -> Result<()> {
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "window_seconds must be positive, got {}",
                self.window_seconds
            )));
        }
        Ok(())
    }

    pub fn window_frames(&self, frame_rate_hz: f64) -> usize {
        seconds_to_frames(self.window_seconds, frame_rate_hz).max(1)
    }
}

/// One audit row per harvested sample: where it came from and how the
/// generic model scored it.
#[derive(Debug, Clone)]
pub struct HarvestRecord {
    pub frame_index: u64,
    pub track_id: TrackId,
    pub label: Label,
    pub alpha: f64,
    pub score_gen: f64,
}

/// Harvests weighted samples for every track, keyed by track id.
pub fn harvest_samples(
    w_gen: &ModelWeights,
    data: &TrackedDataset,
    cfg: &HarvestConfig,
) -> Result<BTreeMap<TrackId, Vec<WeightedSample>>> {
    harvest_with_audit(w_gen, data, cfg).map(|(samples, _)| samples)
}

/// Like [`harvest_samples`] but also returns audit records ordered by
/// (frame, track).
pub fn harvest_with_audit(
    w_gen: &ModelWeights,
    data: &TrackedDataset,
    cfg: &HarvestConfig,
) -> Result<(BTreeMap<TrackId, Vec<WeightedSample>>, Vec<HarvestRecord>)> {
    cfg.validate()?;
    if w_gen.dim() != data.dim() {
        return Err(Error::DimMismatch { expected: data.dim(), got: w_gen.dim() });
    }
    let window = cfg.window_frames(data.frame_rate_hz());

    // first pass: label every box of every harvested frame
    let mut events: BTreeMap<TrackId, Vec<HarvestEvent>> = BTreeMap::new();
    for (fi, frame) in data.frames().iter().enumerate() {
        if frame.vad_label().is_pos() {
            let (best, _) = select_best_box(w_gen, frame)?;
            for (h, b) in frame.boxes().iter().enumerate() {
                let label = if h == best { Label::Pos } else { Label::Neg };
                let score = dot(w_gen.as_slice(), b.features.as_slice());
                events.entry(b.track_id).or_default().push(HarvestEvent {
                    frame_index: frame.frame_index(),
                    frame_pos: fi,
                    box_pos: h,
                    label,
                    score,
                });
            }
        } else if cfg.include_vad_negative_frames {
            for (h, b) in frame.boxes().iter().enumerate() {
                let score = dot(w_gen.as_slice(), b.features.as_slice());
                events.entry(b.track_id).or_default().push(HarvestEvent {
                    frame_index: frame.frame_index(),
                    frame_pos: fi,
                    box_pos: h,
                    label: Label::Neg,
                    score,
                });
            }
        }
    }

    // second pass: continuity weights over each track's label stream
    let mut samples: BTreeMap<TrackId, Vec<WeightedSample>> = BTreeMap::new();
    let mut audit: Vec<HarvestRecord> = Vec::new();
    for (&track, track_events) in &events {
        let stream: Vec<(u64, Label)> =
            track_events.iter().map(|e| (e.frame_index, e.label)).collect();
        let out = samples.entry(track).or_default();
        for e in track_events {
            let alpha = if cfg.weighting_enabled {
                temporal_weight(&stream, e.frame_index, window)
            } else {
                1.0
            };
            let features = data.frames()[e.frame_pos].boxes()[e.box_pos].features.clone();
            out.push(WeightedSample {
                features,
                label: e.label,
                alpha,
                frame_index: e.frame_index,
                track_id: track,
            });
            audit.push(HarvestRecord {
                frame_index: e.frame_index,
                track_id: track,
                label: e.label,
                alpha,
                score_gen: e.score,
            });
        }
    }
    audit.sort_by_key(|r| (r.frame_index, r.track_id));
    Ok((samples, audit))
}

struct HarvestEvent {
    frame_index: u64,
    frame_pos: usize,
    box_pos: usize,
    label: Label,
    score: f64,
}

/// Length of the run of identical labels around `frame_index`, confined to a
/// window of `window_frames` centered there and clamped to `[1, window]`.
///
/// `stream` is one track's harvested (frame, label) sequence in frame order;
/// a gap in frame indices breaks the run. Panics if `frame_index` is absent.
pub fn temporal_weight(stream: &[(u64, Label)], frame_index: u64, window_frames: usize) -> f64 {
    assert!(window_frames >= 1, "window must be at least one frame");
    let at = stream
        .binary_search_by_key(&frame_index, |&(f, _)| f)
        .expect("frame_index must be present in the label stream");
    let label = stream[at].1;
    let half = (window_frames / 2) as u64;

    let mut run = 1usize;
    // walk left while frames stay contiguous, equally labelled, in window
    let mut i = at;
    while i > 0
        && stream[i - 1].0 + 1 == stream[i].0
        && stream[i - 1].1 == label
        && frame_index - stream[i - 1].0 <= half
    {
        run += 1;
        i -= 1;
    }
    let mut j = at;
    while j + 1 < stream.len()
        && stream[j + 1].0 == stream[j].0 + 1
        && stream[j + 1].1 == label
        && stream[j + 1].0 - frame_index <= half
    {
        run += 1;
        j += 1;
    }
    run.min(window_frames) as f64
}

/// Weighted logistic loss of one sample and its gradient.
///
/// The margin is the signed score `label * <w, features>`; negative samples
/// therefore push their own score down. Stable for margins of any magnitude.
pub fn weighted_logistic_loss(
    w: &ModelWeights,
    s: &WeightedSample,
) -> Result<(f64, FeatureVector)> {
    if w.dim() != s.features.len() {
        return Err(Error::DimMismatch { expected: w.dim(), got: s.features.len() });
    }
    let (loss, grad) = wll_parts(w.as_slice(), s);
    Ok((loss, FeatureVector::from_computed(grad)))
}

fn wll_parts(w: &[f64], s: &WeightedSample) -> (f64, Vec<f64>) {
    let sign = s.label.sign();
    let margin = sign * dot(w, s.features.as_slice());
    // log(1 + exp(-m)) without overflow
    let z = -margin;
    let softplus = z.max(0.0) + libm::log1p(libm::exp(-libm::fabs(z)));
    let loss = s.alpha * softplus;
    // d/dm log(1+exp(-m)) = sigmoid(m) - 1
    let sig = if margin >= 0.0 {
        1.0 / (1.0 + libm::exp(-margin))
    } else {
        let e = libm::exp(margin);
        e / (1.0 + e)
    };
    let coeff = s.alpha * (sig - 1.0) * sign;
    let grad = s.features.as_slice().iter().map(|&x| coeff * x).collect();
    (loss, grad)
}

pub(crate) fn specific_objective_parts(
    w: &[f64],
    samples: &[WeightedSample],
    c: f64,
) -> (f64, Vec<f64>) {
    let dim = w.len();
    let mut value = 0.0;
    let mut grad = vec![0.0; dim];
    for s in samples {
        let (l, g) = wll_parts(w, s);
        value += l;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    let mut sq = 0.0;
    for (acc, &wi) in grad.iter_mut().zip(w) {
        sq += wi * wi;
        *acc += c * wi;
    }
    value += 0.5 * c * sq;
    (value, grad)
}

/// Trains one speaker-specific model on weighted samples.
///
/// Requires at least one sample of each class; the error names the missing
/// one. Deterministic: the same samples and config give identical weights.
pub fn train_specific(samples: &[WeightedSample], cfg: &TrainConfig) -> Result<ModelWeights> {
    train_specific_from(samples, cfg, None)
}

/// [`train_specific`] with an optional warm-start point instead of zeros.
pub fn train_specific_from(
    samples: &[WeightedSample],
    cfg: &TrainConfig,
    init: Option<&ModelWeights>,
) -> Result<ModelWeights> {
    if samples.is_empty() {
        return Err(Error::MissingClass { class: Label::Pos });
    }
    let dim = samples[0].features.len();
    for s in samples {
        if s.features.len() != dim {
            return Err(Error::DimMismatch { expected: dim, got: s.features.len() });
        }
    }
    let n_pos = samples.iter().filter(|s| s.label.is_pos()).count();
    if n_pos == 0 {
        return Err(Error::MissingClass { class: Label::Pos });
    }
    if n_pos == samples.len() {
        return Err(Error::MissingClass { class: Label::Neg });
    }

    let x0 = match init {
        Some(w) => {
            if w.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, got: w.dim() });
            }
            w.as_slice().to_vec()
        }
        None => vec![0.0; dim],
    };
    let minimum = optim::minimize(
        |x, g| {
            let (value, grad) = specific_objective_parts(x, samples, cfg.c);
            g.copy_from_slice(&grad);
            value
        },
        &x0,
        &cfg.optimizer_config(),
    )?;
    let meta = format!(
        "specific C={} samples={} pos={} neg={}",
        cfg.c,
        samples.len(),
        n_pos,
        samples.len() - n_pos
    );
    Ok(ModelWeights::with_metadata(FeatureVector::new(minimum.x)?, &meta))
}
