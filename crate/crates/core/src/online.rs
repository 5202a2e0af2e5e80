//! Online adaptation of the generic model to speakers it has never seen.
//!
//! Frames of the new recording stream in batch by batch. Each iteration
//! harvests weighted samples with the frozen generic model, balances the
//! per-speaker sample sets, retrains every per-speaker model, and predicts
//! with the sum of generic and per-speaker scores. Before any samples arrive
//! the per-speaker models are zero, so predictions start exactly at the
//! generic model's and improve from there.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::adapt::{temporal_weight, train_specific_from, HarvestConfig, WeightedSample};
use crate::error::{Error, Result};
use crate::eval::{per_track_auc, ScoredPoint, ScoredSeries};
use crate::latent::TrainConfig;
use crate::model::{
    dot, score, select_best_box, FeatureVector, Label, ModelWeights, TrackId, TrackedDataset,
};
use crate::util::seconds_to_frames;

#[derive(Debug, Clone)]
pub struct OnlineSchedule {
    /// Frames consumed per iteration.
    pub batch_frames: usize,
    /// Harvested-positive budget per speaker; a speaker at budget stops
    /// accumulating samples.
    pub max_seconds_per_speaker: f64,
    /// Balance positive and negative counts before each retraining.
    pub balance: bool,
    /// Start each retraining from the previous weights instead of zero.
    pub warm_start: bool,
}

impl Default for OnlineSchedule {
    fn default() -> Self {
        OnlineSchedule {
            batch_frames: 1,
            max_seconds_per_speaker: 10.0,
            balance: true,
            warm_start: false,
        }
    }
}

impl OnlineSchedule {
    /// Schedule with one second of frames per batch, the default.
    pub fn per_second(frame_rate_hz: f64) -> OnlineSchedule {
        OnlineSchedule {
            batch_frames: seconds_to_frames(1.0, frame_rate_hz).max(1),
            ..OnlineSchedule::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_frames == 0 {
            return Err(Error::InvalidConfig("batch_frames must be >= 1".into()));
        }
        if !(self.max_seconds_per_speaker.is_finite() && self.max_seconds_per_speaker > 0.0) {
            return Err(Error::InvalidConfig("max_seconds_per_speaker must be positive".into()));
        }
        Ok(())
    }
}

/// One evaluated iteration of the learning curve.
#[derive(Debug, Clone)]
pub struct LearningCurveRow {
    pub iteration: usize,
    /// Accumulated (pre-balancing) sample count over all speakers.
    pub samples_used: usize,
    pub auc_per_speaker: BTreeMap<TrackId, f64>,
    pub mean_auc: f64,
}

pub type LearningCurve = Vec<LearningCurveRow>;

/// Additive prediction: generic score plus per-speaker target score.
pub fn predict_online(
    w_gen: &ModelWeights,
    w_target: &ModelWeights,
    phi: &FeatureVector,
) -> Result<f64> {
    Ok(score(w_gen, phi)? + score(w_target, phi)?)
}

/// Accumulation state of one online run. The generic model is not part of
/// the state and is never modified.
#[derive(Debug, Clone)]
pub struct OnlineState {
    dim: usize,
    window_frames: usize,
    budget_positive_frames: usize,
    samples: BTreeMap<TrackId, Vec<WeightedSample>>,
    streams: BTreeMap<TrackId, Vec<(u64, Label)>>,
    positive_counts: BTreeMap<TrackId, usize>,
    models: BTreeMap<TrackId, ModelWeights>,
    iterations: usize,
}

impl OnlineState {
    pub fn new(
        dim: usize,
        frame_rate_hz: f64,
        schedule: &OnlineSchedule,
        harvest_cfg: &HarvestConfig,
    ) -> Result<OnlineState> {
        schedule.validate()?;
        Ok(OnlineState {
            dim,
            window_frames: harvest_cfg.window_frames(frame_rate_hz),
            budget_positive_frames: seconds_to_frames(
                schedule.max_seconds_per_speaker,
                frame_rate_hz,
            )
            .max(1),
            samples: BTreeMap::new(),
            streams: BTreeMap::new(),
            positive_counts: BTreeMap::new(),
            models: BTreeMap::new(),
            iterations: 0,
        })
    }

    /// Per-speaker models trained so far; speakers without usable samples
    /// are absent and predict with the generic model alone.
    pub fn models(&self) -> &BTreeMap<TrackId, ModelWeights> {
        &self.models
    }

    /// Accumulated samples per speaker, before balancing.
    pub fn samples(&self) -> &BTreeMap<TrackId, Vec<WeightedSample>> {
        &self.samples
    }

    pub fn total_samples(&self) -> usize {
        self.samples.values().map(Vec::len).sum()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Whether every listed speaker has used up its positive-frame budget.
    pub fn all_budgets_exhausted(&self, roster: &[TrackId]) -> bool {
        roster.iter().all(|t| {
            self.positive_counts.get(t).copied().unwrap_or(0) >= self.budget_positive_frames
        })
    }
}

/// Consumes one batch of frames: harvests with the frozen generic model,
/// accumulates weighted samples under the per-speaker budget, and retrains
/// the per-speaker models on the (optionally balanced) accumulated sets.
pub fn adapt_iteration(
    state: &mut OnlineState,
    batch: &[crate::model::FrameSample],
    w_gen: &ModelWeights,
    schedule: &OnlineSchedule,
    train_cfg: &TrainConfig,
) -> Result<()> {
    if w_gen.dim() != state.dim {
        return Err(Error::DimMismatch { expected: state.dim, got: w_gen.dim() });
    }

    // harvest the batch; the label streams grow first so continuity weights
    // see their full context up to the batch end
    let mut new_events: Vec<(TrackId, u64, Label, usize, usize)> = Vec::new();
    for (fi, frame) in batch.iter().enumerate() {
        if frame.dim() != state.dim {
            return Err(Error::DimMismatch { expected: state.dim, got: frame.dim() });
        }
        if !frame.vad_label().is_pos() {
            continue;
        }
        let (best, _) = select_best_box(w_gen, frame)?;
        for (h, b) in frame.boxes().iter().enumerate() {
            let label = if h == best { Label::Pos } else { Label::Neg };
            state.streams.entry(b.track_id).or_default().push((frame.frame_index(), label));
            new_events.push((b.track_id, frame.frame_index(), label, fi, h));
        }
    }

    for (track, frame_index, label, frame_pos, box_pos) in new_events {
        let at_budget = state.positive_counts.get(&track).copied().unwrap_or(0)
            >= state.budget_positive_frames;
        if at_budget {
            continue;
        }
        if label.is_pos() {
            *state.positive_counts.entry(track).or_insert(0) += 1;
        }
        let alpha =
            temporal_weight(&state.streams[&track], frame_index, state.window_frames);
        state.samples.entry(track).or_default().push(WeightedSample {
            features: batch[frame_pos].boxes()[box_pos].features.clone(),
            label,
            alpha,
            frame_index,
            track_id: track,
        });
    }

    // retrain every speaker that has a usable two-class sample set
    let tracks: Vec<TrackId> = state.samples.keys().copied().collect();
    for track in tracks {
        let accumulated = &state.samples[&track];
        let usable = if schedule.balance {
            balanced_selection(accumulated)
        } else {
            accumulated.clone()
        };
        let has_pos = usable.iter().any(|s| s.label.is_pos());
        let has_neg = usable.iter().any(|s| !s.label.is_pos());
        if !has_pos || !has_neg {
            // prior-only: keep no model so predictions fall back to generic
            state.models.remove(&track);
            continue;
        }
        let init = if schedule.warm_start { state.models.get(&track).cloned() } else { None };
        let trained = train_specific_from(&usable, train_cfg, init.as_ref())?;
        state.models.insert(track, trained);
    }
    state.iterations += 1;
    Ok(())
}

/// Majority-class subsampling: keeps the minority class whole and the
/// highest-weight majority samples, earliest frame breaking ties.
pub(crate) fn balanced_selection(samples: &[WeightedSample]) -> Vec<WeightedSample> {
    let n_pos = samples.iter().filter(|s| s.label.is_pos()).count();
    let n_neg = samples.len() - n_pos;
    if n_pos == n_neg {
        return samples.to_vec();
    }
    let (majority, keep) = if n_pos > n_neg { (Label::Pos, n_neg) } else { (Label::Neg, n_pos) };
    let mut majority_samples: Vec<&WeightedSample> =
        samples.iter().filter(|s| s.label == majority).collect();
    majority_samples.sort_by(|a, b| {
        b.alpha
            .partial_cmp(&a.alpha)
            .expect("weights are finite")
            .then(a.frame_index.cmp(&b.frame_index))
    });
    let mut out: Vec<WeightedSample> = samples.iter().filter(|s| s.label != majority).cloned().collect();
    out.extend(majority_samples.into_iter().take(keep).cloned());
    out.sort_by_key(|s| (s.frame_index, s.label == Label::Neg));
    out
}

/// Scores every labelled box with the generic model plus the box track's
/// per-speaker model, when one exists.
pub fn evaluate_additive(
    target: &TrackedDataset,
    w_gen: &ModelWeights,
    models: &BTreeMap<TrackId, ModelWeights>,
) -> Result<(BTreeMap<TrackId, f64>, f64)> {
    let mut points = Vec::new();
    for frame in target.frames() {
        for b in frame.boxes() {
            if let Some(gt) = b.gt_label {
                let mut s = score(w_gen, &b.features)?;
                if let Some(w_t) = models.get(&b.track_id) {
                    s += dot(w_t.as_slice(), b.features.as_slice());
                }
                points.push(ScoredPoint {
                    frame_index: frame.frame_index(),
                    track_id: b.track_id,
                    score: s,
                    gt_label: gt,
                });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidData("target dataset has no ground-truth labels".into()));
    }
    per_track_auc(&ScoredSeries::new(points)?)
}

/// Streams the whole target dataset through online adaptation.
///
/// Row 0 of the returned curve is the zero-shot prior (no samples consumed);
/// one row follows per iteration. The run stops when the frames or every
/// speaker's budget are exhausted. Ground truth is used only to evaluate the
/// curve, never to pick samples.
pub fn run_online(
    target: &TrackedDataset,
    w_gen: &ModelWeights,
    schedule: &OnlineSchedule,
    harvest_cfg: &HarvestConfig,
    train_cfg: &TrainConfig,
) -> Result<(BTreeMap<TrackId, ModelWeights>, LearningCurve)> {
    schedule.validate()?;
    if target.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(bad) = target.frames().iter().find(|f| f.boxes().len() < 2) {
        return Err(Error::InvalidData(alloc::format!(
            "online adaptation expects multi-person frames; frame {} has {} box",
            bad.frame_index(),
            bad.boxes().len()
        )));
    }
    if w_gen.dim() != target.dim() {
        return Err(Error::DimMismatch { expected: target.dim(), got: w_gen.dim() });
    }

    let mut state =
        OnlineState::new(target.dim(), target.frame_rate_hz(), schedule, harvest_cfg)?;
    let mut curve: LearningCurve = Vec::new();

    let (auc0, mean0) = evaluate_additive(target, w_gen, state.models())?;
    curve.push(LearningCurveRow {
        iteration: 0,
        samples_used: 0,
        auc_per_speaker: auc0,
        mean_auc: mean0,
    });

    let frames = target.frames();
    let mut start = 0usize;
    while start < frames.len() && !state.all_budgets_exhausted(target.track_ids()) {
        let end = (start + schedule.batch_frames).min(frames.len());
        adapt_iteration(&mut state, &frames[start..end], w_gen, schedule, train_cfg)?;

        let (aucs, mean) = evaluate_additive(target, w_gen, state.models())?;
        curve.push(LearningCurveRow {
            iteration: state.iterations(),
            samples_used: state.total_samples(),
            auc_per_speaker: aucs,
            mean_auc: mean,
        });
        start = end;
    }

    let mut final_models = BTreeMap::new();
    for &track in target.track_ids() {
        let w = state
            .models()
            .get(&track)
            .cloned()
            .unwrap_or_else(|| ModelWeights::with_metadata(
                FeatureVector::zeros(target.dim()),
                "online prior-only",
            ));
        final_models.insert(track, w);
    }
    Ok((final_models, curve))
}
