//! Deterministic multi-track meeting simulator.
//!
//! A Markov chain over {silence, speaker 1..K} holds the floor; exactly one
//! person speaks at a time. Every track emits a feature vector per frame:
//! speaking boxes draw from a shared "speaking" distribution, quiet boxes
//! from a "quiet" one, and each track adds its own fixed offset so the
//! generic model favours some speakers over others. Frame-level voice
//! activity can be corrupted at a configurable rate to model imperfect
//! supervision.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{BoxObservation, FeatureVector, FrameSample, Label, TrackId, TrackedDataset};

/// Distance between the speaking and quiet feature means, along the first
/// coordinate.
const SPEAK_SEPARATION: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_speakers: usize,
    pub dim: usize,
    pub frames: usize,
    pub frame_rate_hz: f64,
    /// Probability that the current floor holder keeps the floor next frame.
    pub turn_persistence: f64,
    /// Probability that a floor change goes to silence rather than another
    /// speaker.
    pub silence_prob: f64,
    /// Magnitude of the fixed per-speaker feature offset; the domain-shift
    /// and speaker-bias control.
    pub speaker_shift: f64,
    pub noise_sigma: f64,
    /// Fraction of frames whose voice-activity label is flipped.
    pub vad_error_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_speakers: 3,
            dim: 64,
            frames: 600,
            frame_rate_hz: 10.0,
            turn_persistence: 0.9,
            silence_prob: 0.2,
            speaker_shift: 0.3,
            noise_sigma: 0.5,
            vad_error_rate: 0.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_speakers == 0 {
            return Err(Error::InvalidConfig("num_speakers must be >= 1".into()));
        }
        if self.dim < 2 {
            return Err(Error::InvalidConfig("dim must be >= 2".into()));
        }
        if self.frames == 0 {
            return Err(Error::InvalidConfig("frames must be >= 1".into()));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(Error::InvalidConfig("frame_rate_hz must be positive".into()));
        }
        let p = self.turn_persistence;
        if !(p.is_finite() && p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "turn_persistence must lie in (0, 1], got {p}"
            )));
        }
        for (name, v) in
            [("silence_prob", self.silence_prob), ("vad_error_rate", self.vad_error_rate)]
        {
            if !(v.is_finite() && (0.0..1.0).contains(&v)) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1), got {v}"
                )));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be positive".into()));
        }
        if !(self.speaker_shift.is_finite() && self.speaker_shift >= 0.0) {
            return Err(Error::InvalidConfig("speaker_shift must be non-negative".into()));
        }
        Ok(())
    }
}

/// Floor state: `None` is silence, `Some(k)` means speaker `k` has the floor.
type FloorState = Option<usize>;

/// Generates a dataset. Identical configs (including the seed) produce
/// bit-identical datasets.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<TrackedDataset> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let k = cfg.num_speakers;

    // fixed per-speaker offsets: random unit directions scaled by the shift.
    // Drawn before anything else, so datasets differing only in shift share
    // their turn sequence and noise.
    let offsets: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let raw: Vec<f64> = (0..cfg.dim).map(|_| normal.sample(&mut rng)).collect();
            let norm = libm::sqrt(raw.iter().map(|x| x * x).sum::<f64>());
            raw.iter().map(|x| cfg.speaker_shift * x / norm).collect()
        })
        .collect();

    let mut state: FloorState = Some(0);
    let mut frames = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        if t > 0 {
            state = transition(state, cfg, &mut rng);
        }
        let mut boxes = Vec::with_capacity(k);
        for track in 0..k {
            let speaking = state == Some(track);
            let mut v = Vec::with_capacity(cfg.dim);
            for d in 0..cfg.dim {
                let mean = if speaking && d == 0 { SPEAK_SEPARATION } else { 0.0 };
                v.push(mean + offsets[track][d] + cfg.noise_sigma * normal.sample(&mut rng));
            }
            boxes.push(BoxObservation::with_gt(
                track as TrackId,
                FeatureVector::new(v)?,
                if speaking { Label::Pos } else { Label::Neg },
            ));
        }
        let true_vad = if state.is_some() { Label::Pos } else { Label::Neg };
        let vad =
            if rng.random::<f64>() < cfg.vad_error_rate { true_vad.flip() } else { true_vad };
        frames.push(FrameSample::new(t as u64, vad, boxes)?);
    }
    TrackedDataset::new(cfg.dim, cfg.frame_rate_hz, frames)
}

fn transition(state: FloorState, cfg: &SynthConfig, rng: &mut ChaCha20Rng) -> FloorState {
    if rng.random::<f64>() < cfg.turn_persistence {
        return state;
    }
    match state {
        Some(current) => {
            if rng.random::<f64>() < cfg.silence_prob {
                None
            } else if cfg.num_speakers == 1 {
                Some(current)
            } else {
                let mut next = rng.random_range(0..cfg.num_speakers - 1);
                if next >= current {
                    next += 1;
                }
                Some(next)
            }
        }
        None => Some(rng.random_range(0..cfg.num_speakers)),
    }
}
