//! Active speaker detection from voice activity alone.
//!
//! Deciding who in a video frame is speaking usually needs a label for every
//! person in every frame. This crate instead learns from a frame-level
//! speak/non-speak flag (voice activity) that says *someone* is speaking but
//! not who. It provides:
//!
//! - [`model`]: linear scoring over per-track feature vectors, joint feature
//!   map, and best-box selection;
//! - [`latent`]: training of a generic model where the speaker identity is a
//!   latent variable, with a smooth soft-max surrogate of the structured
//!   max-margin loss;
//! - [`adapt`]: harvesting of per-speaker training sets guided by the generic
//!   model, temporal-continuity weights, and speaker-specific retraining with
//!   a weighted logistic loss;
//! - [`online`]: incremental adaptation of the generic model to unseen
//!   speakers, predicting with the sum of generic and per-speaker scores;
//! - [`eval`]: ROC/AUC, equal-error thresholding, majority-vote smoothing,
//!   F-scores, and leave-one-out cross-validation;
//! - [`synth`]: a deterministic multi-track turn-taking simulator for
//!   benchmarks and tests;
//! - [`optim`]: the limited-memory quasi-Newton minimizer used by all
//!   trainers.
//!
//! The crate is `no_std` (requires `alloc`). File formats and the command
//! line live in the companion `asd-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adapt;
pub mod error;
pub mod eval;
pub mod latent;
pub mod model;
pub mod online;
pub mod optim;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
pub use model::{
    joint_feature, normalize_features, score, select_best_box, BoxObservation, FeatureVector,
    FrameSample, Label, ModelWeights, TrackId, TrackedDataset,
};
