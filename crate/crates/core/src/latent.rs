//! Training the generic model from frame-level voice activity alone.
//!
//! Which box is the speaker is never observed; it enters the loss as a latent
//! choice. The structured max-margin loss compares the best scoring
//! (label, box) pair against the best box under the observed frame label.
//! The default soft-max loss replaces both maxima with log-sum-exp at
//! sharpness `beta`, which recovers the max-margin loss as `beta` grows and
//! keeps the objective smooth.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{dot, FeatureVector, FrameSample, Label, ModelWeights, TrackedDataset};
use crate::optim::{self, IterationRecord, LbfgsConfig, StopReason};

/// Which per-frame loss the trainer optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Smooth log-sum-exp surrogate; the default.
    Softmax,
    /// Piecewise-linear structured hinge, optimized by subgradients.
    MaxMargin,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Regularization constant; the penalty added to the summed loss is
    /// `(c / 2) * ||w||^2`.
    pub c: f64,
    /// Sharpness of the soft-max loss.
    pub beta: f64,
    pub max_iters: usize,
    /// Stopping tolerance on the infinity norm of the objective gradient.
    pub grad_tol: f64,
    pub loss_kind: LossKind,
    /// Recorded in model metadata; training itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            beta: 2.0,
            max_iters: 500,
            grad_tol: 1e-6,
            loss_kind: LossKind::Softmax,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn optimizer_config(&self) -> LbfgsConfig {
        LbfgsConfig { max_iters: self.max_iters, grad_tol: self.grad_tol, ..LbfgsConfig::default() }
    }
}

/// Objective values and gradient norms along the optimizer path.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

fn check_dims(w: &ModelWeights, frame: &FrameSample) -> Result<()> {
    if w.dim() != frame.dim() {
        return Err(Error::DimMismatch { expected: w.dim(), got: frame.dim() });
    }
    Ok(())
}

fn box_scores(w: &[f64], frame: &FrameSample) -> Vec<f64> {
    frame.boxes().iter().map(|b| dot(w, b.features.as_slice())).collect()
}

/// Zero-one error between the observed frame label and a candidate label.
fn delta(observed: Label, candidate: Label) -> f64 {
    if observed == candidate {
        0.0
    } else {
        1.0
    }
}

/// Structured hinge loss of one frame. Always non-negative.
pub fn maxmargin_loss(w: &ModelWeights, frame: &FrameSample) -> Result<f64> {
    check_dims(w, frame)?;
    Ok(maxmargin_parts(w.as_slice(), frame).0)
}

/// Hinge loss and one subgradient of it.
///
/// The joint-feature map is zero under the negative label, so both maxima
/// collapse to a hinge on the best box score: `max(0, 1 - s*)` when the frame
/// is positive and `max(0, 1 + s*)` when it is negative.
fn maxmargin_parts(w: &[f64], frame: &FrameSample) -> (f64, Vec<f64>) {
    let scores = box_scores(w, frame);
    let mut best = 0usize;
    for (h, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = h;
        }
    }
    let s_max = scores[best];
    let dim = frame.dim();
    let phi = frame.boxes()[best].features.as_slice();
    match frame.vad_label() {
        Label::Pos => {
            let loss = (1.0 - s_max).max(0.0);
            let grad = if s_max < 1.0 {
                phi.iter().map(|&v| -v).collect()
            } else {
                vec![0.0; dim]
            };
            (loss, grad)
        }
        Label::Neg => {
            let loss = (1.0 + s_max).max(0.0);
            let grad = if s_max > -1.0 { phi.to_vec() } else { vec![0.0; dim] };
            (loss, grad)
        }
    }
}

/// Soft-max surrogate loss of one frame at sharpness `beta`.
pub fn softmax_loss(w: &ModelWeights, frame: &FrameSample, beta: f64) -> Result<f64> {
    check_dims(w, frame)?;
    check_beta(beta)?;
    Ok(softmax_parts(w.as_slice(), frame, beta, false).0)
}

/// Analytic gradient of [`softmax_loss`] with respect to the weights.
pub fn softmax_loss_gradient(
    w: &ModelWeights,
    frame: &FrameSample,
    beta: f64,
) -> Result<FeatureVector> {
    check_dims(w, frame)?;
    check_beta(beta)?;
    let (_, grad) = softmax_parts(w.as_slice(), frame, beta, true);
    Ok(FeatureVector::from_computed(grad))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Loss and (optionally) gradient of the soft-max objective for one frame.
///
/// The first log-sum-exp runs over both candidate labels and every box; under
/// the negative label all boxes share the exponent `beta * delta`, giving a
/// single term with multiplicity n. Exponents are max-shifted before
/// summation so large scores cannot overflow.
fn softmax_parts(w: &[f64], frame: &FrameSample, beta: f64, want_grad: bool) -> (f64, Vec<f64>) {
    let scores = box_scores(w, frame);
    let n = scores.len();
    let nf = n as f64;
    let dim = frame.dim();
    let y = frame.vad_label();
    let d_pos = delta(y, Label::Pos);
    let d_neg = delta(y, Label::Neg);

    // terms of the first sum: beta*(s_h + d_pos) for each box, plus the
    // negative-label block of n copies of beta*d_neg
    let neg_exponent = beta * d_neg;
    let mut m = neg_exponent;
    for &s in &scores {
        m = m.max(beta * (s + d_pos));
    }
    let pos_terms: Vec<f64> = scores.iter().map(|&s| libm::exp(beta * (s + d_pos) - m)).collect();
    let mut total = nf * libm::exp(neg_exponent - m);
    for &t in &pos_terms {
        total += t;
    }
    let lse_joint = (m + libm::log(total)) / beta;

    // second sum: over boxes under the observed label
    let (lse_observed, observed_posterior) = match y {
        Label::Pos => {
            let m2 = scores.iter().fold(f64::NEG_INFINITY, |a, &s| a.max(beta * s));
            let terms: Vec<f64> = scores.iter().map(|&s| libm::exp(beta * s - m2)).collect();
            let sum2: f64 = terms.iter().sum();
            ((m2 + libm::log(sum2)) / beta, Some((terms, sum2)))
        }
        // joint feature is zero for every box: n equal terms of exp(0)
        Label::Neg => (libm::log(nf) / beta, None),
    };

    let loss = lse_joint - lse_observed;
    if !want_grad {
        return (loss, Vec::new());
    }

    let mut grad = vec![0.0; dim];
    for (h, b) in frame.boxes().iter().enumerate() {
        let p = pos_terms[h] / total;
        for (g, &x) in grad.iter_mut().zip(b.features.as_slice()) {
            *g += p * x;
        }
    }
    if let Some((terms, sum2)) = observed_posterior {
        for (h, b) in frame.boxes().iter().enumerate() {
            let q = terms[h] / sum2;
            for (g, &x) in grad.iter_mut().zip(b.features.as_slice()) {
                *g -= q * x;
            }
        }
    }
    (loss, grad)
}

/// Full objective: summed per-frame loss plus `(c/2)*||w||^2`, with its
/// gradient.
pub fn objective(
    w: &ModelWeights,
    data: &TrackedDataset,
    cfg: &TrainConfig,
) -> Result<(f64, FeatureVector)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if w.dim() != data.dim() {
        return Err(Error::DimMismatch { expected: data.dim(), got: w.dim() });
    }
    let (value, grad) = objective_parts(w.as_slice(), data, cfg);
    Ok((value, FeatureVector::from_computed(grad)))
}

fn objective_parts(w: &[f64], data: &TrackedDataset, cfg: &TrainConfig) -> (f64, Vec<f64>) {
    let dim = data.dim();
    let mut value = 0.0;
    let mut grad = vec![0.0; dim];
    for frame in data.frames() {
        let (loss, g) = match cfg.loss_kind {
            LossKind::Softmax => softmax_parts(w, frame, cfg.beta, true),
            LossKind::MaxMargin => maxmargin_parts(w, frame),
        };
        value += loss;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    let mut sq = 0.0;
    for (acc, &wi) in grad.iter_mut().zip(w) {
        sq += wi * wi;
        *acc += cfg.c * wi;
    }
    value += 0.5 * cfg.c * sq;
    (value, grad)
}

/// Trains the generic model from voice-activity labels only.
///
/// Starts from the zero vector and runs the quasi-Newton minimizer until the
/// gradient tolerance or the iteration cap is reached.
pub fn train_latent(data: &TrackedDataset, cfg: &TrainConfig) -> Result<(ModelWeights, TrainTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (pos, neg) = data.vad_counts();
    if pos == 0 {
        return Err(Error::MissingClass { class: Label::Pos });
    }
    if neg == 0 {
        return Err(Error::MissingClass { class: Label::Neg });
    }

    let x0 = vec![0.0; data.dim()];
    let minimum = optim::minimize(
        |x, g| {
            let (value, grad) = objective_parts(x, data, cfg);
            g.copy_from_slice(&grad);
            value
        },
        &x0,
        &cfg.optimizer_config(),
    )?;

    let loss_name = match cfg.loss_kind {
        LossKind::Softmax => "softmax",
        LossKind::MaxMargin => "maxmargin",
    };
    let meta = format!(
        "latent loss={} beta={} C={} seed={} iters={}",
        loss_name,
        cfg.beta,
        cfg.c,
        cfg.seed,
        minimum.trace.len() - 1
    );
    let weights = ModelWeights::with_metadata(FeatureVector::new(minimum.x)?, &meta);
    Ok((weights, TrainTrace { records: minimum.trace, stop: minimum.stop }))
}
