//! Ranking metrics, thresholding, smoothing, and cross-validation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::latent::TrainConfig;
use crate::model::{score, FrameSample, Label, ModelWeights, TrackId, TrackedDataset};

/// One evaluated (frame, track) cell: a raw score and its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPoint {
    pub frame_index: u64,
    pub track_id: TrackId,
    pub score: f64,
    pub gt_label: Label,
}

/// A set of scored points with at most one entry per (frame, track).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSeries {
    points: Vec<ScoredPoint>,
}

impl ScoredSeries {
    /// Sorts by (frame, track) and rejects duplicates and non-finite scores.
    pub fn new(mut points: Vec<ScoredPoint>) -> Result<ScoredSeries> {
        if points.iter().any(|p| !p.score.is_finite()) {
            return Err(Error::NonFinite { context: "scored series" });
        }
        points.sort_by_key(|p| (p.frame_index, p.track_id));
        for w in points.windows(2) {
            if w[0].frame_index == w[1].frame_index && w[0].track_id == w[1].track_id {
                return Err(Error::InvalidData(format!(
                    "duplicate scored point for frame {} track {}",
                    w[0].frame_index, w[0].track_id
                )));
            }
        }
        Ok(ScoredSeries { points })
    }

    pub fn points(&self) -> &[ScoredPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Splits into per-track series, keyed by track id.
    pub fn by_track(&self) -> BTreeMap<TrackId, ScoredSeries> {
        let mut out: BTreeMap<TrackId, Vec<ScoredPoint>> = BTreeMap::new();
        for p in &self.points {
            out.entry(p.track_id).or_default().push(*p);
        }
        out.into_iter().map(|(k, v)| (k, ScoredSeries { points: v })).collect()
    }
}

/// Scores every ground-truth-labelled box of a dataset with one model.
pub fn score_dataset(data: &TrackedDataset, w: &ModelWeights) -> Result<ScoredSeries> {
    let mut points = Vec::new();
    for frame in data.frames() {
        for b in frame.boxes() {
            if let Some(gt) = b.gt_label {
                points.push(ScoredPoint {
                    frame_index: frame.frame_index(),
                    track_id: b.track_id,
                    score: score(w, &b.features)?,
                    gt_label: gt,
                });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidData("dataset has no ground-truth labels".into()));
    }
    ScoredSeries::new(points)
}

/// Area under the ROC curve by the trapezoidal rule.
///
/// Equal scores are swept as one block, so the result also equals the
/// pairwise statistic `P(score_pos > score_neg) + 0.5 * P(equal)`.
pub fn roc_auc(series: &ScoredSeries) -> Result<f64> {
    let n_pos = series.points.iter().filter(|p| p.gt_label.is_pos()).count();
    let n_neg = series.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassGroundTruth);
    }
    let mut ranked: Vec<(f64, bool)> =
        series.points.iter().map(|p| (p.score, p.gt_label.is_pos())).collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));

    let (np, nn) = (n_pos as f64, n_neg as f64);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_tpr = 0.0;
    let mut prev_fpr = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == threshold {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / np;
        let fpr = fp as f64 / nn;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(area)
}

/// Score threshold whose operating point (predict positive at or above the
/// threshold) is closest to the equal-error diagonal `TPR = 1 - FPR`.
///
/// Candidates are the distinct scores; ties in `|TPR + FPR - 1|` go to the
/// higher threshold. The implicit predict-nothing candidate sits at distance
/// 1, the worst possible, so it never wins.
pub fn threshold_at_diagonal(series: &ScoredSeries) -> Result<f64> {
    let n_pos = series.points.iter().filter(|p| p.gt_label.is_pos()).count();
    let n_neg = series.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassGroundTruth);
    }
    let mut ranked: Vec<(f64, bool)> =
        series.points.iter().map(|p| (p.score, p.gt_label.is_pos())).collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));

    let (np, nn) = (n_pos as f64, n_neg as f64);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut best_threshold = ranked[0].0;
    let mut best_distance = f64::INFINITY;
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == threshold {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / np;
        let fpr = fp as f64 / nn;
        let distance = libm::fabs(tpr + fpr - 1.0);
        if distance < best_distance {
            best_distance = distance;
            best_threshold = threshold;
        }
    }
    Ok(best_threshold)
}

/// Centered majority vote over an odd window, truncated at the boundaries.
///
/// Boundary windows can be even; vote ties keep the original label. A window
/// of 1 is the identity.
pub fn temporal_smooth(labels: &[Label], window_frames: usize) -> Vec<Label> {
    assert!(window_frames >= 1 && window_frames % 2 == 1, "window must be odd");
    if window_frames == 1 || labels.is_empty() {
        return labels.to_vec();
    }
    let half = window_frames / 2;
    let n = labels.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let total = hi - lo + 1;
            let pos = labels[lo..=hi].iter().filter(|l| l.is_pos()).count();
            if 2 * pos > total {
                Label::Pos
            } else if 2 * pos == total {
                labels[i]
            } else {
                Label::Neg
            }
        })
        .collect()
}

/// F-score on the positive class, with a flag marking the degenerate
/// zero-denominator cases (no predicted or no actual positives).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub value: f64,
    pub degenerate: bool,
}

pub fn f_score(pred: &[Label], gt: &[Label]) -> FScore {
    assert_eq!(pred.len(), gt.len(), "sequences must have equal length");
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        match (p.is_pos(), g.is_pos()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 || tp + fn_ == 0 {
        return FScore { value: 0.0, degenerate: true };
    }
    if tp == 0 {
        return FScore { value: 0.0, degenerate: false };
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    FScore { value: 2.0 * precision * recall / (precision + recall), degenerate: false }
}

/// Per-speaker AUC over the series, plus the mean across speakers.
///
/// Tracks whose ground truth has a single class are skipped; at least one
/// track must be rankable.
pub fn per_track_auc(series: &ScoredSeries) -> Result<(BTreeMap<TrackId, f64>, f64)> {
    let mut aucs = BTreeMap::new();
    for (track, sub) in series.by_track() {
        match roc_auc(&sub) {
            Ok(a) => {
                aucs.insert(track, a);
            }
            Err(Error::SingleClassGroundTruth) => {}
            Err(e) => return Err(e),
        }
    }
    if aucs.is_empty() {
        return Err(Error::SingleClassGroundTruth);
    }
    let mean = aucs.values().sum::<f64>() / aucs.len() as f64;
    Ok((aucs, mean))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldAuc {
    pub fold: usize,
    pub track_id: TrackId,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeakerSummary {
    pub track_id: TrackId,
    pub mean_auc: f64,
    /// Population standard deviation across folds.
    pub std_auc: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FCurvePoint {
    pub window_frames: usize,
    pub track_id: TrackId,
    pub fscore: f64,
}

/// Evaluation results; the F-curve and thresholds are filled only by runs
/// that compute them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub fold_aucs: Vec<FoldAuc>,
    pub speakers: Vec<SpeakerSummary>,
    /// Mean of the per-speaker mean AUCs.
    pub mean_auc: f64,
    pub f_curve: Vec<FCurvePoint>,
    pub thresholds: Vec<(TrackId, f64)>,
}

/// Splits a dataset into `k` contiguous folds with frames renumbered from 0.
pub fn split_into_folds(data: &TrackedDataset, k: usize) -> Result<Vec<TrackedDataset>> {
    if k < 2 {
        return Err(Error::InvalidConfig("fold count must be at least 2".into()));
    }
    if data.len() < k {
        return Err(Error::InvalidData(format!(
            "cannot split {} frames into {k} folds",
            data.len()
        )));
    }
    let per = data.len() / k;
    let extra = data.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0usize;
    for i in 0..k {
        let size = per + usize::from(i < extra);
        let chunk = &data.frames()[start..start + size];
        let frames: Vec<FrameSample> = chunk
            .iter()
            .enumerate()
            .map(|(j, f)| {
                FrameSample::new(j as u64, f.vad_label(), f.boxes().to_vec())
                    .expect("frames were already validated")
            })
            .collect();
        folds.push(TrackedDataset::new(data.dim(), data.frame_rate_hz(), frames)?);
        start += size;
    }
    Ok(folds)
}

/// Concatenates folds into one training set, renumbering frames with a gap
/// between folds so no artificial temporal adjacency appears.
pub fn concat_folds(folds: &[&TrackedDataset]) -> Result<TrackedDataset> {
    let first = folds.first().ok_or(Error::EmptyDataset)?;
    let mut frames = Vec::new();
    let mut next = 0u64;
    for fold in folds {
        for f in fold.frames() {
            frames.push(FrameSample::new(next, f.vad_label(), f.boxes().to_vec())?);
            next += 1;
        }
        next += 1000;
    }
    TrackedDataset::new(first.dim(), first.frame_rate_hz(), frames)
}

/// Leave-one-out cross-validation: trains on all folds but one, evaluates
/// per-speaker AUC on the held-out fold, and summarizes mean ± population
/// standard deviation per speaker.
pub fn loocv<F>(
    folds: &[TrackedDataset],
    mut train_fn: F,
    cfg: &TrainConfig,
) -> Result<EvalReport>
where
    F: FnMut(&TrackedDataset, &TrainConfig) -> Result<ModelWeights>,
{
    if folds.len() < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let dim = folds[0].dim();
    let roster = folds[0].track_ids().to_vec();
    for f in folds {
        if f.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, got: f.dim() });
        }
        if f.track_ids() != roster {
            return Err(Error::InvalidData("folds disagree on the track roster".into()));
        }
    }

    let mut fold_aucs = Vec::new();
    for held_out in 0..folds.len() {
        let train_parts: Vec<&TrackedDataset> = folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held_out)
            .map(|(_, f)| f)
            .collect();
        let merged = concat_folds(&train_parts)?;
        let model = train_fn(&merged, cfg)?;
        let series = score_dataset(&folds[held_out], &model)?;
        let (per_track, _) = per_track_auc(&series)?;
        for (track, auc) in per_track {
            fold_aucs.push(FoldAuc { fold: held_out, track_id: track, auc });
        }
    }

    let mut speakers = Vec::new();
    for &track in &roster {
        let values: Vec<f64> =
            fold_aucs.iter().filter(|r| r.track_id == track).map(|r| r.auc).collect();
        if values.is_empty() {
            continue;
        }
        let (mean, std) = mean_and_population_std(&values);
        speakers.push(SpeakerSummary { track_id: track, mean_auc: mean, std_auc: std, folds: values.len() });
    }
    let mean_auc = speakers.iter().map(|s| s.mean_auc).sum::<f64>() / speakers.len() as f64;
    Ok(EvalReport { fold_aucs, speakers, mean_auc, f_curve: Vec::new(), thresholds: Vec::new() })
}

pub(crate) fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// One line of the plot-ready timeline: the per-track min-max-normalized raw
/// score, the smoothed binary decision, and the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineRow {
    pub frame_index: u64,
    pub track_id: TrackId,
    pub norm_score: f64,
    pub decision: Label,
    pub gt_label: Label,
}

/// Builds timeline rows: scores are normalized to [0, 1] per track (zero
/// range normalizes to 0), decisions are thresholded on the raw score and
/// then majority-smoothed with the given odd window.
pub fn timeline_rows(series: &ScoredSeries, threshold: f64, window_frames: usize) -> Vec<TimelineRow> {
    let mut rows = Vec::with_capacity(series.len());
    for (track, sub) in series.by_track() {
        let lo = sub.points().iter().map(|p| p.score).fold(f64::INFINITY, f64::min);
        let hi = sub.points().iter().map(|p| p.score).fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let raw: Vec<Label> = sub
            .points()
            .iter()
            .map(|p| if p.score >= threshold { Label::Pos } else { Label::Neg })
            .collect();
        let smoothed = temporal_smooth(&raw, window_frames);
        for (p, decision) in sub.points().iter().zip(smoothed) {
            let norm_score = if range == 0.0 { 0.0 } else { (p.score - lo) / range };
            rows.push(TimelineRow {
                frame_index: p.frame_index,
                track_id: track,
                norm_score,
                decision,
                gt_label: p.gt_label,
            });
        }
    }
    rows.sort_by_key(|r| (r.frame_index, r.track_id));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn series(points: &[(f64, Label)]) -> ScoredSeries {
        ScoredSeries::new(
            points
                .iter()
                .enumerate()
                .map(|(i, &(score, gt_label))| ScoredPoint {
                    frame_index: i as u64,
                    track_id: 0,
                    score,
                    gt_label,
                })
                .collect(),
        )
        .unwrap()
    }

    fn random_series(rng: &mut ChaCha20Rng, n: usize, ties: bool) -> ScoredSeries {
        loop {
            let points: Vec<(f64, Label)> = (0..n)
                .map(|_| {
                    let s = if ties {
                        (rng.random::<f64>() * 8.0).floor() / 4.0
                    } else {
                        rng.random::<f64>()
                    };
                    let l = if rng.random::<f64>() < 0.4 { Label::Pos } else { Label::Neg };
                    (s, l)
                })
                .collect();
            let pos = points.iter().filter(|(_, l)| l.is_pos()).count();
            if pos > 0 && pos < n {
                return series(&points);
            }
        }
    }

    /// O(n^2) pairwise comparison statistic.
    fn pairwise_auc(s: &ScoredSeries) -> f64 {
        let pos: Vec<f64> =
            s.points().iter().filter(|p| p.gt_label.is_pos()).map(|p| p.score).collect();
        let neg: Vec<f64> =
            s.points().iter().filter(|p| !p.gt_label.is_pos()).map(|p| p.score).collect();
        let mut total = 0.0;
        for &p in &pos {
            for &q in &neg {
                if p > q {
                    total += 1.0;
                } else if p == q {
                    total += 0.5;
                }
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_perfect_ranking() {
        let s = series(&[(0.9, Label::Pos), (0.8, Label::Pos), (0.2, Label::Neg), (0.1, Label::Neg)]);
        assert_eq!(roc_auc(&s).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_equal_scores() {
        let s = series(&[(0.5, Label::Pos), (0.5, Label::Neg), (0.5, Label::Pos), (0.5, Label::Neg)]);
        assert_eq!(roc_auc(&s).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_errors() {
        let s = series(&[(0.5, Label::Pos), (0.7, Label::Pos)]);
        assert!(matches!(roc_auc(&s), Err(Error::SingleClassGroundTruth)));
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        for trial in 0..20 {
            let s = random_series(&mut rng, 200, trial % 2 == 0);
            let a = roc_auc(&s).unwrap();
            let b = pairwise_auc(&s);
            assert!((a - b).abs() < 1e-9, "trapezoid {a} pairwise {b}");
        }
    }

    #[test]
    fn auc_label_flip_complements() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let s = random_series(&mut rng, 60, false);
        let flipped = ScoredSeries::new(
            s.points()
                .iter()
                .map(|p| ScoredPoint { gt_label: p.gt_label.flip(), ..*p })
                .collect(),
        )
        .unwrap();
        let a = roc_auc(&s).unwrap();
        let b = roc_auc(&flipped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_separable_symmetric() {
        let s = series(&[(1.0, Label::Pos), (1.0, Label::Pos), (-1.0, Label::Neg), (-1.0, Label::Neg)]);
        let t = threshold_at_diagonal(&s).unwrap();
        assert!(t > -1.0 && t <= 1.0, "t={t}");
        // operating point at the chosen threshold: TPR 1, FPR 0
        let tp = s.points().iter().filter(|p| p.gt_label.is_pos() && p.score >= t).count();
        let fp = s.points().iter().filter(|p| !p.gt_label.is_pos() && p.score >= t).count();
        assert_eq!((tp, fp), (2, 0));
    }

    #[test]
    fn threshold_degenerate_equal_scores() {
        let s = series(&[(0.3, Label::Pos), (0.3, Label::Neg)]);
        assert_eq!(threshold_at_diagonal(&s).unwrap(), 0.3);
    }

    #[test]
    fn threshold_minimizes_over_all_candidates() {
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        for trial in 0..20 {
            let s = random_series(&mut rng, 50, trial % 2 == 0);
            let chosen = threshold_at_diagonal(&s).unwrap();
            let distance = |t: f64| {
                let np = s.points().iter().filter(|p| p.gt_label.is_pos()).count() as f64;
                let nn = s.len() as f64 - np;
                let tp = s.points().iter().filter(|p| p.gt_label.is_pos() && p.score >= t).count()
                    as f64;
                let fp = s.points().iter().filter(|p| !p.gt_label.is_pos() && p.score >= t).count()
                    as f64;
                (tp / np + fp / nn - 1.0).abs()
            };
            // exhaustive sweep over every candidate, including one above all
            // scores (predict nothing)
            let mut best = f64::INFINITY;
            let top = s.points().iter().map(|p| p.score).fold(f64::NEG_INFINITY, f64::max);
            for t in s.points().iter().map(|p| p.score).chain([top + 1.0]) {
                best = best.min(distance(t));
            }
            assert!((distance(chosen) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_identity_window() {
        let labels = vec![Label::Pos, Label::Neg, Label::Pos];
        assert_eq!(temporal_smooth(&labels, 1), labels);
    }

    #[test]
    fn smooth_constant_sequence_unchanged() {
        let labels = vec![Label::Pos; 12];
        for w in [1, 3, 5, 9] {
            assert_eq!(temporal_smooth(&labels, w), labels);
        }
    }

    #[test]
    fn smooth_corrects_single_flip() {
        let mut labels = vec![Label::Pos; 9];
        labels[4] = Label::Neg;
        let smoothed = temporal_smooth(&labels, 3);
        assert!(smoothed.iter().all(|l| l.is_pos()));
    }

    proptest! {
        #[test]
        fn smooth_preserves_unanimous_windows(
            bits in proptest::collection::vec(proptest::bool::ANY, 3..50),
            half in 1usize..4,
        ) {
            let labels: Vec<Label> =
                bits.iter().map(|&b| if b { Label::Pos } else { Label::Neg }).collect();
            let window = 2 * half + 1;
            let out = temporal_smooth(&labels, window);
            for i in 0..labels.len() {
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(labels.len() - 1);
                let unanimous = labels[lo..=hi].iter().all(|l| *l == labels[i]);
                if unanimous {
                    prop_assert_eq!(out[i], labels[i]);
                }
            }
        }

        #[test]
        fn auc_invariant_under_increasing_transforms(
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let s = random_series(&mut rng, 40, false);
            let base = roc_auc(&s).unwrap();
            for transform in [|x: f64| 3.0 * x + 7.0, |x: f64| x.exp(), |x: f64| x.atan()] {
                let mapped = ScoredSeries::new(
                    s.points()
                        .iter()
                        .map(|p| ScoredPoint { score: transform(p.score), ..*p })
                        .collect(),
                )
                .unwrap();
                let a = roc_auc(&mapped).unwrap();
                prop_assert!((a - base).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f_score_perfect_and_disjoint() {
        let gt = vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg];
        assert_eq!(f_score(&gt, &gt), FScore { value: 1.0, degenerate: false });
        let complement: Vec<Label> = gt.iter().map(|l| l.flip()).collect();
        let r = f_score(&complement, &gt);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn f_score_hand_computed_confusion() {
        // TP=2, FP=1, FN=1
        let pred = vec![Label::Pos, Label::Pos, Label::Pos, Label::Neg, Label::Neg];
        let gt = vec![Label::Pos, Label::Pos, Label::Neg, Label::Pos, Label::Neg];
        let r = f_score(&pred, &gt);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-15);
        assert!(!r.degenerate);
    }

    #[test]
    fn f_score_degenerate_flag() {
        let no_pred = vec![Label::Neg, Label::Neg];
        let gt = vec![Label::Pos, Label::Neg];
        assert_eq!(f_score(&no_pred, &gt), FScore { value: 0.0, degenerate: true });
        let no_actual = vec![Label::Neg, Label::Neg];
        let pred = vec![Label::Pos, Label::Neg];
        assert_eq!(f_score(&pred, &no_actual), FScore { value: 0.0, degenerate: true });
    }

    #[test]
    fn timeline_constant_scores_normalize_to_zero() {
        let s = series(&[(2.0, Label::Pos), (2.0, Label::Neg), (2.0, Label::Pos)]);
        let rows = timeline_rows(&s, 0.0, 1);
        assert!(rows.iter().all(|r| r.norm_score == 0.0));
        assert!(rows.iter().all(|r| r.decision == Label::Pos), "2.0 >= 0.0");
    }

    #[test]
    fn timeline_normalizes_per_track_and_smooths() {
        let mut points = Vec::new();
        for i in 0..10u64 {
            points.push(ScoredPoint {
                frame_index: i,
                track_id: 0,
                score: i as f64,
                gt_label: Label::Pos,
            });
            points.push(ScoredPoint {
                frame_index: i,
                track_id: 1,
                score: -(i as f64) * 10.0,
                gt_label: Label::Neg,
            });
        }
        let s = ScoredSeries::new(points).unwrap();
        let rows = timeline_rows(&s, 4.5, 3);
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.norm_score));
        }
        let t0_last = rows.iter().find(|r| r.track_id == 0 && r.frame_index == 9).unwrap();
        assert_eq!(t0_last.norm_score, 1.0);
    }

    fn separable_fold(seed: u64, frames: usize) -> TrackedDataset {
        use crate::model::{BoxObservation, FeatureVector, FrameSample};
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let fs: Vec<FrameSample> = (0..frames as u64)
            .map(|i| {
                let speaking = (i % 2) as usize;
                let boxes: Vec<BoxObservation> = (0..2)
                    .map(|t| {
                        let mut v = vec![0.1 * rng.random::<f64>(); 3];
                        if t == speaking {
                            v[0] += 2.0;
                        }
                        BoxObservation::with_gt(
                            t as TrackId,
                            FeatureVector::new(v).unwrap(),
                            if t == speaking { Label::Pos } else { Label::Neg },
                        )
                    })
                    .collect();
                FrameSample::new(i, Label::Pos, boxes).unwrap()
            })
            .collect();
        TrackedDataset::new(3, 10.0, fs).unwrap()
    }

    #[test]
    fn loocv_identical_folds_zero_std() {
        let fold = separable_fold(50, 24);
        let folds = vec![fold.clone(), fold];
        let fixed = ModelWeights::new(
            crate::model::FeatureVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
        );
        let report = loocv(
            &folds,
            |_data, _cfg| Ok(fixed.clone()),
            &TrainConfig::default(),
        )
        .unwrap();
        assert_eq!(report.fold_aucs.len(), 4, "2 folds x 2 speakers");
        for s in &report.speakers {
            assert_eq!(s.std_auc, 0.0);
            assert_eq!(s.folds, 2);
        }
    }

    #[test]
    fn loocv_report_matches_independent_recomputation() {
        let folds: Vec<TrackedDataset> =
            (0..7).map(|i| separable_fold(60 + i, 20)).collect();
        let fixed = ModelWeights::new(
            crate::model::FeatureVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
        );
        let report =
            loocv(&folds, |_d, _c| Ok(fixed.clone()), &TrainConfig::default()).unwrap();
        assert_eq!(report.speakers.len(), 2);
        // recompute each fold AUC with a single-fold evaluation
        for row in &report.fold_aucs {
            let series = score_dataset(&folds[row.fold], &fixed).unwrap();
            let (per_track, _) = per_track_auc(&series).unwrap();
            let again = per_track[&row.track_id];
            assert!((again - row.auc).abs() < 1e-12);
        }
        // summary layout: one row per speaker with mean of its folds
        for s in &report.speakers {
            let values: Vec<f64> = report
                .fold_aucs
                .iter()
                .filter(|r| r.track_id == s.track_id)
                .map(|r| r.auc)
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert!((mean - s.mean_auc).abs() < 1e-12);
        }
    }

    #[test]
    fn loocv_rejects_mismatched_folds() {
        let a = separable_fold(70, 10);
        let b = {
            use crate::model::{BoxObservation, FeatureVector, FrameSample};
            let fs: Vec<FrameSample> = (0..4u64)
                .map(|i| {
                    let boxes = vec![BoxObservation::with_gt(
                        0,
                        FeatureVector::new(vec![1.0, 1.0]).unwrap(),
                        Label::Pos,
                    )];
                    FrameSample::new(i, Label::Pos, boxes).unwrap()
                })
                .collect();
            TrackedDataset::new(2, 10.0, fs).unwrap()
        };
        let r = loocv(
            &[a, b],
            |_d, _c| Ok(ModelWeights::zeros(3)),
            &TrainConfig::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn split_folds_partitions_frames() {
        let data = separable_fold(80, 23);
        let folds = split_into_folds(&data, 7).unwrap();
        assert_eq!(folds.len(), 7);
        let total: usize = folds.iter().map(|f| f.len()).sum();
        assert_eq!(total, 23);
        for f in &folds {
            assert_eq!(f.track_ids(), data.track_ids());
        }
    }
}
