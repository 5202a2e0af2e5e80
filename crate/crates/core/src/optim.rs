//! Limited-memory quasi-Newton minimizer with a strong Wolfe line search.
//!
//! Fully deterministic: the same objective and starting point always produce
//! the same iterates. Accepted steps satisfy the sufficient-decrease
//! condition, so the recorded objective values never increase.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::dot;

#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    /// Number of (s, y) correction pairs kept for the inverse Hessian model.
    pub memory: usize,
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the gradient.
    pub grad_tol: f64,
    /// Sufficient-decrease constant of the Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the Wolfe conditions.
    pub c2: f64,
    /// Evaluation budget per line search.
    pub ls_max_steps: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            ls_max_steps: 50,
        }
    }
}

/// Why the iteration loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient infinity norm fell at or below `grad_tol`.
    GradTol,
    /// `max_iters` accepted steps were taken.
    IterationCap,
    /// No step satisfying sufficient decrease could be found. Expected at
    /// the kink minimum of piecewise-linear objectives.
    LineSearchStall,
}

#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub stop: StopReason,
    /// One record per iterate, starting with the initial point.
    pub trace: Vec<IterationRecord>,
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(libm::fabs(x)))
}

fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Minimizes `eval`, which must write the gradient into its second argument
/// and return the objective value.
pub fn minimize<F>(mut eval: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g);
    check_finite(f, &g)?;

    let mut trace = vec![IterationRecord { objective: f, grad_norm: norm_inf(&g) }];
    let mut history: VecDeque<Correction> = VecDeque::new();
    let mut stop = StopReason::IterationCap;

    for iter in 0..cfg.max_iters {
        if norm_inf(&g) <= cfg.grad_tol {
            stop = StopReason::GradTol;
            break;
        }

        let mut d = two_loop_direction(&history, &g);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // model direction is not a descent direction; fall back to steepest
            history.clear();
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &d);
            if slope >= 0.0 {
                stop = StopReason::LineSearchStall;
                break;
            }
        }

        let step0 = if iter == 0 { 1.0 / norm2(&g).max(1.0) } else { 1.0 };
        let found = wolfe_search(&mut eval, &x, f, &d, slope, step0, cfg)?;
        let Some(accepted) = found else {
            stop = StopReason::LineSearchStall;
            break;
        };

        let s: Vec<f64> = accepted.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = accepted.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm2(&s) * norm2(&y) {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back(Correction { rho: 1.0 / sy, s, y });
        }

        x = accepted.x;
        f = accepted.value;
        g = accepted.grad;
        trace.push(IterationRecord { objective: f, grad_norm: norm_inf(&g) });

        if norm_inf(&g) <= cfg.grad_tol {
            stop = StopReason::GradTol;
            break;
        }
    }

    if norm_inf(&g) <= cfg.grad_tol {
        stop = StopReason::GradTol;
    }
    Ok(Minimum { grad_norm: norm_inf(&g), x, value: f, stop, trace })
}

struct Correction {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: applies the implicit inverse Hessian to -g.
fn two_loop_direction(history: &VecDeque<Correction>, g: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for c in history.iter().rev() {
        let alpha = c.rho * dot(&c.s, &q);
        for (qi, yi) in q.iter_mut().zip(&c.y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some(last) = history.back() {
        // scale by <s,y>/<y,y> of the most recent pair
        let gamma = 1.0 / (last.rho * dot(&last.y, &last.y));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (c, alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = c.rho * dot(&c.y, &q);
        for (qi, si) in q.iter_mut().zip(&c.s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

struct Accepted {
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

struct Probe {
    step: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

fn check_finite(f: f64, g: &[f64]) -> Result<()> {
    if !f.is_finite() {
        return Err(Error::NonFinite { context: "objective value" });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "objective gradient" });
    }
    Ok(())
}

/// Bracket-and-zoom strong Wolfe search along direction `d`.
///
/// Returns `None` when no step with sufficient decrease exists within the
/// evaluation budget. Any returned step strictly decreases the objective.
fn wolfe_search<F>(
    eval: &mut F,
    x: &[f64],
    f0: f64,
    d: &[f64],
    slope0: f64,
    step0: f64,
    cfg: &LbfgsConfig,
) -> Result<Option<Accepted>>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const MAX_STEP: f64 = 1e12;
    let mut probe = |step: f64| -> Result<Probe> {
        let xs: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + step * di).collect();
        let mut grad = vec![0.0; x.len()];
        let value = eval(&xs, &mut grad);
        check_finite(value, &grad)?;
        Ok(Probe { step, value, slope: dot(&grad, d), x: xs, grad })
    };

    let armijo = |p: &Probe| p.value <= f0 + cfg.c1 * p.step * slope0;
    let curvature = |p: &Probe| libm::fabs(p.slope) <= -cfg.c2 * slope0;

    let mut budget = cfg.ls_max_steps;
    let mut prev_step = 0.0;
    let mut prev_value = f0;
    let mut prev_slope = slope0;
    let mut prev_point: Option<Probe> = None;
    let mut step = step0;
    let mut fallback: Option<Probe> = None;

    while budget > 0 {
        budget -= 1;
        let p = probe(step)?;
        if armijo(&p) && (fallback.as_ref().map_or(true, |b| p.value < b.value)) {
            fallback = Some(Probe { x: p.x.clone(), grad: p.grad.clone(), ..p });
        }
        if !armijo(&p) || (prev_point.is_some() && p.value >= prev_value) {
            // minimum bracketed between the previous step and this one
            let lo = Bound { step: prev_step, value: prev_value, slope: prev_slope };
            let hi = Bound { step: p.step, value: p.value, slope: p.slope };
            return zoom(eval, x, f0, d, slope0, lo, hi, cfg, budget, fallback, prev_point);
        }
        if curvature(&p) {
            return Ok(Some(Accepted { x: p.x, value: p.value, grad: p.grad }));
        }
        if p.slope >= 0.0 {
            let lo = Bound { step: p.step, value: p.value, slope: p.slope };
            let hi = Bound { step: prev_step, value: prev_value, slope: prev_slope };
            return zoom(eval, x, f0, d, slope0, lo, hi, cfg, budget, fallback, Some(p));
        }
        prev_step = p.step;
        prev_value = p.value;
        prev_slope = p.slope;
        prev_point = Some(p);
        step *= 2.0;
        if step > MAX_STEP {
            break;
        }
    }
    Ok(finish(fallback))
}

#[derive(Clone, Copy)]
struct Bound {
    step: f64,
    value: f64,
    slope: f64,
}

/// Shrinks a bracketing interval until the strong Wolfe conditions hold.
///
/// `lo` always has the lowest objective seen among points satisfying the
/// decrease condition; `hi` is the other endpoint.
#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    eval: &mut F,
    x: &[f64],
    f0: f64,
    d: &[f64],
    slope0: f64,
    mut lo: Bound,
    mut hi: Bound,
    cfg: &LbfgsConfig,
    mut budget: usize,
    mut fallback: Option<Probe>,
    lo_probe: Option<Probe>,
) -> Result<Option<Accepted>>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut probe = |step: f64| -> Result<Probe> {
        let xs: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + step * di).collect();
        let mut grad = vec![0.0; x.len()];
        let value = eval(&xs, &mut grad);
        check_finite(value, &grad)?;
        Ok(Probe { step, value, slope: dot(&grad, d), x: xs, grad })
    };
    let armijo = |p: &Probe| p.value <= f0 + cfg.c1 * p.step * slope0;
    let curvature = |p: &Probe| libm::fabs(p.slope) <= -cfg.c2 * slope0;

    if let Some(p) = lo_probe {
        if armijo(&p) && fallback.as_ref().map_or(true, |b| p.value < b.value) {
            fallback = Some(p);
        }
    }

    while budget > 0 {
        budget -= 1;
        let width = hi.step - lo.step;
        if libm::fabs(width) <= 1e-16 * libm::fabs(lo.step).max(1.0) {
            break;
        }
        let trial = interpolate_step(&lo, &hi);
        let p = probe(trial)?;
        if armijo(&p) && fallback.as_ref().map_or(true, |b| p.value < b.value) {
            fallback = Some(Probe { x: p.x.clone(), grad: p.grad.clone(), ..p });
        }
        if !armijo(&p) || p.value >= lo.value {
            hi = Bound { step: p.step, value: p.value, slope: p.slope };
        } else {
            if curvature(&p) {
                return Ok(Some(Accepted { x: p.x, value: p.value, grad: p.grad }));
            }
            if p.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = Bound { step: p.step, value: p.value, slope: p.slope };
        }
    }
    Ok(finish(fallback))
}

fn finish(fallback: Option<Probe>) -> Option<Accepted> {
    let p = fallback?;
    Some(Accepted { x: p.x, value: p.value, grad: p.grad })
}

/// Trial step inside (lo, hi): the minimum of the quadratic matching value
/// and slope at `lo` and value at `hi`, safeguarded to the central 80% of
/// the interval, with bisection as the fallback.
fn interpolate_step(lo: &Bound, hi: &Bound) -> f64 {
    let width = hi.step - lo.step;
    let bisect = lo.step + 0.5 * width;
    let c = (hi.value - lo.value - lo.slope * width) / (width * width);
    if !(c.is_finite() && c > 0.0) {
        return bisect;
    }
    let t = lo.step - lo.slope / (2.0 * c);
    let near = lo.step + 0.1 * width;
    let far = lo.step + 0.9 * width;
    let (a, b) = (near.min(far), near.max(far));
    if t > a && t < b {
        t
    } else {
        bisect
    }
}
