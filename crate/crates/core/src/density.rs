//! Density evolution for SIC in the limit of infinitely many slots.
//!
//! With `q` the probability that a user→slot edge is still unresolved and
//! `p` the probability that a slot→user edge is, one round of peeling maps
//!
//! ```text
//! p = 1 - exp(-g Λ'(1) q)      (Poisson slot degrees)
//! q = λ(p)
//! ```
//!
//! starting from `q = 1`. The load threshold `g*` is the largest `g` for
//! which the recursion is driven to zero.

use serde::Serialize;

use crate::degree::{DegreeDistribution, EdgeDistribution};
use crate::error::{IrsaError, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
/// `q` below this counts as "decoding succeeded" in threshold searches.
pub const VANISHING_Q: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeState {
    /// user → slot erasure probability
    pub q: f64,
    /// slot → user erasure probability
    pub p: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub g_star: f64,
    pub bracket_width: f64,
    pub iterations_used: usize,
}

/// Knobs for [`bp_threshold_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOptions {
    pub bracket: (f64, f64),
    pub max_iters: usize,
    pub de_tol: f64,
    pub vanishing_q: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            bracket: (0.01, 1.0),
            max_iters: DEFAULT_MAX_ITERS,
            de_tol: DEFAULT_TOL,
            vanishing_q: VANISHING_Q,
        }
    }
}

/// Successive `q` values of the recursion, starting after `q₀ = 1`.
pub struct DeIterates {
    edge: EdgeDistribution,
    slope: f64,
    q: f64,
}

impl DeIterates {
    pub fn new(dist: &DegreeDistribution, g: f64) -> Self {
        let edge = dist.edge_perspective();
        let slope = g * edge.mean_degree();
        Self { edge, slope, q: 1.0 }
    }

    fn slot_to_user(&self, q: f64) -> f64 {
        -(-self.slope * q).exp_m1()
    }
}

impl Iterator for DeIterates {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let p = self.slot_to_user(self.q);
        self.q = self.edge.eval(p);
        Some(self.q)
    }
}

/// Iterates the recursion from `q = 1` until `|Δq| < tol` or `max_iters`
/// rounds have run. Non-convergence is not an error: the last state comes
/// back with `iterations == max_iters`.
pub fn de_fixed_point(dist: &DegreeDistribution, g: f64, max_iters: usize, tol: f64) -> DeState {
    let mut it = DeIterates::new(dist, g);
    let mut q = 1.0;
    let mut iterations = 0;
    while iterations < max_iters {
        let next = it.next().unwrap();
        iterations += 1;
        let delta = (next - q).abs();
        q = next;
        if delta < tol {
            break;
        }
    }
    DeState {
        q,
        p: it.slot_to_user(q),
        iterations,
    }
}

/// Asymptotic packet loss at load `g`: `Σ_d λ_d p^d`, with `p` the
/// slot→user fixed point and the degree-`d` share weighted by `λ_d`.
pub fn asymptotic_plp(dist: &DegreeDistribution, g: f64) -> f64 {
    let state = de_fixed_point(dist, g, DEFAULT_MAX_ITERS, DEFAULT_TOL);
    if state.q == 0.0 {
        return 0.0;
    }
    let p = state.p;
    dist.edge_perspective()
        .terms()
        .iter()
        .map(|&(d, l)| l * p.powi(d as i32))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Asymptotic fraction of active users left unresolved, `Λ(p)`.
pub fn unresolved_user_fraction(dist: &DegreeDistribution, g: f64) -> f64 {
    let state = de_fixed_point(dist, g, DEFAULT_MAX_ITERS, DEFAULT_TOL);
    if state.q == 0.0 {
        return 0.0;
    }
    dist.eval(state.p).clamp(0.0, 1.0)
}

/// The loss constant used to scale frame-error predictions into packet-loss
/// predictions: [`asymptotic_plp`] at `g = 1`.
pub fn compute_gamma(dist: &DegreeDistribution) -> f64 {
    asymptotic_plp(dist, 1.0)
}

pub fn bp_threshold(dist: &DegreeDistribution, tol: f64) -> Result<ThresholdResult> {
    bp_threshold_with(dist, tol, &ThresholdOptions::default())
}

/// Bisection on `g` for the edge of the "q vanishes" region.
pub fn bp_threshold_with(
    dist: &DegreeDistribution,
    tol: f64,
    opts: &ThresholdOptions,
) -> Result<ThresholdResult> {
    let decodes =
        |g: f64| de_fixed_point(dist, g, opts.max_iters, opts.de_tol).q < opts.vanishing_q;
    let (mut lo, mut hi) = opts.bracket;
    if !(lo > 0.0 && hi > lo && tol > 0.0) || !decodes(lo) || decodes(hi) {
        return Err(IrsaError::BracketFailure { lo, hi });
    }
    let mut iterations_used = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if decodes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations_used += 1;
    }
    Ok(ThresholdResult {
        g_star: 0.5 * (lo + hi),
        bracket_width: hi - lo,
        iterations_used,
    })
}
