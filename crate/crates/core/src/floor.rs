//! Low-load error floor from the dominant stopping set.
//!
//! Two active users that draw the same degree `d` and the same `d` slots can
//! never be separated by SIC. With Poisson(g·m) active users the expected
//! number of such pairs is
//!
//! ```text
//! E₂ = (g m)² / 2 · Σ_d Λ_d² / C(m, d)
//! ```
//!
//! giving `FEP ≈ 1 - exp(-E₂)` and, since each pair loses two of the `g m`
//! expected packets, `PLP ≈ 2 E₂ / (g m)`. Larger stopping sets are ignored,
//! so the estimate leans low.

use serde::Serialize;

use crate::degree::DegreeDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FloorEstimate {
    pub plp_floor: f64,
    pub fep_floor: f64,
    /// Always true: only the size-2 term is included.
    pub dominant_term_only: bool,
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Expected number of identical-slot-set pairs, `E₂`.
pub fn expected_identical_pairs(dist: &DegreeDistribution, m: usize, g: f64) -> f64 {
    let mean_users = g * m as f64;
    let collide: f64 = dist
        .terms()
        .iter()
        .filter(|&&(d, _)| d <= m)
        .map(|&(d, c)| c * c * (-ln_choose(m, d)).exp())
        .sum();
    0.5 * mean_users * mean_users * collide
}

pub fn floor_estimate(dist: &DegreeDistribution, m: usize, g: f64) -> FloorEstimate {
    let mean_users = g * m as f64;
    let pairs = expected_identical_pairs(dist, m, g);
    let plp = if mean_users > 0.0 {
        2.0 * pairs / mean_users
    } else {
        0.0
    };
    FloorEstimate {
        plp_floor: plp.clamp(0.0, 1.0),
        fep_floor: (-(-pairs).exp_m1()).clamp(0.0, 1.0),
        dominant_term_only: true,
    }
}
