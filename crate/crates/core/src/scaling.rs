//! Closed-form finite-length predictions for the waterfall region.
//!
//! The frame-error probability at `m` slots and load `g` is
//!
//! ```text
//! FEP ≈ Q( sqrt(m) (g* - β₀ m^(-2/3) - g) / α_g )
//! ```
//!
//! with `α_g = sqrt(α₀² + g)` for an unbounded user population, or
//! `sqrt(α₀² + g (1 - (1-R) g))`, `R = (n-m)/n`, for `n` users. Packet loss
//! is the frame-error prediction scaled by the asymptotic loss constant `γ`.

use serde::{Deserialize, Serialize};

use crate::degree::DegreeDistribution;
use crate::density::{bp_threshold, compute_gamma};
use crate::error::{IrsaError, Result};

/// Standard normal tail `Q(x) = P(Z > x) = erfc(x/√2)/2`.
pub fn q_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub g_star: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma: f64,
}

/// Rows of the published scaling-parameter table, keyed by distribution name.
pub const BUILTIN_PARAMS: [(&str, ScalingParams); 5] = [
    (
        "x3",
        ScalingParams {
            g_star: 0.818469,
            alpha0: 0.497867,
            beta0: 0.964528,
            gamma: 0.783499,
        },
    ),
    (
        "x4",
        ScalingParams {
            g_star: 0.772280,
            alpha0: 0.409321,
            beta0: 0.827849,
            gamma: 0.906054,
        },
    ),
    (
        "x5",
        ScalingParams {
            g_star: 0.701780,
            alpha0: 0.375892,
            beta0: 0.760593,
            gamma: 0.961253,
        },
    ),
    (
        "lambda1",
        ScalingParams {
            g_star: 0.661090,
            alpha0: 0.404986,
            beta0: 0.849037,
            gamma: 0.982040,
        },
    ),
    (
        "lambda2",
        ScalingParams {
            g_star: 0.851325,
            alpha0: 0.496301,
            beta0: 1.50477,
            gamma: 0.835418,
        },
    ),
];

pub fn builtin_params(name: &str) -> Result<ScalingParams> {
    BUILTIN_PARAMS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| *p)
        .ok_or_else(|| IrsaError::UnknownDistribution(name.to_string()))
}

/// Name of the builtin row whose distribution equals `dist`, if any.
pub fn builtin_name(dist: &DegreeDistribution) -> Option<&'static str> {
    BUILTIN_PARAMS.iter().map(|(n, _)| *n).find(|n| {
        let b = DegreeDistribution::named(n).unwrap();
        b.terms().len() == dist.terms().len()
            && b.terms()
                .iter()
                .zip(dist.terms())
                .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() < 1e-9)
    })
}

impl ScalingParams {
    pub fn new(g_star: f64, alpha0: f64, beta0: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            g_star,
            alpha0,
            beta0,
            gamma,
        };
        if [g_star, alpha0, beta0, gamma]
            .iter()
            .any(|v| !v.is_finite() || *v <= 0.0)
            || gamma > 1.0
        {
            return Err(IrsaError::InvalidConfig(format!(
                "scaling parameters must be positive with gamma <= 1: {p:?}"
            )));
        }
        Ok(p)
    }

    /// Table row for builtin distributions; otherwise `g*` and `γ` from
    /// density evolution with caller-supplied `α₀`, `β₀`.
    pub fn for_distribution(
        dist: &DegreeDistribution,
        alpha0: Option<f64>,
        beta0: Option<f64>,
    ) -> Result<Self> {
        match (builtin_name(dist), alpha0, beta0) {
            (_, Some(a), Some(b)) => {
                let (g_star, gamma) = match builtin_name(dist) {
                    Some(name) => {
                        let row = builtin_params(name)?;
                        (row.g_star, row.gamma)
                    }
                    None => (bp_threshold(dist, 1e-7)?.g_star, compute_gamma(dist)),
                };
                Self::new(g_star, a, b, gamma)
            }
            (Some(name), None, None) => builtin_params(name),
            _ => Err(IrsaError::UnknownDistribution(format!(
                "{dist} (not a builtin; supply both alpha0 and beta0)"
            ))),
        }
    }

    /// `g* - β₀ m^(-2/3)`: the load at which the prediction crosses 1/2.
    pub fn shifted_threshold(&self, m: usize) -> f64 {
        self.g_star - self.beta0 * (m as f64).powf(-2.0 / 3.0)
    }
}

fn alpha_g(params: &ScalingParams, m: usize, g: f64, population: Option<u64>) -> Result<f64> {
    let a2 = params.alpha0 * params.alpha0;
    match population {
        None => Ok((a2 + g).sqrt()),
        Some(n) => {
            if n <= m as u64 {
                return Err(IrsaError::InvalidPopulation { n, m });
            }
            // 1 - R = m / n
            let one_minus_rate = m as f64 / n as f64;
            Ok((a2 + g * (1.0 - one_minus_rate * g)).sqrt())
        }
    }
}

/// Predicted frame-error probability. `population = None` is the
/// infinite-population form.
pub fn fep_predict(
    m: usize,
    g: f64,
    params: &ScalingParams,
    population: Option<u64>,
) -> Result<f64> {
    if m == 0 || !(g > 0.0) {
        return Err(IrsaError::InvalidConfig(format!(
            "prediction needs m >= 1 and g > 0 (m={m}, g={g})"
        )));
    }
    let alpha = alpha_g(params, m, g, population)?;
    let arg = (m as f64).sqrt() * (params.shifted_threshold(m) - g) / alpha;
    Ok(q_tail(arg).clamp(0.0, 1.0))
}

/// Predicted packet-loss probability, `γ · FEP`.
pub fn plp_predict(
    m: usize,
    g: f64,
    params: &ScalingParams,
    population: Option<u64>,
) -> Result<f64> {
    Ok((params.gamma * fep_predict(m, g, params, population)?).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_tail_basics() {
        assert_eq!(q_tail(0.0), 0.5);
        for x in [0.1, 0.7, 1.5, 3.0, 6.0, 8.0] {
            assert!((q_tail(x) + q_tail(-x) - 1.0).abs() < 1e-12);
        }
        assert!((q_tail(1.959964) - 0.025).abs() < 1e-6);
        // deep tail keeps relative precision
        assert!(q_tail(10.0) > 7.6e-24 && q_tail(10.0) < 7.7e-24);
    }

    #[test]
    fn builtin_rows() {
        let p = builtin_params("x3").unwrap();
        assert_eq!(
            (p.g_star, p.alpha0, p.beta0, p.gamma),
            (0.818469, 0.497867, 0.964528, 0.783499)
        );
        let p = builtin_params("x4").unwrap();
        assert_eq!(
            (p.g_star, p.alpha0, p.beta0, p.gamma),
            (0.772280, 0.409321, 0.827849, 0.906054)
        );
        let p = builtin_params("lambda2").unwrap();
        assert_eq!(
            (p.g_star, p.alpha0, p.beta0, p.gamma),
            (0.851325, 0.496301, 1.50477, 0.835418)
        );
        assert_eq!(
            builtin_params("x7"),
            Err(IrsaError::UnknownDistribution("x7".into()))
        );
    }

    #[test]
    fn recognizes_builtin_distributions() {
        let d: DegreeDistribution = "3:0.86,8:0.14".parse().unwrap();
        assert_eq!(builtin_name(&d), Some("lambda2"));
        let d: DegreeDistribution = "3:0.5,8:0.5".parse().unwrap();
        assert_eq!(builtin_name(&d), None);
        assert!(ScalingParams::for_distribution(&d, None, None).is_err());
        assert!(ScalingParams::for_distribution(&d, Some(0.5), None).is_err());
    }

    #[test]
    fn midpoint_predictions() {
        for (_, p) in BUILTIN_PARAMS {
            for m in [50, 200] {
                let g = p.shifted_threshold(m);
                assert!((fep_predict(m, g, &p, None).unwrap() - 0.5).abs() < 1e-15);
                assert!((plp_predict(m, g, &p, None).unwrap() - p.gamma / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn x3_point_at_m200() {
        let p = builtin_params("x3").unwrap();
        let arg = 200f64.sqrt() * (0.818469 - 0.964528 * 200f64.powf(-2.0 / 3.0) - 0.70)
            / (0.497867f64.powi(2) + 0.70).sqrt();
        let got = fep_predict(200, 0.70, &p, None).unwrap();
        assert!((got - q_tail(arg)).abs() < 1e-15);
        assert!((got - 0.0948973).abs() < 1e-6, "{got}");
    }

    #[test]
    fn vanishes_at_low_load() {
        for (_, p) in BUILTIN_PARAMS {
            assert!(fep_predict(200, 1e-6, &p, None).unwrap() < 1e-10);
        }
    }

    #[test]
    fn population_must_exceed_slots() {
        let p = builtin_params("x3").unwrap();
        assert_eq!(
            fep_predict(200, 0.5, &p, Some(200)),
            Err(IrsaError::InvalidPopulation { n: 200, m: 200 })
        );
        assert!(fep_predict(200, 0.5, &p, Some(201)).is_ok());
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ScalingParams::new(0.8, 0.5, 0.9, 1.2).is_err());
        assert!(ScalingParams::new(0.8, -0.5, 0.9, 0.5).is_err());
        assert!(ScalingParams::new(0.8, 0.5, 0.9, 0.5).is_ok());
    }
}
