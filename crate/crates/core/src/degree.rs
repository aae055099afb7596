//! User repetition-degree distributions.
//!
//! A [`DegreeDistribution`] is the node-perspective polynomial
//! `Λ(x) = Σ_d Λ_d x^d`: an active user sends `d` copies of its packet with
//! probability `Λ_d`. The edge-perspective counterpart `λ(x) = Σ_d λ_d x^{d-1}`
//! with `λ_d = Λ_d d / Λ'(1)` is what the peeling analysis runs on.
//!
//! Distributions are written on the command line and in config files as
//! comma-separated `degree:probability` pairs, e.g. `3:0.86,8:0.14`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IrsaError, Result};

/// Inputs further than this from a unit sum are rejected.
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Internal normalization target.
pub const INTERNAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DegreeDistribution {
    /// Non-zero terms sorted by degree.
    terms: Vec<(usize, f64)>,
    /// Running sums of `terms` probabilities, last entry forced to 1.
    cdf: Vec<f64>,
    renormalized: bool,
}

impl DegreeDistribution {
    /// Builds a distribution from a degree → probability map.
    ///
    /// Sums within [`INPUT_TOLERANCE`] of one are renormalized and flagged
    /// (see [`was_renormalized`](Self::was_renormalized)); anything further
    /// off is rejected.
    pub fn new(coeffs: &BTreeMap<usize, f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(IrsaError::EmptyDistribution);
        }
        for (&degree, &coeff) in coeffs {
            if degree == 0 {
                return Err(IrsaError::InvalidDegree(degree));
            }
            if !coeff.is_finite() || coeff < 0.0 {
                return Err(IrsaError::NegativeCoefficient { degree, coeff });
            }
        }
        let sum: f64 = coeffs.values().sum();
        if (sum - 1.0).abs() > INPUT_TOLERANCE {
            return Err(IrsaError::NotNormalized { sum });
        }
        let renormalized = sum != 1.0;
        let terms: Vec<(usize, f64)> = coeffs
            .iter()
            .filter(|(_, &c)| c > 0.0)
            .map(|(&d, &c)| (d, c / sum))
            .collect();
        if terms.is_empty() {
            return Err(IrsaError::EmptyDistribution);
        }

        let mut cdf = Vec::with_capacity(terms.len());
        let mut acc = 0.0;
        for &(_, c) in &terms {
            acc += c;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;

        let dist = Self {
            terms,
            cdf,
            renormalized,
        };
        if dist.has_degree_one() {
            log::warn!("distribution {dist} puts mass on degree 1");
        }
        if renormalized {
            log::warn!("distribution coefficients summed to {sum}; renormalized");
        }
        Ok(dist)
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(d, p) in pairs {
            *map.entry(d).or_insert(0.0) += p;
        }
        Self::new(&map)
    }

    /// Regular distribution `Λ(x) = x^d`.
    pub fn regular(degree: usize) -> Result<Self> {
        Self::from_pairs(&[(degree, 1.0)])
    }

    /// Named distributions: `x3`, `x4`, `x5`, `lambda1` (0.5x⁴+0.5x⁸) and
    /// `lambda2` (0.86x³+0.14x⁸).
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "x3" => Self::regular(3),
            "x4" => Self::regular(4),
            "x5" => Self::regular(5),
            "lambda1" => Self::from_pairs(&[(4, 0.5), (8, 0.5)]),
            "lambda2" => Self::from_pairs(&[(3, 0.86), (8, 0.14)]),
            other => Err(IrsaError::UnknownDistribution(other.to_string())),
        }
    }

    /// Accepts either a builtin name or a `d:p,...` spec.
    pub fn from_name_or_spec(s: &str) -> Result<Self> {
        match Self::named(s.trim()) {
            Ok(d) => Ok(d),
            Err(IrsaError::UnknownDistribution(_)) => s.parse(),
            Err(e) => Err(e),
        }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    /// Probability `Λ_d` (zero for degrees not in the support).
    pub fn coeff(&self, degree: usize) -> f64 {
        self.terms
            .iter()
            .find(|(d, _)| *d == degree)
            .map_or(0.0, |(_, c)| *c)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.last().map(|(d, _)| *d).unwrap()
    }

    pub fn min_degree(&self) -> usize {
        self.terms[0].0
    }

    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn has_degree_one(&self) -> bool {
        self.min_degree() == 1
    }

    /// True when no degree ≥ 2 carries mass; SIC then only resolves users
    /// that happen to land alone.
    pub fn is_degenerate(&self) -> bool {
        self.max_degree() < 2
    }

    /// `Λ'(1) = Σ_d d Λ_d`, the average number of copies per user.
    pub fn mean_degree(&self) -> f64 {
        self.terms.iter().map(|&(d, c)| d as f64 * c).sum()
    }

    /// Evaluates `Λ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(d, c)| c * x.powi(d as i32)).sum()
    }

    pub fn edge_perspective(&self) -> EdgeDistribution {
        let mean = self.mean_degree();
        let terms = self
            .terms
            .iter()
            .map(|&(d, c)| (d, c * d as f64 / mean))
            .collect();
        EdgeDistribution {
            terms,
            mean_degree: mean,
        }
    }

    /// Draws a degree with probability `Λ_d` using one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.terms.len() == 1 {
            return self.terms[0].0;
        }
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.terms[idx.min(self.terms.len() - 1)].0
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (d, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}:{c}")?;
        }
        Ok(())
    }
}

impl FromStr for DegreeDistribution {
    type Err = IrsaError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| IrsaError::ParseDistribution {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        if s.trim().is_empty() {
            return Err(IrsaError::EmptyDistribution);
        }
        let mut map = BTreeMap::new();
        for pair in s.split(',') {
            let (d, p) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| bad("expected `degree:probability`"))?;
            let d = d.trim();
            if d.is_empty() || !d.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad("degree must be a positive integer"));
            }
            let degree: usize = d.parse().map_err(|_| bad("degree out of range"))?;
            if degree == 0 {
                return Err(IrsaError::InvalidDegree(0));
            }
            let prob: f64 = p
                .trim()
                .parse()
                .map_err(|_| bad("probability must be a decimal number"))?;
            if map.insert(degree, prob).is_some() {
                return Err(bad("duplicate degree"));
            }
        }
        Self::new(&map)
    }
}

impl TryFrom<String> for DegreeDistribution {
    type Error = IrsaError;

    fn try_from(s: String) -> Result<Self> {
        Self::from_name_or_spec(&s)
    }
}

impl From<DegreeDistribution> for String {
    fn from(d: DegreeDistribution) -> String {
        d.to_string()
    }
}

/// Edge-perspective distribution `λ(x) = Σ_d λ_d x^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDistribution {
    terms: Vec<(usize, f64)>,
    mean_degree: f64,
}

impl EdgeDistribution {
    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn coeff(&self, degree: usize) -> f64 {
        self.terms
            .iter()
            .find(|(d, _)| *d == degree)
            .map_or(0.0, |(_, c)| *c)
    }

    /// `Λ'(1)` of the source distribution.
    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    /// Evaluates `λ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(d, c)| c * x.powi(d as i32 - 1))
            .sum()
    }

    /// Recovers the node-perspective coefficients `Λ_d = λ_d Λ'(1) / d`.
    pub fn to_node_perspective(&self) -> Vec<(usize, f64)> {
        self.terms
            .iter()
            .map(|&(d, c)| (d, c * self.mean_degree / d as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn builds_preset_distributions() {
        let crdsa = DegreeDistribution::from_pairs(&[(3, 1.0)]).unwrap();
        assert_eq!(crdsa.terms(), &[(3, 1.0)]);
        let l1 = DegreeDistribution::from_pairs(&[(4, 0.5), (8, 0.5)]).unwrap();
        assert_eq!(l1.coeff(4), 0.5);
        assert_eq!(l1.coeff(8), 0.5);
        assert_eq!(l1.coeff(3), 0.0);
        assert!(!l1.was_renormalized());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            DegreeDistribution::from_pairs(&[(2, 0.7), (3, 0.4)]),
            Err(IrsaError::NotNormalized { .. })
        ));
        assert!(matches!(
            DegreeDistribution::from_pairs(&[(2, 1.2), (3, -0.2)]),
            Err(IrsaError::NegativeCoefficient { degree: 3, .. })
        ));
        assert_eq!(
            DegreeDistribution::new(&BTreeMap::new()),
            Err(IrsaError::EmptyDistribution)
        );
        assert!(DegreeDistribution::from_pairs(&[(0, 1.0)]).is_err());
    }

    #[test]
    fn renormalizes_within_input_tolerance() {
        let d = DegreeDistribution::from_pairs(&[(3, 0.86 + 5e-10), (8, 0.14)]).unwrap();
        assert!(d.was_renormalized());
        let s: f64 = d.terms().iter().map(|t| t.1).sum();
        assert!(close(s, 1.0, INTERNAL_TOLERANCE));
        assert!(DegreeDistribution::from_pairs(&[(3, 0.86 + 5e-9), (8, 0.14)]).is_err());
    }

    #[test]
    fn flags_degree_one() {
        let d = DegreeDistribution::from_pairs(&[(1, 0.5), (2, 0.5)]).unwrap();
        assert!(d.has_degree_one());
        assert!(!d.is_degenerate());
        assert!(DegreeDistribution::regular(1).unwrap().is_degenerate());
    }

    #[test]
    fn mean_degree_examples() {
        assert_eq!(DegreeDistribution::regular(3).unwrap().mean_degree(), 3.0);
        assert_eq!(DegreeDistribution::named("lambda1").unwrap().mean_degree(), 6.0);
        let l2 = DegreeDistribution::named("lambda2").unwrap();
        assert!(close(l2.mean_degree(), 3.70, 1e-12));
    }

    #[test]
    fn edge_perspective_examples() {
        let e = DegreeDistribution::regular(3).unwrap().edge_perspective();
        assert_eq!(e.terms(), &[(3, 1.0)]);
        assert!(close(e.eval(0.5), 0.25, 1e-15));

        let e = DegreeDistribution::named("lambda1").unwrap().edge_perspective();
        assert!(close(e.coeff(4), 1.0 / 3.0, 1e-15));
        assert!(close(e.coeff(8), 2.0 / 3.0, 1e-15));

        let e = DegreeDistribution::named("lambda2").unwrap().edge_perspective();
        assert!(close(e.coeff(3), 2.58 / 3.70, 1e-12));
        assert!(close(e.coeff(8), 1.12 / 3.70, 1e-12));
        assert!(close(e.mean_degree(), 3.70, 1e-12));
    }

    #[test]
    fn parses_spec_strings() {
        let d: DegreeDistribution = "3:0.86,8:0.14".parse().unwrap();
        assert_eq!(d.terms(), &[(3, 0.86), (8, 0.14)]);
        let d: DegreeDistribution = " 4:0.5 , 8:0.5 ".parse().unwrap();
        assert_eq!(d.max_degree(), 8);
        for bad in ["3", "x:1.0", "-3:1.0", "3:abc", "3:0.5,3:0.5", "3.5:1"] {
            assert!(bad.parse::<DegreeDistribution>().is_err(), "{bad}");
        }
        assert_eq!(
            "".parse::<DegreeDistribution>(),
            Err(IrsaError::EmptyDistribution)
        );
        let d = DegreeDistribution::from_name_or_spec("x4").unwrap();
        assert_eq!(d.terms(), &[(4, 1.0)]);
        assert_eq!(d.to_string().parse::<DegreeDistribution>().unwrap(), d);
    }

    #[test]
    fn point_mass_always_samples_its_degree() {
        let d = DegreeDistribution::regular(3).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(d.sample(&mut rng), 3);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = DegreeDistribution::named("lambda2").unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn sampling_frequency_within_three_sigma() {
        // 3σ for a fair coin at 1e6 draws: 3·sqrt(0.25/1e6) = 0.0015 < 0.002.
        let d = DegreeDistribution::named("lambda1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let fours = (0..n).filter(|_| d.sample(&mut rng) == 4).count();
        let frac = fours as f64 / n as f64;
        assert!(close(frac, 0.5, 0.002), "{frac}");
    }
}
