//! Andrich rating-scale model.
//!
//! For a person at `beta`, an item at `delta` and shared step thresholds
//! `tau_1..tau_M` (with `tau_0 = 0`), the probability of category `k` is
//!
//! ```text
//! P(k) = exp(k (beta - delta) - sum_{j<=k} tau_j) / sum_m exp(m (beta - delta) - sum_{j<=m} tau_j)
//! ```

use serde::{Deserialize, Serialize};

/// Identification tolerance for the threshold sum.
pub const SUM_TOLERANCE: f64 = 1e-8;

/// Step thresholds `tau_1..tau_M`, constrained to sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdVector(Vec<f64>);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThresholdError {
    #[error("at least one threshold is required")]
    Empty,
    #[error("thresholds must be finite")]
    NonFinite,
    #[error("thresholds sum to {0}, expected 0")]
    NotCentered(f64),
}

impl ThresholdVector {
    pub fn new(tau: Vec<f64>) -> Result<Self, ThresholdError> {
        if tau.is_empty() {
            return Err(ThresholdError::Empty);
        }
        if tau.iter().any(|t| !t.is_finite()) {
            return Err(ThresholdError::NonFinite);
        }
        let sum: f64 = tau.iter().sum();
        if sum.abs() >= SUM_TOLERANCE {
            return Err(ThresholdError::NotCentered(sum));
        }
        Ok(Self(tau))
    }

    /// Subtracts the mean so the thresholds sum to zero.
    pub fn centered(mut tau: Vec<f64>) -> Result<Self, ThresholdError> {
        if tau.is_empty() {
            return Err(ThresholdError::Empty);
        }
        let mean = tau.iter().sum::<f64>() / tau.len() as f64;
        tau.iter_mut().for_each(|t| *t -= mean);
        Self::new(tau)
    }

    pub fn zeros(max_category: usize) -> Self {
        Self(vec![0.0; max_category.max(1)])
    }

    /// Top category `M`.
    pub fn max_category(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub(crate) fn from_raw(tau: Vec<f64>) -> Self {
        Self(tau)
    }
}

/// Writes the category probabilities for `eta = beta - delta` into `out`,
/// which must hold `tau.len() + 1` slots.
pub fn fill_probabilities(eta: f64, tau: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), tau.len() + 1);
    let mut log_num = 0.0;
    out[0] = 0.0;
    let mut max = 0.0f64;
    for (k, t) in tau.iter().enumerate() {
        log_num += eta - t;
        out[k + 1] = log_num;
        max = max.max(log_num);
    }
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Probability of category `k`. Panics if `k` exceeds the top category.
pub fn category_probability(beta: f64, delta: f64, tau: &ThresholdVector, k: usize) -> f64 {
    assert!(k <= tau.max_category(), "category {k} above top category {}", tau.max_category());
    let mut probs = vec![0.0; tau.max_category() + 1];
    fill_probabilities(beta - delta, tau.as_slice(), &mut probs);
    probs[k]
}

pub fn category_probabilities(beta: f64, delta: f64, tau: &ThresholdVector) -> Vec<f64> {
    let mut probs = vec![0.0; tau.max_category() + 1];
    fill_probabilities(beta - delta, tau.as_slice(), &mut probs);
    probs
}

/// Mean and variance of the category score from a probability vector.
pub(crate) fn moments(probs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (k, p) in probs.iter().enumerate() {
        let k = k as f64;
        mean += k * p;
        second += k * k * p;
    }
    (mean, (second - mean * mean).max(0.0))
}

pub fn expected_score(beta: f64, delta: f64, tau: &ThresholdVector) -> f64 {
    moments(&category_probabilities(beta, delta, tau)).0
}

pub fn score_variance(beta: f64, delta: f64, tau: &ThresholdVector) -> f64 {
    moments(&category_probabilities(beta, delta, tau)).1
}

/// Log-probability of category `k` at `eta = beta - delta`.
pub(crate) fn log_probability(eta: f64, tau: &[f64], k: usize, scratch: &mut [f64]) -> f64 {
    let mut log_num = 0.0;
    scratch[0] = 0.0;
    let mut max = 0.0f64;
    for (j, t) in tau.iter().enumerate() {
        log_num += eta - t;
        scratch[j + 1] = log_num;
        max = max.max(log_num);
    }
    let lse = max + scratch.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    scratch[k] - lse
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn dichotomous_examples() {
        let tau = ThresholdVector::zeros(1);
        assert!((category_probability(0.3, 0.3, &tau, 1) - 0.5).abs() < EPS);
        assert!((category_probability(3f64.ln(), 0.0, &tau, 1) - 0.75).abs() < EPS);
        assert!((expected_score(3f64.ln(), 0.0, &tau) - 0.75).abs() < EPS);
        assert!((score_variance(1.0, 1.0, &tau) - 0.25).abs() < EPS);
    }

    #[test]
    fn three_category_symmetry() {
        let tau = ThresholdVector::zeros(2);
        for k in 0..=2 {
            assert!((category_probability(0.0, 0.0, &tau, k) - 1.0 / 3.0).abs() < EPS);
        }
        assert!((expected_score(0.0, 0.0, &tau) - 1.0).abs() < EPS);
        assert!((score_variance(0.0, 0.0, &tau) - 2.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn limits() {
        let tau = ThresholdVector::new(vec![-1.0, -0.3, 0.3, 1.0]).unwrap();
        assert!((expected_score(60.0, 0.0, &tau) - 4.0).abs() < 1e-12);
        assert!(score_variance(60.0, 0.0, &tau) < 1e-12);
        assert!(expected_score(-800.0, 0.0, &tau).abs() < 1e-12);
        let p = category_probabilities(900.0, -900.0, &tau);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn threshold_constraint() {
        assert!(ThresholdVector::new(vec![1.0, 1.0]).is_err());
        let t = ThresholdVector::centered(vec![1.0, 3.0]).unwrap();
        assert_eq!(t.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn log_probability_matches_probability() {
        let tau = [-0.7, 0.2, 0.5];
        let mut probs = [0.0; 4];
        let mut scratch = [0.0; 4];
        fill_probabilities(0.4, &tau, &mut probs);
        for (k, p) in probs.iter().enumerate() {
            assert!((log_probability(0.4, &tau, k, &mut scratch) - p.ln()).abs() < 1e-12);
        }
    }
}
