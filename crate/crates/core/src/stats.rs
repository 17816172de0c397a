//! Monte Carlo estimates with Wald standard errors and exact binomial
//! (Clopper-Pearson) upper confidence bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

/// One-sided confidence level of `ci99_upper`.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci99_upper: f64,
}

impl Estimate {
    /// Independent Bernoulli trials.
    pub fn binomial(successes: u64, trials: u64) -> Self {
        assert!(trials > 0, "an estimate needs at least one trial");
        assert!(successes <= trials);
        let mean = successes as f64 / trials as f64;
        let stderr = (mean * (1.0 - mean) / trials as f64).sqrt();
        Self {
            trials,
            successes,
            mean,
            stderr,
            ci99_upper: clopper_pearson_upper(successes as f64, trials as f64, CONFIDENCE),
        }
    }

    /// Two-level design: `groups[i]` successes out of `per_group` trials on
    /// the i-th independently drawn cluster (graph).
    ///
    /// The standard error is the spread of the cluster means, which
    /// contains both the between-cluster variance and the within-cluster
    /// binomial noise. It is floored at the pooled binomial error. The upper
    /// bound is Clopper-Pearson at the effective sample size
    /// `mean (1 - mean) / stderr^2` (Kish design effect), never more than the
    /// pooled trial count.
    pub fn clustered(groups: &[u64], per_group: u64) -> Self {
        assert!(!groups.is_empty() && per_group > 0);
        let successes: u64 = groups.iter().sum();
        let trials = per_group * groups.len() as u64;
        let pooled = Self::binomial(successes, trials);
        if groups.len() < 2 || pooled.mean == 0.0 || pooled.mean == 1.0 {
            return pooled;
        }
        let g = groups.len() as f64;
        let means: Vec<f64> = groups
            .iter()
            .map(|&s| s as f64 / per_group as f64)
            .collect();
        let centre = means.iter().sum::<f64>() / g;
        let var = means.iter().map(|m| (m - centre).powi(2)).sum::<f64>() / (g - 1.0);
        let stderr = (var / g).sqrt().max(pooled.stderr);
        let effective = (pooled.mean * (1.0 - pooled.mean) / (stderr * stderr)).min(trials as f64);
        Self {
            trials,
            successes,
            mean: pooled.mean,
            stderr,
            ci99_upper: clopper_pearson_upper(pooled.mean * effective, effective, CONFIDENCE),
        }
    }

    /// True when `|mean - value| <= k * stderr`.
    pub fn within_sigmas(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// An estimate with the seed and parameters that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub stderr: f64,
    pub ci99_upper: f64,
    pub seed: u64,
    pub parameters: BTreeMap<String, serde_json::Value>,
}

impl EstimateRecord {
    pub fn new(
        estimate: &Estimate,
        seed: u64,
        parameters: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        Self {
            trials: estimate.trials,
            successes: estimate.successes,
            mean: estimate.mean,
            stderr: estimate.stderr,
            ci99_upper: estimate.ci99_upper,
            seed,
            parameters,
        }
    }
}

/// One-sided Clopper-Pearson upper bound: the largest `p` with
/// `P[Bin(trials, p) <= successes] >= 1 - confidence`, i.e. the
/// `confidence` quantile of `Beta(successes + 1, trials - successes)`.
/// Accepts fractional counts (effective sample sizes).
pub fn clopper_pearson_upper(successes: f64, trials: f64, confidence: f64) -> f64 {
    assert!(trials > 0.0 && (0.0..=trials).contains(&successes));
    if successes >= trials {
        return 1.0;
    }
    let alpha = 1.0 - confidence;
    if successes == 0.0 {
        return 1.0 - alpha.powf(1.0 / trials);
    }
    let (a, b) = (successes + 1.0, trials - successes);
    // beta_reg(a, b, p) increases in p; find beta_reg = confidence.
    let (mut lo, mut hi) = (successes / trials, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_json_fields() {
        let params = BTreeMap::from([("n".to_string(), serde_json::json!(4))]);
        let record = EstimateRecord::new(&Estimate::binomial(3, 10), 9, params);
        let value = serde_json::to_value(&record).unwrap();
        let keys: Vec<&str> = value
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        assert_eq!(
            keys,
            [
                "ci99_upper",
                "mean",
                "parameters",
                "seed",
                "stderr",
                "successes",
                "trials"
            ]
        );
        let back: EstimateRecord = serde_json::from_value(value).unwrap();
        assert_eq!(back, record);
    }

    fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
        // Direct summation; independent of the beta-function route.
        let mut term = (1.0 - p).powi(n as i32);
        let mut total = term;
        for i in 0..k {
            term *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
            total += term;
        }
        total
    }

    #[test]
    fn zero_successes_closed_form() {
        let upper = clopper_pearson_upper(0.0, 100.0, 0.99);
        assert!((upper - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-15);
    }

    #[test]
    fn upper_bound_matches_binomial_tail() {
        for &(k, n) in &[(1u64, 10u64), (5, 20), (37, 100), (3, 1000)] {
            let upper = clopper_pearson_upper(k as f64, n as f64, 0.99);
            let tail = binomial_cdf(k, n, upper);
            assert!((tail - 0.01).abs() < 1e-9, "k={k} n={n} tail={tail}");
            assert!(upper > k as f64 / n as f64);
        }
    }

    #[test]
    fn all_successes_bound_is_one() {
        assert_eq!(clopper_pearson_upper(10.0, 10.0, 0.99), 1.0);
        assert_eq!(Estimate::binomial(4, 4).ci99_upper, 1.0);
    }

    #[test]
    fn binomial_fields() {
        let e = Estimate::binomial(25, 100);
        assert_eq!(e.mean, 0.25);
        assert!((e.stderr - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert!(e.ci99_upper >= e.mean);
        let zero = Estimate::binomial(0, 50);
        assert_eq!(zero.mean, 0.0);
        assert_eq!(zero.stderr, 0.0);
        assert!(zero.ci99_upper > 0.0);
    }

    #[test]
    fn clustered_widens_for_heterogeneous_groups() {
        let homogeneous = Estimate::clustered(&[50, 50, 50, 50], 100);
        let spread = Estimate::clustered(&[0, 100, 0, 100], 100);
        assert_eq!(homogeneous.mean, spread.mean);
        assert!(spread.stderr > homogeneous.stderr);
        assert!(spread.ci99_upper > homogeneous.ci99_upper);
        assert!(homogeneous.stderr >= Estimate::binomial(200, 400).stderr);
    }

    #[test]
    fn clustered_degenerate_cases() {
        assert_eq!(
            Estimate::clustered(&[0, 0, 0], 10),
            Estimate::binomial(0, 30)
        );
        assert_eq!(Estimate::clustered(&[3], 10), Estimate::binomial(3, 10));
    }
}
