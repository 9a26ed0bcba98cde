//! Monte Carlo estimates with standard errors, the two-sample
//! Kolmogorov–Smirnov test, and small regression helpers.

use serde::Serialize;

use crate::rng::StreamSeed;

/// Sample mean with its standard error. Internally keeps `(n, mean, M2)` so
/// that estimates merge exactly as if the samples had been pooled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    m2: f64,
    pub seed: Option<StreamSeed>,
}

impl EstimateWithCI {
    pub fn empty() -> Self {
        Self { mean: 0.0, stderr: 0.0, n: 0, m2: 0.0, seed: None }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as u64;
        if n == 0 {
            return Self::empty();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let m2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        Self::from_moments(n, mean, m2)
    }

    fn from_moments(n: u64, mean: f64, m2: f64) -> Self {
        let stderr = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        Self { mean, stderr, n, m2, seed: None }
    }

    /// Estimate of a probability from `k` successes in `n` trials.
    pub fn from_counts(k: u64, n: u64) -> Self {
        if n == 0 {
            return Self::empty();
        }
        let p = k as f64 / n as f64;
        // M2 of a 0/1 sample
        Self::from_moments(n, p, k as f64 * (1.0 - p) * (1.0 - p) + (n - k) as f64 * p * p)
    }

    pub fn with_seed(mut self, seed: StreamSeed) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Pooled estimate (Chan's update).
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return Self { seed: self.seed.or(other.seed), ..*other };
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let delta = other.mean - self.mean;
        let mean = (na * self.mean + nb * other.mean) / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / n as f64;
        Self { seed: self.seed.or(other.seed), ..Self::from_moments(n, mean, m2) }
    }

    pub fn sample_sd(&self) -> f64 {
        if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        }
    }

    /// Normal-approximation interval at the given `z`.
    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }

    pub fn ci95(&self) -> (f64, f64) {
        self.ci(1.959_963_984_540_054)
    }

    pub fn ci95_overlaps(&self, other: &Self) -> bool {
        let (a0, a1) = self.ci95();
        let (b0, b1) = other.ci95();
        a0 <= b1 && b0 <= a1
    }

    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.mean - target).abs() / self.stderr
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

impl KsResult {
    pub fn rejected(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value and
/// Stephens' small-sample correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs two nonempty samples");
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = x[i].min(y[j]);
        while i < n1 && x[i] <= v {
            i += 1;
        }
        while j < n2 && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sq = ne.sqrt();
    let p_value = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    KsResult { statistic: d, p_value, n1, n2 }
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    LineFit { slope, intercept: my - slope * mx }
}

/// Fit of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Batch-doubling stability check: the estimates on prefixes of size
/// `n/8, n/4, n/2, n` should move by less than `tol` standard errors once
/// past the first doubling.
pub fn cauchy_stable(xs: &[f64], tol: f64) -> bool {
    let n = xs.len();
    if n < 64 {
        return true;
    }
    let full = EstimateWithCI::from_samples(xs);
    let mut prev = EstimateWithCI::from_samples(&xs[..n / 8]).mean;
    for k in [4, 2] {
        let m = EstimateWithCI::from_samples(&xs[..n / k]).mean;
        if (m - prev).abs() > tol * full.stderr * (8 / k) as f64 && (m - full.mean).abs() > tol * full.stderr * 2.0 {
            return false;
        }
        prev = m;
    }
    (prev - full.mean).abs() <= tol * full.stderr * 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_estimate() {
        let e = EstimateWithCI::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let c = EstimateWithCI::from_counts(3, 10);
        let s = EstimateWithCI::from_samples(&[1., 1., 1., 0., 0., 0., 0., 0., 0., 0.]);
        assert!((c.mean - s.mean).abs() < 1e-15 && (c.stderr - s.stderr).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn merge_matches_pooling(xs in prop::collection::vec(-10.0f64..10.0, 2..40),
                                 ys in prop::collection::vec(-10.0f64..10.0, 2..40),
                                 zs in prop::collection::vec(-10.0f64..10.0, 2..40)) {
            let (a, b, c) = (EstimateWithCI::from_samples(&xs), EstimateWithCI::from_samples(&ys), EstimateWithCI::from_samples(&zs));
            let left = a.merge(&b).merge(&c);
            let right = a.merge(&b.merge(&c));
            let swapped = c.merge(&a).merge(&b);
            let pooled: Vec<f64> = xs.iter().chain(&ys).chain(&zs).copied().collect();
            let p = EstimateWithCI::from_samples(&pooled);
            for e in [left, right, swapped] {
                prop_assert!((e.mean - p.mean).abs() <= 1e-13);
                prop_assert!((e.stderr - p.stderr).abs() <= 1e-13);
                prop_assert_eq!(e.n, p.n);
            }
        }
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!(!r.rejected(0.05));
        let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 0.2).abs() <= 1e-3 + 1e-12);
        assert!(r.rejected(0.05));
    }

    #[test]
    fn kolmogorov_critical_value() {
        // the classical 5% point is λ ≈ 1.3581
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn loglog_recovers_power() {
        let xs = [0.1, 0.2, 0.4, 0.8];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(2.0)).collect();
        let f = loglog_fit(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-12);
    }
}
