//! Estimates with confidence information and the hypothesis-test helpers
//! used by the validation suites (KS, chi-square, quantiles).

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::parallel::MeanAcc;

/// Monte-Carlo estimate with standard error and replica count.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EstimateCI {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: u64,
}

impl EstimateCI {
    pub fn from_acc(acc: &MeanAcc) -> Self {
        EstimateCI {
            mean: acc.mean(),
            stderr: acc.stderr(),
            replicas: acc.n,
        }
    }

    /// Z-score of the difference against `other`, using combined stderr.
    pub fn z_against(&self, other: &EstimateCI) -> f64 {
        let se = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        if se == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean) / se
        }
    }

    /// Z-score against a known constant.
    pub fn z_value(&self, value: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value) / self.stderr
        }
    }

    pub fn scaled(&self, factor: f64) -> EstimateCI {
        EstimateCI {
            mean: self.mean * factor,
            stderr: self.stderr * factor.abs(),
            replicas: self.replicas,
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic Kolmogorov survival function `Q(lambda) = P{K > lambda}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        let signed = if k % 2 == 1 { term } else { -term };
        sum += signed;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against a CDF. Sorts a copy of the sample.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    // Stephens' small-sample correction.
    let lambda = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    (d, kolmogorov_q(lambda))
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = d * (ne.sqrt() + 0.12 + 0.11 / ne.sqrt());
    (d, kolmogorov_q(lambda))
}

/// Critical KS distance for the two-sample test at level `alpha`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    // c(alpha) = sqrt(-ln(alpha/2)/2)
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Chi-square goodness-of-fit p-value for observed counts against
/// expected counts (same totals; df = bins - 1).
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    (stat, gamma_ur(df / 2.0, stat / 2.0))
}

/// Linear-interpolation quantile (type 7). Sorts a copy.
pub fn quantile(sample: &[f64], q: f64) -> f64 {
    assert!(!sample.is_empty());
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (xs.len() as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

pub fn median(sample: &[f64]) -> f64 {
    quantile(sample, 0.5)
}

pub fn interquartile_range(sample: &[f64]) -> f64 {
    quantile(sample, 0.75) - quantile(sample, 0.25)
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

/// Symmetric-projection CDF helper: CDF of the first coordinate of a
/// uniform point on the unit sphere in dimension `d`.
pub fn projection_cdf(d: usize, x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let half = 0.5 * beta_reg(0.5, (d as f64 - 1.0) / 2.0, x * x);
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841344746068543).abs() < 1e-10);
        assert!((normal_cdf(-2.0) - 0.0227501319481792).abs() < 1e-10);
    }

    #[test]
    fn kolmogorov_reference() {
        // Q(1.0) ~ 0.26999967...
        assert!((kolmogorov_q(1.0) - 0.2699996716773).abs() < 1e-9);
    }

    #[test]
    fn ks_uniform_accepts_uniform() {
        let mut rng = crate::rng::stream(11, 0, 0);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>()).collect();
        let (_, p) = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = crate::rng::stream(12, 0, 0);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>() + 0.02).collect();
        let (_, p) = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!(p < 1e-6);
    }

    #[test]
    fn chi_square_uniform_bins() {
        let mut rng = crate::rng::stream(13, 0, 0);
        let mut counts = [0u64; 20];
        let n = 200_000;
        for _ in 0..n {
            counts[rng.random_range(0..20)] += 1;
        }
        let expected = vec![n as f64 / 20.0; 20];
        let (_, p) = chi_square_gof(&counts, &expected);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((median(&xs) - 2.5).abs() < 1e-12);
        assert!((quantile(&xs, 0.0) - 1.0).abs() < 1e-12);
        assert!((quantile(&xs, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn projection_cdf_d3_is_uniform() {
        // In dimension 3 the projection is uniform on [-1, 1].
        for x in [-0.8, -0.2, 0.0, 0.4, 0.9] {
            assert!((projection_cdf(3, x) - (x + 1.0) / 2.0).abs() < 1e-12);
        }
    }
}
