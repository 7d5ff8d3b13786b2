//! Radially symmetric offspring point processes.
//!
//! A law is a triple (dimension, count law, radial law). Children draw
//! i.i.d. displacements `radius * direction` with the direction uniform
//! on the unit sphere, so every directional projection of the process has
//! the same law.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("mean offspring count m = {m} is not supercritical (need m > 1)")]
    Subcritical { m: f64 },
    #[error("count law never produces two or more children")]
    NoPairs,
}

/// Distribution of the number of children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountLaw {
    /// Always `k` children.
    Fixed { k: u64 },
    /// 0 or 2 children; `p_two` is the probability of 2.
    Binary { p_two: f64 },
    Poisson { mu: f64 },
    /// Poisson conditioned on at least one child.
    PoissonPositive { mu: f64 },
    /// P{N = k} = q (1-q)^k, k >= 0.
    Geometric { q: f64 },
}

impl CountLaw {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            CountLaw::Fixed { .. } => Ok(()),
            CountLaw::Binary { p_two } => {
                if (0.0..=1.0).contains(p_two) {
                    Ok(())
                } else {
                    Err(ModelError::BadParam(format!("p_two = {p_two}")))
                }
            }
            CountLaw::Poisson { mu } | CountLaw::PoissonPositive { mu } => {
                if *mu > 0.0 && mu.is_finite() {
                    Ok(())
                } else {
                    Err(ModelError::BadParam(format!("mu = {mu}")))
                }
            }
            CountLaw::Geometric { q } => {
                if *q > 0.0 && *q < 1.0 {
                    Ok(())
                } else {
                    Err(ModelError::BadParam(format!("q = {q}")))
                }
            }
        }
    }

    /// First moment of the count.
    pub fn mean(&self) -> f64 {
        match self {
            CountLaw::Fixed { k } => *k as f64,
            CountLaw::Binary { p_two } => 2.0 * p_two,
            CountLaw::Poisson { mu } => *mu,
            CountLaw::PoissonPositive { mu } => mu / (1.0 - (-mu).exp()),
            CountLaw::Geometric { q } => (1.0 - q) / q,
        }
    }

    /// Second moment of the count.
    pub fn second_moment(&self) -> f64 {
        match self {
            CountLaw::Fixed { k } => (*k as f64) * (*k as f64),
            CountLaw::Binary { p_two } => 4.0 * p_two,
            CountLaw::Poisson { mu } => mu * mu + mu,
            CountLaw::PoissonPositive { mu } => (mu * mu + mu) / (1.0 - (-mu).exp()),
            CountLaw::Geometric { q } => {
                let m = self.mean();
                // var = (1-q)/q^2
                (1.0 - q) / (q * q) + m * m
            }
        }
    }

    /// P{N = k}.
    pub fn pmf(&self, k: u64) -> f64 {
        match self {
            CountLaw::Fixed { k: k0 } => {
                if k == *k0 {
                    1.0
                } else {
                    0.0
                }
            }
            CountLaw::Binary { p_two } => match k {
                0 => 1.0 - p_two,
                2 => *p_two,
                _ => 0.0,
            },
            CountLaw::Poisson { mu } => {
                let kf = k as f64;
                (-mu + kf * mu.ln() - ln_factorial(k)).exp()
            }
            CountLaw::PoissonPositive { mu } => {
                if k == 0 {
                    0.0
                } else {
                    let kf = k as f64;
                    (-mu + kf * mu.ln() - ln_factorial(k)).exp() / (1.0 - (-mu).exp())
                }
            }
            CountLaw::Geometric { q } => q * (1.0 - q).powi(k as i32),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            CountLaw::Fixed { k } => *k,
            CountLaw::Binary { p_two } => {
                if rng.random::<f64>() < *p_two {
                    2
                } else {
                    0
                }
            }
            CountLaw::Poisson { mu } => Poisson::new(*mu).unwrap().sample(rng) as u64,
            CountLaw::PoissonPositive { mu } => {
                let pois = Poisson::new(*mu).unwrap();
                loop {
                    let n = pois.sample(rng) as u64;
                    if n >= 1 {
                        return n;
                    }
                }
            }
            CountLaw::Geometric { q } => {
                // Inverse CDF; counts failures before the first success.
                let u: f64 = rng.random();
                (u.ln() / (1.0 - q).ln()).floor() as u64
            }
        }
    }

    /// True iff P{N >= 2} > 0.
    pub fn allows_pairs(&self) -> bool {
        match self {
            CountLaw::Fixed { k } => *k >= 2,
            CountLaw::Binary { p_two } => *p_two > 0.0,
            CountLaw::Poisson { .. } | CountLaw::PoissonPositive { .. } => true,
            CountLaw::Geometric { .. } => true,
        }
    }
}

fn ln_factorial(k: u64) -> f64 {
    statrs::function::gamma::ln_gamma(k as f64 + 1.0)
}

/// Distribution of the displacement radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialLaw {
    /// Radius of a d-vector of independent N(0, sigma^2) coordinates, so
    /// the displacement itself is a centered Gaussian vector.
    Chi { sigma: f64 },
    /// P{R > r} = exp(-kappa r).
    ExpTail { kappa: f64 },
    /// Uniform on [0, rho].
    Uniform { rho: f64 },
    /// Point mass at r0 (r0 = 0 gives the degenerate at-origin law).
    Atom { r0: f64 },
}

impl RadialLaw {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match self {
            RadialLaw::Chi { sigma } => *sigma >= 0.0 && sigma.is_finite(),
            RadialLaw::ExpTail { kappa } => *kappa > 0.0 && kappa.is_finite(),
            RadialLaw::Uniform { rho } => *rho >= 0.0 && rho.is_finite(),
            RadialLaw::Atom { r0 } => *r0 >= 0.0 && r0.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::BadParam(format!("{self:?}")))
        }
    }

    /// True iff the displacement is 0 almost surely.
    pub fn is_degenerate_at_origin(&self) -> bool {
        match self {
            RadialLaw::Chi { sigma } => *sigma == 0.0,
            RadialLaw::ExpTail { .. } => false,
            RadialLaw::Uniform { rho } => *rho == 0.0,
            RadialLaw::Atom { r0 } => *r0 == 0.0,
        }
    }

    /// Median of the radius.
    pub fn median(&self, d: usize) -> f64 {
        match self {
            RadialLaw::Chi { sigma } => {
                // Median of sigma * chi(d): solve P(d/2, x^2/2) = 1/2.
                let mut lo = 0.0f64;
                let mut hi = sigma * (d as f64).sqrt() * 4.0 + 1.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let p = statrs::function::gamma::gamma_lr(
                        d as f64 / 2.0,
                        mid * mid / (2.0 * sigma * sigma),
                    );
                    if p < 0.5 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
            RadialLaw::ExpTail { kappa } => std::f64::consts::LN_2 / kappa,
            RadialLaw::Uniform { rho } => rho / 2.0,
            RadialLaw::Atom { r0 } => *r0,
        }
    }

    pub fn sample<R: Rng>(&self, d: usize, rng: &mut R) -> f64 {
        match self {
            RadialLaw::Chi { sigma } => {
                let mut s = 0.0;
                for _ in 0..d {
                    let g: f64 = StandardNormal.sample(rng);
                    s += g * g;
                }
                sigma * s.sqrt()
            }
            RadialLaw::ExpTail { kappa } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / kappa
            }
            RadialLaw::Uniform { rho } => rho * rng.random::<f64>(),
            RadialLaw::Atom { r0 } => *r0,
        }
    }
}

/// A radially symmetric offspring point process. Children are i.i.d.
/// displacements (the "iid" coupling); directions are uniform on the
/// sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    pub dimension: usize,
    pub count_law: CountLaw,
    pub radial_law: RadialLaw,
}

/// An exchangeable pair of sibling displacements sampled with the
/// pair-counting size bias N(N-1).
#[derive(Clone, Debug)]
pub struct SpinePair {
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
}

/// Truncation point for unbounded count laws when sampling the
/// size-biased pair count. The neglected pair mass is checked at call
/// sites via [`OffspringLaw::pair_count_table`].
pub const DEFAULT_PAIR_COUNT_MAX: u64 = 64;

impl OffspringLaw {
    pub fn new(
        dimension: usize,
        count_law: CountLaw,
        radial_law: RadialLaw,
    ) -> Result<Self, ModelError> {
        if dimension < 2 {
            return Err(ModelError::DimensionTooSmall(dimension));
        }
        count_law.validate()?;
        radial_law.validate()?;
        Ok(OffspringLaw {
            dimension,
            count_law,
            radial_law,
        })
    }

    /// Convenience constructor for the Gaussian-displacement law used
    /// throughout the test suites.
    pub fn gaussian(dimension: usize, sigma: f64, count_law: CountLaw) -> Result<Self, ModelError> {
        OffspringLaw::new(dimension, count_law, RadialLaw::Chi { sigma })
    }

    /// (m, m2) = (E[N], E[N^2] - E[N]). Rejects subcritical laws.
    pub fn mean_params(&self) -> Result<(f64, f64), ModelError> {
        let m = self.count_law.mean();
        if m <= 1.0 {
            return Err(ModelError::Subcritical { m });
        }
        Ok((m, self.count_law.second_moment() - m))
    }

    /// Human-readable config record round-trip.
    pub fn to_config_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("law serializes")
    }

    pub fn from_config_str(s: &str) -> Result<Self, ModelError> {
        let law: OffspringLaw =
            serde_json::from_str(s).map_err(|e| ModelError::BadParam(e.to_string()))?;
        OffspringLaw::new(law.dimension, law.count_law, law.radial_law)
    }

    /// Model-assumption violations (empty when the law is admissible).
    pub fn assumption_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.count_law.mean() <= 1.0 {
            out.push(format!(
                "mean offspring count {} <= 1 (not supercritical)",
                self.count_law.mean()
            ));
        }
        if self.radial_law.is_degenerate_at_origin() {
            out.push("displacement vanishes almost surely".to_string());
        }
        out
    }

    /// Writes one displacement into `out` (length = dimension).
    pub fn sample_displacement_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension);
        match &self.radial_law {
            // Gaussian vector: coordinates are independent normals.
            RadialLaw::Chi { sigma } => {
                for x in out.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    *x = sigma * g;
                }
            }
            _ => {
                let r = self.radial_law.sample(self.dimension, rng);
                sample_direction_into(rng, out);
                for x in out.iter_mut() {
                    *x *= r;
                }
            }
        }
    }

    pub fn sample_displacement<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        self.sample_displacement_into(rng, &mut v);
        v
    }

    /// Number of children followed by that many displacement draws.
    pub fn sample_offspring<R: Rng>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.count_law.sample(rng);
        (0..n).map(|_| self.sample_displacement(rng)).collect()
    }

    /// One-dimensional projection of a single displacement onto a fixed
    /// direction: radius times the projection of a uniform direction.
    pub fn sample_projection<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.radial_law {
            RadialLaw::Chi { sigma } => {
                let g: f64 = StandardNormal.sample(rng);
                sigma * g
            }
            _ => {
                let r = self.radial_law.sample(self.dimension, rng);
                r * sample_projection_coordinate(self.dimension, rng)
            }
        }
    }

    /// CDF table for the pair-count law P{N = k} weighted by k(k-1),
    /// truncated at `n_max`. Returns (cdf-by-count, neglected fraction).
    pub fn pair_count_table(&self, n_max: u64) -> Result<(Vec<(u64, f64)>, f64), ModelError> {
        if !self.count_law.allows_pairs() {
            return Err(ModelError::NoPairs);
        }
        let mut weights = Vec::new();
        let mut total = 0.0;
        for k in 2..=n_max {
            let w = (k * (k - 1)) as f64 * self.count_law.pmf(k);
            if w > 0.0 {
                weights.push((k, w));
                total += w;
            }
        }
        if total <= 0.0 {
            return Err(ModelError::NoPairs);
        }
        let (_, m2) = self.mean_params().map_err(|_| ModelError::NoPairs)?;
        // m2 = E[N(N-1)] is the untruncated total pair weight.
        let neglected = ((m2 - total) / m2).max(0.0);
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for (k, w) in weights {
            acc += w / total;
            cdf.push((k, acc));
        }
        (cdf.last_mut().unwrap()).1 = 1.0;
        Ok((cdf, neglected))
    }

    /// Pair-count table with the truncation point extended until the
    /// neglected pair mass is below 1e-12 (or the hard cap is reached).
    pub fn pair_count_table_auto(&self) -> Result<Vec<(u64, f64)>, ModelError> {
        let mut n_max = DEFAULT_PAIR_COUNT_MAX;
        loop {
            let (cdf, neglected) = self.pair_count_table(n_max)?;
            if neglected < 1e-12 || n_max >= 8192 {
                return Ok(cdf);
            }
            n_max *= 2;
        }
    }

    /// Samples the exchangeable sibling pair: a pair-size-biased child
    /// count, an i.i.d. brood of that size, and a uniformly random
    /// ordered pair of distinct children.
    pub fn sample_spine_pair<R: Rng>(&self, rng: &mut R) -> Result<SpinePair, ModelError> {
        let cdf = self.pair_count_table_auto()?;
        Ok(self.sample_spine_pair_with_table(&cdf, rng))
    }

    /// Same as [`sample_spine_pair`](Self::sample_spine_pair) with a
    /// precomputed table (use on hot paths).
    pub fn sample_spine_pair_with_table<R: Rng>(
        &self,
        cdf: &[(u64, f64)],
        rng: &mut R,
    ) -> SpinePair {
        let u: f64 = rng.random();
        let n = cdf
            .iter()
            .find(|(_, c)| u <= *c)
            .map(|(k, _)| *k)
            .unwrap_or(cdf.last().unwrap().0);
        let brood: Vec<Vec<f64>> = (0..n).map(|_| self.sample_displacement(rng)).collect();
        let i = rng.random_range(0..n as usize);
        let mut j = rng.random_range(0..n as usize - 1);
        if j >= i {
            j += 1;
        }
        SpinePair {
            delta1: brood[i].clone(),
            delta2: brood[j].clone(),
        }
    }
}

/// Uniform direction on the unit sphere: normalized vector of independent
/// standard Gaussians.
pub fn sample_direction_into<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm_sq = 0.0;
        for x in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *x = g;
            norm_sq += g * g;
        }
        if norm_sq > 1e-300 {
            let inv = norm_sq.sqrt().recip();
            for x in out.iter_mut() {
                *x *= inv;
            }
            return;
        }
    }
}

pub fn sample_direction<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; d];
    sample_direction_into(rng, &mut v);
    v
}

/// First coordinate of a uniform direction in dimension `d`.
pub fn sample_projection_coordinate<R: Rng>(d: usize, rng: &mut R) -> f64 {
    let mut norm_sq = 0.0;
    let mut first = 0.0;
    loop {
        for i in 0..d {
            let g: f64 = StandardNormal.sample(rng);
            if i == 0 {
                first = g;
            }
            norm_sq += g * g;
        }
        if norm_sq > 1e-300 {
            return first / norm_sq.sqrt();
        }
        norm_sq = 0.0;
    }
}

/// Density of the first coordinate of a uniform point on the unit sphere
/// in dimension `d`: (1/B(1/2, (d-1)/2)) (1 - x^2)^{(d-3)/2} on [-1, 1].
pub fn projection_density(d: usize, x: f64) -> Result<f64, ModelError> {
    if d < 2 {
        return Err(ModelError::DimensionTooSmall(d));
    }
    if x.abs() > 1.0 {
        return Ok(0.0);
    }
    let a = 0.5;
    let b = (d as f64 - 1.0) / 2.0;
    let ln_b = ln_beta(a, b);
    let expo = (d as f64 - 3.0) / 2.0;
    if x.abs() == 1.0 {
        // Endpoint: density is 0 for d > 3, 1/B for d = 3, +inf for d = 2.
        return Ok(match d {
            2 => f64::INFINITY,
            3 => (-ln_b).exp(),
            _ => 0.0,
        });
    }
    Ok((-ln_b).exp() * (1.0 - x * x).powf(expo))
}
