//! One-dimensional random-walk laboratory: moving barriers, ballot
//! probabilities, barrier-survival bounds, hitting-time tails, ladder
//! heights and overshoot moments.
//!
//! The ballot probability
//!
//! ```text
//! p = P{ S_k >= f_n(k) - a for k <= n,
//!        S_n in [f_n(n) - a + b, f_n(n) - a + b + 1) }
//! ```
//!
//! scales like `(a+1)(b+1)/n^{3/2}`. For large `n` it is estimated by a
//! three-segment decomposition: the first third and the reversed last
//! third are sampled conditioned on passing their barrier checks (the
//! passing fractions enter as exact factors) and a middle bridge matches
//! the endpoints. With `W_j = S_n - S_{n-j}` and
//! `g_n(j) = f_n(n-j) - f_n(n)`, the last-third barrier is equivalent to
//! `S_n - f_n(n) + a >= max_j (W_j + g_n(j))`, so storing that maximum
//! per reversed path makes the final check exact, and the reversed-pool
//! membership test `max_j (W_j + g_n(j)) <= b + 1` is implied by the full
//! event. The factorization
//!
//! ```text
//! p = P(first passes) * P(reversed passes) * E[bridge and exact checks]
//! ```
//!
//! is therefore unbiased.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cumulant::{adaptive_quadrature, LambdaSolution};
use crate::parallel::{replicate, MeanAcc};
use crate::rng::stream;
use crate::stats::EstimateCI;

#[derive(Debug, Error)]
pub enum BallotError {
    #[error("terminal window is unreachable: walk support minimum {support_min} over {n} steps cannot reach {window_lo}")]
    WindowEmpty {
        support_min: f64,
        n: usize,
        window_lo: f64,
    },
    #[error("barrier index {k} out of range 0..={n}")]
    IndexOutOfRange { k: usize, n: usize },
    #[error("invalid walk parameter: {0}")]
    BadParam(String),
}

/// Centered non-lattice step distributions for the walk laboratory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WalkLaw {
    StdNormal,
    /// Density exp(-|x|/beta)/(2 beta).
    Laplace { beta: f64 },
    /// Exponential(rate) shifted to mean zero; support [-1/rate, inf).
    ShiftedExponential { rate: f64 },
    /// Student t with nu >= 5 degrees of freedom (minimal-moment stress
    /// case: only moments below nu are finite).
    StudentT { nu: f64 },
}

impl WalkLaw {
    pub fn validate(&self) -> Result<(), BallotError> {
        match self {
            WalkLaw::StdNormal => Ok(()),
            WalkLaw::Laplace { beta } if *beta > 0.0 => Ok(()),
            WalkLaw::ShiftedExponential { rate } if *rate > 0.0 => Ok(()),
            WalkLaw::StudentT { nu } if *nu >= 5.0 => Ok(()),
            other => Err(BallotError::BadParam(format!("{other:?}"))),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            WalkLaw::StdNormal => 1.0,
            WalkLaw::Laplace { beta } => 2.0 * beta * beta,
            WalkLaw::ShiftedExponential { rate } => 1.0 / (rate * rate),
            WalkLaw::StudentT { nu } => nu / (nu - 2.0),
        }
    }

    /// Moment margin: E|S_1|^{3 + eps} < infinity with this eps.
    pub fn eps(&self) -> f64 {
        match self {
            WalkLaw::StudentT { nu } => ((nu - 3.0) / 2.0).min(1.0),
            _ => 1.0,
        }
    }

    /// Essential infimum of one step.
    pub fn support_min(&self) -> f64 {
        match self {
            WalkLaw::ShiftedExponential { rate } => -1.0 / rate,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            WalkLaw::StdNormal => (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            WalkLaw::Laplace { beta } => (-x.abs() / beta).exp() / (2.0 * beta),
            WalkLaw::ShiftedExponential { rate } => {
                if x < -1.0 / rate {
                    0.0
                } else {
                    rate * (-(rate * x + 1.0)).exp()
                }
            }
            WalkLaw::StudentT { nu } => {
                let ln = statrs::function::gamma::ln_gamma((nu + 1.0) / 2.0)
                    - statrs::function::gamma::ln_gamma(nu / 2.0)
                    - 0.5 * (nu * std::f64::consts::PI).ln();
                (ln - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp()
            }
        }
    }

    /// E|S_1|^p, closed form where available and adaptive quadrature with
    /// a log-substituted tail otherwise.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self {
            WalkLaw::StdNormal => {
                // 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
                (0.5 * p * std::f64::consts::LN_2
                    + statrs::function::gamma::ln_gamma((p + 1.0) / 2.0)
                    - 0.5 * std::f64::consts::PI.ln())
                .exp()
            }
            WalkLaw::Laplace { beta } => {
                (statrs::function::gamma::ln_gamma(p + 1.0) + p * beta.ln()).exp()
            }
            _ => {
                let inner = adaptive_quadrature(
                    &|x: f64| x.abs().powf(p) * self.density(x),
                    -1.0,
                    1.0,
                    1e-11,
                )
                .expect("inner moment quadrature");
                let tail = |sign: f64| {
                    adaptive_quadrature(
                        &|v: f64| {
                            let x = sign * v.exp();
                            x.abs().powf(p) * self.density(x) * v.exp()
                        },
                        0.0,
                        40.0,
                        1e-11,
                    )
                    .expect("tail moment quadrature")
                };
                inner + tail(1.0) + tail(-1.0)
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            WalkLaw::StdNormal => StandardNormal.sample(rng),
            WalkLaw::Laplace { beta } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -beta * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            WalkLaw::ShiftedExponential { rate } => {
                let u: f64 = rng.random();
                (-(1.0 - u).ln() - 1.0) / rate
            }
            WalkLaw::StudentT { nu } => StudentT::new(*nu).unwrap().sample(rng),
        }
    }
}

/// Families of moving barriers `f_n(k)`, `0 <= k <= n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BarrierFamily {
    Zero,
    /// f_n(k) = c1 ln(k + 1) + c2 (independent of the horizon).
    Logarithmic { c1: f64, c2: f64 },
    /// The moving barrier tied to the displacement front.
    Front(FrontBarrier),
}

/// The front barrier
///
/// ```text
/// f_k = speed k + ((d-1)/(2 lambda)) ln(k+1)
///       - (3/(2 lambda)) ln((n+1)/(n-k+1)) + 3M/lambda + y/lambda.
/// ```
///
/// `m_big` is chosen so the barrier stays at or above `2M/lambda` and one
/// step lands within `M/lambda` of the origin with probability >= 1/2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrontBarrier {
    pub lambda: f64,
    pub psi_lambda: f64,
    pub dim: usize,
    pub m_big: f64,
    pub y: f64,
}

impl FrontBarrier {
    /// Derives the offset constant from the solved tilt, the radial
    /// median of one step, and a scan horizon for the nonnegativity
    /// condition (the deficit peaks at small horizons because the linear
    /// term eventually dominates).
    pub fn new(solution: &LambdaSolution, radial_median: f64, scan_horizon: usize, y: f64) -> Self {
        let lambda = solution.lambda;
        let psi = solution.psi_lambda;
        let d = solution.dim as f64;
        let mut needed = (1.0f64).max(lambda) + 1e-9;
        needed = needed.max(lambda * radial_median);
        let mut deficit = 0.0f64;
        for t in 0..=scan_horizon {
            for s in 0..=t {
                let v = psi * s as f64 + (d - 1.0) / 2.0 * ((s + 1) as f64).ln()
                    - 1.5 * (((t + 1) as f64) / ((t - s + 1) as f64)).ln();
                deficit = deficit.max(-v);
            }
        }
        FrontBarrier {
            lambda,
            psi_lambda: psi,
            dim: solution.dim,
            m_big: needed.max(deficit),
            y,
        }
    }

    /// f_k for horizon `n`.
    pub fn eval(&self, n: usize, k: usize) -> f64 {
        let lam = self.lambda;
        self.psi_lambda / lam * k as f64
            + (self.dim as f64 - 1.0) / (2.0 * lam) * ((k + 1) as f64).ln()
            - 1.5 / lam * (((n + 1) as f64) / ((n - k + 1) as f64)).ln()
            + 3.0 * self.m_big / lam
            + self.y / lam
    }

    /// Front speed (the linear drift removed by envelope comparisons).
    pub fn slope(&self) -> f64 {
        self.psi_lambda / self.lambda
    }
}

impl BarrierFamily {
    /// f_n(k).
    pub fn eval(&self, n: usize, k: usize) -> Result<f64, BallotError> {
        if k > n {
            return Err(BallotError::IndexOutOfRange { k, n });
        }
        Ok(match self {
            BarrierFamily::Zero => 0.0,
            BarrierFamily::Logarithmic { c1, c2 } => c1 * ((k + 1) as f64).ln() + c2,
            BarrierFamily::Front(front) => front.eval(n, k),
        })
    }

    /// Time reversal g_n(k) = f_n(n - k) - f_n(n).
    pub fn reversal(&self, n: usize, k: usize) -> Result<f64, BallotError> {
        Ok(self.eval(n, n - k)? - self.eval(n, n)?)
    }

    /// Linear drift removed before envelope comparisons.
    pub fn slope(&self) -> f64 {
        match self {
            BarrierFamily::Front(front) => front.slope(),
            _ => 0.0,
        }
    }

    /// An increasing envelope dominating the running maxima of the
    /// drift-centered family and of its reversals.
    pub fn envelope(&self) -> Envelope {
        match self {
            BarrierFamily::Zero => Envelope {
                log_coeff: 0.0,
                offset: 0.0,
                sqrt_coeff: 0.0,
            },
            BarrierFamily::Logarithmic { c1, c2 } => Envelope {
                log_coeff: c1.abs(),
                offset: c2.abs(),
                sqrt_coeff: 0.0,
            },
            BarrierFamily::Front(front) => Envelope {
                log_coeff: (front.dim as f64 + 2.0) / (2.0 * front.lambda),
                offset: (3.0 * front.m_big + front.y.abs()) / front.lambda,
                sqrt_coeff: 0.0,
            },
        }
    }
}

/// Increasing barrier envelope `f(k) = log_coeff ln(k+1) + sqrt_coeff
/// sqrt(k) + offset`. The square-root term exists only to express
/// divergent test envelopes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub log_coeff: f64,
    pub sqrt_coeff: f64,
    pub offset: f64,
}

impl Envelope {
    pub fn eval(&self, k: usize) -> f64 {
        self.log_coeff * ((k + 1) as f64).ln() + self.sqrt_coeff * (k as f64).sqrt() + self.offset
    }
}

/// Scans that the envelope dominates the running maxima of the centered
/// family and its reversals for all horizons up to `n_max`. Returns the
/// worst margin (negative = violation).
pub fn check_envelope_domination(family: &BarrierFamily, n_max: usize) -> f64 {
    let envelope = family.envelope();
    let slope = family.slope();
    let mut worst = f64::INFINITY;
    for n in 1..=n_max {
        let mut run_f = 0.0f64;
        let mut run_g = 0.0f64;
        for k in 0..=n {
            let centered = family.eval(n, k).unwrap() - slope * k as f64;
            run_f = run_f.max(centered.abs());
            let rev = family.reversal(n, k).unwrap() + slope * k as f64;
            run_g = run_g.max(rev.abs());
            worst = worst.min(envelope.eval(k) - run_f.max(run_g));
        }
    }
    worst
}

/// Partial sums of `f(m)/m^{3/2}` plus the dyadic criterion
/// `sum f(2^m)/2^{m/2}`; the two convergence flags must agree.
#[derive(Clone, Debug)]
pub struct SummabilityReport {
    pub partial_sums: Vec<f64>,
    pub converged_direct: bool,
    pub dyadic_terms: Vec<f64>,
    pub converged_dyadic: bool,
}

/// Tail tolerance for the convergence heuristics.
const SUMMABILITY_TOL: f64 = 0.05;

pub fn check_summability(envelope: &Envelope, horizon: usize) -> SummabilityReport {
    assert!(horizon >= 4);
    let mut partial_sums = Vec::with_capacity(horizon);
    let mut acc = 0.0;
    for m in 1..=horizon {
        acc += envelope.eval(m) / (m as f64).powf(1.5);
        partial_sums.push(acc);
    }
    // Cauchy-style heuristic: the increment over the last dyadic block.
    let last = partial_sums[horizon - 1];
    let half = partial_sums[horizon / 2 - 1];
    let converged_direct = (last - half) < SUMMABILITY_TOL;

    let mut dyadic_terms = Vec::new();
    let mut m = 0u32;
    while (1usize << m) <= horizon {
        let k = 1usize << m;
        dyadic_terms.push(envelope.eval(k) / 2f64.powf(m as f64 / 2.0));
        m += 1;
    }
    let converged_dyadic = *dyadic_terms.last().unwrap() < SUMMABILITY_TOL;
    SummabilityReport {
        partial_sums,
        converged_direct,
        dyadic_terms,
        converged_dyadic,
    }
}

/// Estimation method actually used by [`ballot_probability`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallotMethod {
    Plain,
    Glued,
}

#[derive(Clone, Debug)]
pub struct BallotEstimate {
    pub estimate: EstimateCI,
    /// n^{3/2} p / ((a+1)(b+1)) at the effective horizon.
    pub normalized: f64,
    pub n_requested: usize,
    /// Horizon actually simulated (next multiple of 3 for the glued path).
    pub n_effective: usize,
    pub method: BallotMethod,
}

/// Horizon beyond which the glued estimator replaces plain Monte Carlo.
pub const GLUING_CROSSOVER: usize = 200;

/// Estimates the ballot probability with barrier `f_n(k) - a` and unit
/// terminal window starting at `f_n(n) - a + b`.
///
/// `replicas` is the per-stratum sample count for the glued estimator and
/// the plain replica count otherwise.
pub fn ballot_probability(
    walk: &WalkLaw,
    family: &BarrierFamily,
    a: f64,
    b: f64,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<BallotEstimate, BallotError> {
    walk.validate()?;
    assert!(a >= 0.0 && b >= 0.0 && n >= 1);
    let window_lo = family.eval(n, n)? - a + b;
    if walk.support_min().is_finite() && window_lo + 1.0 < walk.support_min() * n as f64 {
        return Err(BallotError::WindowEmpty {
            support_min: walk.support_min(),
            n,
            window_lo,
        });
    }
    if n > GLUING_CROSSOVER {
        glued_ballot(walk, family, a, b, n, replicas, seed)
    } else {
        plain_ballot(walk, family, a, b, n, replicas, seed)
    }
}

fn normalized_ballot(p: f64, n_eff: usize, a: f64, b: f64) -> f64 {
    (n_eff as f64).powf(1.5) * p / ((a + 1.0) * (b + 1.0))
}

fn zero_estimate(
    n_requested: usize,
    n_effective: usize,
    replicas: u64,
    method: BallotMethod,
) -> BallotEstimate {
    BallotEstimate {
        estimate: EstimateCI {
            mean: 0.0,
            stderr: 0.0,
            replicas,
        },
        normalized: 0.0,
        n_requested,
        n_effective,
        method,
    }
}

fn plain_ballot(
    walk: &WalkLaw,
    family: &BarrierFamily,
    a: f64,
    b: f64,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<BallotEstimate, BallotError> {
    let barrier: Vec<f64> = (0..=n).map(|k| family.eval(n, k).unwrap()).collect();
    if barrier[0] - a > 0.0 {
        // S_0 = 0 already fails the k = 0 condition.
        return Ok(zero_estimate(n, n, replicas, BallotMethod::Plain));
    }
    let window_lo = barrier[n] - a + b;
    let acc = replicate(
        replicas,
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 0);
            let mut s = 0.0;
            let mut ok = true;
            for item in barrier.iter().take(n + 1).skip(1) {
                s += walk.sample(&mut rng);
                if s < item - a {
                    ok = false;
                    break;
                }
            }
            let hit = ok && s >= window_lo && s < window_lo + 1.0;
            acc.push(if hit { 1.0 } else { 0.0 });
        },
        MeanAcc::merge,
    );
    let estimate = EstimateCI::from_acc(&acc);
    Ok(BallotEstimate {
        normalized: normalized_ballot(estimate.mean, n, a, b),
        estimate,
        n_requested: n,
        n_effective: n,
        method: BallotMethod::Plain,
    })
}

fn glued_ballot(
    walk: &WalkLaw,
    family: &BarrierFamily,
    a: f64,
    b: f64,
    n_requested: usize,
    replicas: u64,
    seed: u64,
) -> Result<BallotEstimate, BallotError> {
    // Three equal segments; pad to a multiple of 3.
    let n = n_requested.div_ceil(3) * 3;
    let third = n / 3;
    let barrier: Vec<f64> = (0..=n).map(|k| family.eval(n, k).unwrap()).collect();
    if barrier[0] - a > 0.0 {
        return Ok(zero_estimate(n_requested, n, replicas, BallotMethod::Glued));
    }
    let window_lo = barrier[n] - a + b;

    #[derive(Default)]
    struct EndpointPool {
        kept: Vec<f64>,
        tried: u64,
    }
    // First third conditioned on its exact barrier check; the pool keeps
    // the endpoints S_{third}.
    let first = replicate(
        replicas,
        EndpointPool::default,
        |r, pool| {
            let mut rng = stream(seed, r, 1);
            let mut s = 0.0;
            let mut ok = true;
            for item in barrier.iter().take(third + 1).skip(1) {
                s += walk.sample(&mut rng);
                if s < item - a {
                    ok = false;
                    break;
                }
            }
            pool.tried += 1;
            if ok {
                pool.kept.push(s);
            }
        },
        |a, b| {
            a.kept.extend(b.kept);
            a.tried += b.tried;
        },
    );

    #[derive(Default)]
    struct ReversedPool {
        /// (endpoint W_third, max_j (W_j + g_n(j))) per kept path.
        kept: Vec<(f64, f64)>,
        tried: u64,
    }
    // Reversed last third W_j = S_n - S_{n-j}. The exact last-third
    // barrier is S_n - f_n(n) + a >= max_j (W_j + g_n(j)); membership in
    // the pool requires that maximum to be at most b + 1, which the full
    // event implies because S_n < window_lo + 1.
    let last = replicate(
        replicas,
        ReversedPool::default,
        |r, pool| {
            let mut rng = stream(seed, r, 2);
            let mut w = 0.0;
            let mut max_shift = 0.0f64; // j = 0 term is 0
            for j in 1..=third {
                w += walk.sample(&mut rng);
                let g = barrier[n - j] - barrier[n];
                max_shift = max_shift.max(w + g);
            }
            pool.tried += 1;
            if max_shift <= b + 1.0 {
                pool.kept.push((w, max_shift));
            }
        },
        |a, b| {
            a.kept.extend(b.kept);
            a.tried += b.tried;
        },
    );

    let p_first = first.kept.len() as f64 / first.tried as f64;
    let p_last = last.kept.len() as f64 / last.tried as f64;
    if first.kept.is_empty() || last.kept.is_empty() {
        return Ok(zero_estimate(n_requested, n, replicas, BallotMethod::Glued));
    }

    // Bridge: uniform pool picks, a fresh middle third, and the exact
    // window + last-third checks.
    let bridge = replicate(
        replicas,
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 3);
            let u = first.kept[rng.random_range(0..first.kept.len())];
            let (v, max_shift) = last.kept[rng.random_range(0..last.kept.len())];
            let mut mid = 0.0;
            let mut ok = true;
            for j in 1..=third {
                mid += walk.sample(&mut rng);
                if u + mid < barrier[third + j] - a {
                    ok = false;
                    break;
                }
            }
            let mut hit = 0.0;
            if ok {
                let s_n = u + mid + v;
                if s_n >= window_lo && s_n < window_lo + 1.0 && s_n - barrier[n] + a >= max_shift
                {
                    hit = 1.0;
                }
            }
            acc.push(hit);
        },
        MeanAcc::merge,
    );

    let q = EstimateCI::from_acc(&bridge);
    let se_first = (p_first * (1.0 - p_first) / first.tried as f64).sqrt();
    let se_last = (p_last * (1.0 - p_last) / last.tried as f64).sqrt();
    let mean = p_first * p_last * q.mean;
    let rel = |se: f64, p: f64| if p > 0.0 { se / p } else { 0.0 };
    let rel_total = (rel(se_first, p_first).powi(2)
        + rel(se_last, p_last).powi(2)
        + rel(q.stderr, q.mean).powi(2))
    .sqrt();
    let estimate = EstimateCI {
        mean,
        stderr: mean * rel_total,
        replicas,
    };
    Ok(BallotEstimate {
        normalized: normalized_ballot(estimate.mean, n, a, b),
        estimate,
        n_requested,
        n_effective: n,
        method: BallotMethod::Glued,
    })
}

/// Survival estimates against an increasing envelope: the lower variant
/// keeps `S_k >= f(k) - a` from `n_f` on, the upper variant keeps
/// `S_k >= -f(k) - a` from step 1.
#[derive(Clone, Debug)]
pub struct SurvivalEstimate {
    pub lower: EstimateCI,
    pub upper: EstimateCI,
    pub normalized_lower: f64,
    pub normalized_upper: f64,
}

pub fn barrier_survival(
    walk: &WalkLaw,
    envelope: &Envelope,
    a: f64,
    n: usize,
    n_f: usize,
    replicas: u64,
    seed: u64,
) -> SurvivalEstimate {
    let f: Vec<f64> = (0..=n).map(|k| envelope.eval(k)).collect();
    let acc = replicate(
        replicas,
        || [MeanAcc::default(), MeanAcc::default()],
        |r, accs| {
            let mut rng = stream(seed, r, 0);
            let mut s = 0.0;
            let mut lower_ok = true;
            let mut upper_ok = true;
            for k in 1..=n {
                s += walk.sample(&mut rng);
                if k >= n_f && s < f[k] - a {
                    lower_ok = false;
                }
                if s < -f[k] - a {
                    upper_ok = false;
                }
                if !lower_ok && !upper_ok {
                    break;
                }
            }
            accs[0].push(if lower_ok { 1.0 } else { 0.0 });
            accs[1].push(if upper_ok { 1.0 } else { 0.0 });
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        },
    );
    let lower = EstimateCI::from_acc(&acc[0]);
    let upper = EstimateCI::from_acc(&acc[1]);
    let scale = (n as f64).sqrt() / (a + 1.0);
    SurvivalEstimate {
        normalized_lower: lower.mean * scale,
        normalized_upper: upper.mean * scale,
        lower,
        upper,
    }
}

/// P{min_{k <= n} S_k >= -a} with the normalization sqrt(n)/(a+1).
pub fn hitting_time_tail(
    walk: &WalkLaw,
    a: f64,
    n: usize,
    replicas: u64,
    seed: u64,
) -> (EstimateCI, f64) {
    let acc = replicate(
        replicas,
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 0);
            let mut s = 0.0;
            let mut ok = true;
            for _ in 1..=n {
                s += walk.sample(&mut rng);
                if s < -a {
                    ok = false;
                    break;
                }
            }
            acc.push(if ok { 1.0 } else { 0.0 });
        },
        MeanAcc::merge,
    );
    let est = EstimateCI::from_acc(&acc);
    let normalized = est.mean * (n as f64).sqrt() / (a + 1.0);
    (est, normalized)
}

/// Ladder-height and overshoot study.
#[derive(Clone, Debug)]
pub struct LadderReport {
    pub eps: f64,
    /// Ladder-height moments E[H], E[H^2], E[H^{2+eps}].
    pub height_mean: EstimateCI,
    pub height_sq: EstimateCI,
    pub height_2eps: EstimateCI,
    /// First ladder height of each replica (for distributional checks).
    pub first_heights: Vec<f64>,
    pub levels: Vec<LevelOvershoot>,
    /// Bound E[L^{1+eps}] + (E L)^{1+eps} from the size-biased ladder
    /// height, with a first-order propagated stderr.
    pub size_biased_bound: f64,
    pub size_biased_bound_se: f64,
    /// Fraction of replicas that exhausted the step budget.
    pub truncated_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct LevelOvershoot {
    pub level: f64,
    pub moment_1eps: EstimateCI,
    pub mean: EstimateCI,
    pub samples: Vec<f64>,
}

/// Samples strict ascending ladder heights and the overshoots over the
/// requested levels. Each replica walks one path until every level is
/// crossed or the step budget runs out; level crossings happen exactly at
/// ladder epochs, so the recorded overshoots coincide with the overshoots
/// of the ladder-height renewal process.
pub fn ladder_overshoot(
    walk: &WalkLaw,
    levels: &[f64],
    replicas: u64,
    step_budget: u64,
    seed: u64,
) -> LadderReport {
    let eps = walk.eps();
    let mut sorted_levels = levels.to_vec();
    sorted_levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let top = *sorted_levels.last().unwrap_or(&0.0);

    #[derive(Clone)]
    struct Acc {
        h1: MeanAcc,
        h2: MeanAcc,
        h2e: MeanAcc,
        first_heights: Vec<f64>,
        over: Vec<(MeanAcc, MeanAcc, Vec<f64>)>,
        truncated: u64,
        replicas: u64,
    }
    let n_levels = sorted_levels.len();
    let init = || Acc {
        h1: MeanAcc::default(),
        h2: MeanAcc::default(),
        h2e: MeanAcc::default(),
        first_heights: Vec::new(),
        over: vec![(MeanAcc::default(), MeanAcc::default(), Vec::new()); n_levels],
        truncated: 0,
        replicas: 0,
    };
    let acc = replicate(
        replicas,
        init,
        |r, acc| {
            let mut rng = stream(seed, r, 0);
            let mut s = 0.0f64;
            let mut running_max = 0.0f64;
            let mut next_level = 0usize;
            let mut steps = 0u64;
            let mut first = true;
            acc.replicas += 1;
            loop {
                if steps >= step_budget {
                    acc.truncated += 1;
                    break;
                }
                s += walk.sample(&mut rng);
                steps += 1;
                if s > running_max {
                    let h = s - running_max;
                    acc.h1.push(h);
                    acc.h2.push(h * h);
                    acc.h2e.push(h.powf(2.0 + eps));
                    if first {
                        acc.first_heights.push(h);
                        first = false;
                    }
                    while next_level < n_levels && s >= sorted_levels[next_level] {
                        let over = s - sorted_levels[next_level];
                        acc.over[next_level].0.push(over);
                        acc.over[next_level].1.push(over.powf(1.0 + eps));
                        acc.over[next_level].2.push(over);
                        next_level += 1;
                    }
                    running_max = s;
                    if next_level >= n_levels && running_max > top {
                        break;
                    }
                }
            }
        },
        |a, b| {
            a.h1.merge(b.h1);
            a.h2.merge(b.h2);
            a.h2e.merge(b.h2e);
            a.first_heights.extend(b.first_heights);
            for (x, y) in a.over.iter_mut().zip(b.over) {
                x.0.merge(y.0);
                x.1.merge(y.1);
                x.2.extend(y.2);
            }
            a.truncated += b.truncated;
            a.replicas += b.replicas;
        },
    );

    let h1 = EstimateCI::from_acc(&acc.h1);
    let h2 = EstimateCI::from_acc(&acc.h2);
    let h2e = EstimateCI::from_acc(&acc.h2e);
    // E[L^p] = E[H^{p+1}]/E[H] for the size-biased L; the bound uses
    // p = 1 + eps.
    let bound = h2e.mean / h1.mean + (h2.mean / h1.mean).powf(1.0 + eps);
    let d_h2e = 1.0 / h1.mean;
    let d_h2 = (1.0 + eps) * (h2.mean / h1.mean).powf(eps) / h1.mean;
    let d_h1 = h2e.mean / (h1.mean * h1.mean)
        + (1.0 + eps) * (h2.mean / h1.mean).powf(eps) * h2.mean / (h1.mean * h1.mean);
    let bound_se = ((d_h2e * h2e.stderr).powi(2)
        + (d_h2 * h2.stderr).powi(2)
        + (d_h1 * h1.stderr).powi(2))
    .sqrt();

    LadderReport {
        eps,
        height_mean: h1,
        height_sq: h2,
        height_2eps: h2e,
        first_heights: acc.first_heights,
        levels: sorted_levels
            .iter()
            .enumerate()
            .map(|(i, &level)| LevelOvershoot {
                level,
                mean: EstimateCI::from_acc(&acc.over[i].0),
                moment_1eps: EstimateCI::from_acc(&acc.over[i].1),
                samples: acc.over[i].2.clone(),
            })
            .collect(),
        size_biased_bound: bound,
        size_biased_bound_se: bound_se,
        truncated_fraction: acc.truncated as f64 / acc.replicas as f64,
    }
}

/// Lean estimator of E[first ladder height] for high-replica oracles.
/// Returns the estimate and the fraction of budget-exhausted replicas.
pub fn first_ladder_height_mean(
    walk: &WalkLaw,
    replicas: u64,
    step_budget: u64,
    seed: u64,
) -> (EstimateCI, f64) {
    let acc = replicate(
        replicas,
        || (MeanAcc::default(), 0u64, 0u64),
        |r, (acc, truncated, total)| {
            let mut rng = stream(seed, r, 0);
            let mut s = 0.0;
            *total += 1;
            for _ in 0..step_budget {
                s += walk.sample(&mut rng);
                if s > 0.0 {
                    acc.push(s);
                    return;
                }
            }
            *truncated += 1;
        },
        |a, b| {
            a.0.merge(b.0);
            a.1 += b.1;
            a.2 += b.2;
        },
    );
    (
        EstimateCI::from_acc(&acc.0),
        acc.1 as f64 / acc.2 as f64,
    )
}

/// Squared-domination scan: centered auxiliary barriers `g` and a
/// transverse budget `h` must satisfy g^2 + h^2 <= f^2.
#[derive(Clone, Debug)]
pub struct ColicReport {
    pub epsilon: f64,
    pub min_slack: f64,
    /// (t, y, s, slack) for every violation found.
    pub violations: Vec<(usize, f64, usize, f64)>,
    pub pass: bool,
}

pub fn colic_check(front: &FrontBarrier, epsilon: f64, t_range: &[usize]) -> ColicReport {
    assert!(epsilon > 0.0);
    let lam = front.lambda;
    let m_big = front.m_big;
    let s_small = (m_big / (epsilon * lam)).powf(5.0 / 3.0);
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    for &t in t_range {
        for y in [1.0, (t as f64).sqrt()] {
            let fam = FrontBarrier {
                y,
                ..front.clone()
            };
            for s in 0..=t {
                let f = fam.eval(t, s);
                let sf = s as f64;
                let g = if sf <= s_small {
                    f - m_big / lam
                } else {
                    f - epsilon * (sf.min(t as f64 - sf)).powf(0.4)
                } - if s == t { 0.5 } else { 0.0 };
                let h = (epsilon * sf.powf(0.6).min((t as f64).sqrt())).max(m_big / lam);
                let slack = f * f - g * g - h * h;
                if slack < min_slack {
                    min_slack = slack;
                }
                if slack < 0.0 {
                    violations.push((t, y, s, slack));
                }
            }
        }
    }
    ColicReport {
        epsilon,
        min_slack,
        pass: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::CumulantHandle;
    use crate::model::{CountLaw, OffspringLaw};
    use crate::parallel::replicate_mean;
    use crate::stats;

    fn normal() -> WalkLaw {
        WalkLaw::StdNormal
    }

    fn front_barrier(y: f64) -> FrontBarrier {
        let law = OffspringLaw::gaussian(2, 1.0, CountLaw::Fixed { k: 2 }).unwrap();
        let handle = CumulantHandle::new(&law).unwrap();
        let sol = handle.solve_lambda(1e-12).unwrap();
        FrontBarrier::new(&sol, law.radial_law.median(2), 2000, y)
    }

    #[test]
    fn walk_laws_are_centered() {
        for law in [
            normal(),
            WalkLaw::Laplace { beta: 0.5 },
            WalkLaw::ShiftedExponential { rate: 1.0 },
            WalkLaw::StudentT { nu: 5.0 },
        ] {
            law.validate().unwrap();
            let acc = replicate_mean(200_000, |r| {
                let mut rng = stream(51, r, 0);
                law.sample(&mut rng)
            });
            let est = EstimateCI::from_acc(&acc);
            assert!(est.z_value(0.0).abs() <= 4.0, "{law:?} mean {}", est.mean);
        }
        assert!(WalkLaw::StudentT { nu: 4.0 }.validate().is_err());
    }

    #[test]
    fn abs_moments_closed_vs_quadrature() {
        // Normal: E|X|^3 = 2 sqrt(2/pi).
        let m3 = normal().abs_moment(3.0);
        assert!((m3 - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        // Laplace(beta): E|X|^3 = 6 beta^3.
        let m3 = WalkLaw::Laplace { beta: 0.7 }.abs_moment(3.0);
        assert!((m3 - 6.0 * 0.7f64.powi(3)).abs() < 1e-12);
        // Shifted exponential: E[X^2] = 1/rate^2 via quadrature.
        let v = WalkLaw::ShiftedExponential { rate: 2.0 }.abs_moment(2.0);
        assert!((v - 0.25).abs() < 1e-8, "{v}");
        // Student t(5): E[X^2] = 5/3 via quadrature.
        let v = WalkLaw::StudentT { nu: 5.0 }.abs_moment(2.0);
        assert!((v - 5.0 / 3.0).abs() < 1e-6, "{v}");
        // The 3+eps moment used by the barrier theory is finite.
        let law = WalkLaw::StudentT { nu: 5.0 };
        let m = law.abs_moment(3.0 + law.eps());
        assert!(m.is_finite() && m > 0.0);
    }

    #[test]
    fn barrier_eval_families() {
        let zero = BarrierFamily::Zero;
        assert_eq!(zero.eval(10, 7).unwrap(), 0.0);
        let log = BarrierFamily::Logarithmic { c1: 1.0, c2: 0.0 };
        assert_eq!(log.eval(10, 0).unwrap(), 0.0);
        assert!(log.eval(10, 11).is_err());

        // Front barrier at k = t collapses the horizon-dependent term:
        // f_t = speed t + ((d-4)/(2 lambda)) ln(t+1) + 3M/lambda + y/lambda.
        let fb = front_barrier(0.7);
        let t = 321usize;
        let lam = fb.lambda;
        let expected = fb.slope() * t as f64
            + (fb.dim as f64 - 4.0) / (2.0 * lam) * ((t + 1) as f64).ln()
            + 3.0 * fb.m_big / lam
            + 0.7 / lam;
        assert!((fb.eval(t, t) - expected).abs() < 1e-10);
    }

    #[test]
    fn front_barrier_floor_and_envelope() {
        let fb = front_barrier(0.0);
        // f >= 2M/lambda across the scanned range.
        let floor = 2.0 * fb.m_big / fb.lambda;
        for t in [1usize, 10, 100, 1000] {
            for s in 0..=t {
                assert!(fb.eval(t, s) >= floor - 1e-12, "t={t} s={s}");
            }
        }
        let family = BarrierFamily::Front(fb);
        let worst = check_envelope_domination(&family, 400);
        assert!(worst >= 0.0, "envelope margin {worst}");
    }

    #[test]
    fn summability_flags() {
        // The front envelope converges.
        let fb = front_barrier(0.0);
        let report = check_summability(&BarrierFamily::Front(fb).envelope(), 1 << 20);
        assert!(report.converged_direct && report.converged_dyadic);

        // sqrt(m) diverges (harmonic-type partial sums).
        let sqrt_env = Envelope {
            log_coeff: 0.0,
            sqrt_coeff: 1.0,
            offset: 0.0,
        };
        let report = check_summability(&sqrt_env, 1 << 20);
        assert!(!report.converged_direct && !report.converged_dyadic);

        // Zero envelope: all partial sums vanish.
        let zero_env = Envelope {
            log_coeff: 0.0,
            sqrt_coeff: 0.0,
            offset: 0.0,
        };
        let report = check_summability(&zero_env, 1024);
        assert!(report.partial_sums.iter().all(|&s| s == 0.0));
        assert!(report.converged_direct && report.converged_dyadic);
    }

    #[test]
    fn ballot_single_step_normal_cdf() {
        // n = 1, zero barrier, a = 0, b = 0: P{S_1 in [0, 1)}.
        let est =
            ballot_probability(&normal(), &BarrierFamily::Zero, 0.0, 0.0, 1, 400_000, 3).unwrap();
        let expected = stats::normal_cdf(1.0) - 0.5;
        assert!(
            est.estimate.z_value(expected).abs() <= 4.0,
            "{} vs {expected}",
            est.estimate.mean
        );

        // a = 2, b = 0: P{S_1 >= -2, S_1 in [-2, -1)}.
        let est =
            ballot_probability(&normal(), &BarrierFamily::Zero, 2.0, 0.0, 1, 400_000, 4).unwrap();
        let expected = stats::normal_cdf(-1.0) - stats::normal_cdf(-2.0);
        assert!(
            est.estimate.z_value(expected).abs() <= 4.0,
            "{} vs {expected}",
            est.estimate.mean
        );
    }

    #[test]
    fn glued_matches_plain_zero_barrier() {
        let n = 198; // divisible by 3, inside the plain regime
        let plain =
            plain_ballot(&normal(), &BarrierFamily::Zero, 1.0, 1.0, n, 3_000_000, 7).unwrap();
        let glued =
            glued_ballot(&normal(), &BarrierFamily::Zero, 1.0, 1.0, n, 1_000_000, 8).unwrap();
        let z = plain.estimate.z_against(&glued.estimate);
        assert!(
            z.abs() <= 4.0,
            "plain {} +- {} vs glued {} +- {}",
            plain.estimate.mean,
            plain.estimate.stderr,
            glued.estimate.mean,
            glued.estimate.stderr
        );
    }

    #[test]
    fn glued_matches_plain_log_barrier() {
        let n = 150;
        let family = BarrierFamily::Logarithmic { c1: 1.0, c2: 0.0 };
        let plain = plain_ballot(&normal(), &family, 2.0, 1.0, n, 3_000_000, 11).unwrap();
        let glued = glued_ballot(&normal(), &family, 2.0, 1.0, n, 1_000_000, 12).unwrap();
        let z = plain.estimate.z_against(&glued.estimate);
        assert!(
            z.abs() <= 4.0,
            "plain {} vs glued {} (z = {z})",
            plain.estimate.mean,
            glued.estimate.mean
        );
    }

    #[test]
    fn ballot_monotone_in_a_at_moderate_horizon() {
        let n = 256;
        let mut prev: Option<EstimateCI> = None;
        for a in [0.0, 1.0, 3.0] {
            let est = ballot_probability(&normal(), &BarrierFamily::Zero, a, 1.0, n, 400_000, 5)
                .unwrap()
                .estimate;
            if let Some(p) = prev {
                let z = est.z_against(&p);
                assert!(z > -4.0, "estimate decreased in a: z = {z}");
            }
            prev = Some(est);
        }
    }

    #[test]
    fn reversal_identity_zero_barrier() {
        // Time reversal: the ballot event equals
        // {W_j <= W_n + a for j <= n, W_n in [-a+b, -a+b+1)}.
        let n = 64;
        let (a, b) = (1.0, 0.5);
        let forward = ballot_probability(&normal(), &BarrierFamily::Zero, a, b, n, 1_500_000, 21)
            .unwrap()
            .estimate;
        let acc = replicate_mean(1_500_000, |r| {
            let mut rng = stream(22, r, 0);
            let mut w = 0.0f64;
            let mut max_w = 0.0f64;
            for _ in 1..=n {
                w += normal().sample(&mut rng);
                max_w = max_w.max(w);
            }
            let ok = max_w <= w + a && w >= -a + b && w < -a + b + 1.0;
            if ok {
                1.0
            } else {
                0.0
            }
        });
        let reversed = EstimateCI::from_acc(&acc);
        assert!(
            forward.z_against(&reversed).abs() <= 4.0,
            "{} vs {}",
            forward.mean,
            reversed.mean
        );
    }

    #[test]
    fn window_empty_detected() {
        let walk = WalkLaw::ShiftedExponential { rate: 1.0 };
        // Window far below the support minimum -n/rate.
        let family = BarrierFamily::Logarithmic {
            c1: 0.0,
            c2: -100.0,
        };
        let res = ballot_probability(&walk, &family, 0.0, 0.0, 10, 100, 1);
        assert!(matches!(res, Err(BallotError::WindowEmpty { .. })));
    }

    #[test]
    fn hitting_tail_values() {
        // n = 1, a = 0, symmetric walk: 1/2.
        let (est, _) = hitting_time_tail(&normal(), 0.0, 1, 400_000, 31);
        assert!(est.z_value(0.5).abs() <= 4.0);

        // n = 4: continuous exchangeable steps give P = C(8,4)/4^4 = 35/128;
        // cross-check against an independent high-replica run as well.
        let (est, _) = hitting_time_tail(&normal(), 0.0, 4, 2_000_000, 32);
        let exact = 35.0 / 128.0;
        assert!(est.z_value(exact).abs() <= 4.0, "{} vs {exact}", est.mean);
        let (oracle, _) = hitting_time_tail(&normal(), 0.0, 4, 10_000_000, 33);
        assert!(est.z_against(&oracle).abs() <= 4.0);
    }

    #[test]
    fn upper_survival_single_step() {
        let zero_env = Envelope {
            log_coeff: 0.0,
            sqrt_coeff: 0.0,
            offset: 0.0,
        };
        let est = barrier_survival(&normal(), &zero_env, 0.0, 1, 8, 400_000, 41);
        assert!(est.upper.z_value(0.5).abs() <= 4.0, "{}", est.upper.mean);
    }

    #[test]
    fn ladder_level_zero_overshoot_is_first_height() {
        let report = ladder_overshoot(&normal(), &[0.0], 30_000, 200_000, 51);
        assert!(report.truncated_fraction < 0.05);
        let (_, p) = stats::ks_two_sample(&report.levels[0].samples, &report.first_heights);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn first_ladder_height_consistency() {
        let (a, trunc_a) = first_ladder_height_mean(&normal(), 200_000, 100_000, 61);
        let (b, trunc_b) = first_ladder_height_mean(&normal(), 400_000, 100_000, 62);
        assert!(trunc_a < 0.02 && trunc_b < 0.02);
        assert!(a.z_against(&b).abs() <= 4.0, "{} vs {}", a.mean, b.mean);
    }

    #[test]
    fn overshoot_moments_below_size_biased_bound() {
        for walk in [normal(), WalkLaw::Laplace { beta: 1.0 }] {
            let report = ladder_overshoot(&walk, &[0.0, 2.0, 5.0, 10.0], 20_000, 400_000, 53);
            for lv in &report.levels {
                let z = (lv.moment_1eps.mean - report.size_biased_bound)
                    / (lv.moment_1eps.stderr.powi(2) + report.size_biased_bound_se.powi(2)).sqrt();
                assert!(
                    z <= 4.0,
                    "{walk:?} level {}: moment {} vs bound {}",
                    lv.level,
                    lv.moment_1eps.mean,
                    report.size_biased_bound
                );
            }
        }
    }

    #[test]
    fn colic_scan_passes_at_small_epsilon() {
        let fb = front_barrier(0.0);
        let report = colic_check(&fb, 0.05, &[100, 1000]);
        assert!(report.pass, "min slack {}", report.min_slack);

        // Large epsilon at a long horizon must violate the domination.
        let report = colic_check(&fb, 10.0, &[10_000]);
        assert!(!report.pass);
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn colic_terminal_slack_formula() {
        // At s = t (large t, small eps) the slack is f - 1/4 - eps^2 t
        // once the transverse budget saturates at eps sqrt(t).
        let fb = front_barrier(1.0);
        let eps = 0.05;
        let t = 1000usize;
        let fam = FrontBarrier { y: 1.0, ..fb.clone() };
        let f = fam.eval(t, t);
        let expected = f - 0.25 - eps * eps * t as f64;
        let report = colic_check(&fb, eps, &[t]);
        assert!(report.pass);
        let g = f - 0.5;
        let h = (eps * (t as f64).sqrt()).max(fb.m_big / fb.lambda);
        let slack = f * f - g * g - h * h;
        assert!((slack - expected).abs() < 1e-9);
        assert!(expected > 0.0);
    }
}
