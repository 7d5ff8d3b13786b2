//! Both sides of the many-to-one and many-to-two identities, and the
//! tilted estimator for the expected number of far-cap particles.
//!
//! Many-to-one: the expected sum of a path functional over the
//! generation-n particles equals `m^n` times its expectation along a
//! single walk whose step is the normalized mean measure.
//!
//! Many-to-two: the expected double sum over ordered particle pairs
//! splits into a diagonal walk term plus pair terms indexed by the split
//! generation `k`, each built from a shared prefix, an exchangeable
//! sibling-displacement pair, and two independent continuations:
//!
//! ```text
//! m^n E[f(Q, Q)] + m2 m^{2n-2} sum_k m^{-k} E[f(Q<k>, Q[k])].
//! ```

use rand::Rng;
use thiserror::Error;

use crate::ballot::FrontBarrier;
use crate::cumulant::{CumulantHandle, LambdaSolution};
use crate::model::{OffspringLaw, SpinePair};
use crate::parallel::{replicate, MeanAcc};
use crate::rng::stream;
use crate::stats::EstimateCI;
use crate::tilt::{TiltError, TiltedWalk};

#[derive(Debug, Error)]
pub enum ManyToFewError {
    #[error("horizon {n} too large for full-tree sampling (limit {limit})")]
    HorizonTooLarge { n: usize, limit: usize },
    #[error("barrier is negative at step {s} (value {value}); the offset constant is too small")]
    DegenerateBarrier { s: usize, value: f64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error(transparent)]
    Cumulant(#[from] crate::cumulant::CumulantError),
}

/// Bounded path functionals on length-(n+1) position paths.
#[derive(Clone, Debug)]
pub enum PathFunctional {
    Constant(f64),
    /// 1{|X_n| <= radius}.
    EndpointNormBall { radius: f64 },
    /// 1{<X_n, theta> >= c}.
    EndpointHalfspace { theta: Vec<f64>, c: f64 },
    /// 1{|X_s| <= f_s for s <= n, <X_n, e1> >= f_n - 1} for the front
    /// barrier with horizon n.
    BarrierIndicator { barrier: FrontBarrier },
    /// exp(u <X_n, e1>).
    ExpProjection { u: f64 },
}

impl PathFunctional {
    /// Evaluates on a path of n+1 points (the root included).
    pub fn eval(&self, path: &[Vec<f64>]) -> f64 {
        let n = path.len() - 1;
        let end = &path[n];
        match self {
            PathFunctional::Constant(c) => *c,
            PathFunctional::EndpointNormBall { radius } => {
                let r2: f64 = end.iter().map(|x| x * x).sum();
                if r2.sqrt() <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            PathFunctional::EndpointHalfspace { theta, c } => {
                let proj: f64 = end.iter().zip(theta).map(|(x, t)| x * t).sum();
                if proj >= *c {
                    1.0
                } else {
                    0.0
                }
            }
            PathFunctional::BarrierIndicator { barrier } => {
                for (s, p) in path.iter().enumerate() {
                    let f = barrier.eval(n, s);
                    let r2: f64 = p.iter().map(|x| x * x).sum();
                    if r2 > f * f {
                        return 0.0;
                    }
                }
                let f_end = barrier.eval(n, n);
                if end[0] >= f_end - 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            PathFunctional::ExpProjection { u } => (u * end[0]).exp(),
        }
    }
}

/// Product functional on ordered path pairs (all uses of the pair
/// identity factor this way).
#[derive(Clone, Debug)]
pub struct PairFunctional {
    pub left: PathFunctional,
    pub right: PathFunctional,
}

impl PairFunctional {
    pub fn eval(&self, path_left: &[Vec<f64>], path_right: &[Vec<f64>]) -> f64 {
        self.left.eval(path_left) * self.right.eval(path_right)
    }
}

/// Full-tree horizon guards: the expected population m^n must stay at
/// desk scale.
pub const MTO_HORIZON_LIMIT: usize = 12;
pub const MTT_HORIZON_LIMIT: usize = 8;

/// Walks the full tree to depth `n` accumulating `sum` of the functional
/// over root-to-leaf paths (single) and the per-path sums needed by the
/// product pair form.
fn tree_leaf_sums<R: Rng>(
    law: &OffspringLaw,
    funs: &[&PathFunctional],
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    let dim = law.dimension;
    let mut sums = vec![0.0; funs.len()];
    if n == 0 {
        let root = vec![vec![0.0; dim]];
        for (s, f) in sums.iter_mut().zip(funs) {
            *s += f.eval(&root);
        }
        return sums;
    }
    // Iterative depth-first walk; pending[d] counts the unexpanded
    // children of the node at path[d].
    let mut path: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    let mut pending: Vec<u64> = vec![law.count_law.sample(rng)];
    while let Some(top) = pending.last_mut() {
        if *top == 0 {
            pending.pop();
            path.pop();
            continue;
        }
        *top -= 1;
        // Extend the path by one child of the current node.
        let depth = pending.len() - 1;
        let parent = &path[depth];
        let mut child = vec![0.0; dim];
        law.sample_displacement_into(rng, &mut child);
        for (c, p) in child.iter_mut().zip(parent) {
            *c += *p;
        }
        path.truncate(depth + 1);
        path.push(child);
        if depth + 1 == n {
            for (s, f) in sums.iter_mut().zip(funs) {
                *s += f.eval(&path);
            }
        } else {
            pending.push(law.count_law.sample(rng));
        }
    }
    sums
}

/// LHS of the many-to-one identity: Monte-Carlo mean over full tree runs
/// of the functional summed over generation-n particles.
pub fn mto_lhs(
    law: &OffspringLaw,
    fun: &PathFunctional,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<EstimateCI, ManyToFewError> {
    if n > MTO_HORIZON_LIMIT {
        return Err(ManyToFewError::HorizonTooLarge {
            n,
            limit: MTO_HORIZON_LIMIT,
        });
    }
    let acc = replicate(
        replicas,
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 0);
            let sums = tree_leaf_sums(law, &[fun], n, &mut rng);
            acc.push(sums[0]);
        },
        MeanAcc::merge,
    );
    Ok(EstimateCI::from_acc(&acc))
}

/// Shared full-tree sampler evaluating several functionals on one pool
/// of tree replicas (one estimate per functional).
pub fn mto_lhs_many(
    law: &OffspringLaw,
    funs: &[PathFunctional],
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<Vec<EstimateCI>, ManyToFewError> {
    if n > MTO_HORIZON_LIMIT {
        return Err(ManyToFewError::HorizonTooLarge {
            n,
            limit: MTO_HORIZON_LIMIT,
        });
    }
    let refs: Vec<&PathFunctional> = funs.iter().collect();
    let acc = replicate(
        replicas,
        || vec![MeanAcc::default(); funs.len()],
        |r, accs| {
            let mut rng = stream(seed, r, 0);
            let sums = tree_leaf_sums(law, &refs, n, &mut rng);
            for (a, s) in accs.iter_mut().zip(sums) {
                a.push(s);
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        },
    );
    Ok(acc.iter().map(EstimateCI::from_acc).collect())
}

fn sample_walk_path<R: Rng>(law: &OffspringLaw, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let dim = law.dimension;
    let mut path = Vec::with_capacity(n + 1);
    path.push(vec![0.0; dim]);
    let mut step = vec![0.0; dim];
    for s in 0..n {
        law.sample_displacement_into(rng, &mut step);
        let prev = &path[s];
        path.push(prev.iter().zip(&step).map(|(p, d)| p + d).collect());
    }
    path
}

/// RHS of the many-to-one identity: `m^n` times the single-walk mean.
pub fn mto_rhs(
    law: &OffspringLaw,
    fun: &PathFunctional,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<EstimateCI, ManyToFewError> {
    let (m, _) = law.mean_params()?;
    let scale = m.powi(n as i32);
    let acc = replicate(
        replicas,
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 0);
            let path = sample_walk_path(law, n, &mut rng);
            acc.push(fun.eval(&path));
        },
        MeanAcc::merge,
    );
    Ok(EstimateCI::from_acc(&acc).scaled(scale))
}

/// LHS of the many-to-two identity: mean of the double sum over ordered
/// particle pairs. Product functionals factor the double sum into a
/// product of single sums.
pub fn mtt_lhs(
    law: &OffspringLaw,
    fun: &PairFunctional,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<EstimateCI, ManyToFewError> {
    if n > MTT_HORIZON_LIMIT {
        return Err(ManyToFewError::HorizonTooLarge {
            n,
            limit: MTT_HORIZON_LIMIT,
        });
    }
    let acc = replicate(
        replicas,
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 0);
            let sums = tree_leaf_sums(law, &[&fun.left, &fun.right], n, &mut rng);
            acc.push(sums[0] * sums[1]);
        },
        MeanAcc::merge,
    );
    Ok(EstimateCI::from_acc(&acc))
}

/// Pair of coupled spine walks: shared prefix to index `k`, exchangeable
/// sibling displacements, then independent continuations.
#[derive(Clone, Debug)]
pub struct SpineWalkPair {
    pub split: usize,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

/// Sampling mode for the pair walks: the exchangeable construction or
/// the uncoupled negative control (two fully independent walks, which
/// must break the identity on correlated functionals).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpineMode {
    Exchangeable,
    UncoupledControl,
}

pub fn sample_spine_walk_pair<R: Rng>(
    law: &OffspringLaw,
    pair_table: &[(u64, f64)],
    n: usize,
    k: usize,
    mode: SpineMode,
    rng: &mut R,
) -> SpineWalkPair {
    assert!(k < n);
    match mode {
        SpineMode::Exchangeable => {
            let prefix = sample_walk_path(law, k, rng);
            let SpinePair { delta1, delta2 } = law.sample_spine_pair_with_table(pair_table, rng);
            let extend = |delta: &[f64], rng: &mut R| -> Vec<Vec<f64>> {
                let mut path = prefix.clone();
                let anchor: Vec<f64> = prefix[k].iter().zip(delta).map(|(p, d)| p + d).collect();
                path.push(anchor);
                let dim = law.dimension;
                let mut step = vec![0.0; dim];
                for s in 0..(n - k - 1) {
                    law.sample_displacement_into(rng, &mut step);
                    let prev = &path[k + 1 + s];
                    path.push(prev.iter().zip(&step).map(|(p, d)| p + d).collect());
                }
                path
            };
            let left = extend(&delta1, rng);
            let right = extend(&delta2, rng);
            SpineWalkPair { split: k, left, right }
        }
        SpineMode::UncoupledControl => SpineWalkPair {
            split: k,
            left: sample_walk_path(law, n, rng),
            right: sample_walk_path(law, n, rng),
        },
    }
}

/// RHS of the many-to-two identity, stratified over the split index with
/// replica allocation proportional to the geometric term weights.
pub fn mtt_rhs(
    law: &OffspringLaw,
    fun: &PairFunctional,
    n: usize,
    replicas: u64,
    mode: SpineMode,
    seed: u64,
) -> Result<EstimateCI, ManyToFewError> {
    if n > MTT_HORIZON_LIMIT {
        return Err(ManyToFewError::HorizonTooLarge {
            n,
            limit: MTT_HORIZON_LIMIT,
        });
    }
    let (m, m2) = law.mean_params()?;
    let pair_table = law.pair_count_table_auto()?;

    // Allocation: diagonal stratum weight 1, split-k weight m^{-k}.
    let weights: Vec<f64> = std::iter::once(1.0)
        .chain((0..n).map(|k| m.powi(-(k as i32))))
        .collect();
    let total_weight: f64 = weights.iter().sum();
    let alloc: Vec<u64> = weights
        .iter()
        .map(|w| ((replicas as f64 * w / total_weight) as u64).max(1000))
        .collect();

    // Diagonal stratum: m^n E[f(Q, Q)].
    let diag = replicate(
        alloc[0],
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 1_000_000);
            let path = sample_walk_path(law, n, &mut rng);
            acc.push(fun.eval(&path, &path));
        },
        MeanAcc::merge,
    );
    let diag_est = EstimateCI::from_acc(&diag).scaled(m.powi(n as i32));

    let mut mean = diag_est.mean;
    let mut var = diag_est.stderr * diag_est.stderr;
    for k in 0..n {
        let stratum = replicate(
            alloc[k + 1],
            MeanAcc::default,
            |r, acc| {
                let mut rng = stream(seed, r, 2_000_000 + k as u64);
                let pair = sample_spine_walk_pair(law, &pair_table, n, k, mode, &mut rng);
                acc.push(fun.eval(&pair.left, &pair.right));
            },
            MeanAcc::merge,
        );
        let scale = m2 * m.powi(2 * n as i32 - 2) * m.powi(-(k as i32));
        let est = EstimateCI::from_acc(&stratum).scaled(scale);
        mean += est.mean;
        var += est.stderr * est.stderr;
    }
    Ok(EstimateCI {
        mean,
        stderr: var.sqrt(),
        replicas,
    })
}

/// Closed form of the pair identity for the constant functional:
/// `m^n + m2 m^{2n-2} (1 - m^{-n})/(1 - m^{-1})`.
pub fn mtt_constant_value(m: f64, m2: f64, n: usize) -> f64 {
    let geom = (1.0 - m.powi(-(n as i32))) / (1.0 - 1.0 / m);
    m.powi(n as i32) + m2 * m.powi(2 * n as i32 - 2) * geom
}

/// Estimate of the expected number of far-cap particles at horizon `t`
/// and offset `y`, together with the profile-normalized statistic
/// `estimate * t^{(d-1)/2} e^y / (1 + y)`.
#[derive(Clone, Debug)]
pub struct CapCountEstimate {
    pub t: usize,
    pub y: f64,
    pub estimate: EstimateCI,
    pub normalized: EstimateCI,
}

/// Importance-sampled first moment of the far-cap particle count:
///
/// ```text
/// E[#A] = m^t P{ |Q_s| <= f_s for s <= t, <Q_t, e1> >= f_t - 1 }
/// ```
///
/// estimated with the projection tilted to the critical drift (weight
/// `exp(t Psi(lambda) - lambda X_t)`) and the transverse components drawn
/// from their exact conditional law given the projection.
pub fn first_moment_cap_count(
    handle: &CumulantHandle,
    solution: &LambdaSolution,
    front: &FrontBarrier,
    t: usize,
    y: f64,
    replicas: u64,
    seed: u64,
) -> Result<CapCountEstimate, ManyToFewError> {
    let barrier = FrontBarrier { y, ..front.clone() };
    let f: Vec<f64> = (0..=t).map(|s| barrier.eval(t, s)).collect();
    for (s, &value) in f.iter().enumerate() {
        if value < 0.0 {
            return Err(ManyToFewError::DegenerateBarrier { s, value });
        }
    }
    let tilted = TiltedWalk::new(handle, solution.lambda)?;
    let lambda = solution.lambda;
    let psi_l = solution.psi_lambda;
    let dim = handle.law.dimension;

    let acc = replicate(
        replicas,
        MeanAcc::default,
        |r, acc| {
            let mut rng = stream(seed, r, 0);
            let mut proj = 0.0f64;
            let mut perp = vec![0.0f64; dim - 1];
            let mut perp_sum = vec![0.0f64; dim - 1];
            let mut inside = true;
            for &f_s in f.iter().skip(1) {
                proj += tilted.sample_step_with_transverse(&mut rng, &mut perp);
                let mut norm_sq = proj * proj;
                for (ps, p) in perp_sum.iter_mut().zip(&perp) {
                    *ps += *p;
                    norm_sq += *ps * *ps;
                }
                if norm_sq > f_s * f_s {
                    inside = false;
                    break;
                }
            }
            let mut contribution = 0.0;
            if inside && proj >= f[t] - 1.0 {
                contribution = (t as f64 * psi_l - lambda * proj).exp();
            }
            acc.push(contribution);
        },
        MeanAcc::merge,
    );
    let estimate = EstimateCI::from_acc(&acc);
    let scale = (t as f64).powf((dim as f64 - 1.0) / 2.0) * y.exp() / (1.0 + y);
    Ok(CapCountEstimate {
        t,
        y,
        normalized: estimate.scaled(scale),
        estimate,
    })
}
