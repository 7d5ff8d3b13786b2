//! Generation-by-generation population simulation.
//!
//! Positions are stored flat per generation with parent indices. When a
//! generation would exceed the population cap, the half of the cap with
//! the largest radii is always retained and the other half is filled by
//! a uniform subsample of the remaining particles, so the recorded
//! maximal displacement of the generation is exact and bulk statistics
//! stay roughly unbiased for diagnostics.

use rand::Rng;
use thiserror::Error;

use crate::model::OffspringLaw;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum BrwError {
    #[error("generation is empty")]
    EmptyGeneration,
    #[error("conditioned sampling timed out: acceptance {acceptance:.2e} below 1e-4 over {attempts} attempts")]
    Timeout { acceptance: f64, attempts: u64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Particles of one generation: flat position storage plus parent
/// indices into the previous generation.
#[derive(Clone, Debug)]
pub struct Generation {
    pub time: u32,
    pub dim: usize,
    pub positions: Vec<f64>,
    pub parent: Vec<u32>,
}

impl Generation {
    pub fn root(dim: usize) -> Self {
        Generation {
            time: 0,
            dim,
            positions: vec![0.0; dim],
            parent: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-run record: maximal displacement per time, population sizes,
/// survival and cap flags. `radius_max[t]` is `None` after extinction.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub seed: u64,
    pub replica: u64,
    pub law: OffspringLaw,
    pub radius_max: Vec<Option<f64>>,
    pub population: Vec<u64>,
    pub survived: bool,
    pub cap_hit: bool,
}

impl RunRecord {
    /// R_t, present only while the population is alive.
    pub fn radius_at(&self, t: usize) -> Option<f64> {
        self.radius_max.get(t).copied().flatten()
    }
}

/// Fraction of the cap reserved for the largest-radius particles.
const EXTREME_FRACTION: f64 = 0.5;

/// Evolves the process for `t_max` generations from a single particle at
/// the origin. RNG streams are keyed by `(seed, replica, generation)`.
pub fn simulate(
    law: &OffspringLaw,
    t_max: u32,
    cap: usize,
    seed: u64,
    replica: u64,
) -> RunRecord {
    let (record, _) = simulate_with_last(law, t_max, cap, seed, replica);
    record
}

/// Same as [`simulate`] but also returns the final generation.
pub fn simulate_with_last(
    law: &OffspringLaw,
    t_max: u32,
    cap: usize,
    seed: u64,
    replica: u64,
) -> (RunRecord, Generation) {
    assert!(cap >= 1);
    let dim = law.dimension;
    let mut cur = Generation::root(dim);
    let mut record = RunRecord {
        seed,
        replica,
        law: law.clone(),
        radius_max: Vec::with_capacity(t_max as usize + 1),
        population: Vec::with_capacity(t_max as usize + 1),
        survived: true,
        cap_hit: false,
    };
    record.radius_max.push(Some(0.0));
    record.population.push(1);

    let mut child_positions: Vec<f64> = Vec::new();
    let mut child_parent: Vec<u32> = Vec::new();
    let mut child_radius_sq: Vec<f64> = Vec::new();
    let mut displacement = vec![0.0f64; dim];

    for t in 1..=t_max {
        if cur.is_empty() {
            record.radius_max.push(None);
            record.population.push(0);
            continue;
        }
        let mut rng = stream(seed, replica, t as u64);
        child_positions.clear();
        child_parent.clear();
        child_radius_sq.clear();
        for i in 0..cur.len() {
            let n = law.count_law.sample(&mut rng);
            let parent_pos = &cur.positions[i * dim..(i + 1) * dim];
            for _ in 0..n {
                law.sample_displacement_into(&mut rng, &mut displacement);
                let mut norm_sq = 0.0;
                for (x, dxy) in parent_pos.iter().zip(&displacement) {
                    let y = x + dxy;
                    child_positions.push(y);
                    norm_sq += y * y;
                }
                child_parent.push(i as u32);
                child_radius_sq.push(norm_sq);
            }
        }
        let generated = child_parent.len();
        if generated == 0 {
            record.survived = false;
            record.radius_max.push(None);
            record.population.push(0);
            cur = Generation {
                time: t,
                dim,
                positions: Vec::new(),
                parent: Vec::new(),
            };
            continue;
        }
        // Exact maximum over the full generated brood.
        let max_sq = child_radius_sq.iter().cloned().fold(0.0f64, f64::max);
        record.radius_max.push(Some(max_sq.sqrt()));

        let retained: Vec<u32> = if generated > cap {
            record.cap_hit = true;
            let n_extreme = ((cap as f64 * EXTREME_FRACTION) as usize).clamp(1, cap);
            let mut order: Vec<u32> = (0..generated as u32).collect();
            order.select_nth_unstable_by(n_extreme - 1, |&a, &b| {
                child_radius_sq[b as usize]
                    .partial_cmp(&child_radius_sq[a as usize])
                    .unwrap()
            });
            // Uniform fill from the rest (partial Fisher-Yates).
            let fill = cap - n_extreme;
            let rest = &mut order[n_extreme..];
            for j in 0..fill {
                let k = rng.random_range(j..rest.len());
                rest.swap(j, k);
            }
            order.truncate(cap);
            order
        } else {
            (0..generated as u32).collect()
        };

        let mut next = Generation {
            time: t,
            dim,
            positions: Vec::with_capacity(retained.len() * dim),
            parent: Vec::with_capacity(retained.len()),
        };
        for &idx in &retained {
            let i = idx as usize;
            next.positions
                .extend_from_slice(&child_positions[i * dim..(i + 1) * dim]);
            next.parent.push(child_parent[i]);
        }
        record.population.push(next.len() as u64);
        cur = next;
    }
    record.survived = !cur.is_empty();
    (record, cur)
}

/// Index and position of a uniformly chosen farthest particle (ties are
/// broken uniformly at random).
pub fn farthest_particle<R: Rng>(
    gen: &Generation,
    rng: &mut R,
) -> Result<(usize, Vec<f64>), BrwError> {
    if gen.is_empty() {
        return Err(BrwError::EmptyGeneration);
    }
    let mut best_sq = f64::NEG_INFINITY;
    let mut chosen = 0usize;
    let mut ties = 0u64;
    for i in 0..gen.len() {
        let norm_sq: f64 = gen.position(i).iter().map(|x| x * x).sum();
        if norm_sq > best_sq {
            best_sq = norm_sq;
            chosen = i;
            ties = 1;
        } else if norm_sq == best_sq {
            // Reservoir step over exact ties.
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                chosen = i;
            }
        }
    }
    Ok((chosen, gen.position(chosen).to_vec()))
}

/// Rejection-samples runs surviving to `t_max`. Replica indices advance
/// deterministically, so the output is a pure function of the seed.
pub fn conditioned_runs(
    law: &OffspringLaw,
    t_max: u32,
    cap: usize,
    n_surviving: usize,
    seed: u64,
    attempt_budget: u64,
) -> Result<(Vec<RunRecord>, f64), BrwError> {
    law.mean_params()?; // supercriticality guard
    let mut out = Vec::with_capacity(n_surviving);
    let mut attempts = 0u64;
    let mut replica = 0u64;
    while out.len() < n_surviving {
        if attempts >= attempt_budget {
            let acceptance = out.len() as f64 / attempts as f64;
            if acceptance < 1e-4 {
                return Err(BrwError::Timeout {
                    acceptance,
                    attempts,
                });
            }
        }
        let record = simulate(law, t_max, cap, seed, replica);
        replica += 1;
        attempts += 1;
        if record.survived {
            out.push(record);
        }
    }
    let acceptance = if attempts == 0 {
        1.0
    } else {
        out.len() as f64 / attempts as f64
    };
    Ok((out, acceptance))
}

/// Parallel batch of unconditioned runs with consecutive replica indices.
pub fn simulate_batch(
    law: &OffspringLaw,
    t_max: u32,
    cap: usize,
    seed: u64,
    replicas: u64,
) -> Vec<RunRecord> {
    use rayon::prelude::*;
    (0..replicas)
        .into_par_iter()
        .map(|r| simulate(law, t_max, cap, seed, r))
        .collect()
}
