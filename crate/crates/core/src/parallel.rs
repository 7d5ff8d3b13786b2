//! Deterministic replica-parallel execution.
//!
//! Replicas are processed in fixed-size blocks; each block accumulates
//! sequentially in replica order and the block partials are folded in
//! block order. The result is byte-identical for any worker-thread count.

use rayon::prelude::*;

/// Replicas per block. Large enough to amortize scheduling, small enough
/// to balance load.
pub const BLOCK: u64 = 4096;

/// Runs `step` for replica indices `0..replicas`, merging block partials
/// in a fixed order.
pub fn replicate<A, I, F, M>(replicas: u64, init: I, step: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) + Sync,
    M: Fn(&mut A, A),
{
    let blocks = replicas.div_ceil(BLOCK);
    let partials: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(replicas);
            let mut acc = init();
            for r in lo..hi {
                step(r, &mut acc);
            }
            acc
        })
        .collect();
    let mut out = init();
    for p in partials {
        merge(&mut out, p);
    }
    out
}

/// Mean/variance accumulator for replica outputs.
#[derive(Clone, Debug, Default)]
pub struct MeanAcc {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: MeanAcc) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean (0 for degenerate samples).
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = (self.sum_sq - self.sum * self.sum / n).max(0.0) / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Convenience: mean/stderr of a per-replica statistic.
pub fn replicate_mean<F>(replicas: u64, f: F) -> MeanAcc
where
    F: Fn(u64) -> f64 + Sync,
{
    replicate(
        replicas,
        MeanAcc::default,
        |r, acc| acc.push(f(r)),
        MeanAcc::merge,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_fold_matches_manual_blocking() {
        // The contract is bit-identical results for any thread count:
        // partials accumulate per block and fold in block order.
        let n = 100_000u64;
        let par = replicate_mean(n, |r| (r as f64).sin());
        let mut expected = MeanAcc::default();
        let mut b = 0;
        while b * BLOCK < n {
            let mut acc = MeanAcc::default();
            for r in b * BLOCK..((b + 1) * BLOCK).min(n) {
                acc.push((r as f64).sin());
            }
            expected.merge(acc);
            b += 1;
        }
        assert_eq!(par.sum.to_bits(), expected.sum.to_bits());
        assert_eq!(par.sum_sq.to_bits(), expected.sum_sq.to_bits());

        let again = replicate_mean(n, |r| (r as f64).sin());
        assert_eq!(par.sum.to_bits(), again.sum.to_bits());
    }
}
