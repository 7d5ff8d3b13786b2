//! Laboratory for radially symmetric branching random walks.
//!
//! The crate is organized around the pipeline used by the experiment
//! runner:
//!
//! * [`model`] — offspring point processes (count law x radial law x
//!   uniform direction), spine pairs, and the one-dimensional projection
//!   law of a step.
//! * [`cumulant`] — generating functions of the projected step, the
//!   critical tilt solver, the rate function, and the displacement front.
//! * [`tilt`] — exponential change of measure for the projected step with
//!   likelihood-weight accounting.
//! * [`brw`] — generation-by-generation population simulation with a
//!   retain-extremes population cap.
//! * [`manytofew`] — both sides of the many-to-one / many-to-two
//!   identities and the tilted estimator for the expected number of
//!   far-cap particles.
//! * [`ballot`] — one-dimensional walk laboratory: moving barriers,
//!   ballot probabilities, barrier survival, hitting-time tails, ladder
//!   heights and overshoots.
//! * [`geometry`] — sphere-cap covers, separated direction grids, and
//!   deterministic trigonometric/geometric inequality checks.
//!
//! Everything is driven by counter-based RNG streams keyed by
//! `(seed, replica, stage)` so that every replica is reproducible in
//! isolation and results do not depend on the number of worker threads.

pub mod ballot;
pub mod brw;
pub mod cumulant;
pub mod geometry;
pub mod manytofew;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod stats;
pub mod tilt;
