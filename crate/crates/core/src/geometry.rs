//! Sphere-cap covers, separated direction grids, cap-area bounds, and
//! deterministic trigonometric/geometric inequality checks.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::model::sample_direction;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("parameter out of range: {0}")]
    BadParam(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum DirectionSetKind {
    /// Cover of the sphere by caps {v : <u, v> >= 1 - 1/r_param}.
    CapCover { r_param: f64 },
    /// Pairwise chordal separation at least a_sep / sqrt(t).
    SeparatedGrid { t: usize, a_sep: f64 },
}

/// A finite set of unit directions with a recorded separation and the
/// cardinality constants relative to the target scaling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub separation: f64,
    pub kind: DirectionSetKind,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Exact minimum pairwise chordal distance. Brute force up to 10^4
    /// points, grid hashing beyond.
    pub fn min_pairwise_distance(&self) -> f64 {
        let pts = &self.directions;
        if pts.len() < 2 {
            return f64::INFINITY;
        }
        if pts.len() <= 10_000 {
            let mut best = f64::INFINITY;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    best = best.min(chord(&pts[i], &pts[j]));
                }
            }
            return best;
        }
        // Spatial hash on the cube circumscribing the sphere: only pairs
        // within neighboring cells can be close.
        let cell = self.separation.max(1e-6);
        use std::collections::HashMap;
        let key = |p: &[f64]| -> Vec<i64> {
            p.iter().map(|x| (x / cell).floor() as i64).collect()
        };
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            map.entry(key(p)).or_default().push(i);
        }
        let mut best = f64::INFINITY;
        let offsets = neighbor_offsets(self.dim);
        for (cell_key, members) in &map {
            for off in &offsets {
                let nk: Vec<i64> = cell_key.iter().zip(off).map(|(a, b)| a + b).collect();
                if let Some(others) = map.get(&nk) {
                    for &i in members {
                        for &j in others {
                            if i < j {
                                best = best.min(chord(&pts[i], &pts[j]));
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

fn chord(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn neighbor_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * 3);
        for prefix in &out {
            for d in [-1i64, 0, 1] {
                let mut v = prefix.clone();
                v.push(d);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Quasi-uniform candidate stream per dimension: exact angles for the
/// circle, a Fibonacci lattice for the 2-sphere, and a seeded Gaussian
/// stream above.
fn candidate_stream(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match d {
        2 => (0..count)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![angle.cos(), angle.sin()]
            })
            .collect(),
        3 => {
            let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * i as f64 / golden;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = stream(seed, 0, 0);
            (0..count).map(|_| sample_direction(d, &mut rng)).collect()
        }
    }
}

/// Greedy maximal packing with chordal separation `sep` drawn from a
/// candidate stream; for random streams the scan stops after
/// 10 * |set| consecutive rejections.
fn greedy_packing(d: usize, sep: f64, seed: u64) -> Vec<Vec<f64>> {
    // Surface-count heuristic for the stream size.
    let expected = (4.0 / sep).powi(d as i32 - 1).min(4e6) as usize + 64;
    let stream_pts = candidate_stream(d, expected.max(256), seed);
    let mut set: Vec<Vec<f64>> = Vec::new();
    let mut consecutive_rejections = 0usize;
    for p in stream_pts {
        let fits = set.iter().all(|q| chord(&p, q) >= sep);
        if fits {
            set.push(p);
            consecutive_rejections = 0;
        } else {
            consecutive_rejections += 1;
            if d >= 4 && consecutive_rejections > 10 * set.len().max(8) {
                break;
            }
        }
    }
    set
}

#[derive(Clone, Debug)]
pub struct CapCover {
    pub set: DirectionSet,
    /// Fraction of probe points covered (must be 1.0).
    pub probe_coverage: f64,
    /// |set| / r_param^{(d-1)/2}.
    pub cardinality_constant: f64,
}

/// Builds a set of directions such that every point of the sphere has
/// inner product at least 1 - 1/r_param with one of them. For the circle
/// the equally spaced construction is exact; in higher dimensions a
/// maximal packing at half the cap angular radius is covering by
/// maximality. Coverage is certified on `probes` quasi-uniform points.
pub fn cap_cover(
    d: usize,
    r_param: f64,
    probes: usize,
    seed: u64,
) -> Result<CapCover, GeometryError> {
    if d < 2 {
        return Err(GeometryError::DimensionTooSmall(d));
    }
    if r_param <= 1.0 {
        return Err(GeometryError::BadParam(format!("r_param = {r_param}")));
    }
    let cap_angle = (1.0 - 1.0 / r_param).acos();
    let (directions, separation) = if d == 2 {
        let count = (std::f64::consts::PI / cap_angle).ceil() as usize;
        let pts = (0..count)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![angle.cos(), angle.sin()]
            })
            .collect::<Vec<_>>();
        let sep = 2.0 * (std::f64::consts::PI / count as f64).sin();
        (pts, sep)
    } else {
        let sep = 2.0 * (cap_angle / 4.0).sin(); // chordal radius of half the cap angle
        (greedy_packing(d, sep, seed), sep)
    };
    let set = DirectionSet {
        dim: d,
        directions,
        separation,
        kind: DirectionSetKind::CapCover { r_param },
    };
    // Certify coverage.
    let threshold = 1.0 - 1.0 / r_param;
    let probe_pts = probe_points(d, probes, seed ^ 0xC0FFEE);
    let mut covered = 0usize;
    for p in &probe_pts {
        let best = set
            .directions
            .iter()
            .map(|q| dot(p, q))
            .fold(f64::NEG_INFINITY, f64::max);
        if best >= threshold {
            covered += 1;
        }
    }
    Ok(CapCover {
        probe_coverage: covered as f64 / probe_pts.len() as f64,
        cardinality_constant: set.len() as f64 / r_param.powf((d as f64 - 1.0) / 2.0),
        set,
    })
}

fn probe_points(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    // Deterministic seeded probes; for d <= 3 mix the lattice stream with
    // random points to avoid sharing structure with the construction.
    let mut pts = candidate_stream(d, count / 2, seed);
    let mut rng = stream(seed, 1, 0);
    while pts.len() < count {
        pts.push(sample_direction(d, &mut rng));
    }
    pts
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds a direction grid with pairwise chordal separation `a_sep /
/// sqrt(t)`; the circle uses the exact equally spaced packing.
pub fn separated_grid(d: usize, t: usize, a_sep: f64, seed: u64) -> Result<DirectionSet, GeometryError> {
    if d < 2 {
        return Err(GeometryError::DimensionTooSmall(d));
    }
    if t < 1 || a_sep <= 0.0 {
        return Err(GeometryError::BadParam(format!("t = {t}, a_sep = {a_sep}")));
    }
    let sep = a_sep / (t as f64).sqrt();
    let directions = if sep >= 2.0 {
        // Everything is within the separation of the first point.
        vec![{
            let mut v = vec![0.0; d];
            v[0] = 1.0;
            v
        }]
    } else if d == 2 {
        let max_count = (std::f64::consts::PI / (sep / 2.0).asin()).floor() as usize;
        (0..max_count.max(1))
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / max_count.max(1) as f64;
                vec![angle.cos(), angle.sin()]
            })
            .collect()
    } else {
        greedy_packing(d, sep, seed)
    };
    Ok(DirectionSet {
        dim: d,
        directions,
        separation: sep,
        kind: DirectionSetKind::SeparatedGrid { t, a_sep },
    })
}

/// Exact fraction of the sphere covered by the cap {v : <u, v> >= 1-h},
/// via the regularized incomplete beta function.
pub fn cap_area_ratio(d: usize, h: f64) -> Result<f64, GeometryError> {
    if d < 2 {
        return Err(GeometryError::DimensionTooSmall(d));
    }
    if !(0.0..=1.0).contains(&h) {
        return Err(GeometryError::BadParam(format!("h = {h}")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    // Polar angle phi with cos(phi) = 1 - h <= pi/2; the cap fraction is
    // (1/2) I_{sin^2 phi}((d-1)/2, 1/2).
    let s = (2.0 * h - h * h).clamp(0.0, 1.0);
    Ok(0.5 * beta_reg((d as f64 - 1.0) / 2.0, 0.5, s))
}

/// Grid-minimization check of
/// `inf_x [a (1 - cos(alpha - asin x)) + b x] >= (a alpha^2 /\ b alpha)/pi`.
#[derive(Clone, Debug)]
pub struct TrigBoundReport {
    pub lhs_min: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn verify_trig_bound(a: f64, b: f64, alpha: f64, grid_size: usize) -> TrigBoundReport {
    assert!(a >= 0.0 && b >= 0.0);
    assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&alpha));
    let objective = |x: f64| a * (1.0 - (alpha - x.asin()).cos()) + b * x;
    let mut lhs_min = f64::INFINITY;
    let mut argmin = 0.0;
    for i in 0..=grid_size {
        let x = i as f64 / grid_size as f64;
        let v = objective(x);
        if v < lhs_min {
            lhs_min = v;
            argmin = x;
        }
    }
    // Refine around the coarse minimizer.
    let lo = (argmin - 1.0 / grid_size as f64).max(0.0);
    let hi = (argmin + 1.0 / grid_size as f64).min(1.0);
    for i in 0..=grid_size {
        let x = lo + (hi - lo) * i as f64 / grid_size as f64;
        lhs_min = lhs_min.min(objective(x));
    }
    let rhs = (a * alpha * alpha).min(b * alpha) / std::f64::consts::PI;
    TrigBoundReport {
        lhs_min,
        rhs,
        pass: lhs_min >= rhs - 1e-12,
    }
}

/// Configuration for the planar gain/cost optimum check.
///
/// The score of a configuration `(x, y1, y2)` inside the ball system
/// `|x| <= r`, `|x + y_i| <= r` at cap half-angle `alpha` is
///
/// ```text
/// h_alpha = lambda <x+y1, th1> + lambda <x+y2, th2>
///           - I1(|x|/s) s - (lambda + eps) max(|y1|, |y2|)
/// ```
///
/// with `th1 = (cos a, sin a)`, `th2 = (cos a, -sin a)`. The maximum over
/// configurations and alpha must sit at `(r e1, 0, 0)` with `alpha = 0`.
pub struct GainCostConfig<'a> {
    pub r: f64,
    pub s: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Rate function I1 (of the normalized radius).
    pub rate: &'a dyn Fn(f64) -> f64,
    pub alpha_grid: usize,
    pub radial_grid: usize,
    pub angle_grid: usize,
}

#[derive(Clone, Debug)]
pub struct GainCostReport {
    pub h_max: f64,
    /// Value at the designated maximizer (r e1, 0, 0) at alpha = 0.
    pub h_at_designated: f64,
    pub max_at_designated: bool,
    /// Best constant c with deficit >= (lambda - eps/10)(r - m) + c a^2
    /// over the grid (positive = bound verified).
    pub deficit_curvature: f64,
    /// Worst slack of the linear deficit bound at alpha = 0.
    pub worst_linear_slack: f64,
}

pub fn verify_gain_cost_optimum(cfg: &GainCostConfig) -> GainCostReport {
    let r = cfg.r;
    let s = cfg.s;
    let lam = cfg.lambda;
    let eps = cfg.epsilon;
    let h_at = |alpha: f64, x: &[f64; 2], y1: &[f64; 2], y2: &[f64; 2]| -> f64 {
        let th1 = [alpha.cos(), alpha.sin()];
        let th2 = [alpha.cos(), -alpha.sin()];
        let p1 = [x[0] + y1[0], x[1] + y1[1]];
        let p2 = [x[0] + y2[0], x[1] + y2[1]];
        let norm = |v: &[f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
        let gain = lam * (p1[0] * th1[0] + p1[1] * th1[1]) + lam * (p2[0] * th2[0] + p2[1] * th2[1]);
        let cost = (cfg.rate)(norm(x) / s) * s + (lam + eps) * norm(y1).max(norm(y2));
        gain - cost
    };

    let designated = h_at(0.0, &[r, 0.0], &[0.0, 0.0], &[0.0, 0.0]);

    // Polar grids including the exact designated point.
    let radii: Vec<f64> = (0..=cfg.radial_grid)
        .map(|i| r * i as f64 / cfg.radial_grid as f64)
        .collect();
    let angles: Vec<f64> = (0..cfg.angle_grid)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / cfg.angle_grid as f64)
        .collect();
    // |y_i| can reach 2r inside the ball system; infeasible combinations
    // are filtered below.
    let y_radii: Vec<f64> = (0..=cfg.radial_grid)
        .map(|i| 2.0 * r * i as f64 / cfg.radial_grid as f64)
        .collect();

    let mut h_max = f64::NEG_INFINITY;
    let mut best_is_designated = false;
    let mut deficit_curvature = f64::INFINITY;
    let mut worst_linear_slack = f64::INFINITY;

    for ai in 0..=cfg.alpha_grid {
        let alpha = std::f64::consts::FRAC_PI_2 * ai as f64 / cfg.alpha_grid as f64;
        for &rx in &radii {
            for &phx in &angles {
                let x = [rx * phx.cos(), rx * phx.sin()];
                for &ry1 in &y_radii {
                    for &phy1 in &angles {
                        let y1 = [ry1 * phy1.cos(), ry1 * phy1.sin()];
                        let p1 = [x[0] + y1[0], x[1] + y1[1]];
                        if p1[0] * p1[0] + p1[1] * p1[1] > r * r + 1e-9 {
                            continue;
                        }
                        for &ry2 in &y_radii {
                            for &phy2 in &angles {
                                let y2 = [ry2 * phy2.cos(), ry2 * phy2.sin()];
                                let p2 = [x[0] + y2[0], x[1] + y2[1]];
                                if p2[0] * p2[0] + p2[1] * p2[1] > r * r + 1e-9 {
                                    continue;
                                }
                                let h = h_at(alpha, &x, &y1, &y2);
                                let is_designated = alpha == 0.0
                                    && rx == r
                                    && ry1 == 0.0
                                    && ry2 == 0.0
                                    && phx == 0.0;
                                if h > h_max {
                                    h_max = h;
                                    best_is_designated = is_designated;
                                } else if h == h_max && is_designated {
                                    best_is_designated = true;
                                }
                                // Deficit diagnostics.
                                let m_frak = (p1[0] * p1[0] + p1[1] * p1[1])
                                    .sqrt()
                                    .max((p2[0] * p2[0] + p2[1] * p2[1]).sqrt());
                                let deficit = designated - h;
                                let linear = (lam - eps / 10.0) * (r - m_frak);
                                if alpha > 0.0 {
                                    deficit_curvature =
                                        deficit_curvature.min((deficit - linear) / (alpha * alpha));
                                } else {
                                    worst_linear_slack = worst_linear_slack.min(deficit - linear);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    GainCostReport {
        h_max,
        h_at_designated: designated,
        max_at_designated: best_is_designated && (h_max - designated).abs() < 1e-9,
        deficit_curvature,
        worst_linear_slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn cap_cover_covers_itself_and_probes() {
        let cover = cap_cover(3, 8.0, 20_000, 5).unwrap();
        assert_eq!(cover.probe_coverage, 1.0);
        for p in &cover.set.directions {
            let n: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(cap_cover(1, 8.0, 10, 5).is_err());
        assert!(cap_cover(3, 1.0, 10, 5).is_err());
    }

    #[test]
    fn circle_cover_size_is_tight() {
        // Half-angle acos(3/4): five arcs suffice to cover the circle.
        let cover = cap_cover(2, 4.0, 50_000, 7).unwrap();
        assert!(cover.set.len() <= 5, "size {}", cover.set.len());
        assert_eq!(cover.probe_coverage, 1.0);
    }

    #[test]
    fn cap_cover_cardinality_scaling() {
        // |set| grows like r_param^{(d-1)/2}; in d = 3 the exponent is 1.
        let sizes: Vec<f64> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&rp| cap_cover(3, rp, 5_000, 9).unwrap().set.len() as f64)
            .collect();
        let slope = (sizes[2] / sizes[0]).ln() / (64.0f64 / 4.0).ln();
        assert!(
            (slope - 1.0).abs() < 0.5,
            "log-log slope {slope}, sizes {sizes:?}"
        );
    }

    #[test]
    fn separated_grid_singleton_for_huge_separation() {
        let set = separated_grid(3, 1, 10.0, 3).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn separated_grid_circle_count() {
        let (t, a) = (100usize, 0.5);
        let set = separated_grid(2, t, a, 3).unwrap();
        let sep = a / (t as f64).sqrt();
        let expected = std::f64::consts::PI / (sep / 2.0).asin();
        assert!(
            (set.len() as f64 - expected).abs() <= 1.0,
            "count {} vs {expected}",
            set.len()
        );
        assert!(set.min_pairwise_distance() >= sep - 1e-12);
    }

    #[test]
    fn separated_grid_scaling_d3() {
        let mut sizes = Vec::new();
        for t in [100usize, 400, 1600] {
            let set = separated_grid(3, t, 2.0, 3).unwrap();
            assert!(set.min_pairwise_distance() >= set.separation - 1e-12);
            sizes.push(set.len() as f64);
        }
        // Cardinality scales like t^{(d-1)/2} = t.
        let slope = (sizes[2] / sizes[0]).ln() / 16.0f64.ln();
        assert!((slope - 1.0).abs() < 0.5, "slope {slope}, sizes {sizes:?}");
    }

    #[test]
    fn separated_grid_d4_respects_separation() {
        let set = separated_grid(4, 50, 1.5, 3).unwrap();
        assert!(set.len() > 10);
        assert!(set.min_pairwise_distance() >= set.separation - 1e-12);
    }

    #[test]
    fn cap_area_values() {
        // Hemisphere.
        assert!((cap_area_ratio(5, 1.0).unwrap() - 0.5).abs() < 1e-12);
        // d = 3: exactly h/2.
        for h in [0.1, 0.37, 0.9] {
            assert!((cap_area_ratio(3, h).unwrap() - h / 2.0).abs() < 1e-12);
        }
        // Out of range.
        assert!(cap_area_ratio(3, 2.0).is_err());
        // Ratio to h^{(d-1)/2} stays bounded.
        for d in [2usize, 3, 5, 8] {
            let mut ratios = Vec::new();
            let mut h = 1e-6;
            while h <= 1.0 {
                let frac = cap_area_ratio(d, h).unwrap();
                ratios.push(frac / h.powf((d as f64 - 1.0) / 2.0));
                h *= 10.0;
            }
            let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
            let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
            assert!(max / min < 10.0, "d = {d}: ratios {ratios:?}");
        }
    }

    #[test]
    fn trig_bound_edge_cases() {
        // alpha = 0: both sides vanish.
        let rep = verify_trig_bound(1.0, 1.0, 0.0, 500);
        assert!(rep.pass && rep.rhs == 0.0);
        // b = 0 kills the right-hand side.
        let rep = verify_trig_bound(1.0, 0.0, std::f64::consts::FRAC_PI_2, 500);
        assert!(rep.pass && rep.rhs == 0.0);
        assert!(rep.lhs_min.abs() < 1e-9);
    }

    #[test]
    fn trig_bound_randomized_suite() {
        let mut rng = stream(71, 0, 0);
        for _ in 0..10_000 {
            let a = 10.0 * rng.random::<f64>();
            let b = 10.0 * rng.random::<f64>();
            let alpha = std::f64::consts::FRAC_PI_2 * rng.random::<f64>();
            let rep = verify_trig_bound(a, b, alpha, 400);
            assert!(
                rep.pass,
                "a={a} b={b} alpha={alpha}: lhs {} < rhs {}",
                rep.lhs_min, rep.rhs
            );
        }
    }

    #[test]
    fn gain_cost_optimum_gaussian_rate() {
        // Gaussian rate I1(b) = b^2/2 with lambda = sqrt(2 ln 2).
        let lambda = (2.0 * 2.0f64.ln()).sqrt();
        let s = 200.0;
        let r = lambda * s; // speed * s with speed = lambda for this law
        let rate = |b: f64| b * b / 2.0;
        let cfg = GainCostConfig {
            r,
            s,
            lambda,
            epsilon: 0.1,
            rate: &rate,
            alpha_grid: 6,
            radial_grid: 8,
            angle_grid: 8,
        };
        let rep = verify_gain_cost_optimum(&cfg);
        assert!(rep.max_at_designated, "{rep:?}");
        assert!(rep.deficit_curvature > 0.0, "{rep:?}");
        assert!(rep.worst_linear_slack >= -1e-9, "{rep:?}");

        // Direct evaluation at m = r/2 (x on the axis, y = 0, alpha = 0):
        // deficit >= (lambda - eps/10)(r - r/2).
        let h_at_half = 2.0 * lambda * (r / 2.0) - rate(0.5 * r / s) * s;
        let deficit = rep.h_at_designated - h_at_half;
        assert!(deficit >= (lambda - 0.1 / 10.0) * (r / 2.0) - 1e-9);
    }
}
