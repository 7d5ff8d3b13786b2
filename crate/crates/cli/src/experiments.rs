//! Experiment runners: each maps a parsed config onto core operations and
//! produces CSV tables, diagnostic plots, and named pass/fail checks.

use brwlab_core::ballot::{
    self, BallotMethod, BarrierFamily, Envelope, FrontBarrier, WalkLaw,
};
use brwlab_core::brw;
use brwlab_core::cumulant::CumulantHandle;
use brwlab_core::geometry;
use brwlab_core::manytofew::{
    self, PairFunctional, PathFunctional, SpineMode,
};
use brwlab_core::model::OffspringLaw;
use brwlab_core::stats;
use thiserror::Error;

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, Check, RunOutput, Table};
use crate::svg::{Plot, Series};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] brwlab_core::model::ModelError),
    #[error(transparent)]
    Cumulant(#[from] brwlab_core::cumulant::CumulantError),
    #[error(transparent)]
    Brw(#[from] brwlab_core::brw::BrwError),
    #[error(transparent)]
    ManyToFew(#[from] brwlab_core::manytofew::ManyToFewError),
    #[error(transparent)]
    Ballot(#[from] brwlab_core::ballot::BallotError),
    #[error(transparent)]
    Geometry(#[from] brwlab_core::geometry::GeometryError),
}

/// Named functionals shared by the identity experiments.
fn standard_functionals(dim: usize) -> Vec<(&'static str, PathFunctional)> {
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    vec![
        ("constant", PathFunctional::Constant(1.0)),
        ("norm_ball", PathFunctional::EndpointNormBall { radius: 2.0 }),
        (
            "halfspace",
            PathFunctional::EndpointHalfspace { theta: e1, c: 0.5 },
        ),
        ("exp_projection", PathFunctional::ExpProjection { u: 0.5 }),
    ]
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let seed = config.seed;
    let hash = config.hash();
    match &config.experiment {
        Experiment::Front {
            law,
            t_max,
            runs,
            cap,
        } => run_front(law, *t_max, *runs, *cap, seed, &hash),
        Experiment::Tightness { law, runs, cap } => run_tightness(law, *runs, *cap, seed, &hash),
        Experiment::ManyToOne {
            law,
            n_values,
            replicas,
        } => run_many_to_one(law, n_values, *replicas, seed, &hash),
        Experiment::ManyToTwo {
            law,
            n_values,
            replicas,
        } => run_many_to_two(law, n_values, *replicas, seed, &hash),
        Experiment::FirstMoment {
            law,
            t_values,
            y_values,
            replicas,
        } => run_first_moment(law, t_values, y_values, *replicas, seed, &hash),
        Experiment::BallotScaling {
            walk,
            barrier_c1,
            barrier_c2,
            a_values,
            b_values,
            n_values,
            replicas,
        } => run_ballot_scaling(
            walk,
            *barrier_c1,
            *barrier_c2,
            a_values,
            b_values,
            n_values,
            *replicas,
            seed,
            &hash,
        ),
        Experiment::BarrierSurvival {
            walk,
            a,
            n_values,
            n_f,
            replicas,
        } => run_barrier_survival(walk, *a, n_values, *n_f, *replicas, seed, &hash),
        Experiment::HittingTail {
            walk,
            a,
            n_values,
            replicas,
        } => run_hitting_tail(walk, *a, n_values, *replicas, seed, &hash),
        Experiment::Ladder {
            walk,
            levels,
            replicas,
            step_budget,
        } => run_ladder(walk, levels, *replicas, *step_budget, seed, &hash),
        Experiment::GeometrySuite {
            dim,
            cover_r_values,
            grid_t_values,
            grid_separation,
            probes,
        } => run_geometry(
            *dim,
            cover_r_values,
            grid_t_values,
            *grid_separation,
            *probes,
            seed,
            &hash,
        ),
        Experiment::InequalitySuite {
            law,
            trig_trials,
            colic_epsilon,
            colic_t_values,
            gain_cost_s,
            gain_cost_epsilon,
        } => run_inequalities(
            law,
            *trig_trials,
            *colic_epsilon,
            colic_t_values,
            *gain_cost_s,
            *gain_cost_epsilon,
            seed,
            &hash,
        ),
    }
}

fn run_front(
    law: &OffspringLaw,
    t_max: u32,
    runs: usize,
    cap: usize,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let handle = CumulantHandle::new(law)?;
    let solution = handle.solve_lambda(1e-12)?;
    let budget = (runs as u64).saturating_mul(1000).max(10_000);
    let (records, _) = brw::conditioned_runs(law, t_max, cap, runs, seed, budget)?;

    let mut table = Table::new(
        "front",
        &["seed", "config", "t", "median_rt", "r_t", "residual"],
    );
    let mut points = Vec::new();
    let mut band = Vec::new();
    for t in 1..=t_max as usize {
        let values: Vec<f64> = records
            .iter()
            .filter_map(|r| r.radius_at(t))
            .collect();
        if values.is_empty() {
            continue;
        }
        let med = stats::median(&values);
        let front = brwlab_core::cumulant::displacement_front(&solution, t as u64);
        table.push(vec![
            seed.to_string(),
            hash.to_string(),
            t.to_string(),
            num(med),
            num(front),
            num(med - front),
        ]);
        points.push((t as f64, med - front));
        band.push((
            stats::quantile(&values, 0.25) - front,
            stats::quantile(&values, 0.75) - front,
        ));
    }

    let t_star = (t_max as usize).min(200);
    let values: Vec<f64> = records
        .iter()
        .filter_map(|r| r.radius_at(t_star))
        .collect();
    let median_speed = stats::median(&values) / t_star as f64;
    let checks = vec![Check::upper(
        format!("median speed at t={t_star} within 3% of front speed"),
        (median_speed / solution.speed - 1.0).abs(),
        0.03,
    )];

    let plot = Plot {
        title: "centered maximal displacement quantiles".into(),
        x_label: "t".into(),
        y_label: "R_t - r_t".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            label: "median".into(),
            points,
            band: Some(band),
        }],
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("front".into(), plot.render())],
        checks,
    })
}

fn run_tightness(
    law: &OffspringLaw,
    runs: usize,
    cap: usize,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    const T_MAX: u32 = 400;
    let handle = CumulantHandle::new(law)?;
    let solution = handle.solve_lambda(1e-12)?;
    let budget = (runs as u64).saturating_mul(1000).max(10_000);
    let (records, _) = brw::conditioned_runs(law, T_MAX, cap, runs, seed, budget)?;

    let mut table = Table::new(
        "tightness",
        &["seed", "config", "t", "q25", "q50", "q75", "iqr"],
    );
    let grid: Vec<usize> = (1..=16).map(|i| i * 25).collect();
    let mut iqr_at = std::collections::BTreeMap::new();
    let mut med_res_front = Vec::new();
    let mut med_res_linear = Vec::new();
    let mut points = Vec::new();
    let mut band = Vec::new();
    for &t in &grid {
        let centered: Vec<f64> = records
            .iter()
            .filter_map(|r| r.radius_at(t))
            .map(|x| x - brwlab_core::cumulant::displacement_front(&solution, t as u64))
            .collect();
        let q25 = stats::quantile(&centered, 0.25);
        let q50 = stats::median(&centered);
        let q75 = stats::quantile(&centered, 0.75);
        table.push(vec![
            seed.to_string(),
            hash.to_string(),
            t.to_string(),
            num(q25),
            num(q50),
            num(q75),
            num(q75 - q25),
        ]);
        iqr_at.insert(t, q75 - q25);
        points.push((t as f64, q50));
        band.push((q25, q75));
        if t >= 100 {
            med_res_front.push((t as f64, q50));
            let log_term = solution.log_coeff * (t as f64).ln();
            med_res_linear.push((t as f64, q50 + log_term));
        }
    }

    let iqr_ratio = iqr_at[&400] / iqr_at[&200];
    let xs: Vec<f64> = med_res_front.iter().map(|p| p.0).collect();
    let slope_front = stats::ls_slope(&xs, &med_res_front.iter().map(|p| p.1).collect::<Vec<_>>());
    let slope_linear =
        stats::ls_slope(&xs, &med_res_linear.iter().map(|p| p.1).collect::<Vec<_>>());
    let checks = vec![
        Check::upper(
            "IQR(R-r) at t=400 vs t=200 differs by < 25%",
            (iqr_ratio - 1.0).abs(),
            0.25,
        ),
        Check::upper(
            "median drift slope with front centering reduced by >= 50%",
            slope_front.abs(),
            0.5 * slope_linear.abs(),
        ),
    ];

    let plot = Plot {
        title: "tightness of the centered maximum".into(),
        x_label: "t".into(),
        y_label: "R_t - r_t quantiles".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            label: "median".into(),
            points,
            band: Some(band),
        }],
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("tightness".into(), plot.render())],
        checks,
    })
}

fn run_many_to_one(
    law: &OffspringLaw,
    n_values: &[usize],
    replicas: u64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let (m, _) = law.mean_params()?;
    let mut table = Table::new(
        "many_to_one",
        &[
            "seed", "config", "functional", "n", "lhs", "lhs_se", "rhs", "rhs_se", "z",
        ],
    );
    let mut checks = Vec::new();
    let mut worst_z = 0.0f64;
    for &n in n_values {
        let funs = standard_functionals(law.dimension);
        let lhs_all = manytofew::mto_lhs_many(
            law,
            &funs.iter().map(|(_, f)| f.clone()).collect::<Vec<_>>(),
            n,
            replicas,
            seed ^ n as u64,
        )?;
        for ((name, fun), lhs) in funs.iter().zip(lhs_all) {
            let rhs = manytofew::mto_rhs(law, fun, n, replicas, seed ^ (n as u64) << 8)?;
            let z = lhs.z_against(&rhs);
            worst_z = worst_z.max(z.abs());
            table.push(vec![
                seed.to_string(),
                hash.to_string(),
                name.to_string(),
                n.to_string(),
                num(lhs.mean),
                num(lhs.stderr),
                num(rhs.mean),
                num(rhs.stderr),
                num(z),
            ]);
            if *name == "constant" && lhs.stderr == 0.0 {
                checks.push(Check::upper(
                    format!("deterministic constant sum equals m^{n}"),
                    (lhs.mean - m.powi(n as i32)).abs(),
                    1e-9,
                ));
            }
        }
    }
    checks.push(Check::upper(
        "worst |z| of first-moment identity <= 4",
        worst_z,
        4.0,
    ));
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![],
        checks,
    })
}

fn run_many_to_two(
    law: &OffspringLaw,
    n_values: &[usize],
    replicas: u64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let mut table = Table::new(
        "many_to_two",
        &[
            "seed", "config", "functional", "mode", "n", "lhs", "lhs_se", "rhs", "rhs_se", "z",
        ],
    );
    let mut checks = Vec::new();
    let mut worst_z = 0.0f64;
    let mut best_control_z = 0.0f64;
    for &n in n_values {
        for (name, fun) in standard_functionals(law.dimension) {
            let pair = PairFunctional {
                left: fun.clone(),
                right: fun.clone(),
            };
            let lhs = manytofew::mtt_lhs(law, &pair, n, replicas, seed ^ n as u64)?;
            let rhs = manytofew::mtt_rhs(
                law,
                &pair,
                n,
                replicas,
                SpineMode::Exchangeable,
                seed ^ (n as u64) << 8,
            )?;
            let z = lhs.z_against(&rhs);
            worst_z = worst_z.max(z.abs());
            table.push(vec![
                seed.to_string(),
                hash.to_string(),
                name.to_string(),
                "exchangeable".to_string(),
                n.to_string(),
                num(lhs.mean),
                num(lhs.stderr),
                num(rhs.mean),
                num(rhs.stderr),
                num(z),
            ]);
            // Negative control on a correlated functional.
            if name == "halfspace" {
                let control = manytofew::mtt_rhs(
                    law,
                    &pair,
                    n,
                    replicas,
                    SpineMode::UncoupledControl,
                    seed ^ (n as u64) << 16,
                )?;
                let zc = lhs.z_against(&control);
                best_control_z = best_control_z.max(zc.abs());
                table.push(vec![
                    seed.to_string(),
                    hash.to_string(),
                    name.to_string(),
                    "uncoupled_control".to_string(),
                    n.to_string(),
                    num(lhs.mean),
                    num(lhs.stderr),
                    num(control.mean),
                    num(control.stderr),
                    num(zc),
                ]);
            }
        }
    }
    checks.push(Check::upper(
        "worst |z| of pair identity <= 4",
        worst_z,
        4.0,
    ));
    checks.push(Check::lower(
        "uncoupled control breaks the identity (|z| > 4)",
        best_control_z,
        4.0,
    ));
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![],
        checks,
    })
}

fn run_first_moment(
    law: &OffspringLaw,
    t_values: &[usize],
    y_values: &[f64],
    replicas: u64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let handle = CumulantHandle::new(law)?;
    let solution = handle.solve_lambda(1e-12)?;
    let scan = t_values.iter().copied().max().unwrap_or(100).max(2000);
    let front = FrontBarrier::new(
        &solution,
        law.radial_law.median(law.dimension),
        scan.min(4000),
        0.0,
    );
    let mut table = Table::new(
        "first_moment",
        &[
            "seed",
            "config",
            "t",
            "y",
            "estimate",
            "stderr",
            "normalized",
            "normalized_se",
        ],
    );
    let mut checks = Vec::new();
    let mut series = Vec::new();
    for &y in y_values {
        let mut points = Vec::new();
        let mut norms = Vec::new();
        for &t in t_values {
            let est = manytofew::first_moment_cap_count(
                &handle,
                &solution,
                &front,
                t,
                y,
                replicas,
                seed ^ (t as u64) ^ ((y * 256.0) as u64) << 20,
            )?;
            table.push(vec![
                seed.to_string(),
                hash.to_string(),
                t.to_string(),
                num(y),
                num(est.estimate.mean),
                num(est.estimate.stderr),
                num(est.normalized.mean),
                num(est.normalized.stderr),
            ]);
            points.push((t as f64, est.normalized.mean));
            norms.push(est.normalized.mean);
        }
        let max = norms.iter().cloned().fold(f64::MIN, f64::max);
        let min = norms.iter().cloned().fold(f64::MAX, f64::min);
        checks.push(Check::upper(
            format!("normalized cap count stable within factor 2 at y={y}"),
            max / min,
            2.0,
        ));
        series.push(Series {
            label: format!("y={y}"),
            points,
            band: None,
        });
    }
    let plot = Plot {
        title: "normalized expected far-cap count".into(),
        x_label: "t".into(),
        y_label: "estimate * t^{(d-1)/2} e^y/(1+y)".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("first_moment".into(), plot.render())],
        checks,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_ballot_scaling(
    walk: &WalkLaw,
    c1: f64,
    c2: f64,
    a_values: &[f64],
    b_values: &[f64],
    n_values: &[usize],
    replicas: u64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let family = BarrierFamily::Logarithmic { c1, c2 };
    let mut table = Table::new(
        "ballot_scaling",
        &[
            "seed",
            "config",
            "n",
            "n_eff",
            "a",
            "b",
            "estimate",
            "stderr",
            "normalized",
            "method",
        ],
    );
    let mut checks = Vec::new();
    let mut series = Vec::new();
    // Stability across n per (a, b).
    for (ai, &a) in a_values.iter().enumerate() {
        for (bi, &b) in b_values.iter().enumerate() {
            let mut norms = Vec::new();
            let mut points = Vec::new();
            for &n in n_values {
                let est = ballot::ballot_probability(
                    walk,
                    &family,
                    a,
                    b,
                    n,
                    replicas,
                    seed ^ (n as u64) << 2 ^ (ai as u64) << 24 ^ (bi as u64) << 28,
                )?;
                table.push(vec![
                    seed.to_string(),
                    hash.to_string(),
                    n.to_string(),
                    est.n_effective.to_string(),
                    num(a),
                    num(b),
                    num(est.estimate.mean),
                    num(est.estimate.stderr),
                    num(est.normalized),
                    match est.method {
                        BallotMethod::Plain => "plain".to_string(),
                        BallotMethod::Glued => "glued".to_string(),
                    },
                ]);
                norms.push(est.normalized);
                points.push((est.n_effective as f64, est.normalized));
            }
            if n_values.len() > 1 {
                let max = norms.iter().cloned().fold(f64::MIN, f64::max);
                let min = norms.iter().cloned().fold(f64::MAX, f64::min);
                checks.push(Check::upper(
                    format!("normalized ballot stable within factor 2 at a={a} b={b}"),
                    max / min,
                    2.0,
                ));
            }
            series.push(Series {
                label: format!("a={a} b={b}"),
                points,
                band: None,
            });
        }
    }
    // Product-profile linearity at the middle horizon.
    if a_values.len() * b_values.len() > 1 {
        let n_mid = n_values[n_values.len() / 2];
        let mut norms = Vec::new();
        for (ai, &a) in a_values.iter().enumerate() {
            for (bi, &b) in b_values.iter().enumerate() {
                let est = ballot::ballot_probability(
                    walk,
                    &family,
                    a,
                    b,
                    n_mid,
                    replicas,
                    seed ^ (n_mid as u64) << 2 ^ (ai as u64) << 24 ^ (bi as u64) << 28,
                )?;
                norms.push(est.normalized);
            }
        }
        let max = norms.iter().cloned().fold(f64::MIN, f64::max);
        let min = norms.iter().cloned().fold(f64::MAX, f64::min);
        checks.push(Check::upper(
            format!("(a+1)(b+1) profile within factor 1.5 at n={n_mid}"),
            max / min,
            1.5,
        ));
    }
    let plot = Plot {
        title: "normalized ballot probability".into(),
        x_label: "n".into(),
        y_label: "n^{3/2} p / ((a+1)(b+1))".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("ballot_scaling".into(), plot.render())],
        checks,
    })
}

fn run_barrier_survival(
    walk: &WalkLaw,
    a: f64,
    n_values: &[usize],
    n_f: usize,
    replicas: u64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let envelopes = [
        (
            "zero",
            Envelope {
                log_coeff: 0.0,
                sqrt_coeff: 0.0,
                offset: 0.0,
            },
        ),
        (
            "log",
            Envelope {
                log_coeff: 1.0,
                sqrt_coeff: 0.0,
                offset: 0.0,
            },
        ),
    ];
    let mut table = Table::new(
        "barrier_survival",
        &[
            "seed",
            "config",
            "envelope",
            "variant",
            "n",
            "a",
            "estimate",
            "stderr",
            "normalized",
        ],
    );
    let mut checks = Vec::new();
    let mut series = Vec::new();
    for (env_name, envelope) in envelopes {
        let mut lower_norms = Vec::new();
        let mut upper_norms = Vec::new();
        let mut lower_pts = Vec::new();
        let mut upper_pts = Vec::new();
        for &n in n_values {
            let est = ballot::barrier_survival(
                walk,
                &envelope,
                a,
                n,
                n_f,
                replicas,
                seed ^ (n as u64) << 3 ^ env_name.len() as u64,
            );
            for (variant, ci, normalized) in [
                ("lower", est.lower, est.normalized_lower),
                ("upper", est.upper, est.normalized_upper),
            ] {
                table.push(vec![
                    seed.to_string(),
                    hash.to_string(),
                    env_name.to_string(),
                    variant.to_string(),
                    n.to_string(),
                    num(a),
                    num(ci.mean),
                    num(ci.stderr),
                    num(normalized),
                ]);
            }
            lower_norms.push(est.normalized_lower);
            upper_norms.push(est.normalized_upper);
            lower_pts.push((n as f64, est.normalized_lower));
            upper_pts.push((n as f64, est.normalized_upper));
        }
        if n_values.len() > 1 {
            for (variant, norms) in [("lower", &lower_norms), ("upper", &upper_norms)] {
                let max = norms.iter().cloned().fold(f64::MIN, f64::max);
                let min = norms.iter().cloned().fold(f64::MAX, f64::min);
                checks.push(Check::upper(
                    format!("sqrt(n)/(a+1) profile stable within factor 2: {env_name} {variant}"),
                    max / min,
                    2.0,
                ));
            }
        }
        series.push(Series {
            label: format!("{env_name} lower"),
            points: lower_pts,
            band: None,
        });
        series.push(Series {
            label: format!("{env_name} upper"),
            points: upper_pts,
            band: None,
        });
    }
    let plot = Plot {
        title: "normalized barrier survival".into(),
        x_label: "n".into(),
        y_label: "sqrt(n) p/(a+1)".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("barrier_survival".into(), plot.render())],
        checks,
    })
}

fn run_hitting_tail(
    walk: &WalkLaw,
    a: f64,
    n_values: &[usize],
    replicas: u64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let mut table = Table::new(
        "hitting_tail",
        &["seed", "config", "n", "a", "estimate", "stderr", "normalized"],
    );
    let mut norms = Vec::new();
    let mut points = Vec::new();
    for &n in n_values {
        let (est, normalized) = ballot::hitting_time_tail(walk, a, n, replicas, seed ^ (n as u64));
        table.push(vec![
            seed.to_string(),
            hash.to_string(),
            n.to_string(),
            num(a),
            num(est.mean),
            num(est.stderr),
            num(normalized),
        ]);
        norms.push(normalized);
        points.push((n as f64, normalized));
    }
    let mut checks = Vec::new();
    if n_values.len() > 1 {
        let max = norms.iter().cloned().fold(f64::MIN, f64::max);
        let min = norms.iter().cloned().fold(f64::MAX, f64::min);
        checks.push(Check::upper(
            "sqrt(n)/(a+1) hitting-tail profile stable within factor 2",
            max / min,
            2.0,
        ));
    }
    let plot = Plot {
        title: "normalized hitting-time tail".into(),
        x_label: "n".into(),
        y_label: "sqrt(n) p/(a+1)".into(),
        log_x: true,
        log_y: false,
        series: vec![Series {
            label: format!("a={a}"),
            points,
            band: None,
        }],
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("hitting_tail".into(), plot.render())],
        checks,
    })
}

fn run_ladder(
    walk: &WalkLaw,
    levels: &[f64],
    replicas: u64,
    step_budget: u64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let report = ballot::ladder_overshoot(walk, levels, replicas, step_budget, seed);
    let mut table = Table::new(
        "ladder",
        &[
            "seed",
            "config",
            "level",
            "overshoot_mean",
            "overshoot_mean_se",
            "moment_1eps",
            "moment_1eps_se",
            "size_biased_bound",
            "bound_se",
            "truncated_fraction",
        ],
    );
    let mut checks = Vec::new();
    let mut points = Vec::new();
    for lv in &report.levels {
        table.push(vec![
            seed.to_string(),
            hash.to_string(),
            num(lv.level),
            num(lv.mean.mean),
            num(lv.mean.stderr),
            num(lv.moment_1eps.mean),
            num(lv.moment_1eps.stderr),
            num(report.size_biased_bound),
            num(report.size_biased_bound_se),
            num(report.truncated_fraction),
        ]);
        let z = (lv.moment_1eps.mean - report.size_biased_bound)
            / (lv.moment_1eps.stderr.powi(2) + report.size_biased_bound_se.powi(2)).sqrt();
        checks.push(Check::upper(
            format!("overshoot moment at level {} below size-biased bound", lv.level),
            z,
            4.0,
        ));
        points.push((lv.level, lv.moment_1eps.mean));
    }
    let plot = Plot {
        title: "overshoot (1+eps)-moment by level".into(),
        x_label: "level".into(),
        y_label: "moment".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series {
                label: "moment".into(),
                points,
                band: None,
            },
            Series {
                label: "bound".into(),
                points: report
                    .levels
                    .iter()
                    .map(|lv| (lv.level, report.size_biased_bound))
                    .collect(),
                band: None,
            },
        ],
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("ladder".into(), plot.render())],
        checks,
    })
}

fn run_geometry(
    dim: usize,
    cover_r_values: &[f64],
    grid_t_values: &[usize],
    grid_separation: f64,
    probes: usize,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    let mut table = Table::new(
        "geometry",
        &[
            "seed", "config", "item", "dim", "param", "size", "coverage", "min_separation",
            "constant",
        ],
    );
    let mut checks = Vec::new();
    let exponent = (dim as f64 - 1.0) / 2.0;

    let mut cover_constants = Vec::new();
    let mut cover_pts = Vec::new();
    for &r in cover_r_values {
        let cover = geometry::cap_cover(dim, r, probes, seed)?;
        table.push(vec![
            seed.to_string(),
            hash.to_string(),
            "cap_cover".to_string(),
            dim.to_string(),
            num(r),
            cover.set.len().to_string(),
            num(cover.probe_coverage),
            num(cover.set.min_pairwise_distance()),
            num(cover.cardinality_constant),
        ]);
        checks.push(Check::lower(
            format!("cap cover coverage complete at r={r}"),
            cover.probe_coverage,
            1.0,
        ));
        cover_constants.push(cover.cardinality_constant);
        cover_pts.push((r, cover.set.len() as f64));
    }
    if cover_constants.len() > 1 {
        let max = cover_constants.iter().cloned().fold(f64::MIN, f64::max);
        let min = cover_constants.iter().cloned().fold(f64::MAX, f64::min);
        checks.push(Check::upper(
            format!("cap cover cardinality tracks r^{exponent} within factor 2"),
            max / min,
            2.0,
        ));
    }

    let mut grid_constants = Vec::new();
    let mut grid_pts = Vec::new();
    for &t in grid_t_values {
        let set = geometry::separated_grid(dim, t, grid_separation, seed)?;
        let min_sep = set.min_pairwise_distance();
        table.push(vec![
            seed.to_string(),
            hash.to_string(),
            "separated_grid".to_string(),
            dim.to_string(),
            t.to_string(),
            set.len().to_string(),
            "".to_string(),
            num(min_sep),
            num(set.len() as f64 / (t as f64).powf(exponent)),
        ]);
        checks.push(Check::lower(
            format!("separated grid respects the separation at t={t}"),
            min_sep,
            set.separation - 1e-12,
        ));
        grid_constants.push(set.len() as f64 / (t as f64).powf(exponent));
        grid_pts.push((t as f64, set.len() as f64));
    }
    if grid_constants.len() > 1 {
        let max = grid_constants.iter().cloned().fold(f64::MIN, f64::max);
        let min = grid_constants.iter().cloned().fold(f64::MAX, f64::min);
        checks.push(Check::upper(
            format!("separated grid cardinality tracks t^{exponent} within factor 2"),
            max / min,
            2.0,
        ));
    }

    let plot = Plot {
        title: "direction set cardinalities".into(),
        x_label: "r or t".into(),
        y_label: "size".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                label: "cap cover".into(),
                points: cover_pts,
                band: None,
            },
            Series {
                label: "separated grid".into(),
                points: grid_pts,
                band: None,
            },
        ],
    };
    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![("geometry".into(), plot.render())],
        checks,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_inequalities(
    law: &OffspringLaw,
    trig_trials: usize,
    colic_epsilon: f64,
    colic_t_values: &[usize],
    gain_cost_s: f64,
    gain_cost_epsilon: f64,
    seed: u64,
    hash: &str,
) -> Result<RunOutput, RunError> {
    use rand::Rng;
    let mut table = Table::new(
        "inequalities",
        &["seed", "config", "check", "statistic", "threshold", "pass"],
    );
    let mut checks = Vec::new();

    // Randomized trigonometric bound suite.
    let mut rng = brwlab_core::rng::stream(seed, 0, 0);
    let mut failures = 0usize;
    for _ in 0..trig_trials {
        let a = 10.0 * rng.random::<f64>();
        let b = 10.0 * rng.random::<f64>();
        let alpha = std::f64::consts::FRAC_PI_2 * rng.random::<f64>();
        if !geometry::verify_trig_bound(a, b, alpha, 400).pass {
            failures += 1;
        }
    }
    let pass_rate = 1.0 - failures as f64 / trig_trials as f64;
    table.push(vec![
        seed.to_string(),
        hash.to_string(),
        "trig_bound_pass_rate".to_string(),
        num(pass_rate),
        num(1.0),
        (failures == 0).to_string(),
    ]);
    checks.push(Check::lower(
        format!("trig bound holds on all {trig_trials} random triples"),
        pass_rate,
        1.0,
    ));

    // Squared-domination scan.
    let handle = CumulantHandle::new(law)?;
    let solution = handle.solve_lambda(1e-12)?;
    let front = FrontBarrier::new(
        &solution,
        law.radial_law.median(law.dimension),
        2000,
        0.0,
    );
    let colic = ballot::colic_check(&front, colic_epsilon, colic_t_values);
    table.push(vec![
        seed.to_string(),
        hash.to_string(),
        "colic_min_slack".to_string(),
        num(colic.min_slack),
        num(0.0),
        colic.pass.to_string(),
    ]);
    checks.push(Check::lower(
        format!("squared barrier domination at eps={colic_epsilon}"),
        colic.min_slack,
        0.0,
    ));

    // Gain/cost optimum on the plane.
    let rate = |b: f64| match handle.rate_function(b) {
        Ok(v) if v.finite => v.value,
        _ => 1e9,
    };
    let cfg = geometry::GainCostConfig {
        r: solution.speed * gain_cost_s,
        s: gain_cost_s,
        lambda: solution.lambda,
        epsilon: gain_cost_epsilon,
        rate: &rate,
        alpha_grid: 6,
        radial_grid: 8,
        angle_grid: 8,
    };
    let rep = geometry::verify_gain_cost_optimum(&cfg);
    table.push(vec![
        seed.to_string(),
        hash.to_string(),
        "gain_cost_max_at_designated".to_string(),
        num(rep.h_max - rep.h_at_designated),
        num(0.0),
        rep.max_at_designated.to_string(),
    ]);
    table.push(vec![
        seed.to_string(),
        hash.to_string(),
        "gain_cost_deficit_curvature".to_string(),
        num(rep.deficit_curvature),
        num(0.0),
        (rep.deficit_curvature > 0.0).to_string(),
    ]);
    checks.push(Check::lower(
        "gain/cost grid maximum at the designated point",
        if rep.max_at_designated { 1.0 } else { 0.0 },
        1.0,
    ));
    checks.push(Check::lower(
        "gain/cost deficit curvature positive",
        rep.deficit_curvature,
        0.0,
    ));

    Ok(RunOutput {
        tables: vec![table],
        svgs: vec![],
        checks,
    })
}
