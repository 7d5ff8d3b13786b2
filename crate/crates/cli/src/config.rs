//! Experiment configuration: one human-readable JSON record per run.
//!
//! Example:
//!
//! ```json
//! {
//!   "seed": 42,
//!   "experiment": {
//!     "kind": "front",
//!     "law": {
//!       "dimension": 2,
//!       "count_law": { "kind": "fixed", "k": 2 },
//!       "radial_law": { "kind": "chi", "sigma": 1.0 }
//!     },
//!     "t_max": 200,
//!     "runs": 32,
//!     "cap": 1000000
//!   }
//! }
//! ```

use brwlab_core::ballot::WalkLaw;
use brwlab_core::model::OffspringLaw;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub experiment: Experiment,
}

fn default_cap() -> usize {
    1_000_000
}

fn default_n_f() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Median displacement per generation against the predicted front.
    Front {
        law: OffspringLaw,
        t_max: u32,
        runs: usize,
        #[serde(default = "default_cap")]
        cap: usize,
    },
    /// Interquartile-range stability and drift of the centered maximum.
    Tightness {
        law: OffspringLaw,
        runs: usize,
        #[serde(default = "default_cap")]
        cap: usize,
    },
    /// First-moment identity: particle sums versus a single walk.
    ManyToOne {
        law: OffspringLaw,
        n_values: Vec<usize>,
        replicas: u64,
    },
    /// Second-moment identity: pair sums versus coupled spine walks.
    ManyToTwo {
        law: OffspringLaw,
        n_values: Vec<usize>,
        replicas: u64,
    },
    /// Tilted estimate of the expected far-cap particle count.
    FirstMoment {
        law: OffspringLaw,
        t_values: Vec<usize>,
        y_values: Vec<f64>,
        replicas: u64,
    },
    /// Ballot probability scaling in the horizon and the window offsets.
    BallotScaling {
        walk: WalkLaw,
        barrier_c1: f64,
        barrier_c2: f64,
        a_values: Vec<f64>,
        b_values: Vec<f64>,
        n_values: Vec<usize>,
        replicas: u64,
    },
    /// Barrier-survival bounds for the zero and logarithmic envelopes.
    BarrierSurvival {
        walk: WalkLaw,
        a: f64,
        n_values: Vec<usize>,
        #[serde(default = "default_n_f")]
        n_f: usize,
        replicas: u64,
    },
    /// Tail of the time the walk first drops below -a.
    HittingTail {
        walk: WalkLaw,
        a: f64,
        n_values: Vec<usize>,
        replicas: u64,
    },
    /// Ladder heights and level overshoots.
    Ladder {
        walk: WalkLaw,
        levels: Vec<f64>,
        replicas: u64,
        #[serde(default = "default_ladder_budget")]
        step_budget: u64,
    },
    /// Cap covers, separated grids, and cap-area scaling.
    GeometrySuite {
        dim: usize,
        cover_r_values: Vec<f64>,
        grid_t_values: Vec<usize>,
        grid_separation: f64,
        #[serde(default = "default_probes")]
        probes: usize,
    },
    /// Deterministic inequality checks.
    InequalitySuite {
        law: OffspringLaw,
        trig_trials: usize,
        colic_epsilon: f64,
        colic_t_values: Vec<usize>,
        gain_cost_s: f64,
        gain_cost_epsilon: f64,
    },
}

fn default_ladder_budget() -> u64 {
    400_000
}

fn default_probes() -> usize {
    100_000
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.experiment {
            Experiment::Front { .. } => "front",
            Experiment::Tightness { .. } => "tightness",
            Experiment::ManyToOne { .. } => "many_to_one",
            Experiment::ManyToTwo { .. } => "many_to_two",
            Experiment::FirstMoment { .. } => "first_moment",
            Experiment::BallotScaling { .. } => "ballot_scaling",
            Experiment::BarrierSurvival { .. } => "barrier_survival",
            Experiment::HittingTail { .. } => "hitting_tail",
            Experiment::Ladder { .. } => "ladder",
            Experiment::GeometrySuite { .. } => "geometry_suite",
            Experiment::InequalitySuite { .. } => "inequality_suite",
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let need_replicas = |r: u64, field: &'static str| {
            if r < 1000 {
                Err(ConfigError::Invalid {
                    field,
                    message: format!("replica count {r} below the minimum 1000"),
                })
            } else {
                Ok(())
            }
        };
        let need_nonempty = |len: usize, field: &'static str| {
            if len == 0 {
                Err(ConfigError::Invalid {
                    field,
                    message: "empty list".to_string(),
                })
            } else {
                Ok(())
            }
        };
        match &self.experiment {
            Experiment::Front { t_max, runs, .. } => {
                if *t_max == 0 {
                    return Err(ConfigError::Invalid {
                        field: "t_max",
                        message: "must be positive".into(),
                    });
                }
                if *runs == 0 {
                    return Err(ConfigError::Invalid {
                        field: "runs",
                        message: "must be positive".into(),
                    });
                }
            }
            Experiment::Tightness { runs, .. } => {
                if *runs < 4 {
                    return Err(ConfigError::Invalid {
                        field: "runs",
                        message: "need at least 4 runs for quartiles".into(),
                    });
                }
            }
            Experiment::ManyToOne {
                n_values, replicas, ..
            }
            | Experiment::ManyToTwo {
                n_values, replicas, ..
            } => {
                need_nonempty(n_values.len(), "n_values")?;
                need_replicas(*replicas, "replicas")?;
            }
            Experiment::FirstMoment {
                t_values,
                y_values,
                replicas,
                ..
            } => {
                need_nonempty(t_values.len(), "t_values")?;
                need_nonempty(y_values.len(), "y_values")?;
                need_replicas(*replicas, "replicas")?;
            }
            Experiment::BallotScaling {
                a_values,
                b_values,
                n_values,
                replicas,
                ..
            } => {
                need_nonempty(a_values.len(), "a_values")?;
                need_nonempty(b_values.len(), "b_values")?;
                need_nonempty(n_values.len(), "n_values")?;
                need_replicas(*replicas, "replicas")?;
            }
            Experiment::BarrierSurvival {
                n_values, replicas, ..
            }
            | Experiment::HittingTail {
                n_values, replicas, ..
            } => {
                need_nonempty(n_values.len(), "n_values")?;
                need_replicas(*replicas, "replicas")?;
            }
            Experiment::Ladder {
                levels, replicas, ..
            } => {
                need_nonempty(levels.len(), "levels")?;
                need_replicas(*replicas, "replicas")?;
            }
            Experiment::GeometrySuite {
                dim,
                cover_r_values,
                grid_t_values,
                grid_separation,
                ..
            } => {
                if *dim < 2 {
                    return Err(ConfigError::Invalid {
                        field: "dim",
                        message: "dimension must be at least 2".into(),
                    });
                }
                need_nonempty(cover_r_values.len(), "cover_r_values")?;
                need_nonempty(grid_t_values.len(), "grid_t_values")?;
                if *grid_separation <= 0.0 {
                    return Err(ConfigError::Invalid {
                        field: "grid_separation",
                        message: "must be positive".into(),
                    });
                }
            }
            Experiment::InequalitySuite {
                trig_trials,
                colic_epsilon,
                colic_t_values,
                ..
            } => {
                if *trig_trials == 0 {
                    return Err(ConfigError::Invalid {
                        field: "trig_trials",
                        message: "must be positive".into(),
                    });
                }
                if *colic_epsilon <= 0.0 {
                    return Err(ConfigError::Invalid {
                        field: "colic_epsilon",
                        message: "must be positive".into(),
                    });
                }
                need_nonempty(colic_t_values.len(), "colic_t_values")?;
            }
        }
        Ok(())
    }

    /// Canonical 16-hex-digit hash of the config (sorted-key JSON,
    /// FNV-1a). Used for provenance columns and output directories.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = canonical_json(&value);
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in canonical.as_bytes() {
            h ^= *byte as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn canonical_json(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let inner: Vec<String> = keys
                .iter()
                .map(|k| format!("{}:{}", k, canonical_json(&map[*k])))
                .collect();
            format!("{{{}}}", inner.join(","))
        }
        serde_json::Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", inner.join(","))
        }
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRONT: &str = r#"{
        "seed": 42,
        "experiment": {
            "kind": "front",
            "law": {
                "dimension": 2,
                "count_law": { "kind": "fixed", "k": 2 },
                "radial_law": { "kind": "chi", "sigma": 1.0 }
            },
            "t_max": 50,
            "runs": 8
        }
    }"#;

    #[test]
    fn parses_and_hashes() {
        let c = ExperimentConfig::from_json(FRONT).unwrap();
        assert_eq!(c.kind_name(), "front");
        let h1 = c.hash();
        let c2 = ExperimentConfig::from_json(FRONT).unwrap();
        assert_eq!(h1, c2.hash());
        assert_eq!(h1.len(), 16);
    }

    #[test]
    fn rejects_unknown_kind() {
        let bad = FRONT.replace("\"front\"", "\"frontier\"");
        assert!(matches!(
            ExperimentConfig::from_json(&bad),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn rejects_low_replicas() {
        let json = r#"{
            "seed": 1,
            "experiment": {
                "kind": "many_to_one",
                "law": {
                    "dimension": 2,
                    "count_law": { "kind": "fixed", "k": 2 },
                    "radial_law": { "kind": "chi", "sigma": 1.0 }
                },
                "n_values": [1],
                "replicas": 10
            }
        }"#;
        assert!(matches!(
            ExperimentConfig::from_json(json),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn missing_seed_is_a_parse_error() {
        let json = r#"{ "experiment": { "kind": "front" } }"#;
        assert!(ExperimentConfig::from_json(json).is_err());
    }
}
