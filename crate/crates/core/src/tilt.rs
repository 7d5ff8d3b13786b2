//! Exponential change of measure for the projected step.
//!
//! For a tilt parameter `b` the tilted step has law
//! `dF_b(x) = e^{b x} dF(x) / E[e^{b X}]`, mean `Psi'(b)` and normalizer
//! `E[e^{b X}] = Phi(b)/m`. The joint step `(X, X_perp)` is sampled so
//! that the transverse part keeps its base conditional law given the
//! projection, which is what one-coordinate tilting requires.
//!
//! Samplers are exact per radial law:
//! * Gaussian vector: shift the projection by `b sigma^2`.
//! * Atom / uniform radius: rejection for the projection coordinate with
//!   an envelope at the right end of the support, then a closed-form
//!   radial draw.
//! * Exponential tail: rejection for the projection coordinate against
//!   the pole-free envelope, then an exactly tilted exponential radius.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::cumulant::CumulantHandle;
use crate::model::{sample_direction_into, sample_projection_coordinate, OffspringLaw, RadialLaw};

#[derive(Debug, Error)]
pub enum TiltError {
    #[error("tilt {b} outside the finite domain (|b| < {u_max})")]
    DomainExceeded { b: f64, u_max: f64 },
    #[error("certified rejection acceptance {acceptance:.4} below 0.1")]
    LowAcceptance { acceptance: f64 },
    #[error(transparent)]
    Cumulant(#[from] crate::cumulant::CumulantError),
}

/// Sampler for the tilted projected step (optionally jointly with the
/// transverse displacement component).
#[derive(Clone, Debug)]
pub struct TiltedWalk {
    pub law: OffspringLaw,
    pub b: f64,
    /// E[e^{b X}] = Phi(b)/m.
    pub normalizer: f64,
    /// Mean of the tilted step, Psi'(b).
    pub mean: f64,
    /// Certified lower bound on the rejection acceptance rate.
    acceptance: f64,
}

impl TiltedWalk {
    pub fn new(handle: &CumulantHandle, b: f64) -> Result<Self, TiltError> {
        if b.abs() >= handle.u_max {
            return Err(TiltError::DomainExceeded {
                b,
                u_max: handle.u_max,
            });
        }
        let v = handle.psi(b)?;
        let acceptance = acceptance_rate(handle, b)?;
        if acceptance < 0.1 {
            return Err(TiltError::LowAcceptance { acceptance });
        }
        Ok(TiltedWalk {
            law: handle.law.clone(),
            b,
            normalizer: v.phi / handle.m,
            mean: v.psi_prime,
            acceptance,
        })
    }

    pub fn acceptance_bound(&self) -> f64 {
        self.acceptance
    }

    /// One tilted projected step.
    pub fn sample_step<R: Rng>(&self, rng: &mut R) -> f64 {
        let b = self.b.abs();
        let flip = self.b < 0.0;
        let x = match &self.law.radial_law {
            RadialLaw::Chi { sigma } => {
                let g: f64 = StandardNormal.sample(rng);
                // No reflection needed; the shift already carries the sign.
                return self.b * sigma * sigma + sigma * g;
            }
            _ => {
                let (h, r) = self.sample_tilted_radial(b, rng);
                r * h
            }
        };
        if flip {
            -x
        } else {
            x
        }
    }

    /// One tilted step jointly with the transverse component
    /// (`perp.len() == dimension - 1`). Returns the projection.
    pub fn sample_step_with_transverse<R: Rng>(&self, rng: &mut R, perp: &mut [f64]) -> f64 {
        debug_assert_eq!(perp.len(), self.law.dimension - 1);
        let b = self.b.abs();
        let flip = self.b < 0.0;
        match &self.law.radial_law {
            RadialLaw::Chi { sigma } => {
                for p in perp.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    *p = sigma * g;
                }
                let g: f64 = StandardNormal.sample(rng);
                self.b * sigma * sigma + sigma * g
            }
            _ => {
                let (h, r) = self.sample_tilted_radial(b, rng);
                let trans = r * (1.0 - h * h).max(0.0).sqrt();
                if perp.len() == 1 {
                    perp[0] = if rng.random::<bool>() { trans } else { -trans };
                } else {
                    sample_direction_into(rng, perp);
                    for p in perp.iter_mut() {
                        *p *= trans;
                    }
                }
                let x = r * h;
                if flip {
                    -x
                } else {
                    x
                }
            }
        }
    }

    /// (projection coordinate, radius) under the tilt `b >= 0`.
    fn sample_tilted_radial<R: Rng>(&self, b: f64, rng: &mut R) -> (f64, f64) {
        let d = self.law.dimension;
        match &self.law.radial_law {
            RadialLaw::Atom { r0 } => {
                let c = b * r0;
                loop {
                    let h = sample_projection_coordinate(d, rng);
                    if rng.random::<f64>() < (c * (h - 1.0)).exp() {
                        return (h, *r0);
                    }
                }
            }
            RadialLaw::Uniform { rho } => {
                // Projection-coordinate density is w(h) * g(b rho h) with
                // g(t) = (e^t - 1)/t increasing; envelope at h = 1.
                let g = |t: f64| {
                    if t.abs() < 1e-8 {
                        1.0 + t / 2.0
                    } else {
                        t.exp_m1() / t
                    }
                };
                let g_max = g(b * rho);
                loop {
                    let h = sample_projection_coordinate(d, rng);
                    if rng.random::<f64>() * g_max < g(b * rho * h) {
                        // Radius density on [0, rho] proportional to e^{b h r}.
                        let c = b * h;
                        let u: f64 = rng.random();
                        let r = if (c * rho).abs() < 1e-8 {
                            u * rho
                        } else {
                            (u * (c * rho).exp_m1()).ln_1p() / c
                        };
                        return (h, r.clamp(0.0, *rho));
                    }
                }
            }
            RadialLaw::ExpTail { kappa } => {
                // Projection-coordinate density is w(h) * kappa/(kappa - b h);
                // envelope at h = 1. Radius given h is Exp(kappa - b h).
                loop {
                    let h = sample_projection_coordinate(d, rng);
                    if rng.random::<f64>() < (kappa - b) / (kappa - b * h) {
                        let rate = kappa - b * h;
                        let u: f64 = rng.random();
                        return (h, -(1.0 - u).ln() / rate);
                    }
                }
            }
            RadialLaw::Chi { .. } => unreachable!("gaussian path handled by caller"),
        }
    }

    /// Radon-Nikodym weight `(Phi(b)/m)^n e^{-b S_n}` turning a
    /// tilted-path expectation back into a base-path expectation.
    pub fn path_weight(&self, path: &[f64]) -> f64 {
        self.log_path_weight(path.len() as u64, path.last().copied().unwrap_or(0.0))
            .exp()
    }

    /// Log-space weight for a path of `n` steps ending at `endpoint`.
    pub fn log_path_weight(&self, n: u64, endpoint: f64) -> f64 {
        n as f64 * self.normalizer.ln() - self.b * endpoint
    }
}

/// Certified acceptance rate for the rejection samplers (1 for the
/// Gaussian closed form and the identity tilt).
fn acceptance_rate(handle: &CumulantHandle, b: f64) -> Result<f64, TiltError> {
    let b = b.abs();
    if b == 0.0 {
        return Ok(1.0);
    }
    match &handle.law.radial_law {
        RadialLaw::Chi { .. } => Ok(1.0),
        RadialLaw::Atom { r0 } => {
            // E[e^{c(H-1)}] = (Phi(b)/m) e^{-c} with c = b r0.
            let v = handle.psi(b)?;
            Ok((v.phi / handle.m) * (-b * r0).exp())
        }
        RadialLaw::Uniform { rho } => {
            // E[g(b rho H)] / g(b rho) = (Phi(b)/m) / g(b rho).
            let v = handle.psi(b)?;
            let t = b * rho;
            let g_max = if t.abs() < 1e-8 {
                1.0 + t / 2.0
            } else {
                t.exp_m1() / t
            };
            Ok((v.phi / handle.m) / g_max)
        }
        RadialLaw::ExpTail { kappa } => {
            // E[kappa/(kappa - bH)] * (kappa - b)/kappa.
            let v = handle.psi(b)?;
            Ok((v.phi / handle.m) * (kappa - b) / kappa)
        }
    }
}
