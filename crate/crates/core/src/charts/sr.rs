//! Shiryaev–Roberts charts, evaluated as `log R_n`.
//!
//! `R_n = Σ_{i≤n} LR(change at i)`, so `R_n` grows geometrically once the
//! change has happened; every recursion below works on the log scale.

use std::collections::VecDeque;

use super::{log_add_exp, require_finite, CandidateFeed};
use crate::error::{Error, Result};
use crate::process::{Innovations, ProcessKind, ProcessSpec};

/// `log R_n = log(1 + R_{n-1}) - ln Δ* + ½(1 - 1/Δ*²)(X_n - μ)²/γ₀`.
#[derive(Clone, Debug)]
pub struct SrIid {
    log_r: f64,
    ln_delta: f64,
    half_gap: f64,
    gamma0: f64,
    mu: f64,
}

impl SrIid {
    pub fn new(process: &ProcessSpec, delta_star: f64) -> Result<Self> {
        check_reference(delta_star)?;
        Ok(Self {
            log_r: f64::NEG_INFINITY,
            ln_delta: delta_star.ln(),
            half_gap: 0.5 * (1.0 - 1.0 / (delta_star * delta_star)),
            gamma0: process.stationary_variance()?,
            mu: process.mu,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> f64 {
        let z = x - self.mu;
        self.log_r =
            log_add_exp(0.0, self.log_r) - self.ln_delta + self.half_gap * z * z / self.gamma0;
        self.log_r
    }

    pub fn log_statistic(&self) -> f64 {
        self.log_r
    }
}

#[derive(Clone, Debug)]
pub struct Sr {
    mu: f64,
    ln_delta: f64,
    /// `a = ½(1 - 1/Δ²)`, `b = 1 - 1/Δ`, `c = b²/2`.
    a: f64,
    b: f64,
    c: f64,
    engine: SrEngine,
}

#[derive(Clone, Debug)]
enum SrEngine {
    /// `log R_n = logaddexp(log R_{n-1}, (1 - 1/Δ²)(X X̂/((1+Δ)v) - X̂²/(2v)))
    ///            - ln Δ + ½(1 - 1/Δ²) e²/v`.
    Ar1 { log_r: f64, predictor: Innovations },
    Generic {
        feed: CandidateFeed,
        frozen: f64,
        active: VecDeque<f64>,
    },
}

impl Sr {
    /// With `generic` the candidate-sum engine is used even for AR(1).
    pub fn new(process: &ProcessSpec, delta_star: f64, generic: bool) -> Result<Self> {
        check_reference(delta_star)?;
        let engine = if process.kind() == ProcessKind::Ar1 && !generic {
            SrEngine::Ar1 {
                log_r: f64::NEG_INFINITY,
                predictor: Innovations::new(process)?,
            }
        } else {
            SrEngine::Generic {
                feed: CandidateFeed::new(process)?,
                frozen: f64::NEG_INFINITY,
                active: VecDeque::new(),
            }
        };
        let u = 1.0 / delta_star;
        let b = 1.0 - u;
        Ok(Self {
            mu: process.mu,
            ln_delta: delta_star.ln(),
            a: 0.5 * (1.0 - u * u),
            b,
            c: 0.5 * b * b,
            engine,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> Result<f64> {
        let z = x - self.mu;
        let log_r = match &mut self.engine {
            SrEngine::Ar1 { log_r, predictor } => {
                let p = predictor.prediction();
                let e = z - p.x_hat;
                predictor.observe(z)?;
                // b(1 - b)·X X̂/v - a·X̂²/v, the first-step correction of a new candidate
                let fresh = (self.b * (1.0 - self.b) * z * p.x_hat - self.a * p.x_hat * p.x_hat)
                    / p.msev;
                *log_r = log_add_exp(*log_r, fresh) - self.ln_delta + self.a * e * e / p.msev;
                *log_r
            }
            SrEngine::Generic {
                feed,
                frozen,
                active,
            } => {
                let step = feed.push(z)?;
                let base = self.a * step.inc - self.ln_delta;
                *frozen += base;
                active.push_back(0.0);
                let len = active.len();
                for c in &step.corrections[..len] {
                    let v = &mut active[len - 1 - c.age];
                    *v += base + self.b * c.d_dot - self.c * c.d_ddot;
                }
                while active.len() > step.frozen_age {
                    let v = active.pop_front().unwrap_or(f64::NEG_INFINITY);
                    *frozen = log_add_exp(*frozen, v);
                }
                active.iter().fold(*frozen, |acc, &v| log_add_exp(acc, v))
            }
        };
        if log_r.is_nan() || log_r == f64::INFINITY {
            return require_finite(log_r, "log SR statistic");
        }
        Ok(log_r)
    }
}

fn check_reference(delta_star: f64) -> Result<()> {
    if delta_star.is_finite() && delta_star > 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("reference value must be > 1, got {delta_star}")))
    }
}
