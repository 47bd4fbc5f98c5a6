//! Likelihood-ratio CUSUM for AR(1) and AR(2) targets.
//!
//! The statistic is the maximum over `τ ≤ n` of the log-likelihood ratio for a
//! change at `τ` with factor `Δ*`, times `2/(1 - 1/Δ*²)`. The positive factor
//! only rescales the limit; after it the per-observation drift is `e²/v - K`.

use std::collections::VecDeque;

use super::{k_ref, require_finite, CandidateFeed};
use crate::error::{Error, Result};
use crate::process::{Innovations, ProcessKind, ProcessSpec};

#[derive(Clone, Debug)]
pub struct Lr {
    mu: f64,
    k_ref: f64,
    /// `2/(Δ*+1)` and `(Δ*-1)/(Δ*+1)`.
    cross: f64,
    square: f64,
    engine: LrEngine,
}

#[derive(Clone, Debug)]
enum LrEngine {
    /// `A_n = e²/v - K + max(-X̂²/v + 2/(Δ*+1)·X X̂/v, A_{n-1})`, `A_0 = 0`.
    Ar1 { a: f64, predictor: Innovations },
    /// Exact maximum over candidates; only the two newest candidates differ
    /// from the common drift, older ones are folded into `frozen_max`.
    Ar2 {
        feed: CandidateFeed,
        frozen_max: f64,
        active: VecDeque<f64>,
    },
}

impl Lr {
    pub fn new(process: &ProcessSpec, delta_star: f64) -> Result<Self> {
        let engine = match process.kind() {
            ProcessKind::Ar1 => LrEngine::Ar1 {
                a: 0.0,
                predictor: Innovations::new(process)?,
            },
            ProcessKind::Ar2 => LrEngine::Ar2 {
                feed: CandidateFeed::new(process)?,
                frozen_max: f64::NEG_INFINITY,
                active: VecDeque::with_capacity(3),
            },
            ProcessKind::Arma { p, q } => {
                return Err(Error::UnsupportedScheme(format!(
                    "lr is defined for AR(1) and AR(2) targets, not ARMA({p},{q})"
                )))
            }
        };
        Ok(Self {
            mu: process.mu,
            k_ref: k_ref(delta_star)?,
            cross: 2.0 / (delta_star + 1.0),
            square: (delta_star - 1.0) / (delta_star + 1.0),
            engine,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> Result<f64> {
        let z = x - self.mu;
        let best = match &mut self.engine {
            LrEngine::Ar1 { a, predictor } => {
                let p = predictor.prediction();
                let e = z - p.x_hat;
                predictor.observe(z)?;
                let fresh = (-p.x_hat * p.x_hat + self.cross * z * p.x_hat) / p.msev;
                *a = (fresh.max(*a) + e * e / p.msev) - self.k_ref;
                *a
            }
            LrEngine::Ar2 {
                feed,
                frozen_max,
                active,
            } => {
                let step = feed.push(z)?;
                let drift = step.inc - self.k_ref;
                *frozen_max += drift;
                active.push_back(0.0);
                let len = active.len();
                for c in &step.corrections[..len] {
                    // β = 2Δ/(Δ+1) = 2 - cross
                    let s = &mut active[len - 1 - c.age];
                    *s += drift + (2.0 - self.cross) * c.d_dot - self.square * c.d_ddot;
                }
                while active.len() > step.frozen_age {
                    let s = active.pop_front().unwrap_or(f64::NEG_INFINITY);
                    *frozen_max = frozen_max.max(s);
                }
                active.iter().fold(*frozen_max, |m, &s| m.max(s))
            }
        };
        require_finite(best, "LR statistic").map(|b| b.max(0.0))
    }
}
