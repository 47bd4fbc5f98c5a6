//! Per-candidate sufficient statistics for the change-point likelihood.
//!
//! Under a change at `i` with factor `Δ`, the log-likelihood ratio of
//! `X_1..X_n` against no change is
//!
//! ```text
//! -(n-i+1) ln Δ - ½(1/Δ - 1)(2Ṡ_{n,i} + (1/Δ - 1)S̈_{n,i})
//! ```
//!
//! with `Ṡ_{n,i} = Σ_{t≥i} e_t d_t / v_{t-1}` and `S̈_{n,i} = Σ_{t≥i} d_t² / v_{t-1}`.
//! Here `e_t = X_t - X̂_t` is the in-control innovation and `d_t` is `X_t`
//! minus the part of `X̂_t` built from observations at or after `i`. Once the
//! predictor no longer reaches back past `i`, `d_t = e_t`, so both sums are
//! `T_n - T_{i-1}` plus a correction collected over the first few steps
//! after `i`. The feed below produces those corrections; for a process whose
//! predictor uses `L` past values only the newest `L` candidates receive one.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::process::{LinearPredictor, ProcessSpec};

/// Correction increments for candidate `n - age`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correction {
    pub age: usize,
    pub d_dot: f64,
    pub d_ddot: f64,
}

/// What one observation contributes.
#[derive(Clone, Debug, Default)]
pub struct FeedStep {
    /// `e_n² / v_{n-1}`.
    pub inc: f64,
    /// Corrections for candidates `n, n-1, …`, newest first.
    pub corrections: Vec<Correction>,
    /// Candidates of age `>= frozen_age` receive no further corrections.
    pub frozen_age: usize,
}

/// Turns centered observations into innovations and candidate corrections.
#[derive(Clone, Debug)]
pub struct CandidateFeed {
    predictor: LinearPredictor,
    /// Past centered observations, newest first.
    past: VecDeque<f64>,
    n: u64,
    step: FeedStep,
}

impl CandidateFeed {
    pub fn new(process: &ProcessSpec) -> Result<Self> {
        Ok(Self {
            predictor: LinearPredictor::new(process)?,
            past: VecDeque::new(),
            n: 0,
            step: FeedStep::default(),
        })
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Consumes centered `x` and returns this step's contributions.
    pub fn push(&mut self, x: f64) -> Result<&FeedStep> {
        let a = self.predictor.coefficients();
        let v = self.predictor.msev();
        self.n += 1;
        let max_age = a.len().saturating_sub(1).min(self.n as usize - 1);

        let x_hat: f64 = a.iter().zip(&self.past).map(|(c, p)| c * p).sum();
        let e = x - x_hat;
        let inc = e * e / v;
        let step = &mut self.step;
        step.corrections.clear();
        // `post` is the part of X̂_n built from X_{n-age+1..n-1}, i.e. from
        // observations after candidate n - age
        let mut post = 0.0;
        for age in 0..=max_age {
            // d - e: the pre-change part of the prediction
            let pre = x_hat - post;
            step.corrections.push(Correction {
                age,
                d_dot: e * pre / v,
                d_ddot: pre * (2.0 * e + pre) / v,
            });
            if let (Some(c), Some(p)) = (a.get(age), self.past.get(age)) {
                post += c * p;
            }
        }
        step.inc = inc;

        self.past.push_front(x);
        self.predictor.advance()?;
        let next_len = self.predictor.coefficients().len();
        self.past.truncate(next_len.max(1));
        // a candidate of age k now has age k+1 at the next step and is
        // corrected there only if k + 1 < next_len
        step.frozen_age = next_len.saturating_sub(1);
        if !inc.is_finite() {
            return Err(Error::Numerical(format!("innovation term {inc} at step {}", self.n)));
        }
        Ok(&self.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_corrects_only_the_newest_candidate() {
        let spec = ProcessSpec::ar1(0.6, 1.0);
        let mut feed = CandidateFeed::new(&spec).unwrap();
        let s = feed.push(1.0).unwrap();
        assert_eq!(s.corrections.len(), 1);
        assert_eq!(s.frozen_age, 0);
        let s = feed.push(2.0).unwrap().clone();
        assert_eq!(s.corrections.len(), 1);
        // new candidate: d = x, e = x - φ x_prev
        let e = 2.0 - 0.6;
        assert!((s.inc - e * e).abs() < 1e-15);
        assert!((s.corrections[0].d_dot - (e * 2.0 - e * e)).abs() < 1e-15);
        assert!((s.corrections[0].d_ddot - (4.0 - e * e)).abs() < 1e-15);
    }

    #[test]
    fn ar2_corrects_two_candidates() {
        let spec = ProcessSpec::ar2(0.5, -0.3, 1.0);
        let mut feed = CandidateFeed::new(&spec).unwrap();
        feed.push(1.0).unwrap();
        let s = feed.push(0.5).unwrap();
        assert_eq!(s.corrections.len(), 1);
        assert_eq!(s.frozen_age, 1);
        let s = feed.push(-0.2).unwrap();
        assert_eq!(s.corrections.len(), 2);
        // candidate n-1: the post-change prediction part is φ₁ X_{n-1}
        let x_hat = 0.5 * 0.5 - 0.3 * 1.0;
        let e: f64 = -0.2 - x_hat;
        let d = -0.2 - 0.5 * 0.5;
        assert!((s.corrections[1].d_ddot - (d * d - e * e)).abs() < 1e-15);
    }
}
