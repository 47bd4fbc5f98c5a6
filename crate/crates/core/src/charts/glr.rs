//! Generalized likelihood ratio chart.
//!
//! For every candidate change point `i` the change factor is replaced by its
//! maximum-likelihood value over `Δ >= 1`; the statistic is the largest
//! resulting log-likelihood ratio, doubled so that in the iid case it reads
//! `max_i m_i (Δ̂² - 1 - ln Δ̂²)`.
//!
//! Candidates that can never again be the maximizer are dropped. Once the
//! predictor no longer reaches back past two candidates `i < j`, their future
//! objectives differ by the fixed function `D(Δ) = -k ln Δ + bA - cB` with
//! `k = j - i`, `b = 1 - 1/Δ`, `c = b²/2` and `A`, `B` the differences of
//! their `Ṡ`, `S̈`. Since `b <= ln Δ` and `c <= b/2`, `D <= 0` on `Δ >= 1`
//! whenever `A + max(0, -B)/2 <= k`, and then `i` is dominated by `j`.

use std::collections::VecDeque;

use super::{glr_objective, glr_root, require_finite, CandidateFeed};
use crate::error::Result;
use crate::process::ProcessSpec;

#[derive(Clone, Copy, Debug)]
struct Candidate {
    i: u64,
    /// `T_{i-1}`.
    t_prev: f64,
    cd: f64,
    cdd: f64,
}

#[derive(Clone, Debug)]
pub struct Glr {
    mu: f64,
    window: Option<u64>,
    feed: CandidateFeed,
    n: u64,
    t: f64,
    frozen: VecDeque<Candidate>,
    active: VecDeque<Candidate>,
}

impl Glr {
    pub fn new(process: &ProcessSpec, window: Option<usize>) -> Result<Self> {
        Ok(Self {
            mu: process.mu,
            window: window.map(|w| w as u64),
            feed: CandidateFeed::new(process)?,
            n: 0,
            t: 0.0,
            frozen: VecDeque::new(),
            active: VecDeque::new(),
        })
    }

    /// Number of candidates currently retained.
    pub fn retained(&self) -> usize {
        self.frozen.len() + self.active.len()
    }

    pub fn update(&mut self, x: f64) -> Result<f64> {
        let step = self.feed.push(x - self.mu)?;
        self.n += 1;
        let t_prev = self.t;
        self.t += step.inc;
        self.active.push_back(Candidate {
            i: self.n,
            t_prev,
            cd: 0.0,
            cdd: 0.0,
        });
        let len = self.active.len();
        for c in &step.corrections[..len] {
            let cand = &mut self.active[len - 1 - c.age];
            cand.cd += c.d_dot;
            cand.cdd += c.d_ddot;
        }
        while self.active.len() > step.frozen_age {
            if let Some(j) = self.active.pop_front() {
                self.frozen.retain(|i| !dominated(i, &j));
                self.frozen.push_back(j);
            }
        }
        if let Some(w) = self.window {
            let oldest = self.n.saturating_sub(w) + 1;
            while self.frozen.front().is_some_and(|c| c.i < oldest) {
                self.frozen.pop_front();
            }
            while self.active.front().is_some_and(|c| c.i < oldest) {
                self.active.pop_front();
            }
        }

        let (n, t) = (self.n, self.t);
        let best = self
            .frozen
            .iter()
            .chain(&self.active)
            .fold(0.0f64, |best, c| best.max(objective(c, n, t)));
        require_finite(2.0 * best, "GLR statistic")
    }
}

/// Maximized log-likelihood ratio of candidate `c` at time `n`; zero when
/// the maximizer is clamped to 1.
#[inline]
fn objective(c: &Candidate, n: u64, t: f64) -> f64 {
    let m = (n - c.i + 1) as f64;
    let s_dot = t - c.t_prev + c.cd;
    if s_dot <= m {
        return 0.0;
    }
    let s_ddot = (t - c.t_prev + c.cdd).max(0.0);
    let delta = glr_root(s_dot, s_ddot, m);
    if delta <= 1.0 {
        return 0.0;
    }
    glr_objective(s_dot, s_ddot, m, delta)
}

#[inline]
fn dominated(i: &Candidate, j: &Candidate) -> bool {
    let k = (j.i - i.i) as f64;
    let gap = j.t_prev - i.t_prev;
    let a = gap + i.cd - j.cd;
    let b = gap + i.cdd - j.cdd;
    a + 0.5 * (-b).max(0.0) <= k
}
