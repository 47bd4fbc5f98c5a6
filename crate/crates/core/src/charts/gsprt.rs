//! Generalized SPRT chart on the standardized innovations.
//!
//! `T_n = Σ e_j²/v_{j-1}` and the statistic is
//! `max_{0≤i≤n} (h_n(T_n/n) - h_i(T_i/i))` with `h_0 := 0`. Because every
//! `h_i` is non-negative the minimum is always the `i = 0` term, so the value
//! equals `h_n(T_n/n)`; the running minimum is kept to mirror the definition.

use super::{h_clamped_unchecked, require_finite};
use crate::error::Result;
use crate::process::{Innovations, ProcessSpec};

#[derive(Clone, Debug)]
pub struct Gsprt {
    mu: f64,
    t: f64,
    n: u64,
    running_min: f64,
    predictor: Innovations,
}

impl Gsprt {
    pub fn new(process: &ProcessSpec) -> Result<Self> {
        Ok(Self {
            mu: process.mu,
            t: 0.0,
            n: 0,
            running_min: 0.0,
            predictor: Innovations::new(process)?,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> Result<f64> {
        let z = x - self.mu;
        let p = self.predictor.prediction();
        let e = z - p.x_hat;
        self.predictor.observe(z)?;
        self.t += e * e / p.msev;
        self.n += 1;
        let n = self.n as f64;
        let h = h_clamped_unchecked(n, self.t / n);
        self.running_min = self.running_min.min(h);
        require_finite(h - self.running_min, "GSPRT statistic")
    }

    /// `T_n`.
    pub fn residual_sum(&self) -> f64 {
        self.t
    }
}
