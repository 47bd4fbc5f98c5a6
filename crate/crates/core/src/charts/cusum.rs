//! CUSUM charts: the iid variance chart and the residual (SPRT) chart.

use super::{k_ref, require_finite};
use crate::error::Result;
use crate::process::{Innovations, ProcessSpec};

/// `S_n⁺ = max(0, S_{n-1}⁺ + (X_n - μ)²/γ₀ - K(Δ*))`, ignoring autocorrelation.
#[derive(Clone, Debug)]
pub struct CusumIid {
    s_plus: f64,
    k_ref: f64,
    gamma0: f64,
    mu: f64,
}

impl CusumIid {
    pub fn new(process: &ProcessSpec, delta_star: f64) -> Result<Self> {
        Ok(Self {
            s_plus: 0.0,
            k_ref: k_ref(delta_star)?,
            gamma0: process.stationary_variance()?,
            mu: process.mu,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> f64 {
        let z = x - self.mu;
        self.s_plus = (self.s_plus + z * z / self.gamma0 - self.k_ref).max(0.0);
        self.s_plus
    }

    pub fn statistic(&self) -> f64 {
        self.s_plus
    }
}

/// CUSUM of squared standardized innovations,
/// `W_n = max(0, W_{n-1} + (X_n - X̂_n)²/v_{n-1} - K(Δ*))`.
///
/// In control the standardized innovations are iid N(0, 1) for every
/// process, so the limit does not depend on the process parameters.
#[derive(Clone, Debug)]
pub struct ResidualCusum {
    w: f64,
    k_ref: f64,
    mu: f64,
    predictor: Innovations,
}

impl ResidualCusum {
    pub fn new(process: &ProcessSpec, delta_star: f64) -> Result<Self> {
        Ok(Self {
            w: 0.0,
            k_ref: k_ref(delta_star)?,
            mu: process.mu,
            predictor: Innovations::new(process)?,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> Result<f64> {
        let z = x - self.mu;
        let p = self.predictor.prediction();
        let e = z - p.x_hat;
        self.predictor.observe(z)?;
        self.w = (self.w + e * e / p.msev - self.k_ref).max(0.0);
        require_finite(self.w, "residual CUSUM")
    }

    pub fn statistic(&self) -> f64 {
        self.w
    }
}
