//! Generalized Shiryaev–Roberts charts.
//!
//! The single `Δ` that maximizes the geometric mean of the candidate
//! likelihood ratios is plugged in. With `N = n(n+1)` and
//! `U̇ = Σ_i Ṡ_{n,i}`, `Ü = Σ_i S̈_{n,i}` the statistic is
//!
//! ```text
//! g_n = -(N/2) ln Δ̂² + 2(1 - 1/Δ̂) U̇ - w (1 - 1/Δ̂)² Ü,   Δ̂ = max(1, Δ̃)
//! ```
//!
//! where `Δ̃` is the positive root of `NΔ² - 2(U̇ - Ü)Δ - 2Ü = 0`. The weight
//! `w` is 1, which makes `g_n` twice the log of the geometric mean at `Δ̂`;
//! the `gsr-paper-half` feature switches it to ½.

use super::{h_clamped_unchecked, require_finite, CandidateFeed};
use crate::error::Result;
use crate::process::{Innovations, ProcessKind, ProcessSpec};

/// Weight of the `Ü` term.
pub const GSR_DDOT_WEIGHT: f64 = if cfg!(feature = "gsr-paper-half") { 0.5 } else { 1.0 };

/// iid form: `U_n = Σ_i i (X_i - μ)²/γ₀`, statistic `h_{N}(2U_n/N)`.
#[derive(Clone, Debug)]
pub struct GsrIid {
    mu: f64,
    gamma0: f64,
    n: u64,
    u: f64,
}

impl GsrIid {
    pub fn new(process: &ProcessSpec) -> Result<Self> {
        Ok(Self {
            mu: process.mu,
            gamma0: process.stationary_variance()?,
            n: 0,
            u: 0.0,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> f64 {
        let z = x - self.mu;
        self.n += 1;
        let n = self.n as f64;
        self.u += n * z * z / self.gamma0;
        let weight = n * (n + 1.0);
        h_clamped_unchecked(weight, 2.0 * self.u / weight)
    }
}

#[derive(Clone, Debug)]
pub struct Gsr {
    mu: f64,
    n: u64,
    engine: GsrEngine,
}

#[derive(Clone, Debug)]
enum GsrEngine {
    /// `U̇ = Σ_k (T_n - T_k) + Σ_k e_k X_k/v_{k-1}`, `Ü` likewise with `X_k²`.
    Ar1 {
        predictor: Innovations,
        u_base: f64,
        p: f64,
        q: f64,
    },
    /// `U̇ = Σ_i (T_n - T_{i-1}) + Σ_i cd_i`; only the sums are needed.
    Generic {
        feed: CandidateFeed,
        tail: f64,
        sum_cd: f64,
        sum_cdd: f64,
    },
}

impl Gsr {
    pub fn new(process: &ProcessSpec, generic: bool) -> Result<Self> {
        let engine = if process.kind() == ProcessKind::Ar1 && !generic {
            GsrEngine::Ar1 {
                predictor: Innovations::new(process)?,
                u_base: 0.0,
                p: 0.0,
                q: 0.0,
            }
        } else {
            GsrEngine::Generic {
                feed: CandidateFeed::new(process)?,
                tail: 0.0,
                sum_cd: 0.0,
                sum_cdd: 0.0,
            }
        };
        Ok(Self {
            mu: process.mu,
            n: 0,
            engine,
        })
    }

    #[inline]
    pub fn update(&mut self, x: f64) -> Result<f64> {
        let z = x - self.mu;
        self.n += 1;
        let n = self.n as f64;
        let (u_dot, u_ddot) = match &mut self.engine {
            GsrEngine::Ar1 {
                predictor,
                u_base,
                p,
                q,
            } => {
                let pr = predictor.prediction();
                let e = z - pr.x_hat;
                predictor.observe(z)?;
                *u_base += (n - 1.0) * e * e / pr.msev;
                *p += e * z / pr.msev;
                *q += z * z / pr.msev;
                (*u_base + *p, *u_base + *q)
            }
            GsrEngine::Generic {
                feed,
                tail,
                sum_cd,
                sum_cdd,
            } => {
                let step = feed.push(z)?;
                *tail += n * step.inc;
                for c in &step.corrections {
                    *sum_cd += c.d_dot;
                    *sum_cdd += c.d_ddot;
                }
                (*tail + *sum_cd, *tail + *sum_cdd)
            }
        };
        require_finite(gsr_statistic(u_dot, u_ddot, n), "GSR statistic")
    }
}

/// `Δ̃`, the unconstrained maximizer of `g_n` (with unit weight).
#[inline]
pub fn gsr_delta_tilde(u_dot: f64, u_ddot: f64, n: f64) -> f64 {
    let big_n = n * (n + 1.0);
    let d = u_dot - u_ddot;
    let disc = (d * d + 2.0 * big_n * u_ddot.max(0.0)).sqrt();
    if d >= 0.0 {
        (d + disc) / big_n
    } else {
        2.0 * u_ddot.max(0.0) / (disc - d)
    }
}

/// `g_n(Δ)` before clamping.
#[inline]
pub fn gsr_objective(u_dot: f64, u_ddot: f64, n: f64, delta: f64) -> f64 {
    let big_n = n * (n + 1.0);
    let b = 1.0 - 1.0 / delta;
    -big_n * delta.ln() + 2.0 * b * u_dot - GSR_DDOT_WEIGHT * b * b * u_ddot
}

#[inline]
fn gsr_statistic(u_dot: f64, u_ddot: f64, n: f64) -> f64 {
    let delta = gsr_delta_tilde(u_dot, u_ddot, n);
    if delta <= 1.0 {
        0.0
    } else {
        gsr_objective(u_dot, u_ddot, n, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_first_value() {
        let spec = ProcessSpec::ar1(0.0, 1.0);
        let mut g = GsrIid::new(&spec).unwrap();
        assert!((g.update(2.0) - 1.613706).abs() < 5e-7);
    }

    #[test]
    fn fast_and_generic_paths_agree() {
        for phi in [-0.6, 0.0, 0.8] {
            let spec = ProcessSpec::ar1(phi, 0.7);
            let mut f = Gsr::new(&spec, false).unwrap();
            let mut g = Gsr::new(&spec, true).unwrap();
            for i in 0..300 {
                let x = ((i * 53 % 41) as f64 - 20.0) / 7.0;
                let (u, v) = (f.update(x).unwrap(), g.update(x).unwrap());
                assert!((u - v).abs() < 1e-8 * u.abs().max(1.0), "{phi} {i}: {u} {v}");
            }
        }
    }

    #[cfg(not(feature = "gsr-paper-half"))]
    #[test]
    fn white_noise_matches_iid() {
        let spec = ProcessSpec::ar1(0.0, 1.0);
        let mut a = GsrIid::new(&spec).unwrap();
        let mut b = Gsr::new(&spec, false).unwrap();
        for i in 0..50 {
            let x = ((i * 7 % 13) as f64 - 6.0) / 2.5;
            let (u, v) = (a.update(x), b.update(x).unwrap());
            assert!((u - v).abs() < 1e-10 * u.abs().max(1.0), "{i}: {u} {v}");
        }
    }
}
