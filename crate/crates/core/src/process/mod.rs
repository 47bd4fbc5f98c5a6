//! Target processes and the change-point model.
//!
//! A target process `{Y_t}` is a causal Gaussian ARMA process with mean `mu`.
//! The observed process equals `Y_t` before the change point `tau` and
//! `mu + delta * (Y_t - mu)` from `tau` on. Everything inside the library
//! works with the centered process; `mu` is added and removed only where
//! observations enter or leave.

mod innovations;
mod levinson;
mod path;

pub use innovations::{Innovations, Prediction};
pub use levinson::LinearPredictor;
pub use path::{substream, PathGenerator};

use crate::error::{Error, Result};

/// Tail mass (relative to the total) below which the MA(∞) expansion is cut.
const PSI_TAIL_TOL: f64 = 1e-12;
const PSI_MAX_TERMS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcessKind {
    Ar1,
    Ar2,
    Arma { p: usize, q: usize },
}

/// In-control target process.
///
/// `phi` holds the AR coefficients `φ₁..φ_p`, `theta` the MA coefficients
/// `θ₁..θ_q`, `sigma2` the white-noise variance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessSpec {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub mu: f64,
}

impl ProcessSpec {
    pub fn ar1(phi1: f64, sigma2: f64) -> Self {
        Self::arma(vec![phi1], Vec::new(), sigma2)
    }

    pub fn ar2(phi1: f64, phi2: f64, sigma2: f64) -> Self {
        Self::arma(vec![phi1, phi2], Vec::new(), sigma2)
    }

    pub fn arma(phi: Vec<f64>, theta: Vec<f64>, sigma2: f64) -> Self {
        Self {
            phi,
            theta,
            sigma2,
            mu: 0.0,
        }
    }

    pub fn with_mean(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn kind(&self) -> ProcessKind {
        match (self.phi.len(), self.theta.len()) {
            (1, 0) => ProcessKind::Ar1,
            (2, 0) => ProcessKind::Ar2,
            (p, q) => ProcessKind::Arma { p, q },
        }
    }

    /// Checks finiteness, `sigma2 > 0` and causality.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::config(
                "process.sigma2",
                format!("must be finite and > 0, got {}", self.sigma2),
            ));
        }
        if !self.mu.is_finite() {
            return Err(Error::config("process.mu", "must be finite"));
        }
        if let Some(bad) = self.phi.iter().chain(&self.theta).find(|c| !c.is_finite()) {
            return Err(Error::config(
                "process",
                format!("coefficient {bad} is not finite"),
            ));
        }
        if !causality_check(&self.phi) {
            return Err(Error::Causality(format!(
                "AR polynomial with coefficients {:?} has a root on or inside the unit circle",
                self.phi
            )));
        }
        Ok(())
    }

    pub fn is_causal(&self) -> bool {
        causality_check(&self.phi)
    }

    /// `Var(Y_t)` of the stationary solution.
    pub fn stationary_variance(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self.kind() {
            ProcessKind::Ar1 => self.sigma2 / (1.0 - self.phi[0] * self.phi[0]),
            ProcessKind::Ar2 => {
                let (p1, p2) = (self.phi[0], self.phi[1]);
                self.sigma2 * (1.0 - p2) / ((1.0 + p2) * ((1.0 - p2) * (1.0 - p2) - p1 * p1))
            }
            ProcessKind::Arma { .. } => Autocovariance::new(self)?.get(0),
        })
    }

    /// `γ(0), …, γ(max_lag)`.
    pub fn autocovariances(&self, max_lag: usize) -> Result<Vec<f64>> {
        let mut acov = Autocovariance::new(self)?;
        Ok((0..=max_lag).map(|h| acov.get(h)).collect())
    }

    /// Canonical text form used for cache keys and provenance columns.
    pub fn fingerprint(&self) -> String {
        format!(
            "phi={:?};theta={:?};sigma2={:?};mu={:?}",
            self.phi, self.theta, self.sigma2, self.mu
        )
    }
}

/// True iff all roots of `1 - Σ φ_i z^i` lie strictly outside the unit circle.
///
/// Uses the step-down (Schur–Cohn) recursion: the polynomial is causal iff
/// every reflection coefficient has modulus below one.
pub fn causality_check(phi: &[f64]) -> bool {
    let mut a: Vec<f64> = phi.to_vec();
    while let Some(&last) = a.last() {
        if last == 0.0 {
            a.pop();
            continue;
        }
        break;
    }
    for k in (1..=a.len()).rev() {
        let r = a[k - 1];
        if !r.is_finite() || r.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - r * r;
        let prev: Vec<f64> = (1..k)
            .map(|j| (a[j - 1] + r * a[k - j - 1]) / denom)
            .collect();
        a = prev;
    }
    true
}

/// Autocovariance function of a causal ARMA process, extended lazily.
///
/// Lags up to `max(p, q)` come from the truncated MA(∞) expansion; larger
/// lags follow the homogeneous recursion `γ(h) = Σ φ_i γ(h-i)`.
#[derive(Clone, Debug)]
pub struct Autocovariance {
    phi: Vec<f64>,
    gamma: Vec<f64>,
}

impl Autocovariance {
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.phi.len();
        let q = spec.theta.len();
        let base = p.max(q);
        let gamma = match spec.kind() {
            ProcessKind::Ar1 => {
                let g0 = spec.sigma2 / (1.0 - spec.phi[0] * spec.phi[0]);
                vec![g0, spec.phi[0] * g0]
            }
            ProcessKind::Ar2 => {
                let (p1, p2) = (spec.phi[0], spec.phi[1]);
                let g0 = spec.sigma2 * (1.0 - p2)
                    / ((1.0 + p2) * ((1.0 - p2) * (1.0 - p2) - p1 * p1));
                vec![g0, p1 / (1.0 - p2) * g0]
            }
            ProcessKind::Arma { .. } => {
                let psi = psi_weights(&spec.phi, &spec.theta);
                (0..=base)
                    .map(|h| {
                        spec.sigma2
                            * psi
                                .iter()
                                .zip(psi.iter().skip(h))
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                    })
                    .collect()
            }
        };
        Ok(Self {
            phi: spec.phi.clone(),
            gamma,
        })
    }

    pub fn get(&mut self, lag: usize) -> f64 {
        while self.gamma.len() <= lag {
            let h = self.gamma.len();
            let next = self
                .phi
                .iter()
                .enumerate()
                .map(|(i, f)| f * self.gamma[(h as isize - i as isize - 1).unsigned_abs()])
                .sum();
            self.gamma.push(next);
        }
        self.gamma[lag]
    }
}

/// MA(∞) weights `ψ_j`, truncated once the recent squared mass is negligible
/// relative to the accumulated total.
fn psi_weights(phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let p = phi.len();
    let q = theta.len();
    let window = p.max(1);
    let mut psi = vec![1.0];
    let mut total = 1.0;
    for j in 1..PSI_MAX_TERMS {
        let mut v = theta.get(j - 1).copied().unwrap_or(0.0);
        for i in 1..=j.min(p) {
            v += phi[i - 1] * psi[j - i];
        }
        psi.push(v);
        total += v * v;
        if j > q && j >= window {
            let recent: f64 = psi[psi.len() - window..].iter().map(|x| x * x).sum();
            // geometric decay: the remaining tail is a bounded multiple of the recent window
            if recent <= PSI_TAIL_TOL * 1e-3 * total {
                break;
            }
        }
    }
    psi
}

/// Position and size of the scale change.
///
/// `tau = None` encodes "never" (in control); `delta = 1` is also in control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChangeSpec {
    pub tau: Option<u64>,
    pub delta: f64,
}

impl ChangeSpec {
    pub fn in_control() -> Self {
        Self {
            tau: None,
            delta: 1.0,
        }
    }

    pub fn at(tau: u64, delta: f64) -> Self {
        Self {
            tau: Some(tau),
            delta,
        }
    }

    /// Change at the first observation.
    pub fn immediate(delta: f64) -> Self {
        Self::at(1, delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 1.0) {
            return Err(Error::config(
                "change.delta",
                format!("must be finite and >= 1, got {}", self.delta),
            ));
        }
        if self.tau == Some(0) {
            return Err(Error::config("change.tau", "must be >= 1"));
        }
        Ok(())
    }

    /// Scale applied to the centered observation at index `t` (1-based).
    #[inline]
    pub fn scale_at(&self, t: u64) -> f64 {
        match self.tau {
            Some(tau) if t >= tau => self.delta,
            _ => 1.0,
        }
    }

    pub fn is_in_control(&self) -> bool {
        self.tau.is_none() || self.delta == 1.0
    }
}
