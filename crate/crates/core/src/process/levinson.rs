//! Durbin–Levinson predictor coefficients.
//!
//! The candidate-sum charts need the individual weights `a_{n,j}` of
//! `X̂_{n+1} = Σ_j a_{n,j} X_{n+1-j}`, not just the prediction. For a pure
//! AR(p) process the weights are exactly `φ` once `n >= p`. With a moving
//! average part the weights converge geometrically; the recursion stops once
//! the partial autocorrelation is negligible and the tail is trimmed.

use super::{Autocovariance, ProcessSpec};
use crate::error::{Error, Result};

const PACF_FREEZE_TOL: f64 = 1e-15;
const COEF_TRIM_TOL: f64 = 1e-17;
const MAX_ORDER: usize = 20_000;

#[derive(Clone, Debug)]
pub struct LinearPredictor {
    acov: Autocovariance,
    pure_ar: Option<(Vec<f64>, f64)>,
    order: usize,
    coef: Vec<f64>,
    msev: f64,
    frozen: bool,
}

impl LinearPredictor {
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        let mut acov = Autocovariance::new(spec)?;
        let msev = acov.get(0);
        let pure_ar = spec
            .theta
            .iter()
            .all(|&t| t == 0.0)
            .then(|| (spec.phi.clone(), spec.sigma2));
        Ok(Self {
            acov,
            pure_ar,
            order: 0,
            coef: Vec::new(),
            msev,
            frozen: false,
        })
    }

    /// Weights `a_{n,1..}` for the current `n` (trailing zeros omitted).
    #[inline]
    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    /// Mean square error `v_n`.
    #[inline]
    pub fn msev(&self) -> f64 {
        self.msev
    }

    /// Number of past observations the current weights refer to.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Moves from `n` to `n + 1`.
    pub fn advance(&mut self) -> Result<()> {
        self.order += 1;
        if self.frozen {
            return Ok(());
        }
        let n = self.order;
        if let Some((phi, sigma2)) = &self.pure_ar {
            if n >= phi.len() {
                self.coef = phi.clone();
                while self.coef.last() == Some(&0.0) {
                    self.coef.pop();
                }
                self.msev = *sigma2;
                self.frozen = true;
                return Ok(());
            }
        }
        let mut num = self.acov.get(n);
        for (j, a) in self.coef.iter().enumerate() {
            num -= a * self.acov.get(n - j - 1);
        }
        let pacf = num / self.msev;
        let mut next = Vec::with_capacity(n);
        for j in 0..n - 1 {
            let prev = self.coef.get(j).copied().unwrap_or(0.0);
            let mirror = self.coef.get(n - 2 - j).copied().unwrap_or(0.0);
            next.push(prev - pacf * mirror);
        }
        next.push(pacf);
        self.msev *= 1.0 - pacf * pacf;
        if !(self.msev > 0.0) {
            return Err(Error::Numerical(format!(
                "prediction variance {} at order {n}",
                self.msev
            )));
        }
        self.coef = next;
        if pacf.abs() < PACF_FREEZE_TOL || n >= MAX_ORDER {
            let scale = self.coef.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            while self
                .coef
                .last()
                .is_some_and(|a| a.abs() <= COEF_TRIM_TOL * scale.max(1.0))
            {
                self.coef.pop();
            }
            self.frozen = true;
        }
        Ok(())
    }
}
