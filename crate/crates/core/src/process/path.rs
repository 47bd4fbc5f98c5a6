//! Exact simulation of observed paths.
//!
//! `Y_t` is drawn from its one-step conditional law, `Y_t = Ŷ_t + √v_{t-1} Z_t`,
//! so the first observation already comes from the stationary distribution
//! and no burn-in is needed. The change is applied on top of `Y`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ChangeSpec, Innovations, ProcessSpec};
use crate::error::Result;

/// Independent generator for replication `rep` of a run seeded with `seed`.
pub fn substream(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Stream of observations `X_1, X_2, …` of one replication.
#[derive(Clone, Debug)]
pub struct PathGenerator<R = ChaCha8Rng> {
    rng: R,
    target: Innovations,
    change: ChangeSpec,
    mu: f64,
    t: u64,
    last_msev: f64,
    last_sd: f64,
}

impl PathGenerator<ChaCha8Rng> {
    pub fn from_seed(process: &ProcessSpec, change: ChangeSpec, seed: u64, rep: u64) -> Result<Self> {
        Self::new(process, change, substream(seed, rep))
    }
}

impl<R: Rng> PathGenerator<R> {
    pub fn new(process: &ProcessSpec, change: ChangeSpec, rng: R) -> Result<Self> {
        change.validate()?;
        Ok(Self {
            rng,
            target: Innovations::new(process)?,
            change,
            mu: process.mu,
            t: 0,
            last_msev: f64::NAN,
            last_sd: f64::NAN,
        })
    }

    /// Replaces the change specification. Only observations produced after
    /// the call are affected.
    pub fn set_change(&mut self, change: ChangeSpec) -> Result<()> {
        change.validate()?;
        self.change = change;
        Ok(())
    }

    /// Index of the last observation produced.
    pub fn time(&self) -> u64 {
        self.t
    }

    /// Next target value `Y_t - μ`, before the change is applied.
    #[inline]
    fn next_target(&mut self) -> Result<f64> {
        let p = self.target.prediction();
        if p.msev != self.last_msev {
            self.last_msev = p.msev;
            self.last_sd = p.msev.sqrt();
        }
        let z: f64 = self.rng.sample(StandardNormal);
        let y = p.x_hat + self.last_sd * z;
        self.target.observe(y)?;
        Ok(y)
    }

    /// Next observation `X_t`, including the mean.
    #[inline]
    pub fn next_observation(&mut self) -> Result<f64> {
        let y = self.next_target()?;
        self.t += 1;
        Ok(self.mu + self.change.scale_at(self.t) * y)
    }

    /// First `n` observations.
    pub fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.next_observation()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_path() {
        let spec = ProcessSpec::ar1(0.4, 1.0);
        let a = PathGenerator::from_seed(&spec, ChangeSpec::in_control(), 9, 3)
            .unwrap()
            .take(20)
            .unwrap();
        let b = PathGenerator::from_seed(&spec, ChangeSpec::in_control(), 9, 3)
            .unwrap()
            .take(20)
            .unwrap();
        let c = PathGenerator::from_seed(&spec, ChangeSpec::in_control(), 9, 4)
            .unwrap()
            .take(20)
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn change_scales_deviation_from_mean() {
        let spec = ProcessSpec::ar1(0.4, 1.0).with_mean(5.0);
        let base = PathGenerator::from_seed(&spec, ChangeSpec::in_control(), 1, 0)
            .unwrap()
            .take(10)
            .unwrap();
        let changed = PathGenerator::from_seed(&spec, ChangeSpec::at(4, 2.0), 1, 0)
            .unwrap()
            .take(10)
            .unwrap();
        for t in 0..10 {
            let expect = if t + 1 >= 4 {
                5.0 + 2.0 * (base[t] - 5.0)
            } else {
                base[t]
            };
            assert!((changed[t] - expect).abs() < 1e-12);
        }
    }
}
