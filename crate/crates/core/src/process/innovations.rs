//! One-step prediction by the innovations algorithm.
//!
//! AR(1) and AR(2) use closed forms. Everything else runs the ARMA form of
//! the recursion on the transformed series (centered `X_t / σ` up to
//! `m = max(p, q)`, `φ(B) X_t / σ` after), which only needs `q` coefficients
//! per step once `n >= m`. Memory stays bounded by `max(m, q) + 1` rows.

use std::collections::VecDeque;

use super::{Autocovariance, ProcessKind, ProcessSpec};
use crate::error::{Error, Result};

/// Best linear prediction of the next centered observation and its mean
/// square error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub x_hat: f64,
    pub msev: f64,
}

/// Streaming predictor: feed centered observations, read the prediction of
/// the next one.
#[derive(Clone, Debug)]
pub struct Innovations {
    n: u64,
    current: Prediction,
    engine: Engine,
}

#[derive(Clone, Debug)]
enum Engine {
    Ar1 {
        phi: f64,
        sigma2: f64,
    },
    Ar2 {
        phi1: f64,
        phi2: f64,
        sigma2: f64,
        rho1: f64,
        v1: f64,
        prev: f64,
    },
    Generic(Box<GenericState>),
}

impl Innovations {
    /// Predictor for `spec`, using the closed forms where they exist.
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        let gamma0 = spec.stationary_variance()?;
        let engine = match spec.kind() {
            ProcessKind::Ar1 => Engine::Ar1 {
                phi: spec.phi[0],
                sigma2: spec.sigma2,
            },
            ProcessKind::Ar2 => {
                let (phi1, phi2) = (spec.phi[0], spec.phi[1]);
                let rho1 = phi1 / (1.0 - phi2);
                Engine::Ar2 {
                    phi1,
                    phi2,
                    sigma2: spec.sigma2,
                    rho1,
                    v1: gamma0 * (1.0 - rho1 * rho1),
                    prev: 0.0,
                }
            }
            ProcessKind::Arma { .. } => return Self::generic(spec),
        };
        Ok(Self {
            n: 0,
            current: Prediction {
                x_hat: 0.0,
                msev: gamma0,
            },
            engine,
        })
    }

    /// Predictor that always runs the general recursion, even for AR(1)/AR(2).
    pub fn generic(spec: &ProcessSpec) -> Result<Self> {
        let state = GenericState::new(spec)?;
        let msev = spec.sigma2 * state.r.back().copied().unwrap_or(1.0);
        Ok(Self {
            n: 0,
            current: Prediction { x_hat: 0.0, msev },
            engine: Engine::Generic(Box::new(state)),
        })
    }

    /// Number of observations consumed so far.
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Prediction of observation `len() + 1`.
    #[inline]
    pub fn prediction(&self) -> Prediction {
        self.current
    }

    /// Consumes the next centered observation and returns the prediction of
    /// the one after it.
    #[inline]
    pub fn observe(&mut self, x: f64) -> Result<Prediction> {
        self.n += 1;
        let n = self.n;
        self.current = match &mut self.engine {
            Engine::Ar1 { phi, sigma2 } => Prediction {
                x_hat: *phi * x,
                msev: *sigma2,
            },
            Engine::Ar2 {
                phi1,
                phi2,
                sigma2,
                rho1,
                v1,
                prev,
            } => {
                let p = if n == 1 {
                    Prediction {
                        x_hat: *rho1 * x,
                        msev: *v1,
                    }
                } else {
                    Prediction {
                        x_hat: *phi1 * x + *phi2 * *prev,
                        msev: *sigma2,
                    }
                };
                *prev = x;
                p
            }
            Engine::Generic(state) => {
                let e = x - self.current.x_hat;
                state.advance(x, e)?
            }
        };
        if !(self.current.msev > 0.0 && self.current.msev.is_finite()) {
            return Err(Error::Numerical(format!(
                "prediction variance {} at step {}",
                self.current.msev,
                n + 1
            )));
        }
        Ok(self.current)
    }
}

#[derive(Clone, Debug)]
struct GenericState {
    phi: Vec<f64>,
    theta: Vec<f64>,
    sigma2: f64,
    m: usize,
    acov: Autocovariance,
    /// Index of the most recent row; rows hold `θ_{k,1..}` for the last few `k`.
    k_last: usize,
    rows: VecDeque<Vec<f64>>,
    r: VecDeque<f64>,
    /// Recent observations and innovations, newest first.
    xs: VecDeque<f64>,
    es: VecDeque<f64>,
    keep: usize,
}

impl GenericState {
    fn new(spec: &ProcessSpec) -> Result<Self> {
        let acov = Autocovariance::new(spec)?;
        let m = spec.phi.len().max(spec.theta.len());
        let mut s = Self {
            phi: spec.phi.clone(),
            theta: spec.theta.clone(),
            sigma2: spec.sigma2,
            m,
            acov,
            k_last: 0,
            rows: VecDeque::new(),
            r: VecDeque::new(),
            xs: VecDeque::new(),
            es: VecDeque::new(),
            keep: m.max(spec.theta.len()) + 1,
        };
        let r0 = s.kappa(1, 1);
        if !(r0 > 0.0) {
            return Err(Error::Numerical(format!("initial variance ratio {r0}")));
        }
        s.rows.push_back(Vec::new());
        s.r.push_back(r0);
        Ok(s)
    }

    /// Covariance of the transformed series at 1-based times `i`, `j`.
    fn kappa(&mut self, i: usize, j: usize) -> f64 {
        let m = self.m;
        let (lo, hi) = (i.min(j), i.max(j));
        let h = hi - lo;
        if hi <= m {
            self.acov.get(h) / self.sigma2
        } else if lo <= m && hi <= 2 * m {
            let mut s = self.acov.get(h);
            for r in 1..=self.phi.len() {
                s -= self.phi[r - 1] * self.acov.get(r.abs_diff(h));
            }
            s / self.sigma2
        } else if lo > m {
            let q = self.theta.len();
            if h > q {
                return 0.0;
            }
            let th = |r: usize| if r == 0 { 1.0 } else { self.theta[r - 1] };
            (0..=q - h).map(|r| th(r) * th(r + h)).sum()
        } else {
            0.0
        }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.rows[self.rows.len() - 1 - (self.k_last - k)]
    }

    fn r_at(&self, k: usize) -> f64 {
        self.r[self.r.len() - 1 - (self.k_last - k)]
    }

    fn theta_at(&self, k: usize, i: usize) -> f64 {
        let row = self.row(k);
        if i >= 1 && i <= row.len() {
            row[i - 1]
        } else {
            0.0
        }
    }

    /// Records `X_n = x` with innovation `e`, builds row `n` and returns the
    /// prediction of `X_{n+1}`.
    fn advance(&mut self, x: f64, e: f64) -> Result<Prediction> {
        let q = self.theta.len();
        let n = self.k_last + 1;
        self.xs.push_front(x);
        self.es.push_front(e);
        self.xs.truncate(self.keep);
        self.es.truncate(self.keep);

        let (len, k_lo) = if n < self.m {
            (n, 0)
        } else {
            (n.min(q), n.saturating_sub(q))
        };
        let mut row = vec![0.0; len];
        for k in k_lo..n {
            let mut s = self.kappa(n + 1, k + 1);
            for j in k_lo..k {
                s -= self.theta_at(k, k - j) * row[n - j - 1] * self.r_at(j);
            }
            row[n - k - 1] = s / self.r_at(k);
        }
        let mut rn = self.kappa(n + 1, n + 1);
        for j in k_lo..n {
            rn -= row[n - j - 1] * row[n - j - 1] * self.r_at(j);
        }
        if !(rn > 0.0) {
            return Err(Error::Numerical(format!(
                "innovation variance ratio {rn} at step {n}"
            )));
        }

        let mut x_hat: f64 = row.iter().zip(&self.es).map(|(t, e)| t * e).sum();
        if n >= self.m {
            x_hat += self.phi.iter().zip(&self.xs).map(|(f, x)| f * x).sum::<f64>();
        }

        self.k_last = n;
        self.rows.push_back(row);
        self.r.push_back(rn);
        while self.rows.len() > self.keep {
            self.rows.pop_front();
            self.r.pop_front();
        }
        Ok(Prediction {
            x_hat,
            msev: self.sigma2 * rn,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Prediction by solving the normal equations on the full past.
    fn direct(spec: &ProcessSpec, xs: &[f64]) -> Vec<Prediction> {
        let g = spec.autocovariances(xs.len() + 1).unwrap();
        let mut out = vec![Prediction {
            x_hat: 0.0,
            msev: g[0],
        }];
        for n in 1..=xs.len() {
            // Γ_n a = γ_n with Γ_n[i][j] = γ(|i-j|), γ_n[i] = γ(i+1)
            let mut a: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut r: Vec<f64> = (0..n).map(|j| g[i.abs_diff(j)]).collect();
                    r.push(g[i + 1]);
                    r
                })
                .collect();
            for c in 0..n {
                let piv = (c..n)
                    .max_by(|&u, &v| a[u][c].abs().total_cmp(&a[v][c].abs()))
                    .unwrap();
                a.swap(c, piv);
                let pivot = a[c].clone();
                for (r, row) in a.iter_mut().enumerate() {
                    if r != c {
                        let f = row[c] / pivot[c];
                        for (x, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                            *x -= f * p;
                        }
                    }
                }
            }
            let coef: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
            let x_hat = (0..n).map(|j| coef[j] * xs[n - 1 - j]).sum();
            let msev = g[0] - (0..n).map(|j| coef[j] * g[j + 1]).sum::<f64>();
            out.push(Prediction { x_hat, msev });
        }
        out
    }

    fn check(spec: &ProcessSpec, xs: &[f64], generic: bool) {
        let expected = direct(spec, xs);
        let mut inn = if generic {
            Innovations::generic(spec).unwrap()
        } else {
            Innovations::new(spec).unwrap()
        };
        let mut got = vec![inn.prediction()];
        for &x in xs {
            got.push(inn.observe(x).unwrap());
        }
        for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
            assert!((g.x_hat - e.x_hat).abs() < 1e-9, "{spec:?} step {i}: {g:?} vs {e:?}");
            assert!((g.msev - e.msev).abs() < 1e-9, "{spec:?} step {i}: {g:?} vs {e:?}");
        }
    }

    fn sample(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919 % 101) as f64 / 50.0 - 1.0) * 1.3).collect()
    }

    #[test]
    fn matches_normal_equations() {
        let xs = sample(14);
        let specs = [
            ProcessSpec::ar1(0.6, 1.0),
            ProcessSpec::ar1(-0.8, 2.0),
            ProcessSpec::ar2(0.5, -0.3, 1.0),
            ProcessSpec::ar2(1.2, -0.5, 0.7),
            ProcessSpec::arma(vec![0.5], vec![0.4], 1.0),
            ProcessSpec::arma(vec![], vec![0.6, -0.3], 1.5),
            ProcessSpec::arma(vec![0.3, 0.2, -0.2], vec![0.5], 1.0),
            ProcessSpec::arma(vec![0.7], vec![0.2, 0.3, -0.1], 1.0),
            ProcessSpec::arma(vec![], vec![], 2.0),
        ];
        for spec in &specs {
            check(spec, &xs, true);
            check(spec, &xs, false);
        }
    }

    #[test]
    fn ar1_prediction_examples() {
        let mut inn = Innovations::new(&ProcessSpec::ar1(0.5, 1.0)).unwrap();
        let p = inn.prediction();
        assert_eq!(p.x_hat, 0.0);
        assert!((p.msev - 4.0 / 3.0).abs() < 1e-15);
        let p = inn.observe(2.0).unwrap();
        assert_eq!((p.x_hat, p.msev), (1.0, 1.0));
    }

    #[test]
    fn ar2_second_prediction() {
        let mut inn = Innovations::new(&ProcessSpec::ar2(0.5, -0.3, 1.0)).unwrap();
        let p = inn.observe(1.0).unwrap();
        let rho1 = 0.5 / 1.3;
        assert!((p.x_hat - rho1).abs() < 1e-15);
        let p = inn.observe(2.0).unwrap();
        assert!((p.x_hat - (0.5 * 2.0 - 0.3 * 1.0)).abs() < 1e-15);
        assert_eq!(p.msev, 1.0);
    }
}
