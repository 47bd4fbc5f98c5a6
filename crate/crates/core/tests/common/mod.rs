//! Brute-force reference evaluators.
//!
//! Everything here works from the dense covariance matrix of the first `n`
//! observations and its Cholesky factor `L`. For a change at `i` the observed
//! vector is `D x` with `D` scaling entries `i..` by `Δ`, so the log-likelihood
//! ratio against no change is
//!
//! `-m ln Δ - ½ (|L⁻¹ D⁻¹ x|² - |L⁻¹ x|²)`,  `m = n - i + 1`.
//!
//! `L⁻¹ D⁻¹ x = p_i + u q_i` with `u = 1/Δ`, where `p_i` solves against the
//! pre-change part of `x` and `q_i` against the rest. Forward substitution is
//! causal, so prefixes of these vectors serve every `n` at once.

#![allow(dead_code)]

use varchart::charts::k_ref;
use varchart::ProcessSpec;

pub struct Oracle {
    /// Normalized one-step residuals `L⁻¹ x`.
    resid: Vec<f64>,
    /// `p[i-1]`, `q[i-1]` for candidate `i`.
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    z: Vec<f64>,
    gamma0: f64,
}

fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                assert!(s > 0.0, "covariance not positive definite");
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    l
}

fn forward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>();
        y[i] = s / l[i][i];
    }
    y
}

impl Oracle {
    pub fn new(process: &ProcessSpec, xs: &[f64]) -> Self {
        let n = xs.len();
        let z: Vec<f64> = xs.iter().map(|x| x - process.mu).collect();
        let acov = process.autocovariances(n.max(1)).unwrap();
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| acov[i.abs_diff(j)]).collect())
            .collect();
        let l = cholesky(&cov);
        let resid = forward(&l, &z);
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for i in 0..n {
            let pre: Vec<f64> = (0..n).map(|t| if t < i { z[t] } else { 0.0 }).collect();
            let post: Vec<f64> = (0..n).map(|t| if t >= i { z[t] } else { 0.0 }).collect();
            p.push(forward(&l, &pre));
            q.push(forward(&l, &post));
        }
        Self {
            resid,
            p,
            q,
            z,
            gamma0: acov[0],
        }
    }

    pub fn len(&self) -> usize {
        self.resid.len()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.resid
    }

    /// Coefficients of `|p + u q|²` over the first `n` entries, `(a0, a1, a2)`
    /// with value `a0 + 2 a1 u + a2 u²`.
    fn quad(&self, n: usize, i: usize) -> (f64, f64, f64) {
        let (p, q) = (&self.p[i - 1], &self.q[i - 1]);
        let mut a = (0.0, 0.0, 0.0);
        for t in 0..n {
            a.0 += p[t] * p[t];
            a.1 += p[t] * q[t];
            a.2 += q[t] * q[t];
        }
        a
    }

    fn base(&self, n: usize) -> f64 {
        self.resid[..n].iter().map(|r| r * r).sum()
    }

    /// Log-likelihood ratio of a change at `i` by factor `delta`, given `X_1..X_n`.
    pub fn log_lr(&self, n: usize, i: usize, delta: f64) -> f64 {
        let (a0, a1, a2) = self.quad(n, i);
        let u = 1.0 / delta;
        let m = (n - i + 1) as f64;
        -m * delta.ln() - 0.5 * (a0 + 2.0 * a1 * u + a2 * u * u - self.base(n))
    }

    /// Maximum over `Δ >= 1` of the summed log-likelihood ratios of the given
    /// candidates. The sum is concave in `u = 1/Δ`; its stationary point solves
    /// `A2 u² + A1 u - M = 0`.
    fn max_over_delta(&self, n: usize, cands: &[usize]) -> f64 {
        let (mut big_a1, mut big_a2, mut big_m) = (0.0, 0.0, 0.0);
        for &i in cands {
            let (_, a1, a2) = self.quad(n, i);
            big_a1 += a1;
            big_a2 += a2;
            big_m += (n - i + 1) as f64;
        }
        let u = if big_a2 > 0.0 {
            (-big_a1 + (big_a1 * big_a1 + 4.0 * big_a2 * big_m).sqrt()) / (2.0 * big_a2)
        } else {
            1.0
        };
        let delta = 1.0 / u.min(1.0);
        if delta <= 1.0 {
            return 0.0;
        }
        cands.iter().map(|&i| self.log_lr(n, i, delta)).sum()
    }

    pub fn cusum_iid(&self, n: usize, delta_star: f64) -> f64 {
        let k = k_ref(delta_star).unwrap();
        (0..=n)
            .map(|i| self.z[i..n].iter().map(|z| z * z / self.gamma0 - k).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn lr(&self, n: usize, delta_star: f64) -> f64 {
        let scale = 2.0 / (1.0 - 1.0 / (delta_star * delta_star));
        (1..=n)
            .map(|i| scale * self.log_lr(n, i, delta_star))
            .fold(0.0, f64::max)
    }

    /// `max_{0<=i<=n} (S_n - S_i)` with `S` the partial sums of squared
    /// normalized residuals minus `K(Δ*)`.
    pub fn sprt(&self, n: usize, delta_star: f64) -> f64 {
        let k = k_ref(delta_star).unwrap();
        (0..=n)
            .map(|i| self.resid[i..n].iter().map(|r| r * r - k).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `R_n = Σ_i LR_i(Δ*)`, summed directly.
    pub fn sr(&self, n: usize, delta_star: f64) -> f64 {
        (1..=n).map(|i| self.log_lr(n, i, delta_star).exp()).sum()
    }

    pub fn glr(&self, n: usize, window: Option<usize>) -> f64 {
        let first = window.map_or(1, |w| n.saturating_sub(w) + 1).max(1);
        (first..=n)
            .map(|i| 2.0 * self.max_over_delta(n, &[i]))
            .fold(0.0, f64::max)
    }

    /// `max_i m (x - 1 - ln x)` with `x = max(1, T̃/m)` from raw sums.
    pub fn glr_iid(&self, n: usize) -> f64 {
        (1..=n)
            .map(|i| {
                let m = (n - i + 1) as f64;
                let x = (self.z[i - 1..n].iter().map(|z| z * z).sum::<f64>() / self.gamma0 / m).max(1.0);
                m * (x - 1.0 - x.ln())
            })
            .fold(0.0, f64::max)
    }

    pub fn gsprt(&self, n: usize) -> f64 {
        let h = |i: usize| {
            if i == 0 {
                return 0.0;
            }
            let x = self.resid[..i].iter().map(|r| r * r).sum::<f64>() / i as f64;
            if x > 1.0 {
                i as f64 * (x - 1.0 - x.ln()) / 2.0
            } else {
                0.0
            }
        };
        let min = (0..=n).map(h).fold(f64::INFINITY, f64::min);
        h(n) - min
    }

    /// Twice the largest (over `Δ >= 1`) sum of the log-likelihood ratios of
    /// all candidates.
    pub fn gsr(&self, n: usize) -> f64 {
        let cands: Vec<usize> = (1..=n).collect();
        2.0 * self.max_over_delta(n, &cands)
    }

    pub fn gsr_iid(&self, n: usize) -> f64 {
        let u: f64 = self.z[..n]
            .iter()
            .enumerate()
            .map(|(k, z)| (k + 1) as f64 * z * z / self.gamma0)
            .sum();
        let w = (n * (n + 1)) as f64;
        let x = (2.0 * u / w).max(1.0);
        w * (x - 1.0 - x.ln()) / 2.0
    }
}

/// Relative or absolute closeness, whichever is looser.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
