//! Control charts for an increase in scale.
//!
//! Every chart consumes one raw observation at a time and returns its current
//! statistic. The alarm decision (`statistic > c`) lives in `runlength`.
//! The SR charts report `log R_n`, so their limits are on the log scale.

mod candidates;
mod cusum;
mod glr;
mod gsprt;
mod gsr;
mod lr;
mod sr;

use std::fmt;
use std::str::FromStr;

pub use candidates::{CandidateFeed, Correction, FeedStep};
pub use cusum::{CusumIid, ResidualCusum};
pub use glr::Glr;
pub use gsprt::Gsprt;
pub use gsr::{gsr_delta_tilde, gsr_objective, Gsr, GsrIid, GSR_DDOT_WEIGHT};
pub use lr::Lr;
pub use sr::{Sr, SrIid};

use crate::error::{Error, Result};
use crate::process::ProcessSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    CusumIid,
    Lr,
    Sprt,
    SrIid,
    Sr,
    Glr,
    Gsprt,
    GsrIid,
    Gsr,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::CusumIid,
        Scheme::Lr,
        Scheme::Sprt,
        Scheme::SrIid,
        Scheme::Sr,
        Scheme::Glr,
        Scheme::Gsprt,
        Scheme::GsrIid,
        Scheme::Gsr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::CusumIid => "cusum_iid",
            Scheme::Lr => "lr",
            Scheme::Sprt => "sprt",
            Scheme::SrIid => "sr_iid",
            Scheme::Sr => "sr",
            Scheme::Glr => "glr",
            Scheme::Gsprt => "gsprt",
            Scheme::GsrIid => "gsr_iid",
            Scheme::Gsr => "gsr",
        }
    }

    /// Whether the scheme is built around a fixed reference value `Δ*`.
    pub fn needs_reference(self) -> bool {
        matches!(
            self,
            Scheme::CusumIid | Scheme::Lr | Scheme::Sprt | Scheme::SrIid | Scheme::Sr
        )
    }

    /// Whether the statistic (and so the limit) is a logarithm.
    pub fn log_scale(self) -> bool {
        matches!(self, Scheme::SrIid | Scheme::Sr)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "chart.scheme",
                    format!(
                        "unknown scheme {s:?}; expected one of {}",
                        Scheme::ALL.map(Scheme::name).join(", ")
                    ),
                )
            })
    }
}

/// Scheme, reference value and (once calibrated) control limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartConfig {
    pub scheme: Scheme,
    pub delta_star: Option<f64>,
    /// `log c` for the SR schemes.
    pub limit: Option<f64>,
    /// Maximum number of change-point candidates the GLR chart maximizes over.
    pub glr_window: Option<usize>,
}

impl ChartConfig {
    pub fn new(scheme: Scheme, delta_star: Option<f64>) -> Result<Self> {
        let cfg = Self {
            scheme,
            delta_star,
            limit: None,
            glr_window: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config for a reference-value scheme.
    pub fn reference(scheme: Scheme, delta_star: f64) -> Result<Self> {
        Self::new(scheme, Some(delta_star))
    }

    /// Config for a generalized scheme.
    pub fn generalized(scheme: Scheme) -> Result<Self> {
        Self::new(scheme, None)
    }

    pub fn with_limit(mut self, limit: f64) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn with_glr_window(mut self, window: Option<usize>) -> Self {
        self.glr_window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.scheme.needs_reference(), self.delta_star) {
            (true, None) => {
                return Err(Error::config(
                    "chart.delta_star",
                    format!("scheme {} requires a reference value", self.scheme),
                ))
            }
            (true, Some(d)) if !(d.is_finite() && d > 1.0) => {
                return Err(Error::config(
                    "chart.delta_star",
                    format!("must be finite and > 1, got {d}"),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::config(
                    "chart.delta_star",
                    format!("scheme {} takes no reference value", self.scheme),
                ))
            }
            _ => {}
        }
        if let Some(c) = self.limit {
            let ok = if self.scheme.log_scale() {
                c.is_finite()
            } else {
                c.is_finite() && c >= 0.0
            };
            if !ok {
                return Err(Error::config("chart.limit", format!("invalid limit {c}")));
            }
        }
        if self.glr_window == Some(0) {
            return Err(Error::config("chart.glr_window", "must be >= 1"));
        }
        Ok(())
    }

    fn reference_value(&self) -> Result<f64> {
        self.validate()?;
        self.delta_star.ok_or_else(|| {
            Error::config("chart.delta_star", "missing reference value")
        })
    }
}

/// A running chart: one state per scheme.
#[derive(Clone, Debug)]
pub enum Chart {
    CusumIid(CusumIid),
    Lr(Lr),
    Sprt(ResidualCusum),
    SrIid(SrIid),
    Sr(Sr),
    Glr(Glr),
    Gsprt(Gsprt),
    GsrIid(GsrIid),
    Gsr(Gsr),
}

impl Chart {
    /// Chart for `config` on `process`, using closed-form recursions where the
    /// process kind allows.
    pub fn new(config: &ChartConfig, process: &ProcessSpec) -> Result<Self> {
        Self::build(config, process, false)
    }

    /// Like [`Chart::new`] but with the general candidate-sum engine for the
    /// SR and GSR charts even when a closed form exists.
    pub fn new_generic(config: &ChartConfig, process: &ProcessSpec) -> Result<Self> {
        Self::build(config, process, true)
    }

    fn build(config: &ChartConfig, process: &ProcessSpec, generic: bool) -> Result<Self> {
        config.validate()?;
        process.validate()?;
        Ok(match config.scheme {
            Scheme::CusumIid => Chart::CusumIid(CusumIid::new(process, config.reference_value()?)?),
            Scheme::Lr => Chart::Lr(Lr::new(process, config.reference_value()?)?),
            Scheme::Sprt => Chart::Sprt(ResidualCusum::new(process, config.reference_value()?)?),
            Scheme::SrIid => Chart::SrIid(SrIid::new(process, config.reference_value()?)?),
            Scheme::Sr => Chart::Sr(Sr::new(process, config.reference_value()?, generic)?),
            Scheme::Glr => Chart::Glr(Glr::new(process, config.glr_window)?),
            Scheme::Gsprt => Chart::Gsprt(Gsprt::new(process)?),
            Scheme::GsrIid => Chart::GsrIid(GsrIid::new(process)?),
            Scheme::Gsr => Chart::Gsr(Gsr::new(process, generic)?),
        })
    }

    /// Feeds one observation and returns the updated statistic.
    #[inline]
    pub fn update(&mut self, x: f64) -> Result<f64> {
        match self {
            Chart::CusumIid(c) => Ok(c.update(x)),
            Chart::Lr(c) => c.update(x),
            Chart::Sprt(c) => c.update(x),
            Chart::SrIid(c) => Ok(c.update(x)),
            Chart::Sr(c) => c.update(x),
            Chart::Glr(c) => c.update(x),
            Chart::Gsprt(c) => c.update(x),
            Chart::GsrIid(c) => Ok(c.update(x)),
            Chart::Gsr(c) => c.update(x),
        }
    }

    /// Statistic values after each observation of `xs`.
    pub fn run(&mut self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.update(x)).collect()
    }
}

/// `K(Δ) = ln Δ² / (1 - 1/Δ²)`, the per-observation reference of the
/// CUSUM-type charts. Tends to 1 as `Δ → 1⁺`.
pub fn k_ref(delta: f64) -> Result<f64> {
    if !(delta > 1.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("reference value must be > 1, got {delta}")));
    }
    let d2 = delta * delta;
    let s = 1.0 - 1.0 / d2;
    if s < 1e-6 {
        // series in y = 1 - 1/Δ²: -ln(1 - y)/y = 1 + y/2 + y²/3 + ...
        return Ok(1.0 + s / 2.0 + s * s / 3.0 + s * s * s / 4.0);
    }
    Ok(d2.ln() / s)
}

/// `n (x - 1 - ln x) / 2` for `x >= 1`, zero below.
pub fn h_clamped(n_weight: u64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("h(x) needs x >= 0, got {x}")));
    }
    Ok(h_clamped_unchecked(n_weight as f64, x))
}

#[inline]
pub(crate) fn h_clamped_unchecked(weight: f64, x: f64) -> f64 {
    if x > 1.0 {
        weight * (x - 1.0 - x.ln()) / 2.0
    } else {
        0.0
    }
}

/// Maximizer over `Δ >= 1` of `-m ln Δ - ½(1/Δ - 1)(2Ṡ + (1/Δ - 1)S̈)`.
///
/// The unconstrained stationary point is the positive root of
/// `mΔ² - (Ṡ - S̈)Δ - S̈ = 0`.
pub fn glr_delta_star(s_dot: f64, s_ddot: f64, m: u64) -> f64 {
    glr_root(s_dot, s_ddot, m as f64).max(1.0)
}

#[inline]
pub(crate) fn glr_root(s_dot: f64, s_ddot: f64, m: f64) -> f64 {
    let d = s_dot - s_ddot;
    let disc = (d * d + 4.0 * m * s_ddot).max(0.0).sqrt();
    if d >= 0.0 {
        (d + disc) / (2.0 * m)
    } else {
        // cancellation-free form of the same root
        2.0 * s_ddot / (disc - d)
    }
}

/// The GLR objective above at a given `Δ`.
#[inline]
pub fn glr_objective(s_dot: f64, s_ddot: f64, m: f64, delta: f64) -> f64 {
    let w = 1.0 / delta - 1.0;
    -m * delta.ln() - 0.5 * w * (2.0 * s_dot + w * s_ddot)
}

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub(crate) fn require_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("{what} is {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ref_examples() {
        assert!((k_ref(1.5).unwrap() - 1.459674).abs() < 5e-7);
        // ln(1.21)/(1 - 1/1.21) = 1.0983364; the commonly quoted 1.098342
        // agrees to five significant digits
        assert!((k_ref(1.1).unwrap() - 1.0983364).abs() < 5e-8);
        assert!((k_ref(1.1).unwrap() - 1.098342).abs() < 1e-5);
        assert!((k_ref(1.0 + 1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(matches!(k_ref(1.0), Err(Error::Domain(_))));
        assert!(k_ref(0.5).is_err());
        let mut prev = 1.0;
        for i in 1..200 {
            let k = k_ref(1.0 + i as f64 * 0.01).unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn h_clamped_examples() {
        assert_eq!(h_clamped(3, 1.0).unwrap(), 0.0);
        assert!((h_clamped(2, 4.0).unwrap() - 1.613706).abs() < 5e-7);
        assert_eq!(h_clamped(5, 0.5).unwrap(), 0.0);
        assert!(h_clamped(1, -0.1).is_err());
    }

    #[test]
    fn glr_delta_star_examples() {
        assert!((glr_delta_star(3.0, 3.0, 3) - 1.0).abs() < 1e-15);
        assert!((glr_delta_star(4.0, 4.0, 1) - 2.0).abs() < 1e-15);
        assert_eq!(glr_delta_star(0.25, 0.25, 1), 1.0);
        assert!((glr_root(0.25, 0.25, 1.0) - 0.5).abs() < 1e-15);
        // both branches of the root formula agree
        let (sd, sdd, m) = (2.0, 5.0, 2.0);
        let d: f64 = sd - sdd;
        let naive = (d + (d * d + 4.0 * m * sdd).sqrt()) / (2.0 * m);
        assert!((glr_root(sd, sdd, m) - naive).abs() < 1e-14);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("cusum".parse::<Scheme>().is_err());
    }

    #[test]
    fn config_reference_rules() {
        assert!(ChartConfig::new(Scheme::Lr, None).is_err());
        assert!(ChartConfig::new(Scheme::Gsr, Some(1.5)).is_err());
        assert!(ChartConfig::new(Scheme::Sprt, Some(1.0)).is_err());
        assert!(ChartConfig::new(Scheme::Sprt, Some(1.5)).is_ok());
        assert!(ChartConfig::generalized(Scheme::Glr).is_ok());
    }

    #[test]
    fn log_add_exp_is_stable() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
