//! Control limits for a target in-control ARL.
//!
//! All evaluations use the replications `0..reps` of one seed, so the
//! estimated ARL is a non-decreasing step function of the limit. Instead of
//! re-simulating for every trial limit, each replication is simulated once up
//! to a ceiling and its running-maximum records above a floor are kept. For
//! any `c` between floor and ceiling the run length is the time of the first
//! record above `c`, which gives exactly what [`estimate_arl`] would return
//! for `c` with the same seed, reps and cap.
//!
//! A pilot on at most 1000 replications brackets the limit by doubling or
//! halving (steps of `ln 2` for the log-scale SR limits) and narrows it by
//! bisection. The full ensemble is then built on a band around the pilot
//! value and bisected to `rel_tol`.
//!
//! [`estimate_arl`]: crate::runlength::estimate_arl

use rayon::prelude::*;

use crate::charts::{Chart, ChartConfig};
use crate::error::{CalibrationError, Error, Result};
use crate::process::{ChangeSpec, PathGenerator, ProcessSpec};
use crate::runlength::{ArlEstimate, MonteCarlo, Tally, CENSORED_WARN_FRACTION};

const MAX_EXPANSIONS: usize = 60;
const MAX_BISECTIONS: usize = 60;
const PILOT_REPS: u64 = 1000;
const PILOT_REL_TOL: f64 = 0.02;
/// Half-width of the band around the pilot limit: a factor on linear limits,
/// an offset on log limits.
const BAND_FACTOR: f64 = 1.2;
const BAND_LOG_OFFSET: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationTarget {
    /// Target in-control ARL `ξ`.
    pub xi: f64,
    pub rel_tol: f64,
    pub reps: u64,
    pub seed: u64,
    pub cap: u64,
    pub workers: usize,
}

impl CalibrationTarget {
    /// Target `xi` with the default tolerance (0.5%) and cap (`100 ξ`).
    pub fn new(xi: f64, reps: u64, seed: u64) -> Self {
        Self {
            xi,
            rel_tol: 0.005,
            reps,
            seed,
            cap: default_cap(xi),
            workers: 0,
        }
    }

    pub fn monte_carlo(&self) -> MonteCarlo {
        MonteCarlo {
            reps: self.reps,
            seed: self.seed,
            cap: self.cap,
            workers: self.workers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi > 1.0) {
            return Err(Error::config("calibrate.target_arl", format!("must be > 1, got {}", self.xi)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 0.1) {
            return Err(Error::config(
                "calibrate.rel_tol",
                format!("must lie in (0, 0.1), got {}", self.rel_tol),
            ));
        }
        if (self.cap as f64) <= self.xi {
            return Err(Error::config(
                "sim.cap",
                format!("cap {} must exceed the target ARL {}", self.cap, self.xi),
            ));
        }
        self.monte_carlo().validate()
    }
}

/// `100 ξ`, rounded up.
pub fn default_cap(xi: f64) -> u64 {
    (100.0 * xi).ceil().max(1.0) as u64
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    /// Control limit (`log c` for the SR schemes).
    pub c: f64,
    pub achieved_arl: ArlEstimate,
    /// Bisection steps on the full ensemble.
    pub iterations: usize,
    /// Every `(limit, ARL)` evaluated, pilot included.
    pub history: Vec<(f64, f64)>,
}

/// Running-maximum records of one in-control run.
#[derive(Clone, Debug, Default)]
struct Records {
    values: Vec<f64>,
    times: Vec<u64>,
}

impl Records {
    fn run_length(&self, c: f64, cap: u64) -> (u64, bool) {
        let k = self.values.partition_point(|&v| v <= c);
        match self.times.get(k) {
            Some(&t) => (t, false),
            None => (cap, true),
        }
    }
}

/// Records of replications `0..reps`, valid for limits in `[floor, ceiling]`.
struct Ensemble {
    runs: Vec<Records>,
    floor: f64,
    ceiling: f64,
    cap: u64,
}

impl Ensemble {
    fn build(
        config: &ChartConfig,
        process: &ProcessSpec,
        mc: &MonteCarlo,
        floor: f64,
        ceiling: f64,
    ) -> Result<Self> {
        let runs = mc.install(|| {
            (0..mc.reps)
                .into_par_iter()
                .map(|rep| record_run(config, process, mc, rep, floor, ceiling))
                .collect::<Result<Vec<_>>>()
        })??;
        Ok(Self {
            runs,
            floor,
            ceiling,
            cap: mc.cap,
        })
    }

    fn covers(&self, c: f64) -> bool {
        self.floor <= c && c <= self.ceiling
    }

    fn arl(&self, c: f64) -> ArlEstimate {
        debug_assert!(self.covers(c));
        let mut tally = Tally::default();
        for r in &self.runs {
            let (n, censored) = r.run_length(c, self.cap);
            tally.add(n, censored);
        }
        let frac = tally.censored as f64 / tally.count.max(1) as f64;
        ArlEstimate {
            mean: tally.mean(),
            std_err: tally.std_err(),
            reps: tally.count,
            censored: tally.censored,
            warning: (frac > CENSORED_WARN_FRACTION).then(|| {
                format!(
                    "{} of {} runs censored at {}; the mean is a lower bound",
                    tally.censored, tally.count, self.cap
                )
            }),
        }
    }
}

fn record_run(
    config: &ChartConfig,
    process: &ProcessSpec,
    mc: &MonteCarlo,
    rep: u64,
    floor: f64,
    ceiling: f64,
) -> Result<Records> {
    let mut chart = Chart::new(config, process)?;
    let mut path = PathGenerator::from_seed(process, ChangeSpec::in_control(), mc.seed, rep)?;
    let mut rec = Records::default();
    let mut best = f64::NEG_INFINITY;
    for n in 1..=mc.cap {
        let s = chart.update(path.next_observation()?)?;
        if s > best {
            best = s;
            if s >= floor {
                rec.values.push(s);
                rec.times.push(n);
            }
            if s > ceiling {
                break;
            }
        }
    }
    Ok(rec)
}

/// Step rule for expanding a bracket.
#[derive(Clone, Copy)]
enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn up(self, c: f64) -> f64 {
        match self {
            Scale::Linear => 2.0 * c,
            Scale::Log => c + std::f64::consts::LN_2,
        }
    }

    fn down(self, c: f64) -> f64 {
        match self {
            Scale::Linear => c / 2.0,
            Scale::Log => c - std::f64::consts::LN_2,
        }
    }

    fn band(self, c: f64, widen: i32) -> (f64, f64) {
        match self {
            Scale::Linear => {
                let f = BAND_FACTOR.powi(widen);
                (c / f, c * f)
            }
            Scale::Log => {
                let d = BAND_LOG_OFFSET * widen as f64;
                (c - d, c + d)
            }
        }
    }
}

fn fail(message: impl Into<String>, history: &[(f64, f64)]) -> Error {
    Error::Calibration(CalibrationError {
        message: message.into(),
        history: history.to_vec(),
    })
}

/// Limits `(c_lo, c_hi)` with in-control ARL(c_lo) < ξ <= ARL(c_hi) on the
/// first `min(reps, 1000)` replications.
pub fn bracket_limit(
    config: &ChartConfig,
    process: &ProcessSpec,
    target: &CalibrationTarget,
) -> Result<(f64, f64)> {
    target.validate()?;
    let mut history = Vec::new();
    let (lo, hi, _) = pilot_bracket(config, process, target, &mut history)?;
    Ok((lo, hi))
}

fn initial_guess(config: &ChartConfig, xi: f64) -> f64 {
    if config.scheme.log_scale() {
        xi.ln()
    } else {
        1.0
    }
}

fn scale_of(config: &ChartConfig) -> Scale {
    if config.scheme.log_scale() {
        Scale::Log
    } else {
        Scale::Linear
    }
}

fn pilot_bracket(
    config: &ChartConfig,
    process: &ProcessSpec,
    target: &CalibrationTarget,
    history: &mut Vec<(f64, f64)>,
) -> Result<(f64, f64, Ensemble)> {
    let scale = scale_of(config);
    let mut mc = target.monte_carlo();
    mc.reps = mc.reps.min(PILOT_REPS);
    let mut c = initial_guess(config, target.xi);
    let mut ens = Ensemble::build(config, process, &mc, f64::NEG_INFINITY, c)?;
    let mut arl = ens.arl(c).mean;
    history.push((c, arl));
    if arl < target.xi {
        for _ in 0..MAX_EXPANSIONS {
            let lo = c;
            c = scale.up(c);
            ens = Ensemble::build(config, process, &mc, f64::NEG_INFINITY, c)?;
            arl = ens.arl(c).mean;
            history.push((c, arl));
            if arl >= target.xi {
                return Ok((lo, c, ens));
            }
        }
    } else {
        for _ in 0..MAX_EXPANSIONS {
            let hi = c;
            c = scale.down(c);
            if matches!(scale, Scale::Linear) && c < 1e-9 {
                // the statistics are non-negative: nothing below 0 to try
                c = 0.0;
                arl = ens.arl(c).mean;
                history.push((c, arl));
                if arl < target.xi {
                    return Ok((c, hi, ens));
                }
                break;
            }
            arl = ens.arl(c).mean;
            history.push((c, arl));
            if arl < target.xi {
                return Ok((c, hi, ens));
            }
        }
    }
    Err(fail(
        format!("no bracket for target ARL {} within {MAX_EXPANSIONS} expansions", target.xi),
        history,
    ))
}

/// Bisects on `ens` until the ARL is within `tol` of ξ. Returns the limit,
/// its estimate, the number of steps and whether the tolerance was met.
fn bisect(
    ens: &Ensemble,
    mut lo: f64,
    mut hi: f64,
    xi: f64,
    tol: f64,
    history: &mut Vec<(f64, f64)>,
) -> (f64, ArlEstimate, usize, bool) {
    let mut best = (hi, ens.arl(hi));
    for step in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return (best.0, best.1, step, false);
        }
        let est = ens.arl(mid);
        history.push((mid, est.mean));
        if (est.mean - xi).abs() < (best.1.mean - xi).abs() {
            best = (mid, est.clone());
        }
        if (est.mean - xi).abs() <= tol * xi {
            return (mid, est, step, true);
        }
        if est.mean < xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (best.0, best.1, MAX_BISECTIONS, false)
}

/// Limit whose in-control ARL on replications `0..reps` of `target.seed` is
/// within `rel_tol` of `ξ`.
pub fn calibrate_limit(
    config: &ChartConfig,
    process: &ProcessSpec,
    target: &CalibrationTarget,
) -> Result<CalibrationResult> {
    config.validate()?;
    process.validate()?;
    target.validate()?;
    Chart::new(config, process)?;
    let scale = scale_of(config);
    let xi = target.xi;
    let mut history = Vec::new();

    let (p_lo, p_hi, pilot) = pilot_bracket(config, process, target, &mut history)?;
    let full_is_pilot = target.reps <= PILOT_REPS;
    let pilot_tol = if full_is_pilot { target.rel_tol } else { PILOT_REL_TOL };
    let (c_pilot, pilot_est, pilot_steps, pilot_ok) =
        bisect(&pilot, p_lo, p_hi, xi, pilot_tol, &mut history);

    let (ens, lo, hi) = if full_is_pilot {
        if pilot_ok {
            return Ok(CalibrationResult {
                c: c_pilot,
                achieved_arl: pilot_est,
                iterations: pilot_steps,
                history,
            });
        }
        (pilot, p_lo, p_hi)
    } else {
        let mc = target.monte_carlo();
        let mut widen = 1;
        loop {
            let (lo, hi) = scale.band(c_pilot, widen);
            let lo = match scale {
                Scale::Linear => lo.max(0.0),
                Scale::Log => lo,
            };
            let ens = Ensemble::build(config, process, &mc, lo, hi)?;
            let (a_lo, a_hi) = (ens.arl(lo).mean, ens.arl(hi).mean);
            history.push((lo, a_lo));
            history.push((hi, a_hi));
            if a_lo < xi && xi <= a_hi {
                break (ens, lo, hi);
            }
            if a_lo >= xi && lo == 0.0 {
                // the smallest admissible limit already overshoots
                break (ens, lo, lo);
            }
            widen += 1;
            if widen as usize > MAX_EXPANSIONS {
                return Err(fail("full ensemble failed to bracket the target", &history));
            }
        }
    };

    let (c, est, steps, ok) = if lo == hi {
        let est = ens.arl(lo);
        (lo, est, 0, false)
    } else {
        bisect(&ens, lo, hi, xi, target.rel_tol, &mut history)
    };
    let within = ok || (est.mean - xi).abs() / xi <= target.rel_tol.max(3.0 * est.std_err / xi);
    if !within {
        return Err(fail(
            format!(
                "closest limit {c} gives ARL {:.4} (s.e. {:.4}) against target {xi}",
                est.mean, est.std_err
            ),
            &history,
        ));
    }
    Ok(CalibrationResult {
        c,
        achieved_arl: est,
        iterations: steps,
        history,
    })
}
