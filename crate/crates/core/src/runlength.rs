//! Run lengths, ARL and conditional average delay by Monte Carlo.
//!
//! Replication `r` draws from substream `(seed, r)`, so every estimate is a
//! function of `(seed, reps)` alone. Run lengths are integers and are summed
//! exactly, which makes the reduction independent of worker count and
//! scheduling.

use rayon::prelude::*;

use crate::charts::{Chart, ChartConfig};
use crate::error::{Error, Result};
use crate::process::{ChangeSpec, PathGenerator, ProcessSpec};

/// Share of censored runs above which an estimate carries a warning.
pub const CENSORED_WARN_FRACTION: f64 = 0.01;

/// Replication settings shared by all estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarlo {
    pub reps: u64,
    pub seed: u64,
    /// Runs that have not alarmed after `cap` observations are censored.
    pub cap: u64,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(reps: u64, seed: u64, cap: u64) -> Self {
        Self {
            reps,
            seed,
            cap,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("sim.reps", "must be >= 1"));
        }
        if self.cap == 0 {
            return Err(Error::config("sim.cap", "must be >= 1"));
        }
        Ok(())
    }

    /// Runs `op` on the configured pool.
    pub(crate) fn install<T: Send>(&self, op: impl FnOnce() -> T + Send) -> Result<T> {
        if self.workers == 0 {
            return Ok(op());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::config("sim.workers", e.to_string()))?;
        Ok(pool.install(op))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunLength {
    Alarm(u64),
    Censored(u64),
}

impl RunLength {
    /// The run length, with censored runs counted at the cap.
    pub fn value(self) -> u64 {
        match self {
            RunLength::Alarm(n) | RunLength::Censored(n) => n,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, RunLength::Censored(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArlEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub reps: u64,
    pub censored: u64,
    /// Set when more than 1% of the runs were censored; the mean is then a
    /// lower bound.
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayEstimate {
    pub tau: u64,
    pub mean_delay: f64,
    pub std_err: f64,
    /// Runs still quiet before `tau`.
    pub accepted: u64,
    /// Runs that alarmed before `tau`.
    pub rejected: u64,
    pub censored: u64,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstDelay {
    pub tau: u64,
    pub estimate: DelayEstimate,
    /// Estimates for `tau = 1..=tau_max`.
    pub profile: Vec<DelayEstimate>,
}

pub(crate) fn limit_of(config: &ChartConfig) -> Result<f64> {
    config.validate()?;
    config.limit.ok_or_else(|| {
        Error::config(
            "chart.limit",
            format!("scheme {} has no control limit; calibrate first", config.scheme),
        )
    })
}

/// Runs `chart` on `path` until the statistic first exceeds `limit`.
pub(crate) fn run_to_alarm(
    chart: &mut Chart,
    path: &mut PathGenerator,
    limit: f64,
    cap: u64,
) -> Result<RunLength> {
    for n in 1..=cap {
        let x = path.next_observation()?;
        if chart.update(x)? > limit {
            return Ok(RunLength::Alarm(n));
        }
    }
    Ok(RunLength::Censored(cap))
}

/// Run length of replication `rep` under `change`.
pub fn first_passage(
    config: &ChartConfig,
    process: &ProcessSpec,
    change: ChangeSpec,
    seed: u64,
    rep: u64,
    cap: u64,
) -> Result<RunLength> {
    let limit = limit_of(config)?;
    let mut chart = Chart::new(config, process)?;
    let mut path = PathGenerator::from_seed(process, change, seed, rep)?;
    run_to_alarm(&mut chart, &mut path, limit, cap)
}

/// Run length on a given sequence of observations. A path that ends without
/// an alarm counts as censored at `min(len, cap)`.
pub fn first_passage_on_path(
    config: &ChartConfig,
    process: &ProcessSpec,
    path: &[f64],
    cap: u64,
) -> Result<RunLength> {
    let limit = limit_of(config)?;
    let mut chart = Chart::new(config, process)?;
    for (i, &x) in path.iter().take(cap as usize).enumerate() {
        if chart.update(x)? > limit {
            return Ok(RunLength::Alarm(i as u64 + 1));
        }
    }
    Ok(RunLength::Censored(path.len().min(cap as usize) as u64))
}

/// Exact sums over replications.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Tally {
    pub count: u64,
    pub sum: u128,
    pub sum_sq: u128,
    pub censored: u64,
}

impl Tally {
    pub fn add(&mut self, value: u64, censored: bool) {
        self.count += 1;
        self.sum += value as u128;
        self.sum_sq += (value as u128) * (value as u128);
        self.censored += censored as u64;
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.censored += other.censored;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.count as f64
    }

    /// Standard error of the mean from the sample standard deviation.
    pub fn std_err(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as u128;
        // n Σx² - (Σx)² is exact in integers
        let num = n * self.sum_sq - self.sum * self.sum;
        let var = num as f64 / (n as f64 * (n - 1) as f64);
        (var / self.count as f64).sqrt()
    }

    fn warning(&self, cap: u64) -> Option<String> {
        let frac = self.censored as f64 / self.count.max(1) as f64;
        (frac > CENSORED_WARN_FRACTION).then(|| {
            format!(
                "{} of {} runs censored at {cap}; the mean is a lower bound",
                self.censored, self.count
            )
        })
    }
}

pub(crate) fn tally_reps<F>(mc: &MonteCarlo, run: F) -> Result<Tally>
where
    F: Fn(u64) -> Result<RunLength> + Sync,
{
    mc.install(|| {
        (0..mc.reps)
            .into_par_iter()
            .try_fold(Tally::default, |mut t, rep| {
                let r = run(rep)?;
                t.add(r.value(), r.is_censored());
                Ok::<_, Error>(t)
            })
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    })?
}

/// Average run length under `change` (`ChangeSpec::in_control()` for the
/// in-control ARL, `ChangeSpec::immediate(Δ)` for the out-of-control ARL).
pub fn estimate_arl(
    config: &ChartConfig,
    process: &ProcessSpec,
    change: ChangeSpec,
    mc: &MonteCarlo,
) -> Result<ArlEstimate> {
    mc.validate()?;
    change.validate()?;
    let limit = limit_of(config)?;
    // fail on bad configs before spawning work
    Chart::new(config, process)?;
    let tally = tally_reps(mc, |rep| {
        let mut chart = Chart::new(config, process)?;
        let mut path = PathGenerator::from_seed(process, change, mc.seed, rep)?;
        run_to_alarm(&mut chart, &mut path, limit, mc.cap)
    })?;
    Ok(ArlEstimate {
        mean: tally.mean(),
        std_err: tally.std_err(),
        reps: tally.count,
        censored: tally.censored,
        warning: tally.warning(mc.cap),
    })
}

fn check_tau(tau: u64, cap: u64) -> Result<()> {
    if tau == 0 {
        return Err(Error::config("change.tau", "must be >= 1"));
    }
    if tau > cap {
        return Err(Error::config(
            "change.tau",
            format!("change point {tau} lies beyond the run-length cap {cap}"),
        ));
    }
    Ok(())
}

/// Per-replication delay outcome.
#[derive(Clone, Copy, Debug)]
enum DelayOutcome {
    Early,
    Delay(RunLength),
}

fn delay_estimate(tau: u64, tally: Tally, rejected: u64, cap: u64) -> Result<DelayEstimate> {
    if tally.count == 0 {
        return Err(Error::Estimation(format!(
            "every run alarmed before the change point {tau}"
        )));
    }
    Ok(DelayEstimate {
        tau,
        mean_delay: tally.mean(),
        std_err: tally.std_err(),
        accepted: tally.count,
        rejected,
        censored: tally.censored,
        warning: tally.warning(cap),
    })
}

/// `E(N - τ + 1 | N >= τ)` with a change of size `delta` at `tau`. Runs
/// that alarm before `tau` are discarded; `mc.reps` counts attempted runs.
pub fn estimate_delay(
    config: &ChartConfig,
    process: &ProcessSpec,
    delta: f64,
    tau: u64,
    mc: &MonteCarlo,
) -> Result<DelayEstimate> {
    mc.validate()?;
    check_tau(tau, mc.cap)?;
    let change = ChangeSpec::at(tau, delta);
    change.validate()?;
    let limit = limit_of(config)?;
    Chart::new(config, process)?;
    let (tally, rejected) = mc.install(|| {
        (0..mc.reps)
            .into_par_iter()
            .try_fold(
                || (Tally::default(), 0u64),
                |(mut t, mut rej), rep| {
                    let mut chart = Chart::new(config, process)?;
                    let mut path = PathGenerator::from_seed(process, change, mc.seed, rep)?;
                    match run_to_alarm(&mut chart, &mut path, limit, mc.cap)? {
                        RunLength::Alarm(n) if n < tau => rej += 1,
                        r => t.add(r.value() - tau + 1, r.is_censored()),
                    }
                    Ok::<_, Error>((t, rej))
                },
            )
            .try_reduce(
                || (Tally::default(), 0),
                |a, b| Ok((a.0.merge(b.0), a.1 + b.1)),
            )
    })??;
    delay_estimate(tau, tally, rejected, mc.cap)
}

/// Delay profile over `τ = 1..=tau_max` and its maximum.
///
/// Each replication runs its in-control path once and branches off a copy of
/// the chart and generator at every `τ`, so the result for each `τ` equals
/// [`estimate_delay`] with the same settings.
pub fn worst_delay(
    config: &ChartConfig,
    process: &ProcessSpec,
    delta: f64,
    tau_max: u64,
    mc: &MonteCarlo,
) -> Result<WorstDelay> {
    mc.validate()?;
    check_tau(tau_max, mc.cap)?;
    ChangeSpec::at(tau_max, delta).validate()?;
    let limit = limit_of(config)?;
    Chart::new(config, process)?;
    let width = tau_max as usize;
    let empty = || (vec![Tally::default(); width], vec![0u64; width]);
    let (tallies, rejected) = mc.install(|| {
        (0..mc.reps)
            .into_par_iter()
            .try_fold(empty, |(mut tallies, mut rejected), rep| {
                let outcomes = branch_delays(config, process, delta, tau_max, limit, mc, rep)?;
                for (k, o) in outcomes.into_iter().enumerate() {
                    match o {
                        DelayOutcome::Early => rejected[k] += 1,
                        DelayOutcome::Delay(r) => tallies[k].add(r.value(), r.is_censored()),
                    }
                }
                Ok::<_, Error>((tallies, rejected))
            })
            .try_reduce(empty, |mut a, b| {
                for k in 0..width {
                    a.0[k] = a.0[k].merge(b.0[k]);
                    a.1[k] += b.1[k];
                }
                Ok(a)
            })
    })??;
    let profile = tallies
        .into_iter()
        .zip(rejected)
        .enumerate()
        .map(|(k, (t, r))| delay_estimate(k as u64 + 1, t, r, mc.cap))
        .collect::<Result<Vec<_>>>()?;
    let estimate = profile
        .iter()
        .max_by(|a, b| a.mean_delay.total_cmp(&b.mean_delay))
        .cloned()
        .ok_or_else(|| Error::Estimation("empty delay profile".into()))?;
    Ok(WorstDelay {
        tau: estimate.tau,
        estimate,
        profile,
    })
}

fn branch_delays(
    config: &ChartConfig,
    process: &ProcessSpec,
    delta: f64,
    tau_max: u64,
    limit: f64,
    mc: &MonteCarlo,
    rep: u64,
) -> Result<Vec<DelayOutcome>> {
    let mut out = Vec::with_capacity(tau_max as usize);
    let mut chart = Chart::new(config, process)?;
    let mut path = PathGenerator::from_seed(process, ChangeSpec::in_control(), mc.seed, rep)?;
    for tau in 1..=tau_max {
        // state holds observations 1..tau-1, none of which alarmed
        let mut c = chart.clone();
        let mut p = path.clone();
        p.set_change(ChangeSpec::at(tau, delta))?;
        let r = run_to_alarm(&mut c, &mut p, limit, mc.cap - (tau - 1))?;
        out.push(DelayOutcome::Delay(r));
        if tau == tau_max {
            break;
        }
        let x = path.next_observation()?;
        if chart.update(x)? > limit {
            out.resize(tau_max as usize, DelayOutcome::Early);
            break;
        }
    }
    Ok(out)
}
