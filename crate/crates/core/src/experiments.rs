//! Comparison study over AR(1) coefficients, change sizes and reference values.
//!
//! Limits are calibrated once per (scheme, Δ*, process) and looked up through
//! a [`LimitCache`]; out-of-control ARLs for every Δ reuse them.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::calibrate::{calibrate_limit, default_cap, CalibrationTarget};
use crate::charts::{ChartConfig, Scheme};
use crate::error::{Error, Result};
use crate::process::{ChangeSpec, ProcessSpec};
use crate::runlength::{estimate_arl, worst_delay, ArlEstimate, MonteCarlo};

/// Relative distance to the column minimum within which a cell is marked.
pub const NEAR_BEST: f64 = 0.02;

pub fn default_phis() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

pub fn default_deltas() -> Vec<f64> {
    vec![1.1, 1.2, 1.3, 1.4, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0]
}

pub fn default_delta_stars() -> Vec<f64> {
    default_deltas()
}

/// Simulation settings for a study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudySettings {
    pub xi: f64,
    pub rel_tol: f64,
    pub reps: u64,
    /// Replications for the GLR chart, which costs more per step.
    pub glr_reps: u64,
    pub seed: u64,
    pub cap: u64,
    pub workers: usize,
    pub glr_window: Option<usize>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            xi: 500.0,
            rel_tol: 0.005,
            reps: 100_000,
            glr_reps: 10_000,
            seed: 1,
            cap: default_cap(500.0),
            workers: 0,
            glr_window: None,
        }
    }
}

impl StudySettings {
    pub fn reps_for(&self, scheme: Scheme) -> u64 {
        if scheme == Scheme::Glr {
            self.glr_reps
        } else {
            self.reps
        }
    }

    pub fn target_for(&self, scheme: Scheme) -> CalibrationTarget {
        CalibrationTarget {
            xi: self.xi,
            rel_tol: self.rel_tol,
            reps: self.reps_for(scheme),
            seed: self.seed,
            cap: self.cap,
            workers: self.workers,
        }
    }

    pub fn monte_carlo_for(&self, scheme: Scheme) -> MonteCarlo {
        self.target_for(scheme).monte_carlo()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub phis: Vec<f64>,
    pub deltas: Vec<f64>,
    pub delta_stars: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            phis: default_phis(),
            deltas: default_deltas(),
            delta_stars: default_delta_stars(),
            schemes: Scheme::ALL.to_vec(),
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("grid.phis", &self.phis),
            ("grid.deltas", &self.deltas),
            ("grid.delta_stars", &self.delta_stars),
        ] {
            if v.is_empty() {
                return Err(Error::config(name, "must not be empty"));
            }
        }
        if self.schemes.is_empty() {
            return Err(Error::config("grid.schemes", "must not be empty"));
        }
        if let Some(d) = self.delta_stars.iter().find(|&&d| !(d > 1.0 && d.is_finite())) {
            return Err(Error::config("grid.delta_stars", format!("{d} is not > 1")));
        }
        if let Some(d) = self.deltas.iter().find(|&&d| !(d >= 1.0 && d.is_finite())) {
            return Err(Error::config("grid.deltas", format!("{d} is not >= 1")));
        }
        for &phi in &self.phis {
            ProcessSpec::ar1(phi, 1.0).validate()?;
        }
        Ok(())
    }
}

/// Identity of a calibrated limit.
#[derive(Clone, Debug)]
pub struct LimitKey {
    pub scheme: Scheme,
    pub delta_star: Option<f64>,
    pub process: String,
    pub xi: f64,
    pub reps: u64,
    pub seed: u64,
    pub cap: u64,
    pub rel_tol: f64,
    pub glr_window: Option<usize>,
}

impl LimitKey {
    pub fn new(config: &ChartConfig, process: &ProcessSpec, target: &CalibrationTarget) -> Self {
        Self {
            scheme: config.scheme,
            delta_star: config.delta_star,
            process: process.fingerprint(),
            xi: target.xi,
            reps: target.reps,
            seed: target.seed,
            cap: target.cap,
            rel_tol: target.rel_tol,
            glr_window: config.glr_window,
        }
    }

    #[allow(clippy::type_complexity)]
    fn bits(&self) -> (Scheme, Option<u64>, &str, u64, u64, u64, u64, u64, Option<usize>) {
        (
            self.scheme,
            self.delta_star.map(f64::to_bits),
            &self.process,
            self.xi.to_bits(),
            self.reps,
            self.seed,
            self.cap,
            self.rel_tol.to_bits(),
            self.glr_window,
        )
    }
}

impl PartialEq for LimitKey {
    fn eq(&self, other: &Self) -> bool {
        self.bits() == other.bits()
    }
}

impl Eq for LimitKey {}

impl Hash for LimitKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.bits().hash(state);
    }
}

/// Store of calibrated limits.
pub trait LimitCache {
    fn get(&self, key: &LimitKey) -> Option<f64>;
    fn put(&mut self, key: LimitKey, limit: f64) -> Result<()>;
}

#[derive(Clone, Debug, Default)]
pub struct MemoryCache {
    limits: HashMap<LimitKey, f64>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.limits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.limits.is_empty()
    }
}

impl LimitCache for MemoryCache {
    fn get(&self, key: &LimitKey) -> Option<f64> {
        self.limits.get(key).copied()
    }

    fn put(&mut self, key: LimitKey, limit: f64) -> Result<()> {
        self.limits.insert(key, limit);
        Ok(())
    }
}

/// Cached limit for `config`, calibrating on a miss.
pub fn resolve_limit(
    config: &ChartConfig,
    process: &ProcessSpec,
    target: &CalibrationTarget,
    cache: &mut dyn LimitCache,
) -> Result<f64> {
    let key = LimitKey::new(config, process, target);
    if let Some(c) = cache.get(&key) {
        return Ok(c);
    }
    let res = calibrate_limit(config, process, target)?;
    cache.put(key, res.c)?;
    Ok(res.c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableCell {
    pub scheme: Scheme,
    pub phi: f64,
    pub delta: f64,
    pub best_delta_star: Option<f64>,
    pub arl: f64,
    pub std_err: f64,
    pub within_2pct_of_best: bool,
}

fn config_for(scheme: Scheme, delta_star: Option<f64>, settings: &StudySettings) -> Result<ChartConfig> {
    Ok(ChartConfig::new(scheme, delta_star)?.with_glr_window(if scheme == Scheme::Glr {
        settings.glr_window
    } else {
        None
    }))
}

/// Out-of-control ARL at each Δ for one (scheme, Δ*, φ).
fn arls_for(
    scheme: Scheme,
    delta_star: Option<f64>,
    process: &ProcessSpec,
    deltas: &[f64],
    settings: &StudySettings,
    cache: &mut dyn LimitCache,
) -> Result<Vec<ArlEstimate>> {
    let cfg = config_for(scheme, delta_star, settings)?;
    let target = settings.target_for(scheme);
    let c = resolve_limit(&cfg, process, &target, cache)?;
    let cfg = cfg.with_limit(c);
    let mc = settings.monte_carlo_for(scheme);
    deltas
        .iter()
        .map(|&d| {
            let change = if d == 1.0 {
                ChangeSpec::in_control()
            } else {
                ChangeSpec::immediate(d)
            };
            estimate_arl(&cfg, process, change, &mc)
        })
        .collect()
}

/// Best ARL over the Δ* grid (or the single ARL of a generalized scheme)
/// for every Δ.
fn best_over_reference(
    scheme: Scheme,
    process: &ProcessSpec,
    deltas: &[f64],
    delta_stars: &[f64],
    settings: &StudySettings,
    cache: &mut dyn LimitCache,
) -> Result<Vec<(Option<f64>, ArlEstimate)>> {
    if !scheme.needs_reference() {
        return Ok(arls_for(scheme, None, process, deltas, settings, cache)?
            .into_iter()
            .map(|a| (None, a))
            .collect());
    }
    let mut best: Vec<Option<(Option<f64>, ArlEstimate)>> = vec![None; deltas.len()];
    for &ds in delta_stars {
        let row = arls_for(scheme, Some(ds), process, deltas, settings, cache)?;
        for (slot, est) in best.iter_mut().zip(row) {
            if slot.as_ref().is_none_or(|(_, b)| est.mean < b.mean) {
                *slot = Some((Some(ds), est));
            }
        }
    }
    Ok(best.into_iter().flatten().collect())
}

/// One cell per (scheme, φ, Δ), reference schemes minimized over Δ*.
pub fn run_arl_table(
    grid: &ExperimentGrid,
    settings: &StudySettings,
    cache: &mut dyn LimitCache,
) -> Result<Vec<TableCell>> {
    grid.validate()?;
    let mut cells = Vec::new();
    for &phi in &grid.phis {
        let process = ProcessSpec::ar1(phi, 1.0);
        for &scheme in &grid.schemes {
            let best = best_over_reference(
                scheme,
                &process,
                &grid.deltas,
                &grid.delta_stars,
                settings,
                cache,
            )?;
            for (&delta, (ds, est)) in grid.deltas.iter().zip(best) {
                cells.push(TableCell {
                    scheme,
                    phi,
                    delta,
                    best_delta_star: ds,
                    arl: est.mean,
                    std_err: est.std_err,
                    within_2pct_of_best: false,
                });
            }
        }
    }
    mark_near_best(&mut cells);
    Ok(cells)
}

/// Sets `within_2pct_of_best` for cells with `arl <= 1.02 · min` of their
/// (φ, Δ) column.
pub fn mark_near_best(cells: &mut [TableCell]) {
    let mut minima: HashMap<(u64, u64), f64> = HashMap::new();
    for c in cells.iter() {
        let m = minima
            .entry((c.phi.to_bits(), c.delta.to_bits()))
            .or_insert(f64::INFINITY);
        *m = m.min(c.arl);
    }
    for c in cells.iter_mut() {
        let m = minima[&(c.phi.to_bits(), c.delta.to_bits())];
        c.within_2pct_of_best = c.arl <= (1.0 + NEAR_BEST) * m;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub scheme: Scheme,
    /// `None` for the Δ*-free level of a generalized scheme.
    pub delta_star: Option<f64>,
    pub arl: f64,
    pub std_err: f64,
}

/// ARL as a function of Δ* for the reference schemes, plus one level per
/// generalized scheme.
pub fn run_sensitivity(
    schemes: &[Scheme],
    phi: f64,
    delta: f64,
    delta_stars: &[f64],
    settings: &StudySettings,
    cache: &mut dyn LimitCache,
) -> Result<Vec<CurvePoint>> {
    let grid = ExperimentGrid {
        phis: vec![phi],
        deltas: vec![delta],
        delta_stars: delta_stars.to_vec(),
        schemes: schemes.to_vec(),
    };
    grid.validate()?;
    let process = ProcessSpec::ar1(phi, 1.0);
    let mut out = Vec::new();
    for &scheme in schemes {
        let stars: Vec<Option<f64>> = if scheme.needs_reference() {
            delta_stars.iter().map(|&d| Some(d)).collect()
        } else {
            vec![None]
        };
        for ds in stars {
            let est = arls_for(scheme, ds, &process, &[delta], settings, cache)?.remove(0);
            out.push(CurvePoint {
                scheme,
                delta_star: ds,
                arl: est.mean,
                std_err: est.std_err,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayRow {
    pub scheme: Scheme,
    pub phi: f64,
    pub delta: f64,
    pub delta_star: Option<f64>,
    pub arl: f64,
    pub arl_se: f64,
    pub worst_tau: u64,
    pub worst_delay: f64,
    pub worst_se: f64,
    pub delay_at_tau_max: f64,
    pub delay_at_tau_max_se: f64,
}

/// ARL, worst delay over `τ ≤ tau_max` and delay at `tau_max` per
/// (scheme, Δ). Reference schemes use the Δ* with the smallest ARL.
pub fn run_delay_table(
    schemes: &[Scheme],
    phi: f64,
    deltas: &[f64],
    delta_stars: &[f64],
    tau_max: u64,
    settings: &StudySettings,
    cache: &mut dyn LimitCache,
) -> Result<Vec<DelayRow>> {
    let grid = ExperimentGrid {
        phis: vec![phi],
        deltas: deltas.to_vec(),
        delta_stars: delta_stars.to_vec(),
        schemes: schemes.to_vec(),
    };
    grid.validate()?;
    if tau_max == 0 {
        return Err(Error::config("delay.tau_max", "must be >= 1"));
    }
    let process = ProcessSpec::ar1(phi, 1.0);
    let mut rows = Vec::new();
    for &scheme in schemes {
        let best = best_over_reference(scheme, &process, deltas, delta_stars, settings, cache)?;
        for (&delta, (ds, _)) in deltas.iter().zip(best) {
            let cfg = config_for(scheme, ds, settings)?;
            let target = settings.target_for(scheme);
            let c = resolve_limit(&cfg, &process, &target, cache)?;
            let w = worst_delay(
                &cfg.with_limit(c),
                &process,
                delta,
                tau_max,
                &settings.monte_carlo_for(scheme),
            )?;
            let first = &w.profile[0];
            let last = &w.profile[w.profile.len() - 1];
            rows.push(DelayRow {
                scheme,
                phi,
                delta,
                delta_star: ds,
                arl: first.mean_delay,
                arl_se: first.std_err,
                worst_tau: w.tau,
                worst_delay: w.estimate.mean_delay,
                worst_se: w.estimate.std_err,
                delay_at_tau_max: last.mean_delay,
                delay_at_tau_max_se: last.std_err,
            });
        }
    }
    Ok(rows)
}
