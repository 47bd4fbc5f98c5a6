//! Run configuration: an optional TOML file overridden by command-line flags.
//!
//! Keys may be written as sections (`[process]` then `phi = 0.4`) or as dotted
//! keys (`process.phi = 0.4`). Every field is optional; defaults are filled in
//! by [`resolve`], which also checks all invariants before any work starts.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use varchart::calibrate::default_cap;
use varchart::experiments::{default_delta_stars, default_deltas, default_phis, ExperimentGrid, StudySettings};
use varchart::{ChangeSpec, ChartConfig, ProcessSpec, Scheme};

use crate::error::{CliError, Result};

pub const RESULTS_DIR_ENV: &str = "VARCHART_RESULTS_DIR";

/// A scalar or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reals {
    One(f64),
    Many(Vec<f64>),
}

impl Reals {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Reals::One(x) => vec![x],
            Reals::Many(v) => v,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Reals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Reals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glr_window: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glr_reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seed of the estimation runs; the calibration seed is `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_arl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_stars: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub process: ProcessSection,
    #[serde(default)]
    pub change: ChangeSection,
    #[serde(default)]
    pub chart: ChartSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputSection,
}

fn is_default(o: &OutputSection) -> bool {
    *o == OutputSection::default()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::field("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::field("config", e.message().to_string()))
    }
}

/// Flags shared by every subcommand. Each one overrides the file value of the
/// same name.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Process kind: ar1, ar2 or arma.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// AR coefficients, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    /// MA coefficients, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,

    /// Change point; defaults to 1 for `arl` and is required by `delay`.
    #[arg(long, global = true)]
    pub tau: Option<u64>,
    /// Scale factor of the change (1 = in control).
    #[arg(long, global = true)]
    pub delta: Option<f64>,

    #[arg(long, global = true)]
    pub scheme: Option<String>,
    #[arg(long, global = true)]
    pub delta_star: Option<f64>,
    /// Control limit to use instead of a cached one (log scale for SR charts).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub limit: Option<f64>,
    /// Candidate window of the GLR chart.
    #[arg(long, global = true)]
    pub glr_window: Option<usize>,

    #[arg(long, global = true)]
    pub reps: Option<u64>,
    #[arg(long, global = true)]
    pub glr_reps: Option<u64>,
    /// Run-length cap; runs reaching it are censored.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub eval_seed: Option<u64>,
    /// Worker threads for replications (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[arg(long, global = true)]
    pub target_arl: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,

    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub phis: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub delta_stars: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,

    /// Results directory (falls back to the environment, then `results`).
    #[arg(long, global = true)]
    pub results_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<String>,
}

impl Overrides {
    /// File values (if any) with the flags applied on top.
    pub fn merged(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = Some(v);
                }
            };
        }
        set!(cfg.process.kind, self.kind);
        set!(cfg.process.phi, self.phi.clone().map(Reals::Many));
        set!(cfg.process.theta, self.theta.clone().map(Reals::Many));
        set!(cfg.process.sigma2, self.sigma2);
        set!(cfg.process.mu, self.mu);
        set!(cfg.change.tau, self.tau);
        set!(cfg.change.delta, self.delta);
        set!(cfg.chart.scheme, self.scheme);
        set!(cfg.chart.delta_star, self.delta_star);
        set!(cfg.chart.limit, self.limit);
        set!(cfg.chart.glr_window, self.glr_window);
        set!(cfg.sim.reps, self.reps);
        set!(cfg.sim.glr_reps, self.glr_reps);
        set!(cfg.sim.cap, self.cap);
        set!(cfg.sim.seed, self.seed);
        set!(cfg.sim.eval_seed, self.eval_seed);
        set!(cfg.sim.workers, self.workers);
        set!(cfg.calibrate.target_arl, self.target_arl);
        set!(cfg.calibrate.rel_tol, self.rel_tol);
        set!(cfg.grid.phis, self.phis);
        set!(cfg.grid.deltas, self.deltas);
        set!(cfg.grid.delta_stars, self.delta_stars);
        set!(cfg.grid.schemes, self.schemes);
        set!(cfg.output.dir, self.results_dir);
        set!(cfg.output.format, self.format);
        Ok(cfg)
    }
}

/// A fully validated configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub process: ProcessSpec,
    pub tau: Option<u64>,
    pub delta: f64,
    pub scheme: Option<Scheme>,
    pub delta_star: Option<f64>,
    pub limit: Option<f64>,
    pub settings: StudySettings,
    pub eval_seed: u64,
    pub grid: ExperimentGrid,
    pub results_dir: PathBuf,
    /// Canonical TOML of every setting that can influence a result.
    pub canonical: String,
    pub config_hash: String,
}

impl Resolved {
    /// Chart for the configured scheme, without a limit.
    pub fn chart(&self) -> Result<ChartConfig> {
        let scheme = self
            .scheme
            .ok_or_else(|| CliError::field("chart.scheme", "required for this command"))?;
        Ok(ChartConfig::new(scheme, self.delta_star)?.with_glr_window(self.settings.glr_window))
    }
}

fn positive(field: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(CliError::field(field, format!("must be finite and > 0, got {x}")))
    }
}

fn parse_scheme(field: &str, s: &str) -> Result<Scheme> {
    s.parse::<Scheme>().map_err(|e| match e {
        varchart::Error::InvalidConfig { message, .. } => CliError::field(field, message),
        other => other.into(),
    })
}

fn process_from(p: &ProcessSection) -> Result<ProcessSpec> {
    let phi = p.phi.clone().map_or_else(|| vec![0.0], Reals::into_vec);
    let theta = p.theta.clone().map_or_else(Vec::new, Reals::into_vec);
    let sigma2 = positive("process.sigma2", p.sigma2.unwrap_or(1.0))?;
    let mu = p.mu.unwrap_or(0.0);
    if !mu.is_finite() {
        return Err(CliError::field("process.mu", "must be finite"));
    }
    let kind = p.kind.clone().unwrap_or_else(|| {
        match (phi.len(), theta.is_empty()) {
            (1, true) => "ar1",
            (2, true) => "ar2",
            _ => "arma",
        }
        .to_string()
    });
    let spec = match kind.as_str() {
        "ar1" | "ar2" => {
            let order = if kind == "ar1" { 1 } else { 2 };
            if phi.len() != order {
                return Err(CliError::field(
                    "process.phi",
                    format!("{kind} needs exactly {order} coefficient(s), got {}", phi.len()),
                ));
            }
            if !theta.is_empty() {
                return Err(CliError::field("process.theta", format!("{kind} takes no MA coefficients")));
            }
            if order == 1 {
                ProcessSpec::ar1(phi[0], sigma2)
            } else {
                ProcessSpec::ar2(phi[0], phi[1], sigma2)
            }
        }
        "arma" => ProcessSpec::arma(phi, theta, sigma2),
        other => {
            return Err(CliError::field(
                "process.kind",
                format!("unknown kind {other:?}; expected ar1, ar2 or arma"),
            ))
        }
    }
    .with_mean(mu);
    spec.validate()?;
    Ok(spec)
}

fn grid_list(field: &str, v: Option<Vec<f64>>, default: Vec<f64>) -> Result<Vec<f64>> {
    let v = v.unwrap_or(default);
    if v.is_empty() {
        return Err(CliError::field(field, "must not be empty"));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(CliError::field(field, format!("non-finite value {x}")));
    }
    Ok(v)
}

/// Fills defaults and checks every field.
pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let process = process_from(&cfg.process)?;

    let delta = cfg.change.delta.unwrap_or(1.0);
    if let Some(0) = cfg.change.tau {
        return Err(CliError::field("change.tau", "must be >= 1"));
    }
    ChangeSpec {
        tau: cfg.change.tau,
        delta,
    }
    .validate()?;

    let scheme = cfg
        .chart
        .scheme
        .as_deref()
        .map(|s| parse_scheme("chart.scheme", s))
        .transpose()?;
    if let Some(scheme) = scheme {
        let mut chart = ChartConfig::new(scheme, cfg.chart.delta_star)?.with_glr_window(cfg.chart.glr_window);
        if let Some(c) = cfg.chart.limit {
            chart = chart.with_limit(c);
        }
        chart.validate()?;
    } else if let Some(d) = cfg.chart.delta_star {
        if !(d.is_finite() && d > 1.0) {
            return Err(CliError::field("chart.delta_star", format!("must be finite and > 1, got {d}")));
        }
    }
    if cfg.chart.glr_window == Some(0) {
        return Err(CliError::field("chart.glr_window", "must be >= 1"));
    }

    let xi = cfg.calibrate.target_arl.unwrap_or(500.0);
    if !(xi.is_finite() && xi > 1.0) {
        return Err(CliError::field("calibrate.target_arl", format!("must be finite and > 1, got {xi}")));
    }
    let rel_tol = cfg.calibrate.rel_tol.unwrap_or(0.005);
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(CliError::field("calibrate.rel_tol", format!("must lie in (0, 1), got {rel_tol}")));
    }
    let settings = StudySettings {
        xi,
        rel_tol,
        reps: cfg.sim.reps.unwrap_or(100_000),
        glr_reps: cfg.sim.glr_reps.unwrap_or(10_000),
        seed: cfg.sim.seed.unwrap_or(1),
        cap: cfg.sim.cap.unwrap_or_else(|| default_cap(xi)),
        workers: cfg.sim.workers.unwrap_or(0),
        glr_window: cfg.chart.glr_window,
    };
    for (field, v) in [("sim.reps", settings.reps), ("sim.glr_reps", settings.glr_reps)] {
        if v < 2 {
            return Err(CliError::field(field, format!("must be >= 2, got {v}")));
        }
    }
    if settings.cap == 0 {
        return Err(CliError::field("sim.cap", "must be >= 1"));
    }
    if let (Some(tau), cap) = (cfg.change.tau, settings.cap) {
        if tau > cap {
            return Err(CliError::field("change.tau", format!("{tau} exceeds the run-length cap {cap}")));
        }
    }

    let schemes = match &cfg.grid.schemes {
        Some(list) => list
            .iter()
            .map(|s| parse_scheme("grid.schemes", s))
            .collect::<Result<Vec<_>>>()?,
        None => Scheme::ALL.to_vec(),
    };
    let grid = ExperimentGrid {
        phis: grid_list("grid.phis", cfg.grid.phis.clone(), default_phis())?,
        deltas: grid_list("grid.deltas", cfg.grid.deltas.clone(), default_deltas())?,
        delta_stars: grid_list("grid.delta_stars", cfg.grid.delta_stars.clone(), default_delta_stars())?,
        schemes,
    };
    for &phi in &grid.phis {
        ProcessSpec::ar1(phi, 1.0)
            .validate()
            .map_err(|_| CliError::field("grid.phis", format!("|phi| must be < 1, got {phi}")))?;
    }
    grid.validate()?;

    let format = cfg.output.format.as_deref().unwrap_or("csv");
    if format != "csv" {
        return Err(CliError::field("output.format", format!("only csv is supported, got {format:?}")));
    }
    let results_dir = cfg
        .output
        .dir
        .clone()
        .or_else(|| std::env::var_os(RESULTS_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));

    let effective = RunConfig {
        process: ProcessSection {
            kind: Some(
                match process.kind() {
                    varchart::ProcessKind::Ar1 => "ar1",
                    varchart::ProcessKind::Ar2 => "ar2",
                    varchart::ProcessKind::Arma { .. } => "arma",
                }
                .to_string(),
            ),
            phi: Some(Reals::Many(process.phi.clone())),
            theta: Some(Reals::Many(process.theta.clone())),
            sigma2: Some(process.sigma2),
            mu: Some(process.mu),
        },
        change: ChangeSection {
            tau: cfg.change.tau,
            delta: Some(delta),
        },
        chart: ChartSection {
            scheme: scheme.map(|s| s.name().to_string()),
            delta_star: cfg.chart.delta_star,
            limit: cfg.chart.limit,
            glr_window: cfg.chart.glr_window,
        },
        sim: SimSection {
            reps: Some(settings.reps),
            glr_reps: Some(settings.glr_reps),
            cap: Some(settings.cap),
            seed: Some(settings.seed),
            eval_seed: Some(cfg.sim.eval_seed.unwrap_or(settings.seed)),
            workers: None,
        },
        calibrate: CalibrateSection {
            target_arl: Some(xi),
            rel_tol: Some(rel_tol),
        },
        grid: GridSection {
            phis: Some(grid.phis.clone()),
            deltas: Some(grid.deltas.clone()),
            delta_stars: Some(grid.delta_stars.clone()),
            schemes: Some(grid.schemes.iter().map(|s| s.name().to_string()).collect()),
        },
        output: OutputSection::default(),
    };
    let canonical = toml::to_string(&effective)
        .map_err(|e| CliError::Io(format!("cannot serialize configuration: {e}")))?;
    let config_hash = Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();

    Ok(Resolved {
        process,
        tau: cfg.change.tau,
        delta,
        scheme,
        delta_star: cfg.chart.delta_star,
        limit: cfg.chart.limit,
        settings,
        eval_seed: cfg.sim.eval_seed.unwrap_or(settings.seed),
        grid,
        results_dir,
        canonical,
        config_hash,
    })
}
