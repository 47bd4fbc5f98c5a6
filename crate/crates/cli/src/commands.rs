use varchart::experiments::{run_arl_table, run_sensitivity, LimitCache, LimitKey};
use varchart::runlength::worst_delay;
use varchart::{calibrate_limit, estimate_arl, estimate_delay, ChartConfig, MonteCarlo, ProcessKind, Scheme};

use crate::config::Resolved;
use crate::error::{CliError, Result};
use crate::format::{full, list, opt_sig6, sig6, Row};
use crate::store::ResultsStore;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn provenance(r: &Resolved, row: &mut Row) {
    row.push(("config_hash", r.config_hash.clone()));
    row.push(("version", VERSION.to_string()));
    row.push(("config", r.canonical.clone()));
}

/// The configured chart with its control limit, from `--limit` or the cache.
fn chart_with_limit(r: &Resolved, store: &ResultsStore) -> Result<(ChartConfig, f64)> {
    let cfg = r.chart()?;
    if let Some(c) = r.limit {
        return Ok((cfg.with_limit(c), c));
    }
    let key = LimitKey::new(&cfg, &r.process, &r.settings.target_for(cfg.scheme));
    match store.get(&key) {
        Some(c) => Ok((cfg.with_limit(c), c)),
        None => Err(CliError::field(
            "chart.limit",
            format!(
                "no calibrated limit for these settings in {}; run `varchart calibrate` with the same \
                 process, chart, sim and calibrate options, or pass --limit",
                store.dir().join(crate::store::LIMITS_FILE).display()
            ),
        )),
    }
}

fn eval_mc(r: &Resolved, scheme: Scheme) -> MonteCarlo {
    let mut mc = r.settings.monte_carlo_for(scheme);
    mc.seed = r.eval_seed;
    mc
}

pub fn calibrate(r: &Resolved, store: &mut ResultsStore) -> Result<Vec<Row>> {
    let cfg = r.chart()?;
    let target = r.settings.target_for(cfg.scheme);
    let res = calibrate_limit(&cfg, &r.process, &target)?;
    store.put(LimitKey::new(&cfg, &r.process, &target), res.c)?;
    let a = &res.achieved_arl;
    let mut row: Row = vec![
        ("scheme", cfg.scheme.name().to_string()),
        ("phi", list(&r.process.phi)),
        ("delta_star", opt_sig6(cfg.delta_star)),
        ("target_arl", sig6(target.xi)),
        ("c", sig6(res.c)),
        ("achieved_arl", sig6(a.mean)),
        ("std_err", sig6(a.std_err)),
        ("iterations", res.iterations.to_string()),
        ("reps", target.reps.to_string()),
        ("cap", target.cap.to_string()),
        ("censored", a.censored.to_string()),
        ("seed", target.seed.to_string()),
        ("c_full", full(res.c)),
        ("achieved_arl_full", full(a.mean)),
        ("std_err_full", full(a.std_err)),
    ];
    provenance(r, &mut row);
    Ok(vec![row])
}

#[allow(clippy::too_many_arguments)]
fn estimate_row(
    r: &Resolved,
    cfg: &ChartConfig,
    c: f64,
    value: f64,
    se: f64,
    mc: &MonteCarlo,
    censored: u64,
    tau: Option<u64>,
    rejected: Option<u64>,
    warning: Option<&str>,
) -> Row {
    let mut row: Row = vec![
        ("scheme", cfg.scheme.name().to_string()),
        ("phi", list(&r.process.phi)),
        ("delta", sig6(r.delta)),
        ("delta_star", opt_sig6(cfg.delta_star)),
        ("c", sig6(c)),
        ("arl_or_delay", sig6(value)),
        ("std_err", sig6(se)),
        ("reps", mc.reps.to_string()),
        ("censored", censored.to_string()),
        ("tau", tau.map(|t| t.to_string()).unwrap_or_default()),
        ("seed", mc.seed.to_string()),
        ("rejected", rejected.map(|t| t.to_string()).unwrap_or_default()),
        ("c_full", full(c)),
        ("arl_or_delay_full", full(value)),
        ("std_err_full", full(se)),
        ("warning", warning.unwrap_or_default().to_string()),
    ];
    provenance(r, &mut row);
    row
}

pub fn arl(r: &Resolved, store: &mut ResultsStore) -> Result<Vec<Row>> {
    let (cfg, c) = chart_with_limit(r, store)?;
    let change = if r.delta == 1.0 {
        varchart::ChangeSpec::in_control()
    } else {
        varchart::ChangeSpec::at(r.tau.unwrap_or(1), r.delta)
    };
    let mc = eval_mc(r, cfg.scheme);
    let est = estimate_arl(&cfg, &r.process, change, &mc)?;
    Ok(vec![estimate_row(
        r,
        &cfg,
        c,
        est.mean,
        est.std_err,
        &mc,
        est.censored,
        change.tau,
        None,
        est.warning.as_deref(),
    )])
}

pub fn delay(r: &Resolved, store: &mut ResultsStore, worst: bool) -> Result<Vec<Row>> {
    let tau = r
        .tau
        .ok_or_else(|| CliError::field("change.tau", "required by the delay command"))?;
    let (cfg, c) = chart_with_limit(r, store)?;
    let mc = eval_mc(r, cfg.scheme);
    let est = if worst {
        worst_delay(&cfg, &r.process, r.delta, tau, &mc)?.estimate
    } else {
        estimate_delay(&cfg, &r.process, r.delta, tau, &mc)?
    };
    Ok(vec![estimate_row(
        r,
        &cfg,
        c,
        est.mean_delay,
        est.std_err,
        &mc,
        est.censored,
        Some(est.tau),
        Some(est.rejected),
        est.warning.as_deref(),
    )])
}

pub fn table(r: &Resolved, store: &mut ResultsStore) -> Result<Vec<Row>> {
    let cells = run_arl_table(&r.grid, &r.settings, store)?;
    Ok(cells
        .into_iter()
        .map(|cell| {
            let mut row: Row = vec![
                ("scheme", cell.scheme.name().to_string()),
                ("phi", sig6(cell.phi)),
                ("delta", sig6(cell.delta)),
                ("best_delta_star", opt_sig6(cell.best_delta_star)),
                ("arl", sig6(cell.arl)),
                ("se", sig6(cell.std_err)),
                ("within_2pct", cell.within_2pct_of_best.to_string()),
                ("arl_full", full(cell.arl)),
                ("se_full", full(cell.std_err)),
                ("seed", r.settings.seed.to_string()),
            ];
            provenance(r, &mut row);
            row
        })
        .collect())
}

pub fn sensitivity(r: &Resolved, store: &mut ResultsStore) -> Result<Vec<Row>> {
    if r.process.kind() != ProcessKind::Ar1 {
        return Err(CliError::field("process.kind", "sensitivity curves are computed for AR(1) processes"));
    }
    let phi = r.process.phi[0];
    let points = run_sensitivity(&r.grid.schemes, phi, r.delta, &r.grid.delta_stars, &r.settings, store)?;
    Ok(points
        .into_iter()
        .map(|p| {
            let mut row: Row = vec![
                ("scheme", p.scheme.name().to_string()),
                ("delta_star", opt_sig6(p.delta_star)),
                ("arl", sig6(p.arl)),
                ("se", sig6(p.std_err)),
                ("arl_full", full(p.arl)),
                ("se_full", full(p.std_err)),
                ("phi", sig6(phi)),
                ("delta", sig6(r.delta)),
                ("seed", r.settings.seed.to_string()),
            ];
            provenance(r, &mut row);
            row
        })
        .collect())
}
