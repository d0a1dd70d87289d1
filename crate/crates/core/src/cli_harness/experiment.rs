use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::density_contraction::{solve_optimal_drift, suboptimality_audit};
use crate::empirical::verify_bookkeeping;
use crate::error::{Error, Result};
use crate::hydro_pde::{current_consistency, energy, solve_hydro, FieldGrid, Grid, HydroProblem, TrajectoryGrid};
use crate::profile::Drift;
use crate::rate_functional::{evaluate_i0_explicit, evaluate_j_gh, initial_cost, recover_drifts};
use crate::rates::boundary_density;
use crate::simulator::{exact_tilted_moment, log_radon_nikodym, run_replicas, SimParams};

use super::compare::{compare_micro_macro, default_test_functions, MicroAverages};
use super::config::{ExperimentConfig, Mode};
use super::output::{fields_csv, write_json, write_text};

pub const TOOL_NAME: &str = "fluctlat";

/// Outcome of [`run_experiment`]: the summary written to `summary.json` and
/// whether all checks passed (only `validate` can fail without an error).
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mode: Mode,
    pub summary: Value,
    pub passed: bool,
}

/// Config echo written to `manifest.json`.
pub fn manifest(config: &ExperimentConfig) -> Value {
    let settings: Map<String, Value> = config
        .entries()
        .into_iter()
        .map(|(k, v)| (k, Value::String(v)))
        .collect();
    json!({
        "tool": TOOL_NAME,
        "version": env!("CARGO_PKG_VERSION"),
        "mode": config.mode.as_str(),
        "seed": config.seed,
        "replicas": config.replicas,
        "config": settings,
    })
}

/// Rebuilds the configuration recorded in a manifest.
pub fn config_from_manifest(manifest: &Value) -> Result<ExperimentConfig> {
    let settings = manifest
        .get("config")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::Config("manifest has no config object".into()))?;
    let mut text = String::new();
    for (k, v) in settings {
        let v = v
            .as_str()
            .ok_or_else(|| Error::Config(format!("manifest entry {k} is not a string")))?;
        text.push_str(&format!("{k} = {v}\n"));
    }
    ExperimentConfig::parse(&text)
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Runs one experiment and writes its artifacts into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(out_dir)?;
    write_json(out_dir, "manifest.json", &manifest(config))?;
    let (summary, passed) = match config.mode {
        Mode::Simulate => (simulate(config, out_dir)?, true),
        Mode::Hydro => (hydro(config, out_dir)?, true),
        Mode::RateEval => (rate_eval(config, out_dir)?, true),
        Mode::Contract => (contract(config, out_dir)?, true),
        Mode::Oracle => (oracle(config)?, true),
        Mode::Validate => validate(config)?,
    };
    write_json(out_dir, "summary.json", &summary)?;
    Ok(RunReport {
        mode: config.mode,
        summary,
        passed,
    })
}

fn boundaries(config: &ExperimentConfig) -> Result<(f64, f64)> {
    let p = config.sim_params()?;
    Ok((boundary_density(p.beta_minus)?, boundary_density(p.beta_plus)?))
}

fn hydro_solution(config: &ExperimentConfig) -> Result<(TrajectoryGrid, FieldGrid, FieldGrid)> {
    let grid = config.grid()?;
    let (rho_minus, rho_plus) = boundaries(config)?;
    let initial = config.initial_profile()?;
    let g = config.drift_field("g", grid)?;
    let h = config.drift_field("h", grid)?;
    let problem = HydroProblem::new(grid, config.rate()?, |x| initial.eval(x), rho_minus, rho_plus)
        .with_drifts(g.clone(), h.clone());
    Ok((solve_hydro(&problem)?, g, h))
}

/// Trajectory from `input.fields` if given, otherwise the (tilted) PDE solution.
fn input_trajectory(config: &ExperimentConfig) -> Result<(TrajectoryGrid, FieldGrid, FieldGrid)> {
    match config.get("input.fields") {
        Some(path) => super::output::read_fields_csv(Path::new(path)),
        None => hydro_solution(config),
    }
}

fn gamma_on(config: &ExperimentConfig, grid: Grid) -> Result<Vec<f64>> {
    Ok(config.initial_profile()?.sample(&grid.xs()))
}

fn simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<Value> {
    let params = config.sim_params()?;
    let record = params.record_events;
    let runs = run_replicas(&params, config.replicas, |r, out| -> Result<_> {
        for snap in &out.snapshots {
            verify_bookkeeping(snap)?;
        }
        if let Some(log) = &out.log {
            let file = fs::File::create(out_dir.join(format!("events_{r}.bin")))?;
            log.write_records(std::io::BufWriter::new(file))?;
        }
        Ok(out.snapshots)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let micro = MicroAverages::from_runs(params.n, &params.sample_times, &runs)?;
    write_text(out_dir, "rho.csv", &micro.rho_table().to_csv())?;
    write_text(out_dir, "q.csv", &micro.q_table().to_csv())?;
    write_text(out_dir, "k.csv", &micro.k_table().to_csv())?;

    let mut summary = json!({
        "n": params.n,
        "t_final": params.t_final,
        "replicas": config.replicas,
        "samples": params.sample_times.len(),
        "snapshots_checked": runs.iter().map(Vec::len).sum::<usize>(),
        "bookkeeping_ok": true,
        "events_recorded": record,
    });
    if config.compare_enabled()? {
        if params.is_tilted() {
            return Err(Error::Config("compare.enabled needs an untilted simulation".into()));
        }
        let (traj, g, h) = hydro_solution(config)?;
        write_text(out_dir, "fields.csv", &fields_csv(&traj, &g, &h))?;
        let gaps = compare_micro_macro(&micro, &traj, &default_test_functions())?;
        summary["gaps"] = to_value(&gaps)?;
    }
    Ok(summary)
}

fn hydro(config: &ExperimentConfig, out_dir: &Path) -> Result<Value> {
    let (traj, g, h) = hydro_solution(config)?;
    write_text(out_dir, "fields.csv", &fields_csv(&traj, &g, &h))?;
    let (lo, hi) = traj.rho_range();
    let deviation = traj.rho.data().iter().fold(0.0f64, |m, &v| m.max((v - 0.5).abs()));
    Ok(json!({
        "nx": traj.grid.nx,
        "nt": traj.grid.nt,
        "t_final": traj.grid.t_final,
        "rho_min": lo,
        "rho_max": hi,
        "max_abs_deviation_from_half": deviation,
        "energy": energy(&traj),
        "current_consistency": current_consistency(&traj),
    }))
}

fn rate_eval(config: &ExperimentConfig, out_dir: &Path) -> Result<Value> {
    let rate = config.rate()?;
    let (traj, _, _) = input_trajectory(config)?;
    let gamma = gamma_on(config, traj.grid)?;
    let h_gamma = initial_cost(traj.rho.row(0), &gamma, traj.grid.dx())?;
    let breakdown = evaluate_i0_explicit(&traj, &rate)?.with_initial_cost(h_gamma);
    let mut summary = to_value(&breakdown)?;
    if breakdown.feasible {
        let (g, h) = recover_drifts(&traj, &rate)?;
        summary["j_recovered"] = to_value(&evaluate_j_gh(&traj, &g, &h, &rate)?)?;
        write_text(out_dir, "fields.csv", &fields_csv(&traj, &g, &h))?;
    }
    Ok(summary)
}

fn contract(config: &ExperimentConfig, out_dir: &Path) -> Result<Value> {
    let rate = config.rate()?;
    let (tol, max_iters, audits) = config.contract_settings()?;
    let (traj, _, _) = input_trajectory(config)?;
    let gamma = gamma_on(config, traj.grid)?;
    let h_gamma = initial_cost(traj.rho.row(0), &gamma, traj.grid.dx())?;
    let result = solve_optimal_drift(&traj, &rate, tol, max_iters)?;
    write_text(out_dir, "fields.csv", &fields_csv(&result.optimal, &result.h_opt, &result.h_opt))?;
    let mut summary = json!({
        "f_rho": result.f_rho,
        "h_gamma": h_gamma,
        "total": result.f_rho + h_gamma,
        "newton": to_value(&result.stats())?,
    });
    if audits > 0 {
        summary["audit"] = to_value(&suboptimality_audit(&result, &rate, audits, config.seed)?)?;
    }
    Ok(summary)
}

fn oracle(config: &ExperimentConfig) -> Result<Value> {
    let params = config.sim_params()?;
    let omega = config.omega()?;
    let moment = exact_tilted_moment(&params, &omega)?;
    let mut summary = json!({ "n": params.n, "t_final": params.t_final, "moment": moment });
    let paths = config.oracle_paths()?;
    if paths > 0 {
        let weights = monte_carlo_weights(&params, &omega, paths)?;
        let mean = weights.iter().sum::<f64>() / paths as f64;
        let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (paths.max(2) - 1) as f64;
        summary["paths"] = json!(paths);
        summary["mc_mean"] = json!(mean);
        summary["mc_standard_error"] = json!((var / paths as f64).sqrt());
    }
    Ok(summary)
}

/// Likelihood ratios `dP̃/dP` along `paths` untilted trajectories.
pub(crate) fn monte_carlo_weights(params: &SimParams, omega: &crate::profile::Profile, paths: usize) -> Result<Vec<f64>> {
    let mut plain = params.clone();
    plain.tilt_g = Drift::Zero;
    plain.tilt_h = Drift::Zero;
    plain.record_events = true;
    plain.sample_times = vec![params.t_final];
    run_replicas(&plain, paths, |_, out| -> Result<f64> {
        let log = out.log.ok_or_else(|| Error::Consistency("event log missing".into()))?;
        Ok(log_radon_nikodym(&log, params, omega)?.exp())
    })?
    .into_iter()
    .collect()
}

fn validate(config: &ExperimentConfig) -> Result<(Value, bool)> {
    let results = crate::acceptance::run_all(config.seed);
    let passed = results.iter().all(|r| r.passed);
    Ok((json!({ "passed": passed, "criteria": to_value(&results)? }), passed))
}
