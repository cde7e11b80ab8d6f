//! Mode dispatch and artifact writing.
//!
//! Every run writes `manifest.json` next to its artifacts:
//!
//! ```text
//! { "schema": "dropf-manifest/1", "version": "<crate version>",
//!   "config": { ... }, "solver": { ... }, "artifacts": [ ... ] }
//! ```
//!
//! Artifacts contain no timestamps or timings, so a rerun with the same
//! configuration and seed reproduces them byte for byte.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::case::bundled_case;
use super::config::{Mode, RunConfig, DIST_ETA, TRANS_ETA};
use crate::case::{DistributionCase, GridCase, TransmissionCase};
use crate::dro::format::{load_samples, save_samples};
use crate::dro::SampleSet;
use crate::error::{Error, Result};
use crate::evaluation::{
    distribution_sweep, evaluate_distribution, evaluate_transmission, profiles, synth_errors, transmission_sweep, DistForecast, ErrorFamily,
    ErrorSampler, MonteCarlo, SynthSpec, ViolationStats,
};
use crate::mpc::{mpc_run, MpcConfig};
use crate::opf::{assemble_distribution_opf, assemble_transmission_opf, AssemblyConfig, RiskReport, TransStageData, TransmissionInput};
use crate::program::{solve, SolverConfig};

pub const MANIFEST_SCHEMA: &str = "dropf-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Forecast wind feed-in as a fraction of the nominal rating.
pub const WIND_FORECAST_FRACTION: f64 = 0.7;

/// Files written by a run, relative to its output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub artifacts: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    solver: &'a SolverConfig,
    artifacts: &'a [String],
}

/// Independent seed for stream `k` derived from the run seed.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const TRAINING: u64 = 1;
const EVALUATION: u64 = 2;
const TRACES: u64 = 3;

/// Resolve `name_or_path` to a bundled case or a case file. Names with a
/// path separator or a `.case` suffix are always read from disk.
pub fn resolve_case(name_or_path: &str) -> Result<GridCase> {
    let path = Path::new(name_or_path);
    let looks_like_path = name_or_path.contains(std::path::MAIN_SEPARATOR) || name_or_path.contains('/') || name_or_path.ends_with(".case");
    if path.exists() || looks_like_path {
        super::case::load_case(path)
    } else {
        bundled_case(name_or_path)
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    solver: SolverConfig,
    artifacts: Vec<String>,
}

impl Context<'_> {
    fn path(&mut self, name: &str) -> std::path::PathBuf {
        self.artifacts.push(name.to_string());
        self.cfg.output.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let f = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(f, value)?;
        Ok(())
    }

    fn assembly(&self, eta: f64, rho: f64, eps: f64) -> AssemblyConfig {
        AssemblyConfig { rho, eta, epsilon: vec![eps], horizon: self.cfg.horizon, delta_h: self.cfg.step_hours() }
    }
}

fn dist_error_spec(case: &DistributionCase, std: f64, count: usize) -> SynthSpec {
    SynthSpec::new(ErrorFamily::leptokurtic(), vec![std; case.n_xi()], count)
}

fn trans_error_spec(case: &TransmissionCase, horizon: usize, count: usize) -> SynthSpec {
    SynthSpec::new(ErrorFamily::leptokurtic(), (0..horizon).flat_map(|_| case.wind_std.iter().copied()).collect(), count)
}

fn trans_names(case: &TransmissionCase, horizon: usize) -> Vec<String> {
    (0..horizon).flat_map(|t| case.winds.iter().map(move |w| format!("{}@{t}", w.name))).collect()
}

fn named(samples: SampleSet, names: Vec<String>) -> Result<SampleSet> {
    SampleSet::with_names(names, samples.rows().to_vec())
}

fn training(cfg: &RunConfig, case: &GridCase) -> Result<SampleSet> {
    let (want, names) = match case {
        GridCase::Distribution(d) => (d.n_xi(), d.error_names.clone()),
        GridCase::Transmission(t) => (cfg.horizon * t.n_w(), trans_names(t, cfg.horizon)),
    };
    if let Some(path) = &cfg.samples {
        let s = load_samples(path)?;
        if s.dim() != want {
            return Err(Error::Data(format!("{}: {} columns, case {} expects {want}", path.display(), s.dim(), case.name())));
        }
        return Ok(s);
    }
    let seed = sub_seed(cfg.seed, TRAINING);
    let s = match case {
        GridCase::Distribution(d) => synth_errors(&dist_error_spec(d, cfg.pv_error_std, cfg.window), seed)?,
        GridCase::Transmission(t) => synth_errors(&trans_error_spec(t, cfg.horizon, cfg.window), seed)?,
    };
    named(s, names)
}

fn trans_input(case: &TransmissionCase, horizon: usize, samples: SampleSet) -> TransmissionInput {
    let stage = TransStageData { wind_forecast: case.winds.iter().map(|w| WIND_FORECAST_FRACTION * w.p_nom).collect() };
    TransmissionInput::unbounded(vec![stage; horizon], samples)
}

fn forecast(cfg: &RunConfig) -> DistForecast {
    DistForecast { step_hours: cfg.step_hours(), ..DistForecast::default() }
}

fn single_step(cfg: &RunConfig) -> usize {
    cfg.start_step.unwrap_or_else(|| {
        let peak_hour = profiles::hour_of(profiles::solar_peak_step());
        (peak_hour / cfg.step_hours()).round() as usize
    })
}

/// Stage-major stacked sampler for distribution evaluation: stage `τ` uses
/// the spread growth of the forecast model.
fn dist_sampler(cfg: &RunConfig, case: &DistributionCase, train: &SampleSet) -> Result<ErrorSampler> {
    let fc = forecast(cfg);
    let growth = |tau: usize| 1.0 + fc.error_growth * tau as f64;
    if cfg.in_sample {
        let rows = train
            .rows()
            .iter()
            .map(|r| (0..cfg.horizon).flat_map(|tau| r.iter().map(move |v| v * growth(tau))).collect())
            .collect();
        return Ok(ErrorSampler::InSample(SampleSet::new(rows)?));
    }
    let std = (0..cfg.horizon).flat_map(|tau| vec![cfg.pv_error_std * growth(tau); case.n_xi()]).collect();
    Ok(ErrorSampler::HeldOut(SynthSpec::new(ErrorFamily::leptokurtic(), std, 1)))
}

fn trans_sampler(cfg: &RunConfig, case: &TransmissionCase, train: &SampleSet) -> ErrorSampler {
    if cfg.in_sample {
        ErrorSampler::InSample(train.clone())
    } else {
        ErrorSampler::HeldOut(trans_error_spec(case, cfg.horizon, 1))
    }
}

fn write_risk_csv(path: &Path, report: &RiskReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "stage", "certificate", "cvar"])?;
    for c in &report.constraints {
        w.write_record([
            c.label.clone(),
            c.stage.to_string(),
            c.certificate.map_or(String::new(), |v| format!("{v:?}")),
            format!("{:?}", c.cvar),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_stats_csv(path: &Path, stats: &ViolationStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["constraint", "frequency", "var", "cvar", "peak"])?;
    for i in 0..stats.labels.len() {
        w.write_record([
            stats.labels[i].clone(),
            format!("{:?}", stats.frequency[i]),
            format!("{:?}", stats.var[i]),
            format!("{:?}", stats.cvar[i]),
            format!("{:?}", stats.peak[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_solve_dist(ctx: &mut Context, case: &DistributionCase, train: &SampleSet, eval: bool) -> Result<()> {
    let cfg = ctx.cfg;
    let step = single_step(cfg);
    let stages = forecast(cfg).horizon(case, step, cfg.horizon, train)?;
    let soc0: Vec<f64> = case.storage.iter().map(|s| s.b0).collect();
    let a = ctx.assembly(cfg.eta.unwrap_or(DIST_ETA), cfg.rho[0], cfg.epsilon[0]);
    let p = assemble_distribution_opf(case, &stages, &soc0, &a)?;
    let dec = p.extract(&solve(&p.program, &ctx.solver)?)?;
    ctx.json("decision.json", &dec)?;
    let path = ctx.path("risk.csv");
    write_risk_csv(&path, &dec.report)?;
    if eval {
        let draws = dist_sampler(cfg, case, train)?.draw(cfg.draws, sub_seed(cfg.seed, EVALUATION))?;
        let stats = evaluate_distribution(case, &stages, &dec, &draws, a.eta, a.delta_h)?;
        ctx.json("stats.json", &stats)?;
        let path = ctx.path("violations.csv");
        write_stats_csv(&path, &stats)?;
    }
    Ok(())
}

fn run_solve_trans(ctx: &mut Context, case: &TransmissionCase, train: &SampleSet, eval: bool) -> Result<()> {
    let cfg = ctx.cfg;
    let input = trans_input(case, cfg.horizon, train.clone());
    let a = ctx.assembly(cfg.eta.unwrap_or(TRANS_ETA), cfg.rho[0], cfg.epsilon[0]);
    let p = assemble_transmission_opf(case, &input, &a)?;
    let dec = p.extract(&solve(&p.program, &ctx.solver)?)?;
    ctx.json("decision.json", &dec)?;
    let path = ctx.path("risk.csv");
    write_risk_csv(&path, &dec.report)?;
    if eval {
        let draws = trans_sampler(cfg, case, train).draw(cfg.draws, sub_seed(cfg.seed, EVALUATION))?;
        let stats = evaluate_transmission(case, &input, &p, &dec, &draws, a.eta)?;
        ctx.json("stats.json", &stats)?;
        let path = ctx.path("violations.csv");
        write_stats_csv(&path, &stats)?;
    }
    Ok(())
}

fn run_sweep(ctx: &mut Context, case: &GridCase, train: &SampleSet) -> Result<()> {
    let cfg = ctx.cfg;
    let eval_seed = sub_seed(cfg.seed, EVALUATION);
    let table = match case {
        GridCase::Distribution(d) => {
            let stages = forecast(cfg).horizon(d, single_step(cfg), cfg.horizon, train)?;
            let soc0: Vec<f64> = d.storage.iter().map(|s| s.b0).collect();
            let base = ctx.assembly(cfg.eta.unwrap_or(DIST_ETA), 0.0, 0.0);
            let mc = (cfg.draws > 0).then(|| dist_sampler(cfg, d, train)).transpose()?.map(|sampler| MonteCarlo { sampler, draws: cfg.draws, seed: eval_seed });
            distribution_sweep(d, &stages, &soc0, &base, &cfg.rho, &cfg.epsilon, &ctx.solver, mc.as_ref())?
        }
        GridCase::Transmission(t) => {
            let input = trans_input(t, cfg.horizon, train.clone());
            let base = ctx.assembly(cfg.eta.unwrap_or(TRANS_ETA), 0.0, 0.0);
            let mc = (cfg.draws > 0).then(|| MonteCarlo { sampler: trans_sampler(cfg, t, train), draws: cfg.draws, seed: eval_seed });
            transmission_sweep(t, &input, &base, &cfg.rho, &cfg.epsilon, &ctx.solver, mc.as_ref())?
        }
    };
    let path = ctx.path("sweep.csv");
    table.write_csv(File::create(path)?)?;
    ctx.json("sweep.json", &table)?;
    Ok(())
}

#[derive(Serialize)]
struct MpcSummary {
    schema: &'static str,
    case: String,
    steps: usize,
    traces: usize,
    monitored: Vec<String>,
    /// `overvoltage[trace][bus]`
    overvoltage: Vec<Vec<f64>>,
    mean_overvoltage: Vec<f64>,
    peak_voltage: Vec<f64>,
    fallbacks: usize,
    mean_cost: f64,
}

fn run_mpc(ctx: &mut Context, case: &DistributionCase, train: &SampleSet) -> Result<()> {
    let cfg = ctx.cfg;
    let mcfg = MpcConfig {
        assembly: ctx.assembly(cfg.eta.unwrap_or(DIST_ETA), cfg.rho[0], cfg.epsilon[0]),
        window: cfg.window,
        forecast: forecast(cfg),
        solver: ctx.solver.clone(),
    };
    let sampler = if cfg.in_sample { ErrorSampler::InSample(train.clone()) } else { ErrorSampler::HeldOut(dist_error_spec(case, cfg.pv_error_std, 1)) };
    let start = cfg.start_step.unwrap_or(0);
    let runs = (0..cfg.traces)
        .into_par_iter()
        .map(|k| {
            let trace = sampler.draw(cfg.steps, sub_seed(sub_seed(cfg.seed, TRACES), k as u64))?;
            mpc_run(case, &mcfg, train, &trace, start, cfg.steps)
        })
        .collect::<Result<Vec<_>>>()?;
    let path = ctx.path("trajectory.csv");
    runs[0].write_csv(File::create(path)?)?;
    let overvoltage: Vec<Vec<f64>> = runs.iter().map(|r| r.overvoltage_frequency()).collect();
    let m = runs[0].monitored.len();
    let n = runs.len() as f64;
    let summary = MpcSummary {
        schema: "dropf-mpc/1",
        case: case.name.clone(),
        steps: cfg.steps,
        traces: cfg.traces,
        monitored: runs[0].monitored.clone(),
        mean_overvoltage: (0..m).map(|b| overvoltage.iter().map(|o| o[b]).sum::<f64>() / n).collect(),
        overvoltage,
        peak_voltage: (0..m).map(|b| runs.iter().map(|r| r.peak_voltage()[b]).fold(f64::NEG_INFINITY, f64::max)).collect(),
        fallbacks: runs.iter().map(|r| r.records.iter().filter(|s| s.fallback).count()).sum(),
        mean_cost: runs.iter().map(|r| r.records.iter().map(|s| s.cost).sum::<f64>()).sum::<f64>() / n,
    };
    ctx.json("mpc_summary.json", &summary)
}

/// Execute `cfg`, writing artifacts and the manifest into `cfg.output`.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let solver = SolverConfig::from_env()?;
    let case = resolve_case(&cfg.case)?;
    match (cfg.mode, &case) {
        (Mode::SolveDist | Mode::Mpc, GridCase::Transmission(_)) | (Mode::SolveTrans, GridCase::Distribution(_)) => {
            return Err(Error::Config(format!("mode {} does not apply to case {}", cfg.mode.name(), case.name())));
        }
        _ => {}
    }
    let train = training(cfg, &case)?;
    std::fs::create_dir_all(&cfg.output)?;
    let mut ctx = Context { cfg, solver, artifacts: Vec::new() };
    match (cfg.mode, &case) {
        (Mode::GenData, _) => {
            let path = ctx.path("samples.csv");
            save_samples(&train, &path)?;
        }
        (Mode::SolveDist, GridCase::Distribution(d)) => run_solve_dist(&mut ctx, d, &train, false)?,
        (Mode::SolveTrans, GridCase::Transmission(t)) => run_solve_trans(&mut ctx, t, &train, false)?,
        (Mode::Eval, GridCase::Distribution(d)) => run_solve_dist(&mut ctx, d, &train, true)?,
        (Mode::Eval, GridCase::Transmission(t)) => run_solve_trans(&mut ctx, t, &train, true)?,
        (Mode::Mpc, GridCase::Distribution(d)) => run_mpc(&mut ctx, d, &train)?,
        (Mode::Sweep, c) => run_sweep(&mut ctx, c, &train)?,
        _ => unreachable!("mode and case kind checked above"),
    }
    let manifest = Manifest { schema: MANIFEST_SCHEMA, version: env!("CARGO_PKG_VERSION"), config: cfg, solver: &ctx.solver, artifacts: &ctx.artifacts };
    let f = BufWriter::new(File::create(cfg.output.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(RunReport { mode: cfg.mode, artifacts: ctx.artifacts })
}
