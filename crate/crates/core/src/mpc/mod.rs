//! Receding-horizon control of a distribution feeder.
//!
//! Every step solves the horizon problem from the current storage state,
//! applies the first stage, advances the state with the applied charging
//! power and appends the realized forecast error to a rolling dataset:
//!
//! ```text
//! B^{t+1} = B^t + P_B^t Δ
//! window  = last N_s realized error vectors
//! ```
//!
//! A solve that fails produces the fallback set point: full curtailment,
//! the previous reactive set points, and charging clipped to keep the
//! state of charge within its bounds.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::case::DistributionCase;
use crate::dro::SampleSet;
use crate::error::{Error, Result};
use crate::evaluation::DistForecast;
use crate::opf::{assemble_distribution_opf, realized_injections, realized_stage_cost, AssemblyConfig, DistributionDecision, StageDecision};
use crate::program::{solve, SolverConfig};

/// Default rolling window length.
pub const DEFAULT_WINDOW: usize = 30;

const SOC_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub assembly: AssemblyConfig,
    pub window: usize,
    pub forecast: DistForecast,
    pub solver: SolverConfig,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self { assembly: AssemblyConfig::default(), window: DEFAULT_WINDOW, forecast: DistForecast::default(), solver: SolverConfig::default() }
    }
}

/// The most recent `capacity` error vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorWindow {
    names: Vec<String>,
    capacity: usize,
    rows: VecDeque<Vec<f64>>,
}

impl ErrorWindow {
    /// Window seeded with the last `capacity` rows of `initial`.
    pub fn new(initial: &SampleSet, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("error window needs a positive length".into()));
        }
        let skip = initial.len().saturating_sub(capacity);
        Ok(Self { names: initial.names().to_vec(), capacity, rows: initial.rows()[skip..].iter().cloned().collect() })
    }

    pub fn push(&mut self, xi: Vec<f64>) {
        self.rows.push_back(xi);
        while self.rows.len() > self.capacity {
            self.rows.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn samples(&self) -> Result<SampleSet> {
        SampleSet::with_names(self.names.clone(), self.rows.iter().cloned().collect())
    }
}

/// Record of one applied step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub fallback: bool,
    pub decision: StageDecision,
    /// State of charge after the step.
    pub soc: Vec<f64>,
    /// Realized voltages of the monitored buses.
    pub voltages: Vec<f64>,
    pub cost: f64,
    /// Sum of the stage-0 risk certificates of the solved plan.
    pub certificate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcState {
    pub t: usize,
    pub soc: Vec<f64>,
    pub window: ErrorWindow,
    log: Vec<StepRecord>,
}

impl MpcState {
    pub fn new(case: &DistributionCase, start: usize, initial: &SampleSet, window: usize) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::Data("error dataset is empty".into()));
        }
        if initial.dim() != case.n_xi() {
            return Err(Error::Data(format!("error dataset has dimension {}, case has {}", initial.dim(), case.n_xi())));
        }
        Ok(Self { t: start, soc: case.storage.iter().map(|s| s.b0).collect(), window: ErrorWindow::new(initial, window)?, log: Vec::new() })
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }
}

/// What a step applied and the plan it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub record: StepRecord,
    /// `None` when the fallback was applied.
    pub plan: Option<DistributionDecision>,
}

fn fallback(case: &DistributionCase, state: &MpcState, delta_h: f64) -> StageDecision {
    let mut dec = StageDecision::fallback(case);
    if let Some(prev) = state.log.last() {
        dec.q = prev.decision.q.clone();
        for ((pb, u), (b, prev_pb)) in dec.p_b.iter_mut().zip(&case.storage).zip(state.soc.iter().zip(&prev.decision.p_b)) {
            let lo = ((u.b_min - b) / delta_h).max(u.p_min);
            let hi = ((u.b_max - b) / delta_h).min(u.p_max);
            *pb = prev_pb.clamp(lo.min(hi), hi.max(lo));
        }
    }
    dec
}

/// Solve, apply the first stage under the realized error `realized`, and
/// advance the state.
pub fn mpc_step(state: &mut MpcState, case: &DistributionCase, cfg: &MpcConfig, realized: &[f64]) -> Result<StepOutcome> {
    if state.window.is_empty() {
        return Err(Error::Data("error dataset is empty".into()));
    }
    if realized.len() != case.n_xi() {
        return Err(Error::Data(format!("realized error has {} components, case has {}", realized.len(), case.n_xi())));
    }
    let a = &cfg.assembly;
    let samples = state.window.samples()?;
    let stages = cfg.forecast.horizon(case, state.t, a.horizon, &samples)?;
    let plan = assemble_distribution_opf(case, &stages, &state.soc, a)
        .and_then(|p| solve(&p.program, &cfg.solver).and_then(|sol| p.extract(&sol)));
    let (decision, plan, certificate) = match plan {
        Ok(d) => {
            let cert = d.report.constraints.iter().filter(|c| c.stage == 0).filter_map(|c| c.certificate).sum();
            (d.stages[0].clone(), Some(d), cert)
        }
        Err(e) => {
            log::warn!("step {}: horizon solve failed ({e}); applying fallback", state.t);
            (fallback(case, state, a.delta_h), None, 0.0)
        }
    };

    for (k, (b, u)) in state.soc.iter_mut().zip(&case.storage).enumerate() {
        let next = *b + decision.p_b[k] * a.delta_h;
        let tol = SOC_TOL * (1.0 + u.b_max.abs());
        if next < u.b_min - tol || next > u.b_max + tol {
            return Err(Error::StateBound { step: state.t, unit: u.name.clone(), value: next, lo: u.b_min, hi: u.b_max });
        }
        *b = next.clamp(u.b_min, u.b_max);
    }

    let (p, q) = realized_injections(case, &stages[0], &decision, realized);
    let v = case.feeder.voltage_profile(&p, &q)?;
    let record = StepRecord {
        step: state.t,
        fallback: plan.is_none(),
        voltages: case.monitored_buses().iter().map(|&m| v[m]).collect(),
        cost: realized_stage_cost(case, &stages[0], &decision, realized, a.delta_h),
        soc: state.soc.clone(),
        decision,
        certificate,
    };
    state.window.push(realized.to_vec());
    state.log.push(record.clone());
    state.t += 1;
    Ok(StepOutcome { record, plan })
}

/// Closed-loop trajectory of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub case: String,
    pub monitored: Vec<String>,
    pub inverters: Vec<String>,
    pub storage: Vec<String>,
    pub v_max: f64,
    pub step_hours: f64,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    /// Fraction of steps with a monitored voltage above `V_max`, per bus.
    pub fn overvoltage_frequency(&self) -> Vec<f64> {
        let n = self.records.len().max(1) as f64;
        (0..self.monitored.len())
            .map(|m| self.records.iter().filter(|r| r.voltages[m] > self.v_max).count() as f64 / n)
            .collect()
    }

    pub fn peak_voltage(&self) -> Vec<f64> {
        (0..self.monitored.len()).map(|m| self.records.iter().map(|r| r.voltages[m]).fold(f64::NEG_INFINITY, f64::max)).collect()
    }

    /// One row per step: time, decisions, realized outputs, cost, certificate.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string(), "hour".into(), "fallback".into()];
        header.extend(self.inverters.iter().map(|n| format!("alpha.{n}")));
        header.extend(self.inverters.iter().map(|n| format!("q.{n}")));
        header.extend(self.storage.iter().map(|n| format!("p_b.{n}")));
        header.extend(self.storage.iter().map(|n| format!("soc.{n}")));
        header.extend(self.monitored.iter().map(|n| format!("v.{n}")));
        header.extend(["cost".into(), "certificate".into()]);
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), format!("{:?}", self.step_hours * r.step as f64), u8::from(r.fallback).to_string()];
            let d = &r.decision;
            for v in d.alpha.iter().chain(&d.q).chain(&d.p_b).chain(&r.soc).chain(&r.voltages).chain([&r.cost, &r.certificate]) {
                row.push(format!("{v:?}"));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run `steps` closed-loop steps from clock `start`, drawing the realized
/// error of step `k` from row `k` of `trace`.
pub fn mpc_run(case: &DistributionCase, cfg: &MpcConfig, initial: &SampleSet, trace: &SampleSet, start: usize, steps: usize) -> Result<Trajectory> {
    if trace.len() < steps {
        return Err(Error::Data(format!("trace has {} rows for {steps} steps", trace.len())));
    }
    if trace.dim() != case.n_xi() {
        return Err(Error::Data(format!("trace has dimension {}, case has {}", trace.dim(), case.n_xi())));
    }
    if (cfg.assembly.delta_h - cfg.forecast.step_hours).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "storage step {} h differs from the clock step {} h",
            cfg.assembly.delta_h, cfg.forecast.step_hours
        )));
    }
    let mut state = MpcState::new(case, start, initial, cfg.window)?;
    for k in 0..steps {
        mpc_step(&mut state, case, cfg, trace.row(k))?;
    }
    let names = |buses: Vec<usize>| buses.into_iter().map(|b| case.feeder.bus_names[b].clone()).collect();
    Ok(Trajectory {
        case: case.name.clone(),
        monitored: names(case.monitored_buses()),
        inverters: case.inverters.iter().map(|u| u.name.clone()).collect(),
        storage: case.storage.iter().map(|u| u.name.clone()).collect(),
        v_max: case.feeder.v_max,
        step_hours: cfg.forecast.step_hours,
        records: state.log,
    })
}
