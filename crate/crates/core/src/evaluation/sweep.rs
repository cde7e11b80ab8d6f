//! `(ρ, ε)` tradeoff sweeps.
//!
//! Every cell is an independent assemble, solve and extract run; cells run
//! in parallel and are merged in grid order, ρ-major within each ε. A cell
//! whose solve fails keeps its row with the error message.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::montecarlo::{evaluate_distribution, evaluate_transmission, ErrorSampler, ViolationStats};
use crate::case::{DistributionCase, TransmissionCase};
use crate::error::{Error, Result};
use crate::opf::{assemble_distribution_opf, assemble_transmission_opf, AssemblyConfig, DistStageData, RiskReport, TransmissionInput};
use crate::program::{solve, SolverConfig};

pub const SWEEP_SCHEMA: &str = "dropf-sweep/1";

/// Out-of-sample evaluation attached to every sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub sampler: ErrorSampler,
    pub draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub epsilon: f64,
    pub report: Option<RiskReport>,
    pub stats: Option<ViolationStats>,
    pub error: Option<String>,
    /// Wall time of assembly and solve; not part of the written artifacts.
    #[serde(skip)]
    pub seconds: f64,
}

impl SweepRow {
    pub fn cost(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.cost)
    }

    pub fn total_cvar(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.total_cvar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub schema: String,
    pub case: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Row of a grid cell.
    pub fn get(&self, rho: f64, epsilon: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.rho == rho && r.epsilon == epsilon)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rho", "epsilon", "objective", "cost", "risk", "total_cvar", "violation_probability", "mc_cost_mean", "mc_cost_std", "error"])?;
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        for r in &self.rows {
            let rep = r.report.as_ref();
            let st = r.stats.as_ref();
            w.write_record([
                format!("{:?}", r.rho),
                format!("{:?}", r.epsilon),
                f(rep.map(|x| x.objective)),
                f(rep.map(|x| x.cost)),
                f(rep.map(|x| x.risk)),
                f(rep.map(|x| x.total_cvar)),
                f(st.map(|s| s.aggregate)),
                f(st.map(|s| s.cost_mean)),
                f(st.map(|s| s.cost_std)),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

fn grid(rhos: &[f64], epsilons: &[f64]) -> Result<Vec<(f64, f64)>> {
    if rhos.is_empty() || epsilons.is_empty() {
        return Err(Error::Config("sweep grids must be non-empty".into()));
    }
    Ok(epsilons.iter().flat_map(|&e| rhos.iter().map(move |&r| (r, e))).collect())
}

fn finish<F>(cells: Vec<(f64, f64)>, run: F) -> Vec<SweepRow>
where
    F: Fn(f64, f64) -> Result<(RiskReport, Option<ViolationStats>)> + Sync,
{
    cells
        .into_par_iter()
        .map(|(rho, epsilon)| {
            let start = Instant::now();
            let out = run(rho, epsilon);
            let seconds = start.elapsed().as_secs_f64();
            match out {
                Ok((report, stats)) => SweepRow { rho, epsilon, report: Some(report), stats, error: None, seconds },
                Err(e) => {
                    log::warn!("sweep cell rho={rho} epsilon={epsilon} failed: {e}");
                    SweepRow { rho, epsilon, report: None, stats: None, error: Some(e.to_string()), seconds }
                }
            }
        })
        .collect()
}

/// Sweep the distribution program over `rhos × epsilons`.
#[allow(clippy::too_many_arguments)]
pub fn distribution_sweep(
    case: &DistributionCase,
    stages: &[DistStageData],
    soc0: &[f64],
    base: &AssemblyConfig,
    rhos: &[f64],
    epsilons: &[f64],
    solver: &SolverConfig,
    mc: Option<&MonteCarlo>,
) -> Result<SweepTable> {
    let cells = grid(rhos, epsilons)?;
    let draws = mc.map(|m| m.sampler.draw(m.draws, m.seed)).transpose()?;
    let rows = finish(cells, |rho, eps| {
        let cfg = AssemblyConfig { rho, epsilon: vec![eps], ..base.clone() };
        let p = assemble_distribution_opf(case, stages, soc0, &cfg)?;
        let dec = p.extract(&solve(&p.program, solver)?)?;
        let stats = draws.as_ref().map(|d| evaluate_distribution(case, stages, &dec, d, cfg.eta, cfg.delta_h)).transpose()?;
        Ok((dec.report, stats))
    });
    Ok(SweepTable { schema: SWEEP_SCHEMA.into(), case: case.name.clone(), rows })
}

/// Sweep the transmission program over `rhos × epsilons`.
#[allow(clippy::too_many_arguments)]
pub fn transmission_sweep(
    case: &TransmissionCase,
    input: &TransmissionInput,
    base: &AssemblyConfig,
    rhos: &[f64],
    epsilons: &[f64],
    solver: &SolverConfig,
    mc: Option<&MonteCarlo>,
) -> Result<SweepTable> {
    let cells = grid(rhos, epsilons)?;
    let draws = mc.map(|m| m.sampler.draw(m.draws, m.seed)).transpose()?;
    let rows = finish(cells, |rho, eps| {
        let cfg = AssemblyConfig { rho, epsilon: vec![eps], ..base.clone() };
        let p = assemble_transmission_opf(case, input, &cfg)?;
        let dec = p.extract(&solve(&p.program, solver)?)?;
        let stats = draws.as_ref().map(|d| evaluate_transmission(case, input, &p, &dec, d, cfg.eta)).transpose()?;
        Ok((dec.report, stats))
    });
    Ok(SweepTable { schema: SWEEP_SCHEMA.into(), case: case.name.clone(), rows })
}
