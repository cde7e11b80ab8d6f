//! Out-of-sample Monte Carlo evaluation of solved decisions.
//!
//! Every draw is a stage-major stacked error vector. A constraint is violated
//! in a draw when its loss is positive at any stage (and, for lines, under
//! any outage and in either direction):
//!
//! ```text
//! voltage bus m:  ℓ = max_τ max(v_mτ − V_max, V_min − v_mτ)
//! line l:         ℓ = max_τ max_j |f^j_lτ| − f̄_l
//! aggregate       = fraction of draws with at least one ℓ > 0
//! ```

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::errors::{synth_errors, SynthSpec};
use crate::case::{DistributionCase, TransmissionCase};
use crate::dro::{empirical_cvar, empirical_var, SampleSet};
use crate::error::{Error, Result};
use crate::opf::{realized_injections, realized_stage_cost, DistStageData, DistributionDecision, TransmissionDecision, TransmissionInput, TransmissionProgram};

/// Source of out-of-sample error draws.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorSampler {
    /// Fresh draws from a seeded generator, disjoint from the training data.
    HeldOut(SynthSpec),
    /// Draws with replacement from a recorded dataset.
    InSample(SampleSet),
}

impl ErrorSampler {
    pub fn dim(&self) -> usize {
        match self {
            ErrorSampler::HeldOut(s) => s.std.len(),
            ErrorSampler::InSample(s) => s.dim(),
        }
    }

    pub fn draw(&self, count: usize, seed: u64) -> Result<SampleSet> {
        if count == 0 {
            return Err(Error::Data("at least one draw is needed".into()));
        }
        match self {
            ErrorSampler::HeldOut(spec) => synth_errors(&SynthSpec { count, ..spec.clone() }, seed),
            ErrorSampler::InSample(data) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rows = (0..count).map(|_| data.rows().choose(&mut rng).cloned().unwrap_or_default()).collect();
                SampleSet::with_names(data.names().to_vec(), rows)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    pub draws: usize,
    pub eta: f64,
    pub labels: Vec<String>,
    /// Per constraint, fraction of draws with a violation.
    pub frequency: Vec<f64>,
    /// Fraction of draws violating at least one constraint.
    pub aggregate: f64,
    /// Empirical `VaR_η` and `CVaR_η` of each constraint loss.
    pub var: Vec<f64>,
    pub cvar: Vec<f64>,
    /// Largest monitored value per constraint (voltage or absolute flow, p.u.).
    pub peak: Vec<f64>,
    pub cost_mean: f64,
    pub cost_std: f64,
}

/// Realized outcome of one draw.
struct DrawOutcome {
    losses: Vec<f64>,
    peaks: Vec<f64>,
    cost: f64,
}

impl ViolationStats {
    fn collect(labels: Vec<String>, eta: f64, outcomes: &[DrawOutcome]) -> Result<Self> {
        let n = outcomes.len();
        let nf = n as f64;
        let m = labels.len();
        let column = |c: usize| outcomes.iter().map(|o| o.losses[c]).collect::<Vec<f64>>();
        let frequency = (0..m).map(|c| outcomes.iter().filter(|o| o.losses[c] > 0.0).count() as f64 / nf).collect();
        let aggregate = outcomes.iter().filter(|o| o.losses.iter().any(|&l| l > 0.0)).count() as f64 / nf;
        let var = (0..m).map(|c| empirical_var(&column(c), eta)).collect::<Result<Vec<_>>>()?;
        let cvar = (0..m).map(|c| empirical_cvar(&column(c), eta)).collect::<Result<Vec<_>>>()?;
        let peak = (0..m).map(|c| outcomes.iter().map(|o| o.peaks[c]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let cost_mean = outcomes.iter().map(|o| o.cost).sum::<f64>() / nf;
        let cost_std = (outcomes.iter().map(|o| (o.cost - cost_mean).powi(2)).sum::<f64>() / nf).sqrt();
        Ok(Self { draws: n, eta, labels, frequency, aggregate, var, cvar, peak, cost_mean, cost_std })
    }
}

fn check_draws(draws: &SampleSet, want: usize) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::Data("no Monte Carlo draws".into()));
    }
    if draws.dim() != want {
        return Err(Error::Data(format!("draws have dimension {}, expected {want}", draws.dim())));
    }
    Ok(())
}

/// Evaluate a distribution plan over stacked draws of dimension `H · N_ξ`.
pub fn evaluate_distribution(
    case: &DistributionCase,
    stages: &[DistStageData],
    dec: &DistributionDecision,
    draws: &SampleSet,
    eta: f64,
    delta_h: f64,
) -> Result<ViolationStats> {
    let h = dec.stages.len();
    let nx = case.n_xi();
    check_draws(draws, h * nx)?;
    if stages.len() < h {
        return Err(Error::Data(format!("{} stage inputs for a {h}-stage plan", stages.len())));
    }
    let monitored = case.monitored_buses();
    let f = &case.feeder;
    let outcomes = draws
        .rows()
        .par_iter()
        .map(|row| {
            let mut losses = vec![f64::NEG_INFINITY; monitored.len()];
            let mut peaks = vec![f64::NEG_INFINITY; monitored.len()];
            let mut cost = 0.0;
            for (tau, sd) in dec.stages.iter().enumerate() {
                let xi = &row[tau * nx..(tau + 1) * nx];
                let (p, q) = realized_injections(case, &stages[tau], sd, xi);
                let v = f.voltage_profile(&p, &q)?;
                for (i, &m) in monitored.iter().enumerate() {
                    losses[i] = losses[i].max((v[m] - f.v_max).max(f.v_min - v[m]));
                    peaks[i] = peaks[i].max(v[m]);
                }
                cost += realized_stage_cost(case, &stages[tau], sd, xi, delta_h);
            }
            Ok(DrawOutcome { losses, peaks, cost })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = monitored.iter().map(|&m| format!("v[{}]", f.bus_names[m])).collect();
    ViolationStats::collect(labels, eta, &outcomes)
}

/// Evaluate transmission policies over stacked draws of dimension `H · N_w`
/// under every covered outage.
pub fn evaluate_transmission(
    case: &TransmissionCase,
    input: &TransmissionInput,
    program: &TransmissionProgram,
    dec: &TransmissionDecision,
    draws: &SampleSet,
    eta: f64,
) -> Result<ViolationStats> {
    let h = dec.e.first().map_or(0, Vec::len);
    check_draws(draws, h * case.n_w())?;
    let catalog = &program.catalog;
    let n_lines = case.grid.n_lines();
    let outcomes = draws
        .rows()
        .par_iter()
        .map(|xi| {
            let mut losses = vec![f64::NEG_INFINITY; n_lines];
            let mut peaks = vec![0.0f64; n_lines];
            for j in (0..catalog.len()).filter(|j| !program.uncovered.contains(j)) {
                let tripped = match catalog.outages()[j].kind {
                    crate::grid::OutageKind::Line(l) => Some(l),
                    _ => None,
                };
                for tau in 0..h {
                    let inj = dec.injections(case, catalog, input, j, tau, xi);
                    let ptdf = &program.ptdfs[j];
                    for l in (0..n_lines).filter(|&l| Some(l) != tripped) {
                        let flow: f64 = (0..inj.len()).map(|b| ptdf[(l, b)] * inj[b]).sum();
                        losses[l] = losses[l].max(flow.abs() - case.grid.lines[l].limit);
                        peaks[l] = peaks[l].max(flow.abs());
                    }
                }
            }
            let cost = (0..h)
                .map(|tau| {
                    case.generators
                        .iter()
                        .enumerate()
                        .map(|(d, g)| {
                            let u = dec.output(d, tau, xi, 0, 0.0);
                            g.c1 * u * u + g.c2 * u + g.c3
                        })
                        .sum::<f64>()
                })
                .sum();
            DrawOutcome { losses, peaks, cost }
        })
        .collect::<Vec<_>>();
    let labels = case.grid.lines.iter().map(|l| format!("flow[{}]", l.name)).collect();
    ViolationStats::collect(labels, eta, &outcomes)
}
