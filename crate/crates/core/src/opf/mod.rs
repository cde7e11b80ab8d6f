//! Assembly of the full distribution and transmission programs.
//!
//! Both problems share one shape: an expected operating cost plus a sum of
//! worst-case CVaR terms weighted by `ρ`,
//!
//! ```text
//! min  Σ_τ cost_τ  +  Σ_τ Σ_o ( λ_oτ ε_τ + (1/N) Σᵢ s_ioτ )
//! ```
//!
//! where every risk term `o` comes from [`crate::dro::wc_cvar_epigraph`]
//! applied to a decision-affine constraint function `g_o(ξ)`. Secondary
//! constraints (inverter limits, unmonitored line flows) are sample-average
//! CVaR constraints at level `β = η`.
//!
//! The horizon counts stages: a 15 minute look-ahead at 5 minute steps is
//! `horizon = 3`.

mod distribution;
mod transmission;

use serde::{Deserialize, Serialize};

use crate::dro::{worst_case_cvar, AffineLoss, AmbiguitySet, DroTerm};
use crate::error::{check_nonneg, check_unit_interval, Error, Result};
use crate::program::Solution;

pub use distribution::{
    assemble_distribution_opf, distribution_census, realized_injections, realized_stage_cost, Census, DistStageData, DistributionDecision,
    DistributionProgram, StageDecision,
};
pub use transmission::{
    assemble_transmission_opf, balance_residual, flow_loss, TransStageData, TransmissionDecision, TransmissionInput,
    TransmissionProgram,
};

/// Knobs shared by both assemblies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    /// Weight of the risk terms.
    pub rho: f64,
    /// CVaR level of the risk terms and of the sample-average constraints.
    pub eta: f64,
    /// Wasserstein radius per stage; the last entry repeats for later stages.
    pub epsilon: Vec<f64>,
    /// Number of stages in one solve.
    pub horizon: usize,
    /// Stage length in hours.
    pub delta_h: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self { rho: 1.0, eta: 0.01, epsilon: vec![0.0], horizon: 3, delta_h: 5.0 / 60.0 }
    }
}

impl AssemblyConfig {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("rho", self.rho)?;
        check_unit_interval("eta", self.eta)?;
        if self.epsilon.is_empty() {
            return Err(Error::Config("at least one Wasserstein radius required".into()));
        }
        for &e in &self.epsilon {
            check_nonneg("epsilon", e)?;
        }
        if !(self.delta_h > 0.0) {
            return Err(Error::ParameterDomain { name: "delta_h", value: self.delta_h, expected: "must be positive" });
        }
        Ok(())
    }

    pub fn epsilon_at(&self, stage: usize) -> f64 {
        self.epsilon.get(stage).or(self.epsilon.last()).copied().unwrap_or(0.0)
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = vec![eps];
        self
    }
}

/// Which physical limit a risk term guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskTarget {
    /// `v_bus − V_max` (`upper`) or `V_min − v_bus`.
    Voltage { bus: usize, upper: bool },
    /// `±flow − limit` of `line` under catalog outage `outage`.
    Flow { line: usize, forward: bool, outage: usize },
}

/// One worst-case CVaR term of an assembled program.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskConstraint {
    pub label: String,
    pub stage: usize,
    pub target: RiskTarget,
    /// Constraint function `g(ξ)` with decision-affine coefficients.
    pub loss: AffineLoss,
    pub ambiguity: AmbiguitySet,
    /// Compiled epigraph; absent when `ρ = 0` leaves the term unpriced.
    pub term: Option<DroTerm>,
}

/// Risk of one constraint at a solved point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRisk {
    pub label: String,
    pub stage: usize,
    pub target: RiskTarget,
    /// `(λε + mean s) / ρ` read from the certificate, when `ρ > 0`.
    pub certificate: Option<f64>,
    /// Worst-case CVaR of `g` re-evaluated at the fixed decisions.
    pub cvar: f64,
}

/// Objective split of a solved program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub objective: f64,
    pub cost: f64,
    /// Sum of the certificate values (zero when `ρ = 0`).
    pub risk: f64,
    /// Sum of the re-evaluated worst-case CVaRs.
    pub total_cvar: f64,
    pub constraints: Vec<ConstraintRisk>,
}

pub(crate) fn risk_report(rho: f64, eta: f64, cost: f64, risks: &[RiskConstraint], sol: &Solution) -> Result<RiskReport> {
    let mut constraints = Vec::with_capacity(risks.len());
    let mut risk = 0.0;
    let mut total_cvar = 0.0;
    for r in risks {
        let certificate = match &r.term {
            Some(t) if rho > 0.0 => {
                let v = t.value(sol) / rho;
                risk += v;
                Some(v)
            }
            _ => None,
        };
        let cvar = worst_case_cvar(&r.loss.fix(&sol.x), eta, &r.ambiguity)?;
        total_cvar += cvar;
        constraints.push(ConstraintRisk { label: r.label.clone(), stage: r.stage, target: r.target, certificate, cvar });
    }
    Ok(RiskReport { objective: sol.objective, cost, risk, total_cvar, constraints })
}

pub(crate) fn require_optimal(sol: &Solution) -> Result<()> {
    if !sol.is_optimal() {
        return Err(Error::Extraction(format!("solution status is {:?}, refusing to extract a policy", sol.status)));
    }
    Ok(())
}
