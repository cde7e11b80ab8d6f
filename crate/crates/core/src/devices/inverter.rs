use serde::{Deserialize, Serialize};

use crate::dro::{saa_cvar_constraint, SampleLoss};
use crate::error::{Error, Result};
use crate::program::{AffExpr, ConvexProgram, VarId};

/// Curtailable renewable inverter. `s_max` in p.u.; `power_factor` is the
/// minimum `cos θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResInverter {
    pub name: String,
    pub bus: usize,
    pub s_max: f64,
    pub power_factor: f64,
    /// Error component scaling the available power: `P̄ (1 + ξ_c)`.
    pub xi: usize,
}

impl ResInverter {
    pub fn tan_theta(&self) -> f64 {
        let c = self.power_factor;
        (1.0 - c * c).sqrt() / c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_max > 0.0) {
            return Err(Error::Config(format!("inverter {}: apparent power limit must be positive, got {}", self.name, self.s_max)));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(Error::Config(format!("inverter {}: power factor must lie in (0, 1], got {}", self.name, self.power_factor)));
        }
        Ok(())
    }
}

/// Decisions of one inverter at one stage: curtailment `α ∈ [0, 1]` and
/// reactive power `Q = Q⁺ − Q⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverterVars {
    pub alpha: VarId,
    pub q_plus: VarId,
    pub q_minus: VarId,
}

impl InverterVars {
    pub fn new(prog: &mut ConvexProgram, name: &str, stage: usize) -> Self {
        Self {
            alpha: prog.add_var(format!("{name}.alpha[{stage}]"), 0.0, 1.0),
            q_plus: prog.add_nonneg(format!("{name}.q_plus[{stage}]")),
            q_minus: prog.add_nonneg(format!("{name}.q_minus[{stage}]")),
        }
    }

    pub fn q(&self) -> AffExpr {
        AffExpr::var(self.q_plus) - AffExpr::var(self.q_minus)
    }

    /// `Q⁺ + Q⁻`, equal to `|Q|` whenever one part is zero.
    pub fn q_abs(&self) -> AffExpr {
        AffExpr::var(self.q_plus) + AffExpr::var(self.q_minus)
    }

    /// Injected active power `(1 − α) P_av` for a given available power.
    pub fn injected(&self, available: f64) -> AffExpr {
        AffExpr::constant(available) - AffExpr::term(self.alpha, available)
    }
}

/// Sample-average CVaR versions of the apparent-power and power-factor
/// limits for one stage:
///
/// ```text
/// ((1 − α) P̂ᵢ)² + Q² − S̄² ≤ 0
/// |Q| − tan θ (1 − α) P̂ᵢ ≤ 0
/// ```
///
/// each enforced as `CVaR_β ≤ 0` over the samples `P̂ᵢ`.
pub fn inverter_constraints(prog: &mut ConvexProgram, inv: &ResInverter, vars: &InverterVars, available: &[f64], beta: f64) -> Result<()> {
    inv.validate()?;
    let apparent: Vec<SampleLoss> = available
        .iter()
        .map(|&p| SampleLoss::SumSquares { squares: vec![vars.injected(p), vars.q()], affine: AffExpr::constant(-inv.s_max * inv.s_max) })
        .collect();
    saa_cvar_constraint(prog, &apparent, beta)?;
    let t = inv.tan_theta();
    let pf: Vec<SampleLoss> = available.iter().map(|&p| SampleLoss::Affine(vars.q_abs() - vars.injected(p) * t)).collect();
    saa_cvar_constraint(prog, &pf, beta)?;
    Ok(())
}
