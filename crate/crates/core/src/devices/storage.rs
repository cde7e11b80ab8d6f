use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::program::{AffExpr, ConvexProgram, VarId};

/// Battery with unit round-trip efficiency. Energy in p.u.-hours, power in
/// p.u.; positive `P_B` charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub name: String,
    pub bus: usize,
    pub b_min: f64,
    pub b_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Initial state of charge.
    pub b0: f64,
}

impl StorageUnit {
    /// Unit whose power limits are a fraction of its energy capacity.
    pub fn with_power_ratio(name: impl Into<String>, bus: usize, b_max: f64, ratio: f64, b0: f64) -> Self {
        Self { name: name.into(), bus, b_min: 0.0, b_max, p_min: -ratio * b_max, p_max: ratio * b_max, b0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_min > self.b_max {
            return Err(Error::Config(format!("storage {}: b_min {} exceeds b_max {}", self.name, self.b_min, self.b_max)));
        }
        if self.p_min > self.p_max {
            return Err(Error::Config(format!("storage {}: p_min {} exceeds p_max {}", self.name, self.p_min, self.p_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageVars {
    /// Charging power per stage.
    pub p_b: Vec<VarId>,
    /// State of charge at the start of each stage plus the end state
    /// (`stages + 1` entries, the first constant).
    pub soc: Vec<AffExpr>,
}

/// Add `B^{τ+1} = B^τ + P_B^τ Δ` with power and energy bounds for `stages`
/// stages starting from `b_start`.
pub fn storage_constraints(prog: &mut ConvexProgram, unit: &StorageUnit, b_start: f64, stages: usize, delta_h: f64) -> Result<StorageVars> {
    unit.validate()?;
    if !(delta_h > 0.0) {
        return Err(Error::ParameterDomain { name: "delta", value: delta_h, expected: "must be positive" });
    }
    let tol = 1e-9 * (1.0 + unit.b_max.abs());
    if b_start < unit.b_min - tol || b_start > unit.b_max + tol {
        return Err(Error::Config(format!(
            "storage {}: state of charge {b_start} outside [{}, {}]",
            unit.name, unit.b_min, unit.b_max
        )));
    }
    let mut soc = vec![AffExpr::constant(b_start)];
    let mut p_b = Vec::with_capacity(stages);
    for tau in 0..stages {
        let p = prog.add_var(format!("{}.p_b[{tau}]", unit.name), unit.p_min, unit.p_max);
        let next = soc[tau].clone() + AffExpr::term(p, delta_h);
        prog.add_le(next.clone() - unit.b_max);
        prog.add_le(AffExpr::constant(unit.b_min) - next.clone());
        soc.push(next);
        p_b.push(p);
    }
    Ok(StorageVars { p_b, soc })
}
