use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::program::{AffExpr, ConvexProgram, VarId};

/// Value of a constrained quantity `g` under one training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SampleLoss {
    /// `g = expr`
    Affine(AffExpr),
    /// `g = Σⱼ squaresⱼ² + affine`, lifted with a rotated second-order cone.
    SumSquares { squares: Vec<AffExpr>, affine: AffExpr },
}

impl SampleLoss {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SampleLoss::Affine(e) => e.eval(x),
            SampleLoss::SumSquares { squares, affine } => {
                affine.eval(x) + squares.iter().map(|e| e.eval(x).powi(2)).sum::<f64>()
            }
        }
    }
}

/// Variables introduced by [`saa_cvar_constraint`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaCvar {
    pub varpi: VarId,
    pub hinges: Vec<VarId>,
}

/// Enforce the sample-average `CVaR_β(g) <= 0`:
///
/// ```text
/// hᵢ >= 0,   hᵢ >= gᵢ + ϖ,   (1/N) Σᵢ hᵢ <= ϖβ
/// ```
///
/// `ϖ` plays the role of `−t` in `min_t t + mean[g − t]_+ / β`.
pub fn saa_cvar_constraint(prog: &mut ConvexProgram, g: &[SampleLoss], beta: f64) -> Result<SaaCvar> {
    check_unit_interval("beta", beta)?;
    if g.is_empty() {
        return Err(Error::Construction("sample-average CVaR needs at least one sample".into()));
    }
    let n = g.len() as f64;
    let varpi = prog.add_free("varpi");
    let mut hinges = Vec::with_capacity(g.len());
    let mut mean = AffExpr::zero();
    for (i, gi) in g.iter().enumerate() {
        let h = prog.add_nonneg(format!("hinge[{i}]"));
        match gi {
            SampleLoss::Affine(e) => {
                prog.add_le(e.clone() + AffExpr::var(varpi) - AffExpr::var(h));
            }
            SampleLoss::SumSquares { squares, affine } => {
                // Σ sq² <= w with w = h − affine − ϖ, as ‖(sq, (w−1)/2)‖ <= (w+1)/2
                let w = AffExpr::var(h) - affine - AffExpr::var(varpi);
                let mut u = squares.clone();
                u.push((w.clone() - 1.0) * 0.5);
                prog.add_soc((w + 1.0) * 0.5, u);
            }
        }
        mean.add_term(h, 1.0 / n);
        hinges.push(h);
    }
    prog.add_le(mean - AffExpr::term(varpi, beta));
    Ok(SaaCvar { varpi, hinges })
}
