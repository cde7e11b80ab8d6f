use serde::{Deserialize, Serialize};

use super::{cvar_to_max_affine, empirical_cvar, AffineLoss, AmbiguitySet, MaxAffineLoss};
use crate::error::{check_nonneg, Error, Result};
use crate::program::{expand_inf_norm, solve, AffExpr, BackendKind, ConvexProgram, Solution, SolverConfig, VarId};

/// Auxiliary variables of one worst-case expectation block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroCertificate {
    pub lambda: VarId,
    /// One epigraph variable per training sample.
    pub s: Vec<VarId>,
    /// `varsigma[i][k]` holds the `L` support multipliers for sample `i`, piece `k`.
    pub varsigma: Vec<Vec<Vec<VarId>>>,
    /// CVaR threshold, present when the block was built from a CVaR loss.
    pub kappa: Option<VarId>,
}

/// A compiled worst-case expectation: its certificate and the objective
/// contribution `λε + (1/N) Σᵢ sᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroTerm {
    pub certificate: DroCertificate,
    pub objective: AffExpr,
}

impl DroTerm {
    /// Value of the objective contribution at a solved point.
    pub fn value(&self, sol: &Solution) -> f64 {
        sol.eval(&self.objective)
    }
}

/// Add the dual reformulation of `ρ · sup_{P ∈ ball} E_P[loss]` to `prog`.
///
/// Constraints go into the program's current block. `ρ` multiplies inside
/// both the epigraph rows and the norm rows:
///
/// ```text
/// ρ(b_k + ⟨a_k, ξ̂ᵢ⟩ + ⟨ςᵢₖ, d − Hξ̂ᵢ⟩) <= sᵢ
/// ‖Hᵀςᵢₖ − ρ a_k‖_∞ <= λ
/// ```
pub fn wc_expectation_epigraph(prog: &mut ConvexProgram, loss: &MaxAffineLoss, amb: &AmbiguitySet, rho: f64) -> Result<DroTerm> {
    check_nonneg("rho", rho)?;
    if loss.dim() != amb.dim() {
        return Err(Error::Construction(format!(
            "loss has dimension {} but the ambiguity set has dimension {}",
            loss.dim(),
            amb.dim()
        )));
    }
    let support = amb.support();
    let data = amb.data();
    let n = data.len();
    let rows = support.rows();

    let lambda = prog.add_nonneg("lambda");
    let s: Vec<VarId> = (0..n).map(|i| prog.add_free(format!("s[{i}]"))).collect();
    let mut varsigma = Vec::with_capacity(n);

    for (i, xi) in data.rows().iter().enumerate() {
        // d − Hξ̂ᵢ does not depend on the piece
        let slack: Vec<f64> = support
            .h()
            .iter()
            .zip(support.d())
            .map(|(h, d)| d - h.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let mut per_piece = Vec::with_capacity(loss.pieces().len());
        for (k, piece) in loss.pieces().iter().enumerate() {
            let vs: Vec<VarId> = (0..rows).map(|l| prog.add_nonneg(format!("varsigma[{i},{k},{l}]"))).collect();

            let mut row = piece.at(xi).scaled(rho);
            for (&v, &sl) in vs.iter().zip(&slack) {
                row.add_term(v, rho * sl);
            }
            row.add_term(s[i], -1.0);
            prog.add_le(row);

            // without support rows the norm rows do not depend on the sample
            if rows > 0 || i == 0 {
                let norm_args: Vec<AffExpr> = (0..loss.dim())
                    .map(|j| {
                        let mut e = piece.a[j].scaled(-rho);
                        for (l, &v) in vs.iter().enumerate() {
                            e.add_term(v, support.h()[l][j]);
                        }
                        e.compacted()
                    })
                    // `±0 <= λ` is implied by λ >= 0
                    .filter(|e| !(e.is_constant() && e.constant == 0.0))
                    .collect();
                expand_inf_norm(prog, &norm_args, &AffExpr::var(lambda));
            }
            per_piece.push(vs);
        }
        varsigma.push(per_piece);
    }

    let mut objective = AffExpr::term(lambda, amb.radius());
    for &si in &s {
        objective.add_term(si, 1.0 / n as f64);
    }
    Ok(DroTerm { certificate: DroCertificate { lambda, s, varsigma, kappa: None }, objective })
}

/// Worst-case CVaR block: allocates `κ`, builds the two-piece loss and
/// compiles it with [`wc_expectation_epigraph`].
pub fn wc_cvar_epigraph(prog: &mut ConvexProgram, g: &AffineLoss, eta: f64, amb: &AmbiguitySet, rho: f64) -> Result<DroTerm> {
    let kappa = prog.add_free("kappa");
    let loss = cvar_to_max_affine(g, eta, kappa)?;
    let mut term = wc_expectation_epigraph(prog, &loss, amb, rho)?;
    term.certificate.kappa = Some(kappa);
    Ok(term)
}

fn numeric_config() -> SolverConfig {
    SolverConfig { backend: BackendKind::Simplex, ..SolverConfig::default() }
}

/// `sup_{P ∈ ball} E_P[loss]` for a numeric loss, solved as a small LP with
/// the simplex backend.
pub fn wc_expectation_value(loss: &MaxAffineLoss, amb: &AmbiguitySet) -> Result<f64> {
    wc_expectation_value_with(loss, amb, &numeric_config())
}

pub fn wc_expectation_value_with(loss: &MaxAffineLoss, amb: &AmbiguitySet, cfg: &SolverConfig) -> Result<f64> {
    if !loss.is_numeric() {
        return Err(Error::Construction("wc_expectation_value needs a loss without decision variables".into()));
    }
    let mut prog = ConvexProgram::new();
    let term = wc_expectation_epigraph(&mut prog, loss, amb, 1.0)?;
    prog.add_objective(&term.objective);
    Ok(solve(&prog, cfg)?.require_optimal()?.objective)
}

/// Worst-case `CVaR_η` of a numeric affine loss, minimized over `κ`.
///
/// With unbounded support the value has a closed form,
///
/// ```text
/// CVaR_η({gᵢ}) + ε ‖a‖_∞ / η
/// ```
///
/// because the transport penalty does not depend on `κ`. Bounded supports
/// are solved as an LP.
pub fn worst_case_cvar(g: &AffineLoss, eta: f64, amb: &AmbiguitySet) -> Result<f64> {
    if !g.is_numeric() {
        return Err(Error::Construction("worst_case_cvar needs a loss without decision variables".into()));
    }
    if g.dim() != amb.dim() {
        return Err(Error::Construction(format!("loss has dimension {} but the ambiguity set has dimension {}", g.dim(), amb.dim())));
    }
    if amb.support().is_unbounded() {
        let values: Vec<f64> = amb.data().rows().iter().map(|xi| g.eval(xi, &[])).collect();
        let slope = g.a.iter().map(|e| e.constant.abs()).fold(0.0, f64::max);
        return Ok(empirical_cvar(&values, eta)? + amb.radius() * slope / eta);
    }
    worst_case_cvar_lp(g, eta, amb)
}

fn worst_case_cvar_lp(g: &AffineLoss, eta: f64, amb: &AmbiguitySet) -> Result<f64> {
    let mut prog = ConvexProgram::new();
    let term = wc_cvar_epigraph(&mut prog, g, eta, amb, 1.0)?;
    prog.add_objective(&term.objective);
    Ok(solve(&prog, &numeric_config())?.require_optimal()?.objective)
}
