use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::OutageCatalog;
use crate::program::{AffExpr, ConvexProgram, Objective, VarId, WeightedSquare};

/// Dispatchable unit; power in p.u., costs per hour with `c1` per p.u.².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Wind farm injecting `p_nom + ξ_w` at its bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub name: String,
    pub bus: usize,
    pub p_nom: f64,
    /// Error component within one stage's block of `ξ`.
    pub xi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransLoad {
    pub name: String,
    pub bus: usize,
    pub p: f64,
}

/// Affine reserve policy of one generator over a horizon of `T` stages and
/// `N_w` error components per stage. `ξ` is stacked stage-major: column
/// `s·N_w + w` is component `w` of stage `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPolicy {
    pub stages: usize,
    pub n_w: usize,
    /// Nominal set point per stage.
    pub e: Vec<VarId>,
    /// `d[τ][c]` for `c < (τ + 1)·N_w`; later columns are structurally zero.
    pub d: Vec<Vec<VarId>>,
    /// Outage response per stage, keyed by outage id.
    pub r_mis: BTreeMap<usize, Vec<VarId>>,
}

impl GeneratorPolicy {
    /// Allocate `e`, causal `D` and `R` for every outage in `responds_to`.
    pub fn new(prog: &mut ConvexProgram, gen: &Generator, stages: usize, n_w: usize, responds_to: &[usize]) -> Self {
        let e = (0..stages).map(|t| prog.add_var(format!("{}.e[{t}]", gen.name), gen.p_min, gen.p_max)).collect();
        let d = (0..stages)
            .map(|t| (0..(t + 1) * n_w).map(|c| prog.add_free(format!("{}.D[{t},{c}]", gen.name))).collect())
            .collect();
        let r_mis = responds_to
            .iter()
            .map(|&j| (j, (0..stages).map(|t| prog.add_free(format!("{}.R[{j},{t}]", gen.name))).collect()))
            .collect();
        Self { stages, n_w, e, d, r_mis }
    }

    /// Columns of the stacked `ξ`.
    pub fn n_xi(&self) -> usize {
        self.stages * self.n_w
    }

    /// Coefficient of column `c` at stage `τ`, zero when not yet revealed.
    pub fn d_coef(&self, tau: usize, c: usize) -> AffExpr {
        self.d[tau].get(c).map_or_else(AffExpr::zero, |&v| AffExpr::var(v))
    }

    /// Dense `D` at a solved point.
    pub fn d_matrix(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.stages).map(|t| (0..self.n_xi()).map(|c| self.d_coef(t, c).eval(x)).collect()).collect()
    }
}

/// `e_τ + Σ_c D[τ, c] ξ_c + R^j_τ P_mis^j` for stage `τ` under outage `j`.
pub fn generator_output(policy: &GeneratorPolicy, tau: usize, xi: &[f64], catalog: &OutageCatalog, outage: usize) -> Result<AffExpr> {
    if xi.len() != policy.n_xi() {
        return Err(Error::Dimension(format!("stacked error has {} entries, policy expects {}", xi.len(), policy.n_xi())));
    }
    let o = catalog.get(outage)?;
    let mut out = AffExpr::var(policy.e[tau]);
    for (c, &v) in policy.d[tau].iter().enumerate() {
        out.add_term(v, xi[c]);
    }
    if o.p_mis != 0.0 {
        if let Some(r) = policy.r_mis.get(&outage) {
            out.add_term(r[tau], o.p_mis);
        }
    }
    Ok(out)
}

/// Expected quadratic generation cost of the base case over the samples of
/// stacked errors, summed over generators and stages:
///
/// ```text
/// (1/N) Σᵢ Σ_τ c1 (e_τ + D_τ ξ̂ᵢ)² + c2 (e_τ + D_τ ξ̂ᵢ) + c3
/// ```
pub fn generation_cost(gens: &[Generator], policies: &[GeneratorPolicy], samples: &[Vec<f64>]) -> Result<Objective> {
    if gens.len() != policies.len() {
        return Err(Error::Dimension("one policy per generator required".into()));
    }
    if samples.is_empty() {
        return Err(Error::Data("generation cost needs at least one sample".into()));
    }
    let n = samples.len() as f64;
    let mut obj = Objective::default();
    for (g, pol) in gens.iter().zip(policies) {
        if !(g.c1 >= 0.0) {
            return Err(Error::NonConvex(format!("generator {} has quadratic cost coefficient {}", g.name, g.c1)));
        }
        for tau in 0..pol.stages {
            for xi in samples {
                if xi.len() != pol.n_xi() {
                    return Err(Error::Dimension(format!("sample has {} entries, policy expects {}", xi.len(), pol.n_xi())));
                }
                let mut p = AffExpr::var(pol.e[tau]);
                for (c, &v) in pol.d[tau].iter().enumerate() {
                    p.add_term(v, xi[c]);
                }
                obj.linear.add_scaled(&p, g.c2 / n);
                if g.c1 > 0.0 {
                    obj.squares.push(WeightedSquare { weight: g.c1 / n, expr: p.compacted() });
                }
            }
            obj.linear += g.c3;
        }
    }
    Ok(obj)
}
