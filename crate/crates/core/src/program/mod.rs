//! Solver-agnostic convex program representation.
//!
//! A [`ConvexProgram`] is a list of bounded variables, affine constraint
//! blocks (equalities, inequalities, second-order cones) and an objective of
//! the form
//!
//! ```text
//! minimize  c₀ + cᵀx + Σₖ wₖ (gₖᵀx + hₖ)²        wₖ ≥ 0
//! ```
//!
//! The quadratic part is stored as a sum of weighted squares, so every
//! program built through this API is convex by construction. Backends in
//! [`solve`] translate the program into their native form; no backend types
//! appear here.

mod expr;
pub mod reformulate;
pub mod solve;
pub mod text;

pub use expr::{dot, AffExpr, VarId};
pub use solve::{solve, Backend, BackendKind, Solution, SolveStatus, SolverConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance used to verify constraint feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Index of a named constraint block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// `expr == 0`
    Eq(AffExpr),
    /// `expr <= 0`
    Le(AffExpr),
    /// `‖u‖₂ <= t`
    Soc { t: AffExpr, u: Vec<AffExpr> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub block: BlockId,
    pub kind: ConstraintKind,
}

/// `weight * expr²`, `weight >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSquare {
    pub weight: f64,
    pub expr: AffExpr,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub linear: AffExpr,
    pub squares: Vec<WeightedSquare>,
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.linear.eval(x)
            + self
                .squares
                .iter()
                .map(|s| {
                    let v = s.expr.eval(x);
                    s.weight * v * v
                })
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexProgram {
    vars: Vec<Variable>,
    blocks: Vec<String>,
    constraints: Vec<Constraint>,
    objective: Objective,
    current_block: BlockId,
}

impl Default for ConvexProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConvexProgram {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            blocks: vec!["main".to_string()],
            constraints: Vec::new(),
            objective: Objective::default(),
            current_block: BlockId(0),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(Variable { name: name.into(), lower, upper });
        id
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, f64::INFINITY)
    }

    /// Make subsequent constraints belong to the named block, creating it
    /// on first use.
    pub fn set_block(&mut self, name: &str) -> BlockId {
        let id = match self.blocks.iter().position(|b| b == name) {
            Some(i) => BlockId(i),
            None => {
                self.blocks.push(name.to_string());
                BlockId(self.blocks.len() - 1)
            }
        };
        self.current_block = id;
        id
    }

    pub fn add_eq(&mut self, expr: AffExpr) -> usize {
        self.push(ConstraintKind::Eq(expr.compacted()))
    }

    /// `expr <= 0`.
    pub fn add_le(&mut self, expr: AffExpr) -> usize {
        self.push(ConstraintKind::Le(expr.compacted()))
    }

    /// `lhs <= rhs`.
    pub fn add_le2(&mut self, lhs: AffExpr, rhs: AffExpr) -> usize {
        self.add_le(lhs - rhs)
    }

    pub fn add_soc(&mut self, t: AffExpr, u: Vec<AffExpr>) -> usize {
        let u = u.into_iter().map(AffExpr::compacted).collect();
        self.push(ConstraintKind::Soc { t: t.compacted(), u })
    }

    fn push(&mut self, kind: ConstraintKind) -> usize {
        self.constraints.push(Constraint { block: self.current_block, kind });
        self.constraints.len() - 1
    }

    pub fn add_objective(&mut self, expr: &AffExpr) {
        self.objective.linear += expr;
    }

    /// Add `weight * expr²` to the objective.
    pub fn add_objective_square(&mut self, weight: f64, expr: AffExpr) -> Result<()> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::NonConvex(format!("square weight {weight} must be finite and nonnegative")));
        }
        if weight > 0.0 {
            self.objective.squares.push(WeightedSquare { weight, expr: expr.compacted() });
        }
        Ok(())
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn blocks(&self) -> &[String] {
        &self.blocks
    }

    pub fn block_name(&self, id: BlockId) -> &str {
        &self.blocks[id.0]
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn has_quadratic_objective(&self) -> bool {
        !self.objective.squares.is_empty()
    }

    pub fn has_cones(&self) -> bool {
        self.constraints.iter().any(|c| matches!(c.kind, ConstraintKind::Soc { .. }))
    }

    /// Count constraints of each kind as `(eq, le, soc)`.
    pub fn constraint_counts(&self) -> (usize, usize, usize) {
        self.constraints.iter().fold((0, 0, 0), |(e, l, s), c| match c.kind {
            ConstraintKind::Eq(_) => (e + 1, l, s),
            ConstraintKind::Le(_) => (e, l + 1, s),
            ConstraintKind::Soc { .. } => (e, l, s + 1),
        })
    }

    /// Number of constraints in the named block.
    pub fn block_len(&self, name: &str) -> usize {
        match self.blocks.iter().position(|b| b == name) {
            Some(i) => self.constraints.iter().filter(|c| c.block.0 == i).count(),
            None => 0,
        }
    }

    /// Check that every expression references registered variables and that
    /// bounds are consistent.
    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::Construction(format!("variable {i} ({}) has bounds [{}, {}]", v.name, v.lower, v.upper)));
            }
        }
        let check = |e: &AffExpr, what: &str| -> Result<()> {
            if let Some(m) = e.max_var() {
                if m.0 >= n {
                    return Err(Error::Construction(format!("{what} references unregistered variable {}", m.0)));
                }
            }
            if !e.constant.is_finite() || e.terms.iter().any(|&(_, c)| !c.is_finite()) {
                return Err(Error::Construction(format!("{what} has a non-finite coefficient")));
            }
            Ok(())
        };
        check(&self.objective.linear, "objective")?;
        for s in &self.objective.squares {
            check(&s.expr, "objective square")?;
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let what = format!("constraint {i} in block {}", self.blocks[c.block.0]);
            match &c.kind {
                ConstraintKind::Eq(e) | ConstraintKind::Le(e) => check(e, &what)?,
                ConstraintKind::Soc { t, u } => {
                    check(t, &what)?;
                    for e in u {
                        check(e, &what)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest constraint or bound violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for c in &self.constraints {
            worst = worst.max(constraint_violation(&c.kind, x));
        }
        worst
    }

    /// Index and violation of the worst constraint at `x`.
    pub fn worst_constraint(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (i, constraint_violation(&c.kind, x)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub(crate) fn constraint_violation(kind: &ConstraintKind, x: &[f64]) -> f64 {
    match kind {
        ConstraintKind::Eq(e) => e.eval(x).abs(),
        ConstraintKind::Le(e) => e.eval(x).max(0.0),
        ConstraintKind::Soc { t, u } => {
            let norm = u.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
            (norm - t.eval(x)).max(0.0)
        }
    }
}

/// Add `±e_j <= t` for every component of `exprs`.
///
/// An empty vector adds nothing, leaving `t` unconstrained by this call.
pub fn expand_inf_norm(prog: &mut ConvexProgram, exprs: &[AffExpr], bound: &AffExpr) {
    for e in exprs {
        prog.add_le(e.clone() - bound);
        prog.add_le(-e.clone() - bound);
    }
}
