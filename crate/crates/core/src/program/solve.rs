//! Solve contract: a backend accepts a [`ConvexProgram`] and returns primal
//! values; this module re-checks every constraint on the returned point
//! before reporting [`SolveStatus::Optimal`].

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{reformulate, AffExpr, ConstraintKind, ConvexProgram, VarId, FEASIBILITY_TOL};
use crate::error::{Error, Result};

mod clarabel_backend;
mod simplex_backend;

pub use clarabel_backend::ClarabelBackend;
pub use simplex_backend::SimplexBackend;

/// Environment variable overriding [`SolverConfig::feasibility_tol`].
pub const ENV_SOLVER_TOL: &str = "DROPF_SOLVER_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// Interior-point conic solver (LP, QP, SOCP).
    Clarabel,
    /// Primal simplex, LP only.
    Simplex,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clarabel" => Ok(BackendKind::Clarabel),
            "simplex" => Ok(BackendKind::Simplex),
            other => Err(Error::Config(format!("unknown backend '{other}' (expected clarabel or simplex)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: BackendKind,
    /// Absolute tolerance for the independent feasibility re-check.
    pub feasibility_tol: f64,
    /// Stopping tolerance handed to the interior-point backend.
    pub precision: f64,
    pub max_iter: u32,
    /// Rewrite quadratic objectives as a second-order cone epigraph even when
    /// the backend handles them natively.
    pub conic_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Clarabel,
            feasibility_tol: FEASIBILITY_TOL,
            precision: 1e-9,
            max_iter: 400,
            conic_objective: false,
        }
    }
}

impl SolverConfig {
    /// Default configuration with `DROPF_SOLVER_TOL` applied when set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(ENV_SOLVER_TOL) {
            let tol: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_SOLVER_TOL}={v} is not a number")))?;
            if !(tol > 0.0) {
                return Err(Error::Config(format!("{ENV_SOLVER_TOL} must be positive, got {tol}")));
            }
            cfg.feasibility_tol = tol;
        }
        Ok(cfg)
    }

    pub fn with_backend(mut self, backend: BackendKind) -> Self {
        self.backend = backend;
        self
    }
}

/// What a backend hands back before verification.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// One entry per program constraint: a single multiplier for linear
    /// rows, a cone vector for second-order cones.
    pub duals: Option<Vec<Vec<f64>>>,
    pub detail: String,
}

pub trait Backend {
    fn kind(&self) -> BackendKind;
    fn supports_quadratic(&self) -> bool;
    fn supports_soc(&self) -> bool;
    fn solve_raw(&self, prog: &ConvexProgram, cfg: &SolverConfig) -> Result<RawSolution>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Option<Vec<Vec<f64>>>,
    /// Largest constraint violation found by the independent re-check.
    pub max_violation: f64,
    pub solve_seconds: f64,
    pub backend: BackendKind,
    pub detail: String,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, id: VarId) -> f64 {
        self.x[id.0]
    }

    pub fn eval(&self, e: &AffExpr) -> f64 {
        e.eval(&self.x)
    }

    /// Turn a non-optimal status into an error.
    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver { status: self.status, detail: self.detail })
        }
    }
}

fn backend_for(kind: BackendKind) -> Box<dyn Backend> {
    match kind {
        BackendKind::Clarabel => Box::new(ClarabelBackend),
        BackendKind::Simplex => Box::new(SimplexBackend),
    }
}

/// Solve `prog` with the configured backend and verify the returned point.
///
/// Infeasible and unbounded problems come back as a status, not an error.
/// Errors are reserved for malformed programs and backend/program mismatches.
pub fn solve(prog: &ConvexProgram, cfg: &SolverConfig) -> Result<Solution> {
    prog.validate()?;
    let backend = backend_for(cfg.backend);
    let started = Instant::now();

    if prog.has_cones() && !backend.supports_soc() {
        return Err(Error::Unsupported(format!("{:?} backend cannot handle second-order cones", cfg.backend)));
    }
    let needs_lift = prog.has_quadratic_objective() && (cfg.conic_objective || !backend.supports_quadratic());
    let raw = if needs_lift {
        if !backend.supports_soc() {
            return Err(Error::Unsupported(format!("{:?} backend cannot handle a quadratic objective", cfg.backend)));
        }
        let lifted = reformulate::lift_quadratic_objective(prog);
        let mut raw = backend.solve_raw(&lifted, cfg)?;
        raw.x.truncate(prog.num_vars());
        if let Some(d) = raw.duals.as_mut() {
            d.truncate(prog.constraints().len());
        }
        raw
    } else if prog.num_vars() == 0 {
        constant_program(prog)
    } else {
        backend.solve_raw(prog, cfg)?
    };

    let mut status = raw.status;
    let mut detail = raw.detail;
    let max_violation = if raw.x.len() == prog.num_vars() && raw.x.iter().all(|v| v.is_finite()) {
        prog.max_violation(&raw.x)
    } else {
        f64::INFINITY
    };
    if status == SolveStatus::Optimal && max_violation > cfg.feasibility_tol {
        let worst = prog
            .worst_constraint(&raw.x)
            .map(|(i, v)| format!("; worst row {i} in block '{}' violated by {v:.3e}", prog.block_name(prog.constraints()[i].block)))
            .unwrap_or_default();
        detail = format!("re-check found violation {max_violation:.3e} > {:.1e}{worst}", cfg.feasibility_tol);
        status = SolveStatus::NumericalFailure;
    }
    let objective = if raw.x.len() == prog.num_vars() { prog.objective().eval(&raw.x) } else { f64::NAN };
    Ok(Solution {
        status,
        x: raw.x,
        objective,
        duals: raw.duals,
        max_violation,
        solve_seconds: started.elapsed().as_secs_f64(),
        backend: cfg.backend,
        detail,
    })
}

fn constant_program(prog: &ConvexProgram) -> RawSolution {
    let feasible = prog.constraints().iter().all(|c| super::constraint_violation(&c.kind, &[]) <= 0.0);
    RawSolution {
        status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
        x: Vec::new(),
        duals: None,
        detail: "no variables".to_string(),
    }
}

/// Constraint rows grouped the way conic backends want them:
/// equalities first, then inequalities (including finite variable bounds),
/// then one block per cone.
pub(crate) struct RowLayout {
    pub eq: Vec<usize>,
    pub le: Vec<usize>,
    pub soc: Vec<usize>,
}

impl RowLayout {
    pub fn new(prog: &ConvexProgram) -> Self {
        let mut layout = RowLayout { eq: Vec::new(), le: Vec::new(), soc: Vec::new() };
        for (i, c) in prog.constraints().iter().enumerate() {
            match c.kind {
                ConstraintKind::Eq(_) => layout.eq.push(i),
                ConstraintKind::Le(_) => layout.le.push(i),
                ConstraintKind::Soc { .. } => layout.soc.push(i),
            }
        }
        layout
    }
}
