use std::time::Duration;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use super::{Backend, BackendKind, RawSolution, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::program::{ConstraintKind, ConvexProgram};

/// Wall-clock cap after which a simplex solve reports a numerical failure.
pub const SIMPLEX_TIME_LIMIT_SECS: u64 = 60;

/// LP-only backend; used to cross-check the conic backend on linear programs.
pub struct SimplexBackend;

impl Backend for SimplexBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Simplex
    }

    fn supports_quadratic(&self) -> bool {
        false
    }

    fn supports_soc(&self) -> bool {
        false
    }

    fn solve_raw(&self, prog: &ConvexProgram, _cfg: &SolverConfig) -> Result<RawSolution> {
        if prog.has_quadratic_objective() || prog.has_cones() {
            return Err(Error::Unsupported("simplex backend accepts linear programs only".into()));
        }
        let mut coef = vec![0.0; prog.num_vars()];
        for &(v, c) in &prog.objective().linear.terms {
            coef[v.0] += c;
        }
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        lp.set_time_limit(Duration::from_secs(SIMPLEX_TIME_LIMIT_SECS));
        // free variables enter as a difference of two nonnegative parts
        let vars: Vec<_> = prog
            .vars()
            .iter()
            .zip(&coef)
            .map(|(v, &c)| {
                if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
                    (lp.add_var(c, (0.0, f64::INFINITY)), Some(lp.add_var(-c, (0.0, f64::INFINITY))))
                } else {
                    (lp.add_var(c, (v.lower, v.upper)), None)
                }
            })
            .collect();
        for c in prog.constraints() {
            let (e, op) = match &c.kind {
                ConstraintKind::Eq(e) => (e, ComparisonOp::Eq),
                ConstraintKind::Le(e) => (e, ComparisonOp::Le),
                ConstraintKind::Soc { .. } => unreachable!(),
            };
            let mut lin = LinearExpr::empty();
            for &(v, k) in &e.terms {
                let (pos, neg) = vars[v.0];
                lin.add(pos, k);
                if let Some(neg) = neg {
                    lin.add(neg, -k);
                }
            }
            lp.add_constraint(lin, op, -e.constant);
        }
        let (status, x, detail) = match lp.solve() {
            Ok(outcome) => match outcome.solution() {
                Some(sol) => (SolveStatus::Optimal, vars.iter().map(|&(p, n)| sol.var_value(p) - n.map_or(0.0, |n| sol.var_value(n))).collect(), "simplex optimal".to_string()),
                None => (SolveStatus::NumericalFailure, vec![f64::NAN; vars.len()], "simplex interrupted".to_string()),
            },
            Err(microlp::Error::Infeasible) => (SolveStatus::Infeasible, vec![f64::NAN; vars.len()], "simplex: infeasible".into()),
            Err(microlp::Error::Unbounded) => (SolveStatus::Unbounded, vec![f64::NAN; vars.len()], "simplex: unbounded".into()),
            Err(e) => (SolveStatus::NumericalFailure, vec![f64::NAN; vars.len()], format!("simplex: {e}")),
        };
        Ok(RawSolution { status, x, duals: None, detail })
    }
}
