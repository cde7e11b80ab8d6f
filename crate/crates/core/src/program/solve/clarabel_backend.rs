use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};

use super::{Backend, BackendKind, RawSolution, RowLayout, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::program::{AffExpr, ConstraintKind, ConvexProgram};

pub struct ClarabelBackend;

#[derive(Default)]
struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Triplets {
    fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(v);
        }
    }

    /// Row `r` of `A` gets `sign * e` and returns the matching `b` entry so
    /// that `s = b − A x = sign_b * e(x)`.
    fn push_expr(&mut self, r: usize, e: &AffExpr, sign: f64) {
        for &(v, c) in &e.terms {
            self.push(r, v.0, sign * c);
        }
    }

    fn into_csc(self, m: usize, n: usize) -> CscMatrix<f64> {
        CscMatrix::new_from_triplets(m, n, self.rows, self.cols, self.vals)
    }
}

impl Backend for ClarabelBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Clarabel
    }

    fn supports_quadratic(&self) -> bool {
        true
    }

    fn supports_soc(&self) -> bool {
        true
    }

    fn solve_raw(&self, prog: &ConvexProgram, cfg: &SolverConfig) -> Result<RawSolution> {
        let n = prog.num_vars();
        let layout = RowLayout::new(prog);
        let cons = prog.constraints();

        let mut a = Triplets::default();
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        // first row index of each program constraint
        let mut first_row = vec![usize::MAX; cons.len()];

        for &i in &layout.eq {
            if let ConstraintKind::Eq(e) = &cons[i].kind {
                first_row[i] = b.len();
                a.push_expr(b.len(), e, 1.0);
                b.push(-e.constant);
            }
        }
        if !layout.eq.is_empty() {
            cones.push(ZeroConeT(layout.eq.len()));
        }

        let le_start = b.len();
        for &i in &layout.le {
            if let ConstraintKind::Le(e) = &cons[i].kind {
                first_row[i] = b.len();
                a.push_expr(b.len(), e, 1.0);
                b.push(-e.constant);
            }
        }
        for (j, v) in prog.vars().iter().enumerate() {
            if v.upper.is_finite() {
                a.push(b.len(), j, 1.0);
                b.push(v.upper);
            }
            if v.lower.is_finite() {
                a.push(b.len(), j, -1.0);
                b.push(-v.lower);
            }
        }
        if b.len() > le_start {
            cones.push(NonnegativeConeT(b.len() - le_start));
        }

        for &i in &layout.soc {
            if let ConstraintKind::Soc { t, u } = &cons[i].kind {
                first_row[i] = b.len();
                for e in std::iter::once(t).chain(u.iter()) {
                    a.push_expr(b.len(), e, -1.0);
                    b.push(e.constant);
                }
                cones.push(SecondOrderConeT(u.len() + 1));
            }
        }

        let m = b.len();
        let a = a.into_csc(m, n);

        let obj = prog.objective();
        let mut q = vec![0.0; n];
        for &(v, c) in &obj.linear.terms {
            q[v.0] += c;
        }
        let mut p = Triplets::default();
        for sq in &obj.squares {
            let w2 = 2.0 * sq.weight;
            for &(vi, ci) in &sq.expr.terms {
                q[vi.0] += w2 * sq.expr.constant * ci;
                for &(vj, cj) in &sq.expr.terms {
                    if vi.0 <= vj.0 {
                        p.push(vi.0, vj.0, w2 * ci * cj);
                    }
                }
            }
        }
        let p = p.into_csc(n, n);

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(cfg.max_iter)
            .tol_gap_abs(cfg.precision)
            .tol_gap_rel(cfg.precision)
            .tol_feas(cfg.precision)
            .tol_infeas_abs(cfg.precision)
            .tol_infeas_rel(cfg.precision)
            .build()
            .map_err(|e| Error::Config(format!("solver settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::Construction(format!("clarabel setup: {e:?}")))?;
        solver.solve();

        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalFailure,
        };
        let duals = (status == SolveStatus::Optimal).then(|| {
            cons.iter()
                .enumerate()
                .map(|(i, c)| {
                    let r = first_row[i];
                    match &c.kind {
                        ConstraintKind::Soc { u, .. } => sol.z[r..r + u.len() + 1].to_vec(),
                        _ => vec![sol.z[r]],
                    }
                })
                .collect()
        });
        Ok(RawSolution {
            status,
            x: sol.x.clone(),
            duals,
            detail: format!("clarabel {:?} after {} iterations", sol.status, sol.iterations),
        })
    }
}
