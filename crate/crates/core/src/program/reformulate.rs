use super::{AffExpr, ConvexProgram, Objective};

/// Replace the quadratic objective part `Σ wₖ eₖ²` by an epigraph variable
/// `τ` with the rotated cone `Σ wₖ eₖ² <= τ`, written as the standard cone
/// `‖(√w₁e₁, …, (τ − 1)/2)‖₂ <= (τ + 1)/2`.
///
/// Variables and constraints of the input keep their indices; `τ` and the
/// cone are appended.
pub fn lift_quadratic_objective(prog: &ConvexProgram) -> ConvexProgram {
    let mut out = prog.clone();
    if prog.objective.squares.is_empty() {
        return out;
    }
    let tau = out.add_nonneg("quad_epigraph");
    let block = out.current_block;
    out.set_block("quad_epigraph");
    let mut u: Vec<AffExpr> = prog.objective.squares.iter().map(|s| s.expr.scaled(s.weight.sqrt())).collect();
    u.push((AffExpr::var(tau) - 1.0) * 0.5);
    out.add_soc((AffExpr::var(tau) + 1.0) * 0.5, u);
    out.current_block = block;
    out.objective = Objective { linear: prog.objective.linear.clone() + AffExpr::var(tau), squares: Vec::new() };
    out
}
