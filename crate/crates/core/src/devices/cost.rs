use serde::{Deserialize, Serialize};

use super::InverterVars;
use crate::error::{check_nonneg, Result};
use crate::program::{AffExpr, ConvexProgram};

/// Feeder operating prices: purchase `a1`, feed-in `a2`, reactive `a3`,
/// curtailment `a4`, per p.u. power per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPrices {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl Default for CostPrices {
    fn default() -> Self {
        Self { a1: 10.0, a2: 3.0, a3: 3.0, a4: 6.0 }
    }
}

/// Expected operating cost of one stage:
///
/// ```text
/// Δ · (1/N) Σᵢ Σ_n ( a1 [netᵢₙ]_+ + a2 [netᵢₙ]_− )  +  Δ Σ_pv ( a3 |Q| + a4 α P̄_av )
/// ```
///
/// `net_load[n][i]` is the decision-affine net demand of bus `n` under sample
/// `i`. Hinges of decision-free buses are evaluated directly; the others get
/// one nonnegative auxiliary per hinge per sample. `inverters` pairs each
/// inverter's stage decisions with its mean available power.
pub fn distribution_stage_cost(
    prog: &mut ConvexProgram,
    prices: &CostPrices,
    net_load: &[Vec<AffExpr>],
    inverters: &[(InverterVars, f64)],
    delta_h: f64,
) -> Result<AffExpr> {
    for (name, v) in [("a1", prices.a1), ("a2", prices.a2), ("a3", prices.a3), ("a4", prices.a4)] {
        check_nonneg(name, v)?;
    }
    let mut cost = AffExpr::zero();
    for (n, samples) in net_load.iter().enumerate() {
        if samples.is_empty() {
            continue;
        }
        let w = delta_h / samples.len() as f64;
        for (i, net) in samples.iter().enumerate() {
            if net.is_constant() {
                let v = net.constant;
                cost += w * (prices.a1 * v.max(0.0) + prices.a2 * (-v).max(0.0));
                continue;
            }
            let buy = prog.add_nonneg(format!("buy[{n},{i}]"));
            let sell = prog.add_nonneg(format!("sell[{n},{i}]"));
            prog.add_le(net.clone() - AffExpr::var(buy));
            prog.add_le(-net.clone() - AffExpr::var(sell));
            cost.add_term(buy, w * prices.a1);
            cost.add_term(sell, w * prices.a2);
        }
    }
    for (v, mean_available) in inverters {
        cost.add_scaled(&v.q_abs(), delta_h * prices.a3);
        cost.add_term(v.alpha, delta_h * prices.a4 * mean_available);
    }
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{solve, SolverConfig};

    #[test]
    fn constant_net_load_purchase() {
        let mut prog = ConvexProgram::new();
        let c = distribution_stage_cost(&mut prog, &CostPrices::default(), &[vec![AffExpr::constant(5.0)]], &[], 1.0).unwrap();
        assert_eq!(c.constant, 50.0);
        assert_eq!(prog.num_vars(), 0);
    }

    #[test]
    fn surplus_is_fed_in() {
        // load 1, PV 5 at α = 0 on the same bus: surplus 4 earns the feed-in hinge
        let mut prog = ConvexProgram::new();
        let v = InverterVars::new(&mut prog, "pv", 0);
        prog.add_eq(AffExpr::var(v.alpha));
        let net = AffExpr::constant(1.0) - v.injected(5.0);
        let p = CostPrices::default();
        let c = distribution_stage_cost(&mut prog, &p, &[vec![net]], &[(v, 5.0)], 1.0).unwrap();
        prog.add_objective(&c);
        let s = solve(&prog, &SolverConfig::default()).unwrap().require_optimal().unwrap();
        assert!((s.objective - p.a2 * 4.0).abs() < 1e-6);
        // both hinges cannot be positive at the optimum
        let buy = prog.vars().iter().position(|x| x.name == "buy[0,0]").unwrap();
        assert!(s.x[buy].abs() < 1e-6);
    }

    #[test]
    fn negative_price_rejected() {
        let mut prog = ConvexProgram::new();
        let p = CostPrices { a1: -1.0, ..Default::default() };
        assert!(distribution_stage_cost(&mut prog, &p, &[], &[], 1.0).is_err());
    }
}
