//! Distribution OPF over a radial feeder.
//!
//! Per stage the decisions are curtailment `α` and reactive power `Q` of
//! every inverter and the charging power `P_B` of every storage unit.
//! Photovoltaic forecast errors are relative, `P̂ = P̄ (1 + ξ_c)`, so bus
//! injections and voltages are affine in `ξ` with decision-affine
//! coefficients:
//!
//! ```text
//! p_n(ξ) = Σ_pv (1 − α) P̄ (1 + ξ_c) − Σ_b P_B − Σ_l s P_l (1 + ξ_c)
//! q_n    = Σ_pv Q − Σ_l s Q_l
//! v_m(ξ) = v₀ + Σ_n R_v[m, n] p_n(ξ) + X_v[m, n] q_n
//! ```
//!
//! Both `v_m − V_max` and `V_min − v_m` of every monitored bus become a
//! worst-case CVaR term.
//!
//! # Census
//!
//! With unbounded support, `ρ > 0`, `H` stages, `N` samples, `I` inverters,
//! `S` storage units, `M` monitored buses, `B` buses hosting a decision and
//! `K_τ` error components with a nonzero voltage coefficient at stage `τ`:
//!
//! ```text
//! variables    = H·S + Σ_τ [ 3I + 2I(N + 1) + 2NB + 2M(N + 2) ]
//! inequalities = 2HS + Σ_τ [ I(N + 2) + 2NB + 2M(2N + 2K_τ) ]
//! cones        = H·I·N
//! equalities   = 0
//! ```
//!
//! With `ρ = 0` the `M` terms vanish.

use serde::{Deserialize, Serialize};

use super::{require_optimal, risk_report, AssemblyConfig, RiskConstraint, RiskReport, RiskTarget};
use crate::case::DistributionCase;
use crate::devices::{distribution_stage_cost, inverter_constraints, storage_constraints, InverterVars, StorageVars};
use crate::dro::{wc_cvar_epigraph, AffineLoss, AmbiguitySet, SampleSet, SupportPolytope};
use crate::error::{Error, Result};
use crate::program::{AffExpr, ConvexProgram, Solution};

/// Forecast inputs of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct DistStageData {
    /// Multiplier on the nominal loads.
    pub load_scale: f64,
    /// Forecast available power per inverter (p.u.).
    pub pv_forecast: Vec<f64>,
    /// Relative forecast-error samples, one column per error component.
    pub samples: SampleSet,
    pub support: SupportPolytope,
}

impl DistStageData {
    pub fn unbounded(load_scale: f64, pv_forecast: Vec<f64>, samples: SampleSet) -> Self {
        let support = SupportPolytope::unbounded(samples.dim());
        Self { load_scale, pv_forecast, samples, support }
    }

    /// Available power of inverter `k` under error vector `xi`.
    pub fn available(&self, case: &DistributionCase, k: usize, xi: &[f64]) -> f64 {
        (self.pv_forecast[k] * (1.0 + xi[case.inverters[k].xi])).max(0.0)
    }
}

/// An assembled distribution program and the handles needed to read it.
#[derive(Debug, Clone)]
pub struct DistributionProgram {
    pub program: ConvexProgram,
    pub config: AssemblyConfig,
    /// `inverters[τ][k]`
    pub inverters: Vec<Vec<InverterVars>>,
    pub storage: Vec<StorageVars>,
    /// Expected operating cost over all stages.
    pub cost: AffExpr,
    pub risks: Vec<RiskConstraint>,
}

/// Set points of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDecision {
    pub alpha: Vec<f64>,
    pub q: Vec<f64>,
    pub p_b: Vec<f64>,
}

impl StageDecision {
    /// Hold-nothing fallback: full curtailment, no reactive power, storage idle.
    pub fn fallback(case: &DistributionCase) -> Self {
        Self { alpha: vec![1.0; case.inverters.len()], q: vec![0.0; case.inverters.len()], p_b: vec![0.0; case.storage.len()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionDecision {
    pub stages: Vec<StageDecision>,
    /// `soc[b][τ]` at the start of stage `τ`, plus the final state.
    pub soc: Vec<Vec<f64>>,
    pub report: RiskReport,
}

/// Row and variable counts of an assembled program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub vars: usize,
    pub eq: usize,
    pub le: usize,
    pub soc: usize,
}

impl Census {
    pub fn of(prog: &ConvexProgram) -> Self {
        let (eq, le, soc) = prog.constraint_counts();
        Self { vars: prog.num_vars(), eq, le, soc }
    }
}

fn check_inputs(case: &DistributionCase, stages: &[DistStageData], soc0: &[f64], cfg: &AssemblyConfig) -> Result<()> {
    cfg.validate()?;
    case.validate()?;
    if cfg.horizon == 0 {
        return Err(Error::Assembly("horizon has no stages".into()));
    }
    if stages.len() < cfg.horizon {
        return Err(Error::Assembly(format!("missing samples for stage {} of {}", stages.len(), cfg.horizon)));
    }
    if case.inverters.is_empty() && case.storage.is_empty() {
        return Err(Error::Assembly(format!("case {} has no controllable devices", case.name)));
    }
    if soc0.len() != case.storage.len() {
        return Err(Error::Assembly(format!("{} initial states for {} storage units", soc0.len(), case.storage.len())));
    }
    for (t, s) in stages.iter().take(cfg.horizon).enumerate() {
        if s.pv_forecast.len() != case.inverters.len() {
            return Err(Error::Assembly(format!("stage {t}: {} forecasts for {} inverters", s.pv_forecast.len(), case.inverters.len())));
        }
        if s.samples.dim() != case.n_xi() || s.support.dim() != case.n_xi() {
            return Err(Error::Assembly(format!("stage {t}: error data has dimension {}, case has {}", s.samples.dim(), case.n_xi())));
        }
    }
    Ok(())
}

/// Decision-affine bus injections of one stage: nominal active part, its
/// error coefficients `err[n][c]`, and reactive part.
struct Injections {
    p: Vec<AffExpr>,
    err: Vec<Vec<AffExpr>>,
    q: Vec<AffExpr>,
}

fn stage_injections(case: &DistributionCase, data: &DistStageData, inv: &[InverterVars], p_b: &[AffExpr]) -> Injections {
    let n = case.feeder.n_bus();
    let nx = case.n_xi();
    let mut p = vec![AffExpr::zero(); n];
    let mut err = vec![vec![AffExpr::zero(); nx]; n];
    let mut q = vec![AffExpr::zero(); n];
    for l in &case.loads {
        p[l.bus] += -data.load_scale * l.p;
        q[l.bus] += -data.load_scale * l.q;
        if let Some(c) = l.xi {
            err[l.bus][c] += -data.load_scale * l.p;
        }
    }
    for (k, (unit, v)) in case.inverters.iter().zip(inv).enumerate() {
        let injected = v.injected(data.pv_forecast[k]);
        p[unit.bus].add_scaled(&injected, 1.0);
        err[unit.bus][unit.xi].add_scaled(&injected, 1.0);
        q[unit.bus].add_scaled(&v.q(), 1.0);
    }
    for (unit, pb) in case.storage.iter().zip(p_b) {
        p[unit.bus].add_scaled(pb, -1.0);
    }
    Injections { p, err, q }
}

/// `v_m(ξ)` as an affine loss.
fn bus_voltage(case: &DistributionCase, inj: &Injections, m: usize) -> AffineLoss {
    let r = case.feeder.r_v();
    let x = case.feeder.x_v();
    let mut b = AffExpr::constant(case.feeder.v0()[m]);
    let mut a = vec![AffExpr::zero(); case.n_xi()];
    for n in 0..case.feeder.n_bus() {
        let (rmn, xmn) = (r[(m, n)], x[(m, n)]);
        if rmn != 0.0 {
            b.add_scaled(&inj.p[n], rmn);
            for (ac, e) in a.iter_mut().zip(&inj.err[n]) {
                ac.add_scaled(e, rmn);
            }
        }
        if xmn != 0.0 {
            b.add_scaled(&inj.q[n], xmn);
        }
    }
    AffineLoss { a: a.into_iter().map(AffExpr::compacted).collect(), b: b.compacted() }
}

/// Build the multi-stage distribution program from storage states `soc0`.
pub fn assemble_distribution_opf(
    case: &DistributionCase,
    stages: &[DistStageData],
    soc0: &[f64],
    cfg: &AssemblyConfig,
) -> Result<DistributionProgram> {
    check_inputs(case, stages, soc0, cfg)?;
    let h = cfg.horizon;
    let mut prog = ConvexProgram::new();

    prog.set_block("storage");
    let storage = case
        .storage
        .iter()
        .zip(soc0)
        .map(|(u, &b0)| storage_constraints(&mut prog, u, b0, h, cfg.delta_h))
        .collect::<Result<Vec<_>>>()?;

    let monitored = case.monitored_buses();
    let mut inverters = Vec::with_capacity(h);
    let mut cost = AffExpr::zero();
    let mut risks = Vec::new();
    for (tau, data) in stages.iter().take(h).enumerate() {
        prog.set_block(&format!("inverter[{tau}]"));
        let inv: Vec<InverterVars> = case.inverters.iter().map(|u| InverterVars::new(&mut prog, &u.name, tau)).collect();
        let mut mean_available = Vec::with_capacity(inv.len());
        for (k, (unit, v)) in case.inverters.iter().zip(&inv).enumerate() {
            let avail: Vec<f64> = data.samples.rows().iter().map(|xi| data.available(case, k, xi)).collect();
            inverter_constraints(&mut prog, unit, v, &avail, cfg.eta)?;
            mean_available.push(avail.iter().sum::<f64>() / avail.len() as f64);
        }

        let p_b: Vec<AffExpr> = storage.iter().map(|s| AffExpr::var(s.p_b[tau])).collect();
        let inj = stage_injections(case, data, &inv, &p_b);

        prog.set_block(&format!("cost[{tau}]"));
        let net_load: Vec<Vec<AffExpr>> = (0..case.feeder.n_bus())
            .map(|n| {
                data.samples
                    .rows()
                    .iter()
                    .map(|xi| {
                        let mut e = -inj.p[n].clone();
                        for (c, ec) in inj.err[n].iter().enumerate() {
                            e.add_scaled(ec, -xi[c]);
                        }
                        e.compacted()
                    })
                    .collect()
            })
            .collect();
        let pairs: Vec<(InverterVars, f64)> = inv.iter().copied().zip(mean_available).collect();
        cost += distribution_stage_cost(&mut prog, &case.prices, &net_load, &pairs, cfg.delta_h)?;

        let amb = AmbiguitySet::new(data.samples.clone(), data.support.clone(), cfg.epsilon_at(tau))?;
        prog.set_block(&format!("voltage[{tau}]"));
        for &m in &monitored {
            let v = bus_voltage(case, &inj, m);
            for upper in [true, false] {
                let loss = if upper {
                    AffineLoss { a: v.a.clone(), b: v.b.clone() - case.feeder.v_max }
                } else {
                    AffineLoss { a: v.a.iter().map(|e| -e.clone()).collect(), b: AffExpr::constant(case.feeder.v_min) - v.b.clone() }
                };
                let term = if cfg.rho > 0.0 { Some(wc_cvar_epigraph(&mut prog, &loss, cfg.eta, &amb, cfg.rho)?) } else { None };
                let side = if upper { "max" } else { "min" };
                risks.push(RiskConstraint {
                    label: format!("v[{}].{side}@{tau}", case.feeder.bus_names[m]),
                    stage: tau,
                    target: RiskTarget::Voltage { bus: m, upper },
                    loss,
                    ambiguity: amb.clone(),
                    term,
                });
            }
        }
        inverters.push(inv);
    }

    prog.add_objective(&cost);
    for r in &risks {
        if let Some(t) = &r.term {
            prog.add_objective(&t.objective);
        }
    }
    Ok(DistributionProgram { program: prog, config: cfg.clone(), inverters, storage, cost, risks })
}

impl DistributionProgram {
    /// Read decisions, storage trajectory and the risk split of a solved program.
    pub fn extract(&self, sol: &Solution) -> Result<DistributionDecision> {
        require_optimal(sol)?;
        let stages = self
            .inverters
            .iter()
            .enumerate()
            .map(|(tau, inv)| StageDecision {
                alpha: inv.iter().map(|v| sol.value(v.alpha).clamp(0.0, 1.0)).collect(),
                q: inv.iter().map(|v| sol.eval(&v.q())).collect(),
                p_b: self.storage.iter().map(|s| sol.value(s.p_b[tau])).collect(),
            })
            .collect();
        let soc = self.storage.iter().map(|s| s.soc.iter().map(|e| sol.eval(e)).collect()).collect();
        let report = risk_report(self.config.rho, self.config.eta, sol.eval(&self.cost), &self.risks, sol)?;
        Ok(DistributionDecision { stages, soc, report })
    }
}

/// Closed-form census of [`assemble_distribution_opf`] for unbounded support.
pub fn distribution_census(case: &DistributionCase, stages: &[DistStageData], cfg: &AssemblyConfig) -> Result<Census> {
    let h = cfg.horizon;
    if stages.len() < h {
        return Err(Error::Assembly(format!("missing samples for stage {} of {}", stages.len(), h)));
    }
    if stages.iter().take(h).any(|s| !s.support.is_unbounded()) {
        return Err(Error::Unsupported("census formula covers unbounded support only".into()));
    }
    let (i, s) = (case.inverters.len(), case.storage.len());
    let m = if cfg.rho > 0.0 { case.monitored_buses().len() } else { 0 };
    let mut decision_buses: Vec<usize> =
        case.inverters.iter().map(|u| u.bus).chain(case.storage.iter().map(|u| u.bus)).collect();
    decision_buses.sort_unstable();
    decision_buses.dedup();
    let b = decision_buses.len();

    let mut c = Census { vars: h * s, eq: 0, le: 2 * h * s, soc: 0 };
    for data in stages.iter().take(h) {
        let n = data.samples.len();
        let mut active = vec![false; case.n_xi()];
        for (k, u) in case.inverters.iter().enumerate() {
            active[u.xi] |= data.pv_forecast[k] != 0.0;
        }
        for l in &case.loads {
            if let Some(cx) = l.xi {
                active[cx] |= data.load_scale * l.p != 0.0;
            }
        }
        let k = active.iter().filter(|&&a| a).count();
        c.vars += 3 * i + 2 * i * (n + 1) + 2 * n * b + 2 * m * (n + 2);
        c.le += i * (n + 2) + 2 * n * b + 2 * m * (2 * n + 2 * k);
        c.soc += i * n;
    }
    Ok(c)
}

/// Realized bus injections `(p, q)` of one applied stage decision under the
/// error vector `xi`.
pub fn realized_injections(case: &DistributionCase, data: &DistStageData, dec: &StageDecision, xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = case.feeder.n_bus();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for l in &case.loads {
        let rel = l.xi.map_or(0.0, |c| xi[c]);
        p[l.bus] -= data.load_scale * l.p * (1.0 + rel);
        q[l.bus] -= data.load_scale * l.q;
    }
    for (k, u) in case.inverters.iter().enumerate() {
        p[u.bus] += (1.0 - dec.alpha[k]) * data.available(case, k, xi);
        q[u.bus] += dec.q[k];
    }
    for (u, pb) in case.storage.iter().zip(&dec.p_b) {
        p[u.bus] -= pb;
    }
    (p, q)
}

/// Realized operating cost of one applied stage decision under `xi`.
pub fn realized_stage_cost(case: &DistributionCase, data: &DistStageData, dec: &StageDecision, xi: &[f64], delta_h: f64) -> f64 {
    let (p, _) = realized_injections(case, data, dec, xi);
    let pr = &case.prices;
    let grid: f64 = p.iter().map(|inj| pr.a1 * (-inj).max(0.0) + pr.a2 * inj.max(0.0)).sum();
    let devices: f64 = (0..case.inverters.len())
        .map(|k| pr.a3 * dec.q[k].abs() + pr.a4 * dec.alpha[k] * data.available(case, k, xi))
        .sum();
    delta_h * (grid + devices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{CostPrices, Load, ResInverter, StorageUnit};
    use crate::grid::{DistributionFeeder, FeederLine};
    use crate::program::{solve, SolverConfig};

    // chain slack 0, 1, 2 with PV and battery at the far end
    fn small_case(pv_size: f64) -> DistributionCase {
        let lines = vec![FeederLine { from: 0, to: 1, r: 0.02, x: 0.01 }, FeederLine { from: 1, to: 2, r: 0.03, x: 0.02 }];
        let feeder = DistributionFeeder::new(vec!["s".into(), "a".into(), "b".into()], 0, lines, 1.0, 0.95, 1.05).unwrap();
        DistributionCase {
            name: "small".into(),
            base_kva: 1000.0,
            feeder,
            loads: vec![Load { name: "la".into(), bus: 1, p: 0.2, q: 0.05, xi: None }],
            inverters: vec![ResInverter { name: "pv".into(), bus: 2, s_max: pv_size * 1.3, power_factor: 0.9, xi: 0 }],
            storage: vec![StorageUnit::with_power_ratio("bat", 2, 0.4, 0.25, 0.2)],
            error_names: vec!["pv".into()],
            monitored: None,
            prices: CostPrices::default(),
        }
    }

    fn stages(pv: f64, h: usize) -> Vec<DistStageData> {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![-0.3 + 0.06 * i as f64]).collect();
        (0..h).map(|_| DistStageData::unbounded(1.0, vec![pv], SampleSet::new(rows.clone()).unwrap())).collect()
    }

    fn cfg(rho: f64, eps: f64, h: usize) -> AssemblyConfig {
        AssemblyConfig { rho, eta: 0.1, epsilon: vec![eps], horizon: h, delta_h: 0.25 }
    }

    #[test]
    fn census_matches_formula() {
        let case = small_case(1.0);
        for rho in [0.0, 1.0] {
            let c = cfg(rho, 0.01, 3);
            let st = stages(1.0, 3);
            let p = assemble_distribution_opf(&case, &st, &[0.2], &c).unwrap();
            assert_eq!(Census::of(&p.program), distribution_census(&case, &st, &c).unwrap());
        }
    }

    #[test]
    fn voltage_loss_matches_power_flow() {
        let case = small_case(1.0);
        let st = stages(1.0, 1);
        let p = assemble_distribution_opf(&case, &st, &[0.2], &cfg(1.0, 0.0, 1)).unwrap();
        // arbitrary decisions
        let mut x = vec![0.0; p.program.num_vars()];
        let v = p.inverters[0][0];
        x[v.alpha.0] = 0.3;
        x[v.q_plus.0] = 0.1;
        x[p.storage[0].p_b[0].0] = 0.05;
        let dec = StageDecision { alpha: vec![0.3], q: vec![0.1], p_b: vec![0.05] };
        for xi in st[0].samples.rows() {
            let (pi, qi) = realized_injections(&case, &st[0], &dec, xi);
            let volts = case.feeder.voltage_profile(&pi, &qi).unwrap();
            for r in &p.risks {
                let RiskTarget::Voltage { bus, upper } = r.target else { unreachable!() };
                let expect = if upper { volts[bus] - 1.05 } else { 0.95 - volts[bus] };
                assert!((r.loss.eval(xi, &x) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_stage_rejected() {
        let case = small_case(1.0);
        let e = assemble_distribution_opf(&case, &stages(1.0, 2), &[0.2], &cfg(1.0, 0.0, 3)).unwrap_err();
        assert!(matches!(e, Error::Assembly(_)));
    }

    #[test]
    fn no_devices_rejected() {
        let mut case = small_case(1.0);
        case.inverters.clear();
        case.storage.clear();
        let st = vec![DistStageData::unbounded(1.0, vec![], SampleSet::new(vec![vec![0.0]]).unwrap())];
        assert!(matches!(assemble_distribution_opf(&case, &st, &[], &cfg(1.0, 0.0, 1)), Err(Error::Assembly(_))));
    }

    // the far-bus voltage is affine in α and the storage term, so with the
    // battery pinned a dense α sweep of the full objective finds the optimum
    fn pinned_objective(case: &DistributionCase, st: &[DistStageData], c: &AssemblyConfig, alpha: Option<f64>) -> Option<(f64, f64)> {
        let mut p = assemble_distribution_opf(case, st, &[0.2], c).unwrap();
        p.program.add_eq(AffExpr::var(p.storage[0].p_b[0]));
        if let Some(a) = alpha {
            p.program.add_eq(AffExpr::var(p.inverters[0][0].alpha) - a);
        }
        let sol = solve(&p.program, &SolverConfig::default()).unwrap().require_optimal().ok()?;
        Some((sol.objective, sol.value(p.inverters[0][0].alpha)))
    }

    #[test]
    fn large_rho_engages_curtailment() {
        // 2.5 p.u. of PV lifts the far bus well above 1.05 in the worst sample
        let mut case = small_case(2.5);
        case.monitored = Some(vec![2]);
        let st = stages(2.5, 1);
        let dec = StageDecision { alpha: vec![0.0], q: vec![0.0], p_b: vec![0.0] };
        let worst = st[0].samples.rows().iter().map(|xi| {
            let (p, q) = realized_injections(&case, &st[0], &dec, xi);
            case.feeder.voltage_profile(&p, &q).unwrap()[2]
        });
        assert!(worst.fold(f64::MIN, f64::max) > 1.05);

        let c = cfg(1e4, 0.01, 1);
        let (best, alpha) = pinned_objective(&case, &st, &c, None).unwrap();
        assert!(alpha > 0.05, "alpha {alpha}");
        let sweep = (0..=50).filter_map(|k| pinned_objective(&case, &st, &c, Some(k as f64 / 50.0))).map(|r| r.0).fold(f64::INFINITY, f64::min);
        assert!(best <= sweep + 1e-6 * sweep.abs().max(1.0));

        let (_, alpha0) = pinned_objective(&case, &st, &cfg(0.0, 0.0, 1), None).unwrap();
        assert!(alpha0 < 1e-6, "alpha {alpha0}");
    }

    #[test]
    fn extraction_splits_objective() {
        let case = small_case(1.0);
        let st = stages(1.0, 2);
        let p = assemble_distribution_opf(&case, &st, &[0.2], &cfg(2.0, 0.01, 2)).unwrap();
        let sol = solve(&p.program, &SolverConfig::default()).unwrap();
        assert!(p.program.max_violation(&sol.x) < 1e-6);
        let d = p.extract(&sol).unwrap();
        let r = &d.report;
        assert!((r.cost + 2.0 * r.risk - r.objective).abs() < 1e-8 * (1.0 + r.objective.abs()));
        for c in &r.constraints {
            assert!((c.certificate.unwrap() - c.cvar).abs() < 1e-5, "{c:?}");
        }
        assert_eq!(d.soc[0].len(), 3);
        assert!((d.soc[0][1] - (0.2 + 0.25 * d.stages[0].p_b[0])).abs() < 1e-12);
    }

    #[test]
    fn extraction_refuses_non_optimal() {
        let case = small_case(1.0);
        let p = assemble_distribution_opf(&case, &stages(1.0, 1), &[0.2], &cfg(1.0, 0.0, 1)).unwrap();
        let mut sol = solve(&p.program, &SolverConfig::default()).unwrap();
        sol.status = crate::program::SolveStatus::Infeasible;
        assert!(matches!(p.extract(&sol), Err(Error::Extraction(_))));
    }
}
