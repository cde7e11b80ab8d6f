//! Transmission DC OPF with affine reserve policies and N-1 outages.
//!
//! Generator `d` follows `u_dτ = e_dτ + D_d[τ]·ξ + R^j_dτ P_mis^j`, where `ξ`
//! stacks the wind errors stage-major (`s·N_w + w`) and `D_d[τ]` only sees
//! columns already revealed at stage `τ`. Balance holds exactly:
//!
//! ```text
//! Σ_d e_dτ + Σ_w W_wτ − Σ_l P_l = 0
//! Σ_d D_d[τ, c] + 1[c = τ·N_w + w] = 0     for every revealed column c
//! Σ_{d responds to j} R^j_dτ = −1          for every outage with P_mis ≠ 0
//! ```
//!
//! A generator or load outage disconnects the catalog block `P_G^j` or
//! `P_L^j` at its bus while the remaining devices keep their policies. A
//! line outage switches to the post-outage PTDF; if it islands buses, every
//! device there is dropped and the catalog mismatch covers it.
//!
//! Lines in the risk set get worst-case CVaR terms for both flow directions
//! under every outage where they carry flow. All other lines get
//! sample-average `CVaR_η(±flow − limit) <= 0` under every outage.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{require_optimal, risk_report, AssemblyConfig, RiskConstraint, RiskReport, RiskTarget};
use crate::case::TransmissionCase;
use crate::devices::{generation_cost, GeneratorPolicy};
use crate::dro::{saa_cvar_constraint, wc_cvar_epigraph, AffineLoss, AmbiguitySet, SampleLoss, SampleSet, SupportPolytope};
use crate::error::{Error, Result};
use crate::grid::{enumerate_outages, OutageCatalog, OutageKind};
use crate::program::{AffExpr, ConvexProgram, Objective, Solution, VarId};

/// Forecast of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransStageData {
    /// Forecast injection per wind farm (p.u.).
    pub wind_forecast: Vec<f64>,
}

/// Forecasts for the horizon and the stacked error samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionInput {
    pub stages: Vec<TransStageData>,
    /// Stage-major stacked wind errors, `horizon · N_w` columns (p.u.).
    pub samples: SampleSet,
    pub support: SupportPolytope,
}

impl TransmissionInput {
    pub fn unbounded(stages: Vec<TransStageData>, samples: SampleSet) -> Self {
        let support = SupportPolytope::unbounded(samples.dim());
        Self { stages, samples, support }
    }
}

#[derive(Debug, Clone)]
pub struct TransmissionProgram {
    pub program: ConvexProgram,
    pub config: AssemblyConfig,
    pub catalog: OutageCatalog,
    /// Post-outage PTDF per catalog entry.
    pub ptdfs: Vec<DMatrix<f64>>,
    pub policies: Vec<GeneratorPolicy>,
    pub cost: Objective,
    pub risks: Vec<RiskConstraint>,
    /// Risk-set (line, outage) pairs left out because the line carries no flow.
    pub excluded: Vec<(usize, usize)>,
    /// Outages with a mismatch but no generator left to cover it.
    pub uncovered: Vec<usize>,
}

/// Solved policies of every generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionDecision {
    /// `e[d][τ]`
    pub e: Vec<Vec<f64>>,
    /// `d[d][τ][c]` over all stacked columns; unrevealed columns are exactly 0.
    pub d: Vec<Vec<Vec<f64>>>,
    /// `r[d][j][τ]` for the outages generator `d` responds to.
    pub r: Vec<BTreeMap<usize, Vec<f64>>>,
    pub report: RiskReport,
}

fn check_inputs(case: &TransmissionCase, input: &TransmissionInput, cfg: &AssemblyConfig) -> Result<()> {
    cfg.validate()?;
    case.validate()?;
    if cfg.horizon == 0 {
        return Err(Error::Assembly("horizon has no stages".into()));
    }
    if input.stages.len() < cfg.horizon {
        return Err(Error::Assembly(format!("missing forecasts for stage {} of {}", input.stages.len(), cfg.horizon)));
    }
    let want = cfg.horizon * case.n_w();
    if input.samples.dim() != want || input.support.dim() != want {
        return Err(Error::Assembly(format!("stacked errors have dimension {}, expected {want}", input.samples.dim())));
    }
    if case.generators.is_empty() {
        return Err(Error::Assembly(format!("case {} has no dispatchable generators", case.name)));
    }
    for (t, s) in input.stages.iter().take(cfg.horizon).enumerate() {
        if s.wind_forecast.len() != case.n_w() {
            return Err(Error::Assembly(format!("stage {t}: {} forecasts for {} wind farms", s.wind_forecast.len(), case.n_w())));
        }
    }
    Ok(())
}

/// Post-outage PTDF for every catalog entry.
pub(crate) fn outage_ptdfs(case: &TransmissionCase, catalog: &OutageCatalog) -> Result<Vec<DMatrix<f64>>> {
    catalog
        .outages()
        .iter()
        .map(|o| match o.kind {
            OutageKind::Line(l) => case.grid.ptdf_without(l),
            _ => Ok(case.grid.ptdf().clone()),
        })
        .collect()
}

/// Sites removed from the network by outage `j` (islanded devices only).
fn removed(catalog: &OutageCatalog, j: usize) -> &[usize] {
    let o = &catalog.outages()[j];
    match o.kind {
        OutageKind::Line(_) => &o.lost_sites,
        _ => &[],
    }
}

/// Generators that take up the mismatch of outage `j`.
fn responders(case: &TransmissionCase, catalog: &OutageCatalog, j: usize) -> Vec<usize> {
    let o = &catalog.outages()[j];
    if o.p_mis == 0.0 {
        return Vec::new();
    }
    (0..case.generators.len()).filter(|d| !o.lost_sites.contains(d)).collect()
}

/// Constant injection block disconnected by a device outage.
fn outage_block(case: &TransmissionCase, catalog: &OutageCatalog, j: usize) -> Option<(usize, f64)> {
    let o = &catalog.outages()[j];
    let sites = case.sites();
    match o.kind {
        OutageKind::Generator(s) => Some((sites[s].bus, -o.p_gen)),
        OutageKind::Load(s) => Some((sites[s].bus, o.p_load)),
        _ => None,
    }
}

/// `±flow_l − limit` at stage `τ` under outage `j` as an affine loss in the
/// stacked errors.
#[allow(clippy::too_many_arguments)]
pub fn flow_loss(
    case: &TransmissionCase,
    catalog: &OutageCatalog,
    ptdf: &DMatrix<f64>,
    policies: &[GeneratorPolicy],
    input: &TransmissionInput,
    j: usize,
    line: usize,
    tau: usize,
    forward: bool,
) -> AffineLoss {
    let n_g = case.generators.len();
    let n_w = case.n_w();
    let gone = removed(catalog, j);
    let p_mis = catalog.outages()[j].p_mis;
    let mut a = vec![AffExpr::zero(); input.samples.dim()];
    let mut b = AffExpr::zero();
    for (d, (g, pol)) in case.generators.iter().zip(policies).enumerate() {
        let k = ptdf[(line, g.bus)];
        if k == 0.0 || gone.contains(&d) {
            continue;
        }
        b.add_term(pol.e[tau], k);
        for (c, &v) in pol.d[tau].iter().enumerate() {
            a[c].add_term(v, k);
        }
        if let Some(r) = pol.r_mis.get(&j) {
            b.add_term(r[tau], k * p_mis);
        }
    }
    for (w, farm) in case.winds.iter().enumerate() {
        let k = ptdf[(line, farm.bus)];
        if k == 0.0 || gone.contains(&(n_g + w)) {
            continue;
        }
        b += k * input.stages[tau].wind_forecast[w];
        a[tau * n_w + w] += k;
    }
    for (i, l) in case.loads.iter().enumerate() {
        if !gone.contains(&(n_g + n_w + i)) {
            b += -ptdf[(line, l.bus)] * l.p;
        }
    }
    if let Some((bus, p)) = outage_block(case, catalog, j) {
        b += ptdf[(line, bus)] * p;
    }
    let limit = case.grid.lines[line].limit;
    let sign = if forward { 1.0 } else { -1.0 };
    AffineLoss { a: a.into_iter().map(|e| e.scaled(sign).compacted()).collect(), b: b.scaled(sign).compacted() - limit }
}

/// Build the transmission program over `cfg.horizon` stages.
pub fn assemble_transmission_opf(case: &TransmissionCase, input: &TransmissionInput, cfg: &AssemblyConfig) -> Result<TransmissionProgram> {
    check_inputs(case, input, cfg)?;
    let h = cfg.horizon;
    let n_w = case.n_w();
    let catalog = enumerate_outages(&case.grid, &case.sites())?;
    let ptdfs = outage_ptdfs(case, &catalog)?;
    let mut prog = ConvexProgram::new();

    prog.set_block("policy");
    let mut responds: Vec<Vec<usize>> = vec![Vec::new(); case.generators.len()];
    let mut uncovered = Vec::new();
    for j in 0..catalog.len() {
        let r = responders(case, &catalog, j);
        if catalog.outages()[j].p_mis != 0.0 && r.is_empty() {
            log::warn!("no generator can cover the mismatch of outage {j}; it is left out");
            uncovered.push(j);
        }
        for d in r {
            responds[d].push(j);
        }
    }
    let policies: Vec<GeneratorPolicy> = case
        .generators
        .iter()
        .zip(&responds)
        .map(|(g, r)| GeneratorPolicy::new(&mut prog, g, h, n_w, r))
        .collect();

    prog.set_block("balance");
    let load: f64 = case.loads.iter().map(|l| l.p).sum();
    for tau in 0..h {
        let wind: f64 = input.stages[tau].wind_forecast.iter().sum();
        let mut nominal = AffExpr::constant(wind - load);
        for p in &policies {
            nominal.add_term(p.e[tau], 1.0);
        }
        prog.add_eq(nominal);
        for c in 0..(tau + 1) * n_w {
            let own = if c >= tau * n_w { 1.0 } else { 0.0 };
            let mut col = AffExpr::constant(own);
            for p in &policies {
                col.add_term(p.d[tau][c], 1.0);
            }
            prog.add_eq(col);
        }
        for j in 0..catalog.len() {
            let ids: Vec<VarId> = policies.iter().filter_map(|p| p.r_mis.get(&j).map(|r| r[tau])).collect();
            if !ids.is_empty() {
                let mut sum = AffExpr::constant(1.0);
                for v in ids {
                    sum.add_term(v, 1.0);
                }
                prog.add_eq(sum);
            }
        }
    }

    let mut risks = Vec::new();
    let mut excluded = Vec::new();
    for tau in 0..h {
        let amb = AmbiguitySet::new(input.samples.clone(), input.support.clone(), cfg.epsilon_at(tau))?;
        for (j, outage) in catalog.outages().iter().enumerate() {
            if uncovered.contains(&j) {
                continue;
            }
            let ptdf = &ptdfs[j];
            for line in 0..case.grid.n_lines() {
                let carries = ptdf.row(line).iter().any(|&v| v != 0.0) && outage.kind != OutageKind::Line(line);
                let risky = case.dro_lines.contains(&line);
                if !carries {
                    if risky && tau == 0 {
                        log::warn!("line {} carries no flow under outage {j}; its risk terms are dropped", case.grid.lines[line].name);
                        excluded.push((line, j));
                    }
                    continue;
                }
                for forward in [true, false] {
                    let loss = flow_loss(case, &catalog, ptdf, &policies, input, j, line, tau, forward);
                    if risky {
                        prog.set_block(&format!("risk[{tau}]"));
                        let term = if cfg.rho > 0.0 { Some(wc_cvar_epigraph(&mut prog, &loss, cfg.eta, &amb, cfg.rho)?) } else { None };
                        let dir = if forward { "fwd" } else { "bwd" };
                        risks.push(RiskConstraint {
                            label: format!("flow[{}].{dir}@{tau}/o{j}", case.grid.lines[line].name),
                            stage: tau,
                            target: RiskTarget::Flow { line, forward, outage: j },
                            loss,
                            ambiguity: amb.clone(),
                            term,
                        });
                    } else {
                        prog.set_block(&format!("n-1[{tau}]"));
                        let g: Vec<SampleLoss> = input.samples.rows().iter().map(|xi| SampleLoss::Affine(loss.at(xi))).collect();
                        saa_cvar_constraint(&mut prog, &g, cfg.eta)?;
                    }
                }
            }
        }
    }

    let cost = generation_cost(&case.generators, &policies, input.samples.rows())?;
    prog.add_objective(&cost.linear);
    for sq in &cost.squares {
        prog.add_objective_square(sq.weight, sq.expr.clone())?;
    }
    for r in &risks {
        if let Some(t) = &r.term {
            prog.add_objective(&t.objective);
        }
    }
    Ok(TransmissionProgram { program: prog, config: cfg.clone(), catalog, ptdfs, policies, cost, risks, excluded, uncovered })
}

impl TransmissionProgram {
    pub fn extract(&self, sol: &Solution) -> Result<TransmissionDecision> {
        require_optimal(sol)?;
        let e = self.policies.iter().map(|p| p.e.iter().map(|&v| sol.value(v)).collect()).collect();
        let d = self.policies.iter().map(|p| p.d_matrix(&sol.x)).collect();
        let r = self
            .policies
            .iter()
            .map(|p| p.r_mis.iter().map(|(&j, ids)| (j, ids.iter().map(|&v| sol.value(v)).collect())).collect())
            .collect();
        let report = risk_report(self.config.rho, self.config.eta, self.cost.eval(&sol.x), &self.risks, sol)?;
        Ok(TransmissionDecision { e, d, r, report })
    }
}

impl TransmissionDecision {
    /// Output of generator `d` at stage `τ` under outage `j`.
    pub fn output(&self, d: usize, tau: usize, xi: &[f64], j: usize, p_mis: f64) -> f64 {
        let mut u = self.e[d][tau] + self.d[d][tau].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
        if let Some(r) = self.r[d].get(&j) {
            u += r[tau] * p_mis;
        }
        u
    }

    /// Nodal injections after outage `j` at stage `τ` for stacked errors `xi`.
    pub fn injections(&self, case: &TransmissionCase, catalog: &OutageCatalog, input: &TransmissionInput, j: usize, tau: usize, xi: &[f64]) -> Vec<f64> {
        let n_g = case.generators.len();
        let n_w = case.n_w();
        let gone = removed(catalog, j);
        let p_mis = catalog.outages()[j].p_mis;
        let mut inj = vec![0.0; case.grid.n_bus()];
        for (d, g) in case.generators.iter().enumerate() {
            if !gone.contains(&d) {
                inj[g.bus] += self.output(d, tau, xi, j, p_mis);
            }
        }
        for (w, farm) in case.winds.iter().enumerate() {
            if !gone.contains(&(n_g + w)) {
                inj[farm.bus] += input.stages[tau].wind_forecast[w] + xi[tau * n_w + w];
            }
        }
        for (i, l) in case.loads.iter().enumerate() {
            if !gone.contains(&(n_g + n_w + i)) {
                inj[l.bus] -= l.p;
            }
        }
        if let Some((bus, p)) = outage_block(case, catalog, j) {
            inj[bus] += p;
        }
        inj
    }
}

/// Net injection of the slack's component after outage `j` (p.u.). Zero
/// when the policies balance the grid exactly.
pub fn balance_residual(
    case: &TransmissionCase,
    catalog: &OutageCatalog,
    dec: &TransmissionDecision,
    input: &TransmissionInput,
    j: usize,
    tau: usize,
    xi: &[f64],
) -> f64 {
    let island = match catalog.outages()[j].kind {
        OutageKind::Line(l) => case.grid.islanded_buses(l),
        _ => Vec::new(),
    };
    dec.injections(case, catalog, input, j, tau, xi)
        .iter()
        .enumerate()
        .filter(|(b, _)| !island.contains(b))
        .map(|(_, v)| v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{Generator, TransLoad, WindFarm};
    use crate::grid::{TransLine, TransmissionGrid};
    use crate::program::{solve, SolverConfig};

    fn line(name: &str, from: usize, to: usize, x: f64, limit: f64) -> TransLine {
        TransLine { name: name.into(), from, to, x, limit }
    }

    fn gen(name: &str, bus: usize, p_max: f64, c1: f64, c2: f64) -> Generator {
        Generator { name: name.into(), bus, p_min: 0.0, p_max, c1, c2, c3: 0.0 }
    }

    // triangle 0-1-2 plus a radial load bus 3 hanging off bus 2
    fn case() -> TransmissionCase {
        let lines = vec![line("l01", 0, 1, 0.1, 5.0), line("l12", 1, 2, 0.1, 5.0), line("l02", 0, 2, 0.2, 5.0), line("l23", 2, 3, 0.1, 5.0)];
        let grid = TransmissionGrid::new((0..4).map(|i| format!("b{i}")).collect(), 0, lines, 100.0).unwrap();
        TransmissionCase {
            name: "tri".into(),
            base_mva: 100.0,
            grid,
            generators: vec![gen("g0", 0, 3.0, 1.0, 10.0), gen("g1", 1, 3.0, 2.0, 12.0)],
            winds: vec![WindFarm { name: "w2".into(), bus: 2, p_nom: 1.0, xi: 0 }],
            loads: vec![TransLoad { name: "d2".into(), bus: 2, p: 1.5 }, TransLoad { name: "d3".into(), bus: 3, p: 0.5 }],
            dro_lines: vec![1],
            wind_std: vec![0.2],
        }
    }

    fn input(h: usize) -> TransmissionInput {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| (0..h).map(|t| 0.05 * (i as f64 - 3.5) * (1.0 + t as f64)).collect()).collect();
        TransmissionInput::unbounded(vec![TransStageData { wind_forecast: vec![1.0] }; h], SampleSet::new(rows).unwrap())
    }

    fn cfg(rho: f64, h: usize) -> AssemblyConfig {
        AssemblyConfig { rho, eta: 0.1, epsilon: vec![0.01], horizon: h, delta_h: 1.0 }
    }

    fn solved(rho: f64, h: usize) -> (TransmissionProgram, TransmissionDecision) {
        let p = assemble_transmission_opf(&case(), &input(h), &cfg(rho, h)).unwrap();
        let sol = solve(&p.program, &SolverConfig::default()).unwrap();
        let d = p.extract(&sol).unwrap();
        (p, d)
    }

    #[test]
    fn single_generator_serves_load() {
        // a zero-forecast wind farm with all-zero errors carries no uncertainty
        let lines = vec![line("l", 0, 1, 0.1, 10.0)];
        let grid = TransmissionGrid::new(vec!["a".into(), "b".into()], 0, lines, 100.0).unwrap();
        let c = TransmissionCase {
            name: "two".into(),
            base_mva: 100.0,
            grid,
            generators: vec![gen("g", 0, 5.0, 0.5, 3.0)],
            winds: vec![WindFarm { name: "w".into(), bus: 1, p_nom: 0.0, xi: 0 }],
            loads: vec![TransLoad { name: "d".into(), bus: 1, p: 2.0 }],
            dro_lines: vec![0],
            wind_std: vec![0.0],
        };
        let inp = TransmissionInput::unbounded(vec![TransStageData { wind_forecast: vec![0.0] }], SampleSet::new(vec![vec![0.0]; 3]).unwrap());
        let p = assemble_transmission_opf(&c, &inp, &cfg(1.0, 1)).unwrap();
        assert_eq!(p.uncovered, vec![1]);
        let d = p.extract(&solve(&p.program, &SolverConfig::default()).unwrap()).unwrap();
        assert!((d.e[0][0] - 2.0).abs() < 1e-7);
        assert!((d.output(0, 0, &[0.0], 0, 0.0) - 2.0).abs() < 1e-7);
        assert!((d.report.cost - (0.5 * 4.0 + 3.0 * 2.0)).abs() < 1e-6);
    }

    #[test]
    fn balance_holds_for_every_sample_and_outage() {
        let (p, d) = solved(1.0, 2);
        let c = case();
        let inp = input(2);
        for j in 0..p.catalog.len() {
            for tau in 0..2 {
                for xi in inp.samples.rows() {
                    let r = balance_residual(&c, &p.catalog, &d, &inp, j, tau, xi);
                    assert!(r.abs() < 1e-8, "outage {j} stage {tau}: {r}");
                }
            }
        }
    }

    #[test]
    fn policies_are_causal_and_columns_balance() {
        let (_, d) = solved(1.0, 2);
        for gd in &d.d {
            assert_eq!(gd[0][1], 0.0);
        }
        for tau in 0..2 {
            for c in 0..=tau {
                let sum: f64 = d.d.iter().map(|gd| gd[tau][c]).sum();
                let own = if c == tau { 1.0 } else { 0.0 };
                assert!((sum + own).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn flow_loss_matches_network_flows() {
        let (p, d) = solved(1.0, 2);
        let c = case();
        let inp = input(2);
        let sol_x = {
            // rebuild x from the decision to evaluate the symbolic losses
            let mut x = vec![0.0; p.program.num_vars()];
            for (k, pol) in p.policies.iter().enumerate() {
                for t in 0..2 {
                    x[pol.e[t].0] = d.e[k][t];
                    for (cc, v) in pol.d[t].iter().enumerate() {
                        x[v.0] = d.d[k][t][cc];
                    }
                    for (j, r) in &pol.r_mis {
                        x[r[t].0] = d.r[k][j][t];
                    }
                }
            }
            x
        };
        for j in 0..p.catalog.len() {
            for tau in 0..2 {
                let xi = inp.samples.row(3);
                let inj = d.injections(&c, &p.catalog, &inp, j, tau, xi);
                let flows: Vec<f64> = (0..4).map(|l| (0..4).map(|b| p.ptdfs[j][(l, b)] * inj[b]).sum()).collect();
                for l in 0..4 {
                    let g = flow_loss(&c, &p.catalog, &p.ptdfs[j], &p.policies, &inp, j, l, tau, true);
                    assert!((g.eval(xi, &sol_x) - (flows[l] - 5.0)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn islanded_pairs_excluded() {
        let (p, _) = solved(1.0, 1);
        // line l12 has no flow when l12 itself trips
        let l12_outage = p.catalog.outages().iter().position(|o| o.kind == OutageKind::Line(1)).unwrap();
        assert!(p.excluded.contains(&(1, l12_outage)));
        // two directions per remaining outage, one stage
        assert_eq!(p.risks.len(), 2 * (p.catalog.len() - p.excluded.len()));
    }

    #[test]
    fn extraction_splits_objective() {
        let (_, d) = solved(3.0, 2);
        let r = &d.report;
        assert!((r.cost + 3.0 * r.risk - r.objective).abs() < 1e-7 * (1.0 + r.objective.abs()));
        for c in &r.constraints {
            assert!((c.certificate.unwrap() - c.cvar).abs() < 1e-5, "{c:?}");
        }
    }

    #[test]
    fn wrong_sample_width_rejected() {
        let e = assemble_transmission_opf(&case(), &input(1), &cfg(1.0, 2)).unwrap_err();
        assert!(matches!(e, Error::Assembly(_)));
    }
}
