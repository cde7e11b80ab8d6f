use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feeder branch in per-unit impedance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederLine {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

/// Parent pointers of a radial feeder rooted at the slack bus.
#[derive(Debug, Clone, PartialEq)]
struct Tree {
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    cum_r: Vec<f64>,
    cum_x: Vec<f64>,
}

fn radial_tree(n_bus: usize, slack: usize, lines: &[FeederLine]) -> Result<Tree> {
    if slack >= n_bus {
        return Err(Error::Topology(format!("slack bus {slack} does not exist ({n_bus} buses)")));
    }
    if lines.len() + 1 != n_bus {
        return Err(Error::Topology(format!("radial feeder with {n_bus} buses needs {} lines, found {}", n_bus - 1, lines.len())));
    }
    let mut adj = vec![Vec::new(); n_bus];
    for (k, l) in lines.iter().enumerate() {
        if l.from >= n_bus || l.to >= n_bus || l.from == l.to {
            return Err(Error::Topology(format!("line {k} connects invalid buses {} and {}", l.from, l.to)));
        }
        adj[l.from].push((l.to, k));
        adj[l.to].push((l.from, k));
    }
    let mut tree = Tree { parent: vec![None; n_bus], depth: vec![0; n_bus], cum_r: vec![0.0; n_bus], cum_x: vec![0.0; n_bus] };
    let mut seen = vec![false; n_bus];
    seen[slack] = true;
    let mut queue = VecDeque::from([slack]);
    while let Some(b) = queue.pop_front() {
        for &(nb, k) in &adj[b] {
            if !seen[nb] {
                seen[nb] = true;
                tree.parent[nb] = Some(b);
                tree.depth[nb] = tree.depth[b] + 1;
                tree.cum_r[nb] = tree.cum_r[b] + lines[k].r;
                tree.cum_x[nb] = tree.cum_x[b] + lines[k].x;
                queue.push_back(nb);
            }
        }
    }
    if let Some(b) = seen.iter().position(|s| !s) {
        return Err(Error::Topology(format!("bus {b} is not connected to the slack bus")));
    }
    Ok(tree)
}

fn common_ancestor(tree: &Tree, mut a: usize, mut b: usize) -> usize {
    while tree.depth[a] > tree.depth[b] {
        a = tree.parent[a].unwrap_or(a);
    }
    while tree.depth[b] > tree.depth[a] {
        b = tree.parent[b].unwrap_or(b);
    }
    while a != b {
        a = tree.parent[a].unwrap_or(a);
        b = tree.parent[b].unwrap_or(b);
    }
    a
}

/// LinDistFlow voltage sensitivities of a radial feeder.
///
/// ```text
/// v = v₀ + R_v p + X_v q
/// R_v[m, n] = 2 Σ r over the lines shared by the slack→m and slack→n paths
/// X_v[m, n] = 2 Σ x over the same lines
/// ```
///
/// `p`, `q` are net injections (generation minus load) in p.u.; the slack row
/// and column are zero. Returns `(R_v, X_v, v₀)`.
pub fn lindistflow_sensitivities(
    n_bus: usize,
    slack: usize,
    lines: &[FeederLine],
    v_slack: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let tree = radial_tree(n_bus, slack, lines)?;
    let mut rv = DMatrix::zeros(n_bus, n_bus);
    let mut xv = DMatrix::zeros(n_bus, n_bus);
    for m in 0..n_bus {
        for n in m..n_bus {
            let c = common_ancestor(&tree, m, n);
            rv[(m, n)] = 2.0 * tree.cum_r[c];
            rv[(n, m)] = rv[(m, n)];
            xv[(m, n)] = 2.0 * tree.cum_x[c];
            xv[(n, m)] = xv[(m, n)];
        }
    }
    Ok((rv, xv, vec![v_slack; n_bus]))
}

/// Radial distribution feeder with precomputed voltage sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFeeder {
    pub bus_names: Vec<String>,
    pub slack: usize,
    pub lines: Vec<FeederLine>,
    pub v_slack: f64,
    pub v_min: f64,
    pub v_max: f64,
    r_v: DMatrix<f64>,
    x_v: DMatrix<f64>,
    v0: Vec<f64>,
}

impl DistributionFeeder {
    pub fn new(bus_names: Vec<String>, slack: usize, lines: Vec<FeederLine>, v_slack: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if !(v_min < v_max) {
            return Err(Error::Config(format!("voltage limits must satisfy v_min < v_max, got {v_min} and {v_max}")));
        }
        if lines.iter().any(|l| !(l.r >= 0.0 && l.x >= 0.0)) {
            return Err(Error::Config("feeder line impedances must be nonnegative".into()));
        }
        let (r_v, x_v, v0) = lindistflow_sensitivities(bus_names.len(), slack, &lines, v_slack)?;
        Ok(Self { bus_names, slack, lines, v_slack, v_min, v_max, r_v, x_v, v0 })
    }

    pub fn n_bus(&self) -> usize {
        self.bus_names.len()
    }

    pub fn r_v(&self) -> &DMatrix<f64> {
        &self.r_v
    }

    pub fn x_v(&self) -> &DMatrix<f64> {
        &self.x_v
    }

    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    pub fn bus_index(&self, name: &str) -> Option<usize> {
        self.bus_names.iter().position(|b| b == name)
    }

    /// Buses other than the slack, in index order.
    pub fn non_slack(&self) -> Vec<usize> {
        (0..self.n_bus()).filter(|&b| b != self.slack).collect()
    }

    /// Bus voltages for net injections `p`, `q` (p.u.).
    pub fn voltage_profile(&self, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_bus();
        if p.len() != n || q.len() != n {
            return Err(Error::Dimension(format!("injection vectors must have {n} entries, got {} and {}", p.len(), q.len())));
        }
        Ok((0..n)
            .map(|m| self.v0[m] + (0..n).map(|k| self.r_v[(m, k)] * p[k] + self.x_v[(m, k)] * q[k]).sum::<f64>())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(from: usize, to: usize, r: f64) -> FeederLine {
        FeederLine { from, to, r, x: 0.5 * r }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("b{i}")).collect()
    }

    // 2·A⁻¹ diag(r) A⁻ᵀ with A the incidence matrix reduced by the slack row
    fn incidence_oracle(n: usize, slack: usize, lines: &[FeederLine]) -> DMatrix<f64> {
        let keep: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
        let mut a = DMatrix::zeros(n - 1, lines.len());
        for (k, l) in lines.iter().enumerate() {
            if let Some(i) = keep.iter().position(|&b| b == l.from) {
                a[(i, k)] = 1.0;
            }
            if let Some(i) = keep.iter().position(|&b| b == l.to) {
                a[(i, k)] = -1.0;
            }
        }
        let ainv = a.clone().try_inverse().unwrap();
        let r = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(lines.len(), lines.iter().map(|l| l.r)));
        let reduced = ainv.transpose() * r * ainv * 2.0;
        let mut full = DMatrix::zeros(n, n);
        for (i, &bi) in keep.iter().enumerate() {
            for (j, &bj) in keep.iter().enumerate() {
                full[(bi, bj)] = reduced[(i, j)];
            }
        }
        full
    }

    #[test]
    fn two_bus_feeder() {
        let f = DistributionFeeder::new(names(2), 0, vec![line(0, 1, 0.01)], 1.0, 0.95, 1.05).unwrap();
        assert_eq!(f.voltage_profile(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
        let v = f.voltage_profile(&[0.0, 0.1], &[0.0, 0.0]).unwrap();
        assert!((v[1] - 1.002).abs() < 1e-12);
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn series_buses_share_near_sensitivity() {
        let lines = vec![line(0, 1, 0.01), line(1, 2, 0.02)];
        let (rv, _, _) = lindistflow_sensitivities(3, 0, &lines, 1.0).unwrap();
        assert_eq!(rv[(2, 1)], rv[(1, 1)]);
        assert!((rv - incidence_oracle(3, 0, &lines)).abs().max() < 1e-12);
    }

    #[test]
    fn topology_errors() {
        // cycle
        let lines = vec![line(0, 1, 0.01), line(1, 2, 0.01), line(2, 0, 0.01)];
        assert!(matches!(lindistflow_sensitivities(3, 0, &lines, 1.0), Err(Error::Topology(_))));
        // right count, but bus 3 unreachable
        let lines = vec![line(0, 1, 0.01), line(1, 2, 0.01), line(2, 1, 0.01)];
        assert!(matches!(lindistflow_sensitivities(4, 0, &lines, 1.0), Err(Error::Topology(_))));
        assert!(DistributionFeeder::new(names(2), 0, vec![line(0, 1, 0.01)], 1.0, 1.05, 0.95).is_err());
    }

    #[test]
    fn heavy_injection_overvoltage() {
        // chain of 5 lines; 0.6 p.u. injected at the end lifts the far bus above 1.05
        let lines: Vec<_> = (0..5).map(|k| line(k, k + 1, 0.01)).collect();
        let f = DistributionFeeder::new(names(6), 0, lines, 1.0, 0.95, 1.05).unwrap();
        let mut p = vec![0.0; 6];
        p[5] = 0.6;
        assert!(f.r_v()[(5, 5)] * 0.6 > 0.05);
        let v = f.voltage_profile(&p, &[0.0; 6]).unwrap();
        assert!(v[5] > f.v_max);
    }

    fn random_tree() -> impl Strategy<Value = (usize, Vec<FeederLine>)> {
        (2usize..12).prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|b| 0..b).collect();
            (Just(n), parents, proptest::collection::vec((0.001f64..0.05, 0.001f64..0.05), n - 1))
        })
        .prop_map(|(n, parents, imp)| {
            let lines = parents
                .iter()
                .zip(imp)
                .enumerate()
                .map(|(k, (&p, (r, x)))| FeederLine { from: p, to: k + 1, r, x })
                .collect();
            (n, lines)
        })
    }

    proptest! {
        #[test]
        fn matches_incidence_solve_and_is_symmetric((n, lines) in random_tree()) {
            let (rv, xv, _) = lindistflow_sensitivities(n, 0, &lines, 1.0).unwrap();
            prop_assert!((&rv - incidence_oracle(n, 0, &lines)).abs().max() < 1e-12);
            prop_assert!((&rv - rv.transpose()).abs().max() == 0.0);
            prop_assert!((&xv - xv.transpose()).abs().max() == 0.0);
            prop_assert!(rv.clone().symmetric_eigenvalues().min() > -1e-12);
        }

        #[test]
        fn superposition((n, lines) in random_tree(), seed in proptest::collection::vec(-1.0f64..1.0, 24)) {
            let f = DistributionFeeder::new(names(n), 0, lines, 1.0, 0.9, 1.1).unwrap();
            let p1 = &seed[..n];
            let p2 = &seed[12..12 + n];
            let sum: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| a + b).collect();
            let z = vec![0.0; n];
            let v1 = f.voltage_profile(p1, &z).unwrap();
            let v2 = f.voltage_profile(p2, &z).unwrap();
            let v12 = f.voltage_profile(&sum, &z).unwrap();
            for m in 0..n {
                prop_assert!(((v12[m] - 1.0) - (v1[m] - 1.0) - (v2[m] - 1.0)).abs() < 1e-12);
            }
        }
    }
}
