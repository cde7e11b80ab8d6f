use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 − φ_kk` below this marks line `k` as a bridge.
pub const BRIDGE_TOL: f64 = 1e-9;

/// Transmission branch; reactance and limit in p.u. on the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransLine {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub x: f64,
    pub limit: f64,
}

/// Connected-component label per bus using only lines with `active[k]`.
pub fn components(n_bus: usize, lines: &[TransLine], active: &[bool]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n_bus];
    for (l, &on) in lines.iter().zip(active) {
        if on {
            adj[l.from].push(l.to);
            adj[l.to].push(l.from);
        }
    }
    let mut label = vec![usize::MAX; n_bus];
    let mut next = 0;
    for root in 0..n_bus {
        if label[root] != usize::MAX {
            continue;
        }
        label[root] = next;
        let mut queue = VecDeque::from([root]);
        while let Some(b) = queue.pop_front() {
            for &nb in &adj[b] {
                if label[nb] == usize::MAX {
                    label[nb] = next;
                    queue.push_back(nb);
                }
            }
        }
        next += 1;
    }
    label
}

/// PTDF of the component containing `slack`, using only active lines.
///
/// ```text
/// B = A diag(1/x) Aᵀ      (slack row/column removed)
/// PTDF = diag(1/x) Aᵀ B⁻¹
/// ```
///
/// Columns of buses outside the slack's component and rows of inactive or
/// outside lines are zero.
pub fn ptdf_on(n_bus: usize, slack: usize, lines: &[TransLine], active: &[bool]) -> Result<DMatrix<f64>> {
    let label = components(n_bus, lines, active);
    let island: Vec<usize> = (0..n_bus).filter(|&b| label[b] == label[slack] && b != slack).collect();
    let mut pos = vec![usize::MAX; n_bus];
    for (i, &b) in island.iter().enumerate() {
        pos[b] = i;
    }
    let m = island.len();
    let mut bmat = DMatrix::<f64>::zeros(m, m);
    for (l, &on) in lines.iter().zip(active) {
        if !on || label[l.from] != label[slack] {
            continue;
        }
        let y = 1.0 / l.x;
        let (i, j) = (pos[l.from], pos[l.to]);
        if i != usize::MAX {
            bmat[(i, i)] += y;
        }
        if j != usize::MAX {
            bmat[(j, j)] += y;
        }
        if i != usize::MAX && j != usize::MAX {
            bmat[(i, j)] -= y;
            bmat[(j, i)] -= y;
        }
    }
    let mut ptdf = DMatrix::zeros(lines.len(), n_bus);
    if m == 0 {
        return Ok(ptdf);
    }
    let binv = bmat
        .cholesky()
        .ok_or_else(|| Error::Topology("reduced susceptance matrix is singular".into()))?
        .inverse();
    for (k, (l, &on)) in lines.iter().zip(active).enumerate() {
        if !on || label[l.from] != label[slack] {
            continue;
        }
        let y = 1.0 / l.x;
        for (c, &b) in island.iter().enumerate() {
            let tf = if pos[l.from] != usize::MAX { binv[(pos[l.from], c)] } else { 0.0 };
            let tt = if pos[l.to] != usize::MAX { binv[(pos[l.to], c)] } else { 0.0 };
            ptdf[(k, b)] = y * (tf - tt);
        }
    }
    Ok(ptdf)
}

/// DC transmission grid with PTDF and LODF computed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionGrid {
    pub bus_names: Vec<String>,
    pub slack: usize,
    pub lines: Vec<TransLine>,
    /// MVA base used to convert MW to p.u.
    pub base_mva: f64,
    ptdf: DMatrix<f64>,
    lodf: DMatrix<f64>,
    islanding: Vec<bool>,
}

impl TransmissionGrid {
    pub fn new(bus_names: Vec<String>, slack: usize, lines: Vec<TransLine>, base_mva: f64) -> Result<Self> {
        let n = bus_names.len();
        if slack >= n {
            return Err(Error::Topology(format!("slack bus {slack} does not exist ({n} buses)")));
        }
        for (k, l) in lines.iter().enumerate() {
            if l.from >= n || l.to >= n || l.from == l.to {
                return Err(Error::Topology(format!("line {k} connects invalid buses {} and {}", l.from, l.to)));
            }
            if !(l.x > 0.0) || !(l.limit > 0.0) {
                return Err(Error::Config(format!("line {} needs positive reactance and limit", l.name)));
            }
        }
        if !(base_mva > 0.0) {
            return Err(Error::Config("base_mva must be positive".into()));
        }
        let all = vec![true; lines.len()];
        let label = components(n, &lines, &all);
        if let Some(b) = label.iter().position(|&c| c != label[slack]) {
            return Err(Error::Topology(format!("bus {} is disconnected from the slack bus", bus_names[b])));
        }
        let ptdf = ptdf_on(n, slack, &lines, &all)?;

        let nl = lines.len();
        let islanding: Vec<bool> = (0..nl)
            .map(|k| {
                let mut active = all.clone();
                active[k] = false;
                let lab = components(n, &lines, &active);
                lab[lines[k].from] != lab[lines[k].to]
            })
            .collect();
        // φ[l, k]: flow on l per unit transfer from the from-bus to the to-bus of k
        let mut lodf = DMatrix::zeros(nl, nl);
        for k in 0..nl {
            if islanding[k] {
                continue;
            }
            let (a, b) = (lines[k].from, lines[k].to);
            let denom = 1.0 - (ptdf[(k, a)] - ptdf[(k, b)]);
            if denom.abs() < BRIDGE_TOL {
                return Err(Error::Topology(format!("line {} is numerically a bridge", lines[k].name)));
            }
            for l in 0..nl {
                lodf[(l, k)] = if l == k { -1.0 } else { (ptdf[(l, a)] - ptdf[(l, b)]) / denom };
            }
        }
        Ok(Self { bus_names, slack, lines, base_mva, ptdf, lodf, islanding })
    }

    pub fn n_bus(&self) -> usize {
        self.bus_names.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn ptdf(&self) -> &DMatrix<f64> {
        &self.ptdf
    }

    /// `LODF[l, k]`: change of flow on `l` per unit of pre-outage flow on a
    /// tripped line `k`. Columns of islanding lines are zero. For the other
    /// columns `|LODF[l, k]| <= 1 / (1 − φ_kk)`, because a unit transfer
    /// moves at most one unit over any line.
    pub fn lodf(&self) -> &DMatrix<f64> {
        &self.lodf
    }

    pub fn is_islanding(&self, line: usize) -> bool {
        self.islanding[line]
    }

    pub fn line_index(&self, name: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.name == name)
    }

    pub fn bus_index(&self, name: &str) -> Option<usize> {
        self.bus_names.iter().position(|b| b == name)
    }

    /// Base-case flows for a nodal injection vector (p.u.).
    pub fn flows(&self, injection: &[f64]) -> Result<Vec<f64>> {
        if injection.len() != self.n_bus() {
            return Err(Error::Dimension(format!("injection has {} entries, grid has {} buses", injection.len(), self.n_bus())));
        }
        Ok((&self.ptdf * DVector::from_column_slice(injection)).iter().copied().collect())
    }

    /// Post-outage flows `f_l + LODF[l, j] f_j`, with `f_j = 0`.
    pub fn lodf_postflows(&self, base: &[f64], line: usize) -> Result<Vec<f64>> {
        if line >= self.n_lines() {
            return Err(Error::Topology(format!("line index {line} out of range")));
        }
        if self.islanding[line] {
            return Err(Error::Topology(format!(
                "outage of line {} islands the grid; use the outage catalog entry instead (regenerate it if missing)",
                self.lines[line].name
            )));
        }
        let fj = base[line];
        Ok(base
            .iter()
            .enumerate()
            .map(|(l, &f)| if l == line { 0.0 } else { f + self.lodf[(l, line)] * fj })
            .collect())
    }

    /// PTDF of the grid with `line` removed. For a non-islanding line this is
    /// `PTDF + LODF[:, j] PTDF[j, :]`; for an islanding line it is the PTDF of
    /// the slack's component.
    pub fn ptdf_without(&self, line: usize) -> Result<DMatrix<f64>> {
        if self.islanding[line] {
            let mut active = vec![true; self.n_lines()];
            active[line] = false;
            return ptdf_on(self.n_bus(), self.slack, &self.lines, &active);
        }
        let mut out = &self.ptdf + self.lodf.column(line) * self.ptdf.row(line);
        out.row_mut(line).fill(0.0);
        Ok(out)
    }

    /// Buses cut off from the slack when `line` trips (empty unless islanding).
    pub fn islanded_buses(&self, line: usize) -> Vec<usize> {
        if !self.islanding[line] {
            return Vec::new();
        }
        let mut active = vec![true; self.n_lines()];
        active[line] = false;
        let lab = components(self.n_bus(), &self.lines, &active);
        (0..self.n_bus()).filter(|&b| lab[b] != lab[self.slack]).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn tl(name: &str, from: usize, to: usize, x: f64) -> TransLine {
        TransLine { name: name.into(), from, to, x, limit: 10.0 }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("b{i}")).collect()
    }

    // Fresh DC solve on the full Laplacian: the last bus row is replaced by
    // an angle reference θ = 0, the system is LU-solved and flows come from
    // angle differences. Assumes the active lines connect all buses.
    pub(crate) fn dc_resolve(n: usize, lines: &[TransLine], active: &[bool], inj: &[f64]) -> Vec<f64> {
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for (l, &on) in lines.iter().zip(active) {
            if on {
                let y = 1.0 / l.x;
                lap[(l.from, l.from)] += y;
                lap[(l.to, l.to)] += y;
                lap[(l.from, l.to)] -= y;
                lap[(l.to, l.from)] -= y;
            }
        }
        let mut rhs = DVector::from_column_slice(inj);
        lap.row_mut(n - 1).fill(0.0);
        lap[(n - 1, n - 1)] = 1.0;
        rhs[n - 1] = 0.0;
        let theta = lap.lu().solve(&rhs).unwrap();
        lines
            .iter()
            .zip(active)
            .map(|(l, &on)| if on { (theta[l.from] - theta[l.to]) / l.x } else { 0.0 })
            .collect()
    }

    fn ring() -> TransmissionGrid {
        let lines = vec![tl("13", 0, 2, 1.0), tl("12", 0, 1, 1.0), tl("23", 1, 2, 1.0)];
        TransmissionGrid::new(names(3), 0, lines, 100.0).unwrap()
    }

    #[test]
    fn ring_split() {
        let g = ring();
        let f = g.flows(&[1.0, 0.0, -1.0]).unwrap();
        assert!((f[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((f[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((f[2] - 1.0 / 3.0).abs() < 1e-12);
        assert!(g.flows(&[1.0, 0.0, 0.0]).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn ring_trip_direct_line() {
        let g = ring();
        let f = g.flows(&[1.0, 0.0, -1.0]).unwrap();
        let post = g.lodf_postflows(&f, 0).unwrap();
        assert_eq!(post[0], 0.0);
        assert!((post[1] - 1.0).abs() < 1e-12 && (post[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_flow_trip_is_noop() {
        // bus 1 sits in the middle of a symmetric diamond, the cross line carries nothing
        let lines = vec![tl("a", 0, 1, 1.0), tl("b", 0, 2, 1.0), tl("c", 1, 3, 1.0), tl("d", 2, 3, 1.0), tl("x", 1, 2, 1.0)];
        let g = TransmissionGrid::new(names(4), 0, lines, 100.0).unwrap();
        let f = g.flows(&[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(f[4].abs() < 1e-12);
        let post = g.lodf_postflows(&f, 4).unwrap();
        for l in 0..4 {
            assert!((post[l] - f[l]).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_twin_doubles() {
        let lines = vec![tl("p1", 0, 1, 0.1), tl("p2", 0, 1, 0.1)];
        let g = TransmissionGrid::new(names(2), 0, lines.clone(), 100.0).unwrap();
        let f = g.flows(&[-1.0, 1.0]).unwrap();
        let post = g.lodf_postflows(&f, 0).unwrap();
        assert!((post[1] - 2.0 * f[1]).abs() < 1e-12);
        let fresh = dc_resolve(2, &lines, &[false, true], &[-1.0, 1.0]);
        assert!((post[1] - fresh[1]).abs() < 1e-12);
    }

    #[test]
    fn islanding_line_detected() {
        let lines = vec![tl("12", 0, 1, 1.0), tl("23", 1, 2, 1.0), tl("13", 0, 2, 1.0), tl("stub", 2, 3, 1.0)];
        let g = TransmissionGrid::new(names(4), 0, lines, 100.0).unwrap();
        assert!(g.is_islanding(3) && !g.is_islanding(0));
        assert_eq!(g.islanded_buses(3), vec![3]);
        assert!(matches!(g.lodf_postflows(&[0.0; 4], 3), Err(Error::Topology(_))));
        let p = g.ptdf_without(3).unwrap();
        assert!(p.column(3).iter().all(|&v| v == 0.0) && p.row(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disconnected_grid_rejected() {
        let lines = vec![tl("a", 0, 1, 1.0)];
        assert!(matches!(TransmissionGrid::new(names(3), 0, lines, 100.0), Err(Error::Topology(_))));
    }

    /// Connected random meshed grid: a random spanning tree plus extra chords.
    pub(crate) fn random_grid() -> impl Strategy<Value = (usize, Vec<TransLine>)> {
        (3usize..10).prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|b| 0..b).collect();
            let chords = proptest::collection::vec((0..n, 0..n, 0.05f64..1.0), 1..6);
            (Just(n), parents, proptest::collection::vec(0.05f64..1.0, n - 1), chords)
        })
        .prop_map(|(n, parents, xs, chords)| {
            let mut lines: Vec<TransLine> =
                parents.iter().zip(xs).enumerate().map(|(k, (&p, x))| tl(&format!("t{k}"), p, k + 1, x)).collect();
            for (c, (a, b, x)) in chords.into_iter().enumerate() {
                if a != b {
                    lines.push(tl(&format!("c{c}"), a, b, x));
                }
            }
            (n, lines)
        })
    }

    proptest! {
        #[test]
        fn ptdf_matches_resolve_and_ignores_uniform_shift((n, lines) in random_grid(), raw in proptest::collection::vec(-1.0f64..1.0, 10)) {
            let g = TransmissionGrid::new(names(n), 0, lines.clone(), 100.0).unwrap();
            let mean = raw[..n].iter().sum::<f64>() / n as f64;
            let inj: Vec<f64> = raw[..n].iter().map(|v| v - mean).collect();
            let f = g.flows(&inj).unwrap();
            let fresh = dc_resolve(n, &lines, &vec![true; lines.len()], &inj);
            for (a, b) in f.iter().zip(&fresh) {
                prop_assert!((a - b).abs() < 1e-8);
            }
            let ones = vec![1.0; n];
            let f1 = g.flows(&ones).unwrap();
            // a uniform shift is absorbed by the slack, so only balanced parts matter
            let shifted: Vec<f64> = inj.iter().map(|v| v + 0.7).collect();
            let fs = g.flows(&shifted).unwrap();
            for l in 0..lines.len() {
                prop_assert!((fs[l] - f[l] - 0.7 * f1[l]).abs() < 1e-10);
            }
        }

        #[test]
        fn lodf_matches_resolve((n, lines) in random_grid(), raw in proptest::collection::vec(-1.0f64..1.0, 10)) {
            let g = TransmissionGrid::new(names(n), 0, lines.clone(), 100.0).unwrap();
            let mean = raw[..n].iter().sum::<f64>() / n as f64;
            let inj: Vec<f64> = raw[..n].iter().map(|v| v - mean).collect();
            let f = g.flows(&inj).unwrap();
            for k in 0..lines.len() {
                if g.is_islanding(k) {
                    continue;
                }
                let mut active = vec![true; lines.len()];
                active[k] = false;
                let fresh = dc_resolve(n, &lines, &active, &inj);
                let post = g.lodf_postflows(&f, k).unwrap();
                let viaptdf = g.ptdf_without(k).unwrap() * DVector::from_column_slice(&inj);
                let phi = 1.0 - (g.ptdf()[(k, lines[k].from)] - g.ptdf()[(k, lines[k].to)]);
                for l in 0..lines.len() {
                    prop_assert!((post[l] - fresh[l]).abs() < 1e-8);
                    prop_assert!((viaptdf[l] - fresh[l]).abs() < 1e-8);
                    prop_assert!(g.lodf()[(l, k)].abs() <= 1.0 / phi + 1e-9);
                }
            }
        }
    }
}
