use serde::{Deserialize, Serialize};

use super::TransmissionGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    Generator,
    Load,
}

/// A device that can trip: where it is, what it is, how much it injects or
/// consumes (p.u., positive for both kinds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSite {
    pub name: String,
    pub bus: usize,
    pub kind: SiteKind,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "index", rename_all = "kebab-case")]
pub enum OutageKind {
    None,
    Line(usize),
    /// Index into the site list.
    Generator(usize),
    /// Index into the site list.
    Load(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outage {
    pub kind: OutageKind,
    /// Sites disconnected by this outage.
    pub lost_sites: Vec<usize>,
    /// Disconnected generation `P_G` (p.u.).
    pub p_gen: f64,
    /// Disconnected load `P_L` (p.u.).
    pub p_load: f64,
    /// Generation-load mismatch `P_mis` (p.u.).
    pub p_mis: f64,
}

/// Mismatch rule for each outage kind:
///
/// ```text
/// P_mis = P_L − P_G   line outage (everything the line disconnects)
///       = +P_L        load outage
///       = −P_G        generator outage
///       = 0           no outage
/// ```
pub fn mismatch(kind: OutageKind, p_gen: f64, p_load: f64) -> f64 {
    match kind {
        OutageKind::None => 0.0,
        OutageKind::Line(_) => p_load - p_gen,
        OutageKind::Load(_) => p_load,
        OutageKind::Generator(_) => -p_gen,
    }
}

/// The base case followed by every single outage, ordered base, generators,
/// loads, lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCatalog {
    outages: Vec<Outage>,
}

impl OutageCatalog {
    pub fn outages(&self) -> &[Outage] {
        &self.outages
    }

    pub fn len(&self) -> usize {
        self.outages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outages.is_empty()
    }

    pub fn get(&self, id: usize) -> Result<&Outage> {
        self.outages.get(id).ok_or(Error::UnknownOutage(id))
    }

    /// Keep only the base case.
    pub fn base_only(&self) -> OutageCatalog {
        OutageCatalog { outages: self.outages[..1].to_vec() }
    }

    /// Restrict to the listed outage ids; the base case is always kept first.
    pub fn subset(&self, ids: &[usize]) -> Result<OutageCatalog> {
        let mut outages = vec![self.outages[0].clone()];
        for &id in ids {
            if id != 0 {
                outages.push(self.get(id)?.clone());
            }
        }
        Ok(OutageCatalog { outages })
    }
}

fn outage(kind: OutageKind, lost_sites: Vec<usize>, sites: &[InjectionSite]) -> Outage {
    let sum = |k: SiteKind| lost_sites.iter().filter(|&&s| sites[s].kind == k).map(|&s| sites[s].power).sum::<f64>();
    let (p_gen, p_load) = (sum(SiteKind::Generator), sum(SiteKind::Load));
    Outage { kind, p_mis: mismatch(kind, p_gen, p_load), lost_sites, p_gen, p_load }
}

/// Enumerate the base case and all single generator, load and line outages.
///
/// A line outage that islands part of the grid loses every site on the side
/// without the slack bus; one that islands nothing has `P_mis = 0`.
pub fn enumerate_outages(grid: &TransmissionGrid, sites: &[InjectionSite]) -> Result<OutageCatalog> {
    if let Some(s) = sites.iter().find(|s| s.bus >= grid.n_bus()) {
        return Err(Error::Topology(format!("site {} refers to missing bus {}", s.name, s.bus)));
    }
    let mut outages = vec![outage(OutageKind::None, Vec::new(), sites)];
    for kind in [SiteKind::Generator, SiteKind::Load] {
        for (i, s) in sites.iter().enumerate().filter(|(_, s)| s.kind == kind) {
            let k = match s.kind {
                SiteKind::Generator => OutageKind::Generator(i),
                SiteKind::Load => OutageKind::Load(i),
            };
            outages.push(outage(k, vec![i], sites));
        }
    }
    for l in 0..grid.n_lines() {
        let cut = grid.islanded_buses(l);
        let lost = (0..sites.len()).filter(|&i| cut.contains(&sites[i].bus)).collect();
        outages.push(outage(OutageKind::Line(l), lost, sites));
    }
    Ok(OutageCatalog { outages })
}
