//! Validated grid cases with their attached devices.
//!
//! Internally everything is per unit: distribution cases on `base_kva`,
//! transmission cases on `base_mva`. Loaders convert from kW/kWh and MW.

use serde::{Deserialize, Serialize};

use crate::devices::{CostPrices, Generator, Load, ResInverter, StorageUnit, TransLoad, WindFarm};
use crate::error::{Error, Result};
use crate::grid::{DistributionFeeder, InjectionSite, SiteKind, TransmissionGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionCase {
    pub name: String,
    pub base_kva: f64,
    pub feeder: DistributionFeeder,
    pub loads: Vec<Load>,
    pub inverters: Vec<ResInverter>,
    pub storage: Vec<StorageUnit>,
    /// Names of the forecast-error components.
    pub error_names: Vec<String>,
    /// Buses whose voltage limits carry a risk term; `None` means all
    /// non-slack buses.
    pub monitored: Option<Vec<usize>>,
    pub prices: CostPrices,
}

impl DistributionCase {
    pub fn n_xi(&self) -> usize {
        self.error_names.len()
    }

    pub fn monitored_buses(&self) -> Vec<usize> {
        self.monitored.clone().unwrap_or_else(|| self.feeder.non_slack())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.feeder.n_bus();
        let nx = self.n_xi();
        for l in &self.loads {
            check_bus(&l.name, l.bus, n)?;
            if let Some(c) = l.xi {
                check_xi(&l.name, c, nx)?;
            }
        }
        for i in &self.inverters {
            check_bus(&i.name, i.bus, n)?;
            check_xi(&i.name, i.xi, nx)?;
            i.validate()?;
        }
        for s in &self.storage {
            check_bus(&s.name, s.bus, n)?;
            s.validate()?;
        }
        if let Some(m) = &self.monitored {
            for &b in m {
                check_bus("monitored", b, n)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionCase {
    pub name: String,
    pub base_mva: f64,
    pub grid: TransmissionGrid,
    pub generators: Vec<Generator>,
    pub winds: Vec<WindFarm>,
    pub loads: Vec<TransLoad>,
    /// Lines whose limits get a worst-case CVaR term in both directions.
    pub dro_lines: Vec<usize>,
    /// Forecast-error standard deviation per wind farm (p.u.).
    pub wind_std: Vec<f64>,
}

impl TransmissionCase {
    /// Errors per stage: one component per wind farm.
    pub fn n_w(&self) -> usize {
        self.winds.len()
    }

    /// Trippable devices in catalog order: generators, wind farms (as
    /// generators at nominal output), loads.
    pub fn sites(&self) -> Vec<InjectionSite> {
        let gens = self.generators.iter().map(|g| InjectionSite { name: g.name.clone(), bus: g.bus, kind: SiteKind::Generator, power: g.p_max });
        let winds = self.winds.iter().map(|w| InjectionSite { name: w.name.clone(), bus: w.bus, kind: SiteKind::Generator, power: w.p_nom });
        let loads = self.loads.iter().map(|l| InjectionSite { name: l.name.clone(), bus: l.bus, kind: SiteKind::Load, power: l.p });
        gens.chain(winds).chain(loads).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n_bus();
        for g in &self.generators {
            check_bus(&g.name, g.bus, n)?;
            if g.p_min > g.p_max {
                return Err(Error::Config(format!("generator {}: p_min exceeds p_max", g.name)));
            }
        }
        for (k, w) in self.winds.iter().enumerate() {
            check_bus(&w.name, w.bus, n)?;
            if w.xi != k {
                return Err(Error::Config(format!("wind farm {} must use error component {k}", w.name)));
            }
        }
        for l in &self.loads {
            check_bus(&l.name, l.bus, n)?;
        }
        for &l in &self.dro_lines {
            if l >= self.grid.n_lines() {
                return Err(Error::Config(format!("risk line index {l} out of range")));
            }
        }
        if self.wind_std.len() != self.winds.len() {
            return Err(Error::Config("one error standard deviation per wind farm required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridCase {
    Distribution(DistributionCase),
    Transmission(TransmissionCase),
}

impl GridCase {
    pub fn name(&self) -> &str {
        match self {
            GridCase::Distribution(c) => &c.name,
            GridCase::Transmission(c) => &c.name,
        }
    }

    pub fn as_distribution(&self) -> Result<&DistributionCase> {
        match self {
            GridCase::Distribution(c) => Ok(c),
            GridCase::Transmission(c) => Err(Error::Config(format!("case {} is a transmission case", c.name))),
        }
    }

    pub fn as_transmission(&self) -> Result<&TransmissionCase> {
        match self {
            GridCase::Transmission(c) => Ok(c),
            GridCase::Distribution(c) => Err(Error::Config(format!("case {} is a distribution case", c.name))),
        }
    }
}

fn check_bus(name: &str, bus: usize, n: usize) -> Result<()> {
    if bus >= n {
        return Err(Error::Topology(format!("{name} refers to missing bus index {bus}")));
    }
    Ok(())
}

fn check_xi(name: &str, c: usize, n: usize) -> Result<()> {
    if c >= n {
        return Err(Error::Config(format!("{name} refers to missing error component {c}")));
    }
    Ok(())
}

/// Copy of a serde-friendly summary, used in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub name: String,
    pub kind: String,
    pub buses: usize,
    pub lines: usize,
    pub devices: usize,
}

impl From<&GridCase> for CaseSummary {
    fn from(c: &GridCase) -> Self {
        match c {
            GridCase::Distribution(d) => CaseSummary {
                name: d.name.clone(),
                kind: "distribution".into(),
                buses: d.feeder.n_bus(),
                lines: d.feeder.lines.len(),
                devices: d.loads.len() + d.inverters.len() + d.storage.len(),
            },
            GridCase::Transmission(t) => CaseSummary {
                name: t.name.clone(),
                kind: "transmission".into(),
                buses: t.grid.n_bus(),
                lines: t.grid.n_lines(),
                devices: t.generators.len() + t.winds.len() + t.loads.len(),
            },
        }
    }
}
