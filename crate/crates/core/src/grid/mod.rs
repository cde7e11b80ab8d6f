//! Linearized network models.
//!
//! Distribution feeders use LinDistFlow voltage sensitivities around a fixed
//! slack voltage. Transmission grids use the DC approximation:
//!
//! ```text
//! f = PTDF · p                         (balanced injections p)
//! f'_l = f_l + LODF[l, j] · f_j        (after tripping line j)
//! ```
//!
//! All quantities are per unit; loaders convert from kW or MW.

mod feeder;
mod outage;
pub(crate) mod transmission;

pub use feeder::{lindistflow_sensitivities, DistributionFeeder, FeederLine};
pub use outage::{enumerate_outages, mismatch, InjectionSite, Outage, OutageCatalog, OutageKind, SiteKind};
pub use transmission::{components, ptdf_on, TransLine, TransmissionGrid, BRIDGE_TOL};
