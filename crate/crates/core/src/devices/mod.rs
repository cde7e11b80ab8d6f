//! Device models and the constraint and cost fragments they emit.
//!
//! Distribution devices work in per-unit power on the feeder base and
//! per-unit-hours of energy. Transmission generators carry an affine reserve
//! policy over the stacked forecast errors of the horizon:
//!
//! ```text
//! u_τ = e_τ + Σ_c D[τ, c] ξ_c + R^j_τ P_mis^j
//! ```
//!
//! where `D[τ, c]` exists only for error columns revealed at or before `τ`.

mod cost;
mod generator;
mod inverter;
mod storage;

pub use cost::{distribution_stage_cost, CostPrices};
pub use generator::{generation_cost, generator_output, Generator, GeneratorPolicy, TransLoad, WindFarm};
pub use inverter::{inverter_constraints, InverterVars, ResInverter};
pub use storage::{storage_constraints, StorageUnit, StorageVars};

use serde::{Deserialize, Serialize};

/// Feeder load with nominal active/reactive demand (p.u.).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub name: String,
    pub bus: usize,
    pub p: f64,
    pub q: f64,
    /// Error component scaling the active demand: `p (1 + ξ_c)`.
    pub xi: Option<usize>,
}
