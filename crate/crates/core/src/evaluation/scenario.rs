//! Stage inputs for a given clock step.
//!
//! Forecasts follow the day profiles; the error samples of lookahead stage
//! `τ` are the dataset samples scaled by `1 + g τ`, so uncertainty grows with
//! the prediction horizon:
//!
//! ```text
//! P̄_k(t + τ) = peak · S_k · solar(t + τ)
//! ξ^(τ)      = (1 + g τ) · ξ
//! ```

use serde::{Deserialize, Serialize};

use super::profiles::{load_at, solar_at, STEP_HOURS};
use crate::case::DistributionCase;
use crate::dro::SampleSet;
use crate::error::Result;
use crate::opf::DistStageData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistForecast {
    /// Available power at solar noon as a fraction of the inverter rating.
    pub pv_peak: f64,
    /// Growth `g` of the error spread per lookahead stage.
    pub error_growth: f64,
    /// Length of one clock step in hours.
    pub step_hours: f64,
}

impl Default for DistForecast {
    fn default() -> Self {
        Self { pv_peak: 0.9, error_growth: 0.25, step_hours: STEP_HOURS }
    }
}

impl DistForecast {
    pub fn hour(&self, step: usize) -> f64 {
        (step as f64 * self.step_hours).rem_euclid(24.0)
    }

    pub fn pv_forecast(&self, case: &DistributionCase, step: usize) -> Vec<f64> {
        case.inverters.iter().map(|u| self.pv_peak * u.s_max * solar_at(self.hour(step))).collect()
    }

    pub fn stage(&self, case: &DistributionCase, step: usize, tau: usize, samples: &SampleSet) -> Result<DistStageData> {
        let g = 1.0 + self.error_growth * tau as f64;
        let scaled = if tau == 0 {
            samples.clone()
        } else {
            SampleSet::with_names(samples.names().to_vec(), samples.rows().iter().map(|r| r.iter().map(|v| v * g).collect()).collect())?
        };
        Ok(DistStageData::unbounded(load_at(self.hour(step + tau)), self.pv_forecast(case, step + tau), scaled))
    }

    /// Inputs of stages `step … step + horizon − 1`.
    pub fn horizon(&self, case: &DistributionCase, step: usize, horizon: usize, samples: &SampleSet) -> Result<Vec<DistStageData>> {
        (0..horizon).map(|tau| self.stage(case, step, tau, samples)).collect()
    }
}
