//! Run configuration shared by the library entry point and the CLI.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_unit_interval, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveDist,
    SolveTrans,
    Mpc,
    Sweep,
    Eval,
    GenData,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SolveDist => "solve-dist",
            Mode::SolveTrans => "solve-trans",
            Mode::Mpc => "mpc",
            Mode::Sweep => "sweep",
            Mode::Eval => "eval",
            Mode::GenData => "gen-data",
        }
    }

    fn single_point(self) -> bool {
        !matches!(self, Mode::Sweep | Mode::GenData)
    }
}

/// Default CVaR level for distribution cases.
pub const DIST_ETA: f64 = 0.01;
/// Default CVaR level for transmission cases.
pub const TRANS_ETA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    /// Case file path, or the name of a bundled case.
    pub case: String,
    /// Training errors as CSV; synthesized from `seed` when absent.
    pub samples: Option<PathBuf>,
    /// Risk weights; one value except for sweeps.
    pub rho: Vec<f64>,
    /// Wasserstein radii; one value except for sweeps.
    pub epsilon: Vec<f64>,
    /// CVaR level; defaults by case kind.
    pub eta: Option<f64>,
    pub horizon: usize,
    /// Training window `N_s`.
    pub window: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub step_minutes: f64,
    /// Clock step of single solves; defaults to the solar peak.
    pub start_step: Option<usize>,
    /// Closed-loop steps per trace.
    pub steps: usize,
    /// Closed-loop Monte Carlo traces.
    pub traces: usize,
    /// Out-of-sample draws for evaluation; 0 disables sweep evaluation.
    pub draws: usize,
    /// Standard deviation of relative photovoltaic errors.
    pub pv_error_std: f64,
    /// Draw evaluation errors from the training data instead of a held-out stream.
    pub in_sample: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::SolveDist,
            case: "feeder37".into(),
            samples: None,
            rho: vec![1.0],
            epsilon: vec![0.0],
            eta: None,
            horizon: 3,
            window: 30,
            seed: 0,
            output: PathBuf::from("out"),
            step_minutes: 5.0,
            start_step: None,
            steps: 288,
            traces: 1,
            draws: 0,
            pv_error_std: 0.1,
            in_sample: false,
        }
    }
}

impl RunConfig {
    pub fn new(mode: Mode, case: impl Into<String>, output: impl Into<PathBuf>) -> Self {
        let draws = if mode == Mode::Eval { 1000 } else { 0 };
        Self { mode, case: case.into(), output: output.into(), draws, ..Self::default() }
    }

    /// Reject inconsistent settings before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.rho.is_empty() || self.epsilon.is_empty() {
            return Err(Error::Config("rho and epsilon need at least one value".into()));
        }
        if self.mode.single_point() && (self.rho.len() != 1 || self.epsilon.len() != 1) {
            return Err(Error::Config(format!("{} takes a single rho and epsilon; use sweep for grids", self.mode.name())));
        }
        for &r in &self.rho {
            check_nonneg("rho", r)?;
        }
        for &e in &self.epsilon {
            check_nonneg("epsilon", e)?;
        }
        if let Some(eta) = self.eta {
            check_unit_interval("eta", eta)?;
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must have at least one stage".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("training window must be positive".into()));
        }
        if !(self.step_minutes > 0.0 && self.step_minutes.is_finite()) {
            return Err(Error::ParameterDomain { name: "step_minutes", value: self.step_minutes, expected: "must be positive" });
        }
        if !(self.pv_error_std >= 0.0 && self.pv_error_std.is_finite()) {
            return Err(Error::ParameterDomain { name: "pv_error_std", value: self.pv_error_std, expected: "must be finite and non-negative" });
        }
        match self.mode {
            Mode::Mpc if self.steps == 0 || self.traces == 0 => Err(Error::Config("mpc needs at least one step and one trace".into())),
            Mode::Eval if self.draws == 0 => Err(Error::Config("eval needs at least one draw".into())),
            _ => Ok(()),
        }
    }

    pub fn step_hours(&self) -> f64 {
        self.step_minutes / 60.0
    }
}
