//! Forecast-error generators.
//!
//! Synthetic errors are a scaled Student-t with `ν > 2` degrees of freedom,
//! rescaled to unit variance before applying the per-component standard
//! deviation:
//!
//! ```text
//! ξ_c = σ_c · T · sqrt((ν − 2) / ν),   T ~ t(ν)
//! excess kurtosis = 6 / (ν − 4)        (ν > 4)
//! ```
//!
//! Persistence residuals of a series `x_0 … x_T` are `e_t = x_{t+1} − x_t`,
//! centered to zero mean and optionally rescaled to target deviations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::dro::SampleSet;
use crate::error::{Error, Result};

/// Degrees of freedom of the leptokurtic preset.
pub const LEPTOKURTIC_NU: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ErrorFamily {
    Gaussian,
    StudentT { nu: f64 },
}

impl ErrorFamily {
    pub fn leptokurtic() -> Self {
        ErrorFamily::StudentT { nu: LEPTOKURTIC_NU }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: ErrorFamily,
    /// Target standard deviation per component; its length is the dimension.
    pub std: Vec<f64>,
    pub count: usize,
}

impl SynthSpec {
    pub fn new(family: ErrorFamily, std: Vec<f64>, count: usize) -> Self {
        Self { family, std, count }
    }
}

/// Draw `spec.count` independent error vectors.
pub fn synth_errors(spec: &SynthSpec, seed: u64) -> Result<SampleSet> {
    if spec.count == 0 {
        return Err(Error::Data("synthetic error count must be at least 1".into()));
    }
    if spec.std.is_empty() || spec.std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Data("standard deviations must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = match spec.family {
        ErrorFamily::Gaussian => (0..spec.count)
            .map(|_| spec.std.iter().map(|s| { let z: f64 = StandardNormal.sample(&mut rng); s * z }).collect::<Vec<f64>>())
            .collect(),
        ErrorFamily::StudentT { nu } => {
            if !(nu > 2.0 && nu.is_finite()) {
                return Err(Error::Data(format!("Student-t needs finite nu > 2 for a finite variance, got {nu}")));
            }
            let t = StudentT::new(nu).map_err(|e| Error::Data(format!("Student-t: {e}")))?;
            let scale = ((nu - 2.0) / nu).sqrt();
            (0..spec.count).map(|_| spec.std.iter().map(|s| s * scale * t.sample(&mut rng)).collect::<Vec<f64>>()).collect()
        }
    };
    SampleSet::new(rows)
}

/// Persistence residuals and whether the series was constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceErrors {
    pub samples: SampleSet,
    /// Every component of the input series was constant.
    pub constant: bool,
}

/// Residuals of the persistence forecast of `series[t][c]`.
pub fn persistence_errors(series: &[Vec<f64>], target_std: Option<&[f64]>) -> Result<PersistenceErrors> {
    if series.len() < 2 {
        return Err(Error::Data(format!("persistence needs at least 2 points, got {}", series.len())));
    }
    let dim = series[0].len();
    if series.iter().any(|r| r.len() != dim) {
        return Err(Error::Data("series rows have unequal lengths".into()));
    }
    if let Some(s) = target_std {
        if s.len() != dim {
            return Err(Error::Data(format!("{} target deviations for {dim} components", s.len())));
        }
    }
    let mut rows: Vec<Vec<f64>> = series.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect()).collect();
    let n = rows.len() as f64;
    let constant = rows.iter().all(|r| r.iter().all(|v| *v == 0.0));
    for c in 0..dim {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        for r in rows.iter_mut() {
            r[c] -= mean;
        }
        if let Some(target) = target_std {
            let sd = (rows.iter().map(|r| r[c] * r[c]).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                for r in rows.iter_mut() {
                    r[c] *= target[c] / sd;
                }
            }
        }
    }
    Ok(PersistenceErrors { samples: SampleSet::new(rows)?, constant })
}
