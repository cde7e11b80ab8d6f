//! Synthetic daily profiles.
//!
//! ```text
//! solar(h) = max(0, sin(π (h − 6) / 13))^1.5     sunrise 6:00, sunset 19:00
//! load(h)  = 0.55 + 0.15 exp(−((h − 13)/3)²) + 0.35 exp(−((h − 19)/2.5)²)
//! ```
//!
//! with `h` the hour of day. Both are dimensionless shapes: solar scales
//! inverter ratings, load scales the nominal loads of the case. Step-indexed
//! helpers use the default 5-minute resolution.

use std::f64::consts::PI;

pub const STEPS_PER_DAY: usize = 288;
pub const STEP_HOURS: f64 = 5.0 / 60.0;

pub fn hour_of(step: usize) -> f64 {
    (step % STEPS_PER_DAY) as f64 * STEP_HOURS
}

pub fn solar_at(hour: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    (PI * (h - 6.0) / 13.0).sin().max(0.0).powf(1.5)
}

pub fn load_at(hour: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    0.55 + 0.15 * (-((h - 13.0) / 3.0).powi(2)).exp() + 0.35 * (-((h - 19.0) / 2.5).powi(2)).exp()
}

pub fn solar_shape(step: usize) -> f64 {
    solar_at(hour_of(step))
}

pub fn load_shape(step: usize) -> f64 {
    load_at(hour_of(step))
}

/// Step with the largest solar shape.
pub fn solar_peak_step() -> usize {
    (0..STEPS_PER_DAY).max_by(|a, b| solar_shape(*a).total_cmp(&solar_shape(*b))).unwrap_or(0)
}
