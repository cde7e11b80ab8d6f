//! Distributionally robust optimal power flow.
//!
//! Uncertain operating limits `g(x, ξ) <= 0` are priced in the objective as
//! worst-case CVaR over a 1-Wasserstein ball around recorded forecast errors:
//!
//! ```text
//! minimize  cost(x) + ρ Σ_g sup_{P : W(P, P̂_N) <= ε} CVaR_η,P(g(x, ξ))
//! ```
//!
//! [`dro`] compiles each supremum into linear rows of a [`program::ConvexProgram`];
//! [`opf`] assembles feeder and transmission programs from the models in
//! [`grid`] and [`devices`]; [`mpc`] and [`evaluation`] run them in closed
//! loop and out of sample.
//!
//! ```
//! use dropf::dro::{worst_case_cvar, AffineLoss, AmbiguitySet, SampleSet};
//!
//! let data = SampleSet::new(vec![vec![-1.0], vec![0.0], vec![1.0], vec![2.0]])?;
//! let g = AffineLoss::numeric(&[1.0], 0.0);
//! // worst half of the samples averages 1.5; the ball adds ε·|a|/η = 0.2
//! let v = worst_case_cvar(&g, 0.5, &AmbiguitySet::unbounded(data, 0.1)?)?;
//! assert!((v - 1.7).abs() < 1e-9);
//! # Ok::<(), dropf::Error>(())
//! ```

pub mod dro;
pub mod case;
pub mod devices;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod mpc;
pub mod opf;
pub mod program;

pub use error::{Error, Result};
