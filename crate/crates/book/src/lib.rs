//! Chapters of the guide in `book/src`, included here so their Rust snippets
//! run as doctests against the current library.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/programs.md")]
pub mod programs {}

#[doc = include_str!("../../../book/src/wasserstein.md")]
pub mod wasserstein {}

#[doc = include_str!("../../../book/src/distribution.md")]
pub mod distribution {}

#[doc = include_str!("../../../book/src/transmission.md")]
pub mod transmission {}

#[doc = include_str!("../../../book/src/mpc.md")]
pub mod mpc {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
