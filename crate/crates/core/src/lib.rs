//! Stability certificates for semilinear ordinary differential equations.

// Validation guards are written as `!(x >= 0.0)` on purpose: the negated
// comparison also rejects NaN, which `x < 0.0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defaults;
pub mod error;
pub mod exponent;
pub mod bounds;
pub mod dichotomy;
pub mod grid;
mod kernel;
pub mod linear;
pub mod norms;
pub mod scenarios;
pub mod shadowing;

pub use error::{Error, Result};
pub use exponent::{ConjugateTriple, Exponent};
pub use grid::{ExpTail, GridFunction, VectorNorm};
pub use norms::{convolve, lp_norm, lp_norm_truncated, lp_norm_with, young_check, young_factor, ExpKernel, KernelSide, YoungReport};

// Compile and run the guide's code blocks alongside the unit tests so the
// book cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/exponents-and-norms.md")]
    mod exponents_and_norms {}
    #[doc = include_str!("../../../book/src/linear-flows.md")]
    mod linear_flows {}
    #[doc = include_str!("../../../book/src/stability-constants.md")]
    mod stability_constants {}
    #[doc = include_str!("../../../book/src/shadowing.md")]
    mod shadowing_guide {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios_guide {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli_guide {}
}
