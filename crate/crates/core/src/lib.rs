//! Periodic responses of forced nonlinear oscillators by Harmonic Balance,
//! with Floquet stability from three monodromy backends and Urabe's
//! a-posteriori error bound.

pub mod chebyshev;
pub mod continuation;
pub mod error;
pub mod fourier;
pub mod hb;
pub mod models;
pub mod records;
pub mod stability;
pub mod urabe;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harmonic-balance.md")]
mod book_harmonic_balance {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/continuation.md")]
mod book_continuation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
mod book_models {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/stability.md")]
mod book_stability {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/error-bounds.md")]
mod book_error_bounds {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/validation.md")]
mod book_validation {}
