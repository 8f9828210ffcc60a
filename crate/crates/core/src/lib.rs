//! Traffic-light junctions: germs, homogenized germs, periodic correctors and
//! finite-volume solvers for a road splitting into two exits.
//!
//! The crate is organised bottom-up:
//!
//! * [`flux`]: concave fluxes, envelopes, inverses and reflection.
//! * [`germ`]: entropy dissipation, limiter-parametrized germs and their
//!   certification.
//! * [`signal`] and [`effective`]: the periodic light and its homogenized germ.
//! * [`hj`]: half-line Hamilton-Jacobi correctors.
//! * [`fvm`]: Godunov solvers with the light or the homogenized junction.
//! * [`scenario`]: TOML scenario files.
//! * [`presets`] and [`battery`]: reference lights and the acceptance battery
//!   shared by the test suite and the command line.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod effective;
pub mod error;
pub mod flux;
pub mod fvm;
pub mod germ;
pub mod hj;
pub mod pl;
pub mod presets;
pub mod scenario;
pub mod signal;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
