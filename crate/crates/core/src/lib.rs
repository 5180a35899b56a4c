//! Proximal sampling for log-concave densities `exp(-f)` with semi-smooth or
//! composite potentials.

pub mod analysis;
pub mod asf;
pub mod bundle;
pub mod config;
pub mod error;
pub mod linalg;
pub mod output;
pub mod potential;
pub mod rgo;
pub mod verify;

pub use error::{Error, Result};
