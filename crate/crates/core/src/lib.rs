//! Iterative time-ordering (ITO) propagation and Krotov optimal control.

pub mod error;
pub mod gates;
pub mod generator;
pub mod krotov;
pub mod models;
pub mod propagators;
pub mod quantum;
pub mod spectral;

pub use error::{Error, Result};
