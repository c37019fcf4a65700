//! Normalized solutions of a coupled biharmonic NLS system on periodic spectral grids.

pub mod app;
pub mod config;
pub mod constants;
pub mod dump;
pub mod error;
pub mod fft;
pub mod ground_state;
pub mod model;
pub mod mountain_pass;
pub mod spectral;

pub use error::{Error, Result};
