//! Pseudo-spectral solver for the Dirac-Klein-Gordon system on `ℝ^{1+4}`
//! with Picard iteration in a vector-field norm.
//!
//! The crate is organised bottom-up: [`gamma`] holds the Clifford algebra,
//! [`grid`] and [`fields`] the periodic discretisation, [`propagate`] the
//! exact linear flows with Duhamel sources, [`vecfields`] the commuting
//! vector fields, [`picard`] the iteration and [`analysis`] the energy
//! monitors, decay fits and mass sweeps.

pub mod error;
pub mod analysis;
pub mod fields;
pub mod gamma;
pub mod grid;
pub mod io;
pub mod propagate;
pub mod trajectory;
pub mod picard;
pub mod vecfields;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
