//! Modular quadrature measurements of an oscillator through a photon-pressure
//! coupled coherent-state ancilla.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod circuit;
pub mod cli;
pub mod drive;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod modular_measure;
pub mod noise;
pub mod release;
pub mod rng;

pub use error::{Error, Result};
