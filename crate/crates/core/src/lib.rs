//! Simulation of two-photon Hong-Ou-Mandel interference and universal
//! optimal (symmetrization) cloning of photon qubits encoded in
//! polarization and orbital angular momentum.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cloning;
pub mod elements;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod interference;
pub mod qudit;
pub mod sampling;

pub use error::{Error, Result};
