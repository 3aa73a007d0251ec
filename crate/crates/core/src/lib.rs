//! Simulation and error-analysis toolkit for a parametric iSWAP gate between
//! two fixed-frequency transmons coupled through a flux-tunable bus.
//!
//! The crate is organized around the experimental workflow:
//!
//! - [`device`] — static device physics: flux maps, effective coupling J12,
//!   Lamb shifts, static ZZ from exact diagonalization;
//! - [`hamiltonian`] — two-level and multi-level Hamiltonian builders plus the
//!   drive-expansion diagnostics;
//! - [`dynamics`] — Lindblad / Schrödinger time evolution with an adaptive
//!   embedded Runge-Kutta integrator;
//! - [`tomography`] — quantum process tomography, chi matrices in the Pauli
//!   basis, readout confusion and Bayes correction;
//! - [`error_analysis`] — error-matrix factoring, SPAM subtraction, dynamic-ZZ
//!   and decoherence error extraction, fidelity-decay fitting;
//! - [`gate`] — calibrated parametric-gate executor used by tomography;
//! - [`experiments`] — scripted reproductions of the characterization
//!   protocols (chevron, swap spectroscopy, Ramsey ZZ, ...);
//! - [`config`] / [`artifacts`] — run configuration and CSV/metadata output.

pub mod artifacts;
pub mod config;
pub mod device;
pub mod dynamics;
pub mod error_analysis;
pub mod experiments;
pub mod gate;
pub mod hamiltonian;
pub mod linalg;
pub mod numerics;
pub mod tomography;
pub mod units;

mod error;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
