//! Quantum-computed-moments (QCM) toolkit.
//!
//! Ground-state energy estimation from low-order Hamiltonian moments:
//! symbolic Pauli algebra for exact powers H^k, moment/cumulant conversion,
//! the fourth-order Lanczos and fifth-order connected-moments estimators,
//! tensor-product-basis measurement sampling, RVB trial-state circuits, and
//! the noise channels used to study how those estimators degrade.
//!
//! The crate is organised to mirror the method's pipeline:
//!
//! - [`pauli`] — weighted Pauli-string sums over a symplectic bit-mask
//!   encoding; products, powers, exact expectations.
//! - [`hamiltonian`] — Heisenberg rings and random-coupling ensembles, GUE
//!   matrices, truncated-oscillator spectra, exact reference ground states.
//! - [`ansatz`] — singlet + eSWAP-layer RVB circuits and CNOT accounting.
//! - [`sim`] — statevector/density-matrix simulation and noise channels.
//! - [`measure`] — qubit-wise-commuting basis grouping and shot sampling.
//! - [`estimators`] — cumulants, the Lanczos/CMX energy estimates, the
//!   high-temperature benchmark.
//! - [`whitenoise`] — the analytic white-noise oscillator model, exact and
//!   asymptotic.
//! - [`vqe`] — derivative-free optimization of the RVB parameters.

pub mod ansatz;
pub mod error;
pub mod estimators;
pub mod hamiltonian;
pub mod measure;
pub mod pauli;
pub mod sim;
pub mod vqe;
pub mod whitenoise;

pub use error::{QcmError, Result};

pub use num_complex::Complex64;

/// Crate version, embedded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
