//! Sobolev-scale diagnostics and Bloch band computations for quasiperiodic
//! operators driven by a frequency matrix Λ.
//!
//! The crate is organised around four layers:
//!
//! * [`dual_lattice`] — weights γ on the dual lattice, sublevel enumeration,
//!   and the compactness (Condition C) report.
//! * [`harmonics`] — trigonometric polynomials as sparse spectral fields,
//!   Sobolev norms, and the smoothing operator T.
//! * [`quasi_dynamics`] — the torus flow, Birkhoff box averages, and deformed
//!   mean values.
//! * [`bloch`] — plane-wave Galerkin discretisation of the spectral cell
//!   problem and band structure sweeps.
//!
//! [`jsonio`] defines the JSON wire forms and [`cli`] the command-line
//! front end.

pub mod bloch;
pub mod cli;
pub mod dual_lattice;
pub mod error;
pub mod harmonics;
pub mod jsonio;
pub mod quasi_dynamics;

pub use bloch::{band_structure, BandResult, BlochProblem, Truncation};
pub use dual_lattice::{
    AlphaRule, ConditionCReport, FreqVector, GammaWeight, QuasiMatrix, SublevelSet, Verdict,
};
pub use error::{Error, Result};
pub use harmonics::{MatrixSpectralField, SpectralField};
pub use quasi_dynamics::{Deformation, DensityVerdict};
