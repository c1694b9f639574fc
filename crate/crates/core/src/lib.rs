//! Full counting statistics of charge transported by non-interacting
//! fermions.
//!
//! A [`QuantumModel`] holds a one-particle evolution `U`, a one-particle
//! density matrix `ρ` and the lead charge `Q`. The generating function of
//! the transferred charge is a determinant over the one-particle space,
//! e.g. `χ(λ) = det(ρ' + e^{iλU†QU} e^{-iλQ} ρ)` with `ρ' = 1 - ρ`.
//!
//! ```
//! use fcs::{build_two_circle, chi_regularized, binomial_chi, ScatteringMatrix, TwoCircleSpec};
//! use std::f64::consts::PI;
//!
//! let s = ScatteringMatrix::from_transmission(0.3).unwrap();
//! let spec = TwoCircleSpec::new(s, 2.0 * PI, 5.5, -4.5, 5.6);
//! let model = build_two_circle(&spec).unwrap();
//! let chi = chi_regularized(&model, 1.0).unwrap();
//! assert!((chi - binomial_chi(0.3, 10, 1.0)).norm() < 1e-10);
//! ```
//!
//! Modules:
//! - [`counting`]: the five protocols, sampling, cumulants, distributions;
//! - [`fock`]: a brute-force many-body reference for small models;
//! - [`scattering`]: the two-circle junction and closed-form laws;
//! - [`limit`]: cutoff sweeps and trace-class diagnostics;
//! - [`partitions`]: moments and cumulants through set partitions;
//! - [`experiment`]: JSON-configured runs behind the `fcs` binary.

pub mod counting;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod limit;
pub mod linalg;
pub mod model;
pub mod partitions;
pub mod random;
pub mod scattering;

pub use num_complex::Complex64;

pub use counting::{
    chi_collapse, chi_les_lev, chi_regularized, chi_single_measurement, chi_spin_coupling,
    cumulants, cumulants_from_chi, distribution, distribution_from_chi, mean_charge, noise_split,
    sample_chi, ChiEvaluator, ChiSamples, CountingDistribution, CumulantVector, Variant,
};
pub use error::{Error, Result};
pub use limit::{
    cutoff_sweep, regularization_identity_check, trace_class_diagnostics, SweepReport,
};
pub use model::{random_model, ModelKind, QuantumModel};
pub use partitions::{cumulants_to_moments, enumerate_partitions, moments_to_cumulants};
pub use scattering::{
    binomial_chi, build_two_circle, poisson_chi, thermal_two_circle, ScatteringMatrix,
    TwoCircleSpec,
};
