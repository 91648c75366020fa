//! Solver library for the one-dimensional nonlocal Helmholtz equation with
//! perfectly matched layers.

pub mod analysis;
pub mod banded;
pub mod cli;
pub mod discretization;
pub mod dispersion;
pub mod error;
pub mod experiment;
pub mod greens;
pub mod kernels;
pub mod pml;
pub mod quadrature;
pub mod solver;
pub mod source;

pub use dispersion::{
    cutoff_k0, cutoff_k0_numeric, mu, mu_closed_form, solve_ktilde, solve_ktilde_numeric,
    DispersionResult, Regime,
};
pub use analysis::{ErrorReport, Region};
pub use error::{Error, Result};
pub use experiment::{CaseSelection, ExperimentConfig, Sigma0Setting};
pub use kernels::{KernelFamily, KernelSpec};
pub use pml::{choose_sigma0, PmlProfile};
pub use source::{SourceFunction, SourceKind};

pub use num_complex::Complex64;
