//! Kernel learning of continuously parametrized quantum states.
//!
//! The crate is organised bottom-up:
//!
//! * [`param_space`]: the periodic parameter box, its sampling measure and evaluation grids.
//! * [`kernels`]: Fejér, Dirichlet, periodized Gaussian and weighted kernels, plus numerical
//!   checks of positivity, normalization and tail decay.
//! * [`quantum`]: dense density matrices, local observables and the entry-wise norm.
//! * [`xy_model`]: exact XY-chain oracles (dense diagonalization, free fermions, Toeplitz
//!   correlators).
//! * [`estimator`]: the kernel predictors for density matrices and scalar properties.
//! * [`complexity`] and [`rkhs`]: closed-form sample-size formulas and generalization bounds.
//! * [`experiments`]: sweeps over the training-set size, log-log fits and file output.

pub mod complexity;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod kernels;
pub mod param_space;
pub mod quantum;
pub mod rkhs;
pub mod stats;
pub mod xy_model;

pub use error::{Error, Result};
pub use estimator::{FejerSeries, PredictOptions, PredictionDiagnostics, TrainingSet};
pub use experiments::{ExperimentConfig, ExperimentOutput, ScalingResult, Task};
pub use kernels::{KernelKind, KernelSpec, PgkReport};
pub use param_space::{Density, ParamPoint, ParamSpace};
pub use quantum::{CMatrix, DensityMatrix, LocalTerm, Observable, ValidationReport};
pub use xy_model::XYParams;
