//! Nonparametric sphericity and identity tests for the row (or column)
//! covariance matrix of high-dimensional transposable data under a Kronecker
//! product dependence structure, `cov[vec(X_i)] = S_C kron S_R`.
//!
//! The crate provides
//!
//! * unbiased trace estimators T1N, T2N and T2N* with both definitional
//!   O(N^4) oracles and O(N^2) evaluation paths ([`estimators`]),
//! * the one-sided sphericity test (H0: S_R proportional to I), identity
//!   test (H0: S_R = I) and known-covariance reduction with analytic power
//!   lower bounds ([`hypothesis`]),
//! * a deterministic generator for the matrix model
//!   X = S_R^{1/2} Z S_C^{1/2} + M under gaussian or standardized-gamma
//!   innovations ([`simulate`]),
//! * a parallel Monte Carlo harness for empirical size and power grids
//!   ([`montecarlo`]), and
//! * the text formats the `hdtd` command-line tool speaks ([`datafile`]).

pub mod datafile;
pub mod eigen;
pub mod error;
pub mod estimators;
pub mod hypothesis;
pub mod matrix;
pub mod montecarlo;
pub mod normal;
pub mod simulate;

pub use error::{Error, Result};
pub use estimators::{
    estimate_all, sample_row_covariance, t1n, t2n_fast, t2n_naive, t2n_star_fast, t2n_star_naive,
    FallingFactorial, TraceEstimates,
};
pub use hypothesis::{
    identity_test, known_covariance_test, power_bound_identity, power_bound_sphericity,
    sigma_u0_hat, sphericity_test, NullKind, NullSpec, PowerBoundInputs, ScaleMode, Target,
    TestOutcome,
};
pub use matrix::{pairwise_gram, MatrixSample, SymMatrix, DEFAULT_EIG_TOL};
pub use montecarlo::{
    run_cell, run_grid, run_grid_with, summarize, Cell, CellResult, ExperimentConfig, RowConfig,
    Scenario, Summary, TestKind,
};
pub use simulate::{
    build_cov, normalize_trace, sample_dataset, CovConfig, InnovationLaw, ModelSpec, Sampler,
};
