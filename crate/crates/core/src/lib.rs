//! Recovery of matrices that are simultaneously low-rank and row-sparse
//! from nested linear measurements `y = W(Ψ X) + z`.
//!
//! The estimator works in two stages: a nuclear-norm (or SVP) stage
//! recovers the compressed matrix `Ψ X` from `y`, then an `ℓ1,2` (or
//! hard-thresholding) stage recovers `X` from the compressed estimate.
//! Alongside it the crate carries the lower-bound machinery (packing sets,
//! hypothesis classes, KL divergence, Fano's inequality), a compressive
//! phase retrieval pipeline, and a seeded experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cpr;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod matrix_io;
pub mod minimax;
pub mod model;
pub mod operators;
pub mod proximal;
pub mod seed;
pub mod solvers;

pub use error::{Error, Result};
pub use estimator::{recover, recover_doubly_sparse, RecoveryConfig, RecoveryResult, StageMethod};
pub use model::{random_target, NoiseModel, ProblemDims, StructuredTarget};
pub use operators::{NestedOperator, RankOperator, SensingMatrix};
pub use solvers::{SolveReport, SolverConfig};
