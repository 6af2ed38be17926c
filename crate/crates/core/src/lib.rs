//! Capped Armijo extrapolation line search wrapped around descent base steps,
//! with iterative hard thresholding for ℓ0-regularized least squares and
//! runtime checks of the descent inequalities the method relies on.
//!
//! Each iteration takes a base step `y = B(x)`, sets `d = y − x`, and moves
//! to `x + (1 + η_k)d` where `η_k = ηᵐ` is found by a capped Armijo search
//! (or 0 when the search fails).

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod instance;
pub mod line_search;
pub mod linalg;
pub mod objective;
pub mod step;
pub mod trace_io;

pub use error::{Error, Result};
pub use line_search::{
    armijo_search, iterate, run, run_plain, ArmijoResult, IterationRecord, LineSearchParams,
    RunTrace, SearchStep, StopCriteria, StopReason,
};
pub use linalg::{DenseMatrix, Vector};
pub use objective::{support, L0LeastSquares, Objective, SmoothQuadratic};
pub use step::{
    hard_threshold, BaseStep, ForwardBackwardStep, GradientDescentStep, IhtStep, StepCertificate,
};
