//! Laboratory for sparse support recovery under engineered column coherence.
//!
//! The crate builds design matrices in which every true column is shadowed by a
//! group of near-duplicate companions (within-group inner product `rho_in`,
//! between-group separation `rho_out_max`), samples sparse regression instances
//! on top of them, and measures how three estimator families cope as the
//! duplicates approach exact copies:
//!
//! * [`solvers::lasso`] — ℓ₁-penalized least squares over a regularization path,
//! * [`solvers::omp`] — k-step orthogonal matching pursuit with a full step trace,
//! * [`solvers::sbl`] — the sparse-Bayesian-learning MAP estimator, minimized as a
//!   concave-penalized least-squares objective by iteratively reweighted ridge solves.
//!
//! [`diagnostics`] computes the structural statistics the comparison hinges on
//! (irrepresentable-condition value, restricted eigenvalue, coherence summary),
//! [`oracle`] provides an exhaustive best-subset reference at desk scale, and
//! [`bench`] is a deterministic Monte Carlo harness emitting CSV/JSON reports.
//!
//! All randomness flows through explicit seeds; identical inputs produce
//! bit-identical outputs, including report files.

// Parameter validators use `!(x > 0.0)` rather than `x <= 0.0` so that NaN
// fails validation instead of slipping through; keep the negated form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod instance;
pub mod oracle;
pub mod seed;
pub mod solvers;

pub(crate) mod serde_arrays;

pub use error::{Error, Result};
