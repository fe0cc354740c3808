//! Unified error type for design construction, diagnostics, solvers, and the bench.

use thiserror::Error;

/// Everything that can go wrong across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Parameter combination that cannot yield a valid artifact (invalid
    /// ranges, impossible geometry, non-positive-definite target Gram, ...).
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),

    /// A rejection-sampled column could not satisfy the between-group
    /// coherence bound within the per-column attempt budget. Signals that `p`
    /// is too large for `m` at the requested `rho_out_max`.
    #[error(
        "rejection budget exhausted drawing column {column}: \
         {attempts} attempts at bound {bound}"
    )]
    RejectionBudgetExhausted {
        column: usize,
        attempts: usize,
        bound: f64,
    },

    /// The support Gram matrix is numerically singular, so the
    /// irrepresentable statistic is undefined.
    #[error(
        "support Gram matrix is numerically singular \
         (smallest eigenvalue {kappa:.3e} <= {limit:.3e})"
    )]
    SingularSupportGram { kappa: f64, limit: f64 },

    /// Selected columns are too close to linearly dependent for a
    /// least-squares refit.
    #[error("least-squares system numerically singular (condition estimate {cond:.3e})")]
    SingularLeastSquares { cond: f64 },

    /// Subset enumeration would exceed the configured budget.
    #[error("subset enumeration budget exceeded: C({p}, {k}) = {count} > {budget}")]
    BudgetExceeded {
        p: usize,
        k: usize,
        count: u128,
        budget: u128,
    },

    /// Aggregation was requested over a cell containing no trials.
    #[error("cannot summarize empty cell: {0}")]
    EmptyCell(String),
}

pub type Result<T> = std::result::Result<T, Error>;
