//! Exhaustive best-subset reference solver.
//!
//! Enumerates every column subset of exactly the requested size, solves the
//! least-squares problem on each, and returns the subset with the smallest
//! residual norm. Intended as ground truth for validating the iterative
//! solvers on desk-scale instances; the enumeration budget guards against
//! accidentally astronomical calls.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::instance::Observation;

/// Hard ceiling on the number of subsets a single call may enumerate.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Output of the exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Lexicographically first subset attaining the minimal residual.
    pub best_support: Vec<usize>,
    /// That subset's least-squares residual norm.
    pub best_residual_norm: f64,
    /// Exhaustive `(support, residual_norm)` listing, if requested.
    pub per_support_table: Option<Vec<(Vec<usize>, f64)>>,
    /// Number of subsets skipped because their Gram was numerically
    /// rank-deficient.
    pub skipped_singular: usize,
}

/// Number of k-subsets of an n-set, saturating-free via u128.
fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Exhaustively searches all supports of size exactly `k_max`, returning the
/// residual-minimizing one (ties broken toward the lexicographically first
/// subset, which is the enumeration order).
pub fn best_subset(
    design: &DesignMatrix,
    obs: &Observation,
    k_max: usize,
    keep_table: bool,
) -> Result<OracleResult> {
    let (m, p) = (design.m(), design.p());
    if k_max == 0 || k_max > p.min(m) {
        return Err(Error::InfeasibleParams(format!(
            "subset size {k_max} must lie in 1..=min(m, p) = {}",
            p.min(m)
        )));
    }
    if obs.y.nrows() != m {
        return Err(Error::InfeasibleParams(format!(
            "observation length {} does not match m={m}",
            obs.y.nrows()
        )));
    }
    let count = binomial(p, k_max);
    if count > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            p,
            k: k_max,
            count,
            budget: ENUMERATION_BUDGET,
        });
    }

    let mut best_support: Option<Vec<usize>> = None;
    let mut best_residual = f64::INFINITY;
    let mut table = keep_table.then(Vec::new);
    let mut skipped_singular = 0usize;

    // In-place lexicographic enumeration of k-subsets of {0, ..., p-1}.
    let mut subset: Vec<usize> = (0..k_max).collect();
    let y_sq = obs.y.norm_squared();
    let mut gram = DMatrix::<f64>::zeros(k_max, k_max);
    let mut cross = DVector::<f64>::zeros(k_max);
    loop {
        // Residual norm via the normal equations on the subset:
        // ||y - A_S beta||^2 = ||y||^2 - (A_S^T y)^T beta at the minimizer.
        for (ti, &ci) in subset.iter().enumerate() {
            cross[ti] = design.columns.column(ci).dot(&obs.y);
            for (tj, &cj) in subset.iter().enumerate() {
                gram[(ti, tj)] = design.columns.column(ci).dot(&design.columns.column(cj));
            }
        }
        match nalgebra::Cholesky::new(gram.clone()) {
            Some(chol) => {
                let beta = chol.solve(&cross);
                let residual_sq = (y_sq - cross.dot(&beta)).max(0.0);
                let residual = residual_sq.sqrt();
                if let Some(t) = table.as_mut() {
                    t.push((subset.clone(), residual));
                }
                // Strict < keeps the earliest (lexicographically first)
                // minimizer on exact ties.
                if residual < best_residual {
                    best_residual = residual;
                    best_support = Some(subset.clone());
                }
            }
            None => {
                skipped_singular += 1;
                if let Some(t) = table.as_mut() {
                    t.push((subset.clone(), f64::INFINITY));
                }
            }
        }

        // Advance to the next subset in lexicographic order.
        let mut i = k_max;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if subset[i] != i + p - k_max {
                subset[i] += 1;
                for j in (i + 1)..k_max {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                // Highest subset reached.
                let best_support = best_support.ok_or_else(|| {
                    Error::InfeasibleParams(
                        "every candidate subset was numerically singular".into(),
                    )
                })?;
                return Ok(OracleResult {
                    best_support,
                    best_residual_norm: best_residual,
                    per_support_table: table,
                    skipped_singular,
                });
            }
        }
        if subset[0] > p - k_max {
            unreachable!("enumeration advanced past the final subset");
        }
    }
}
