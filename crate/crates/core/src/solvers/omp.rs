//! Orthogonal matching pursuit: greedy column selection with exact
//! least-squares refits.
//!
//! Each step selects the column most correlated with the current residual
//! (ties broken toward the lowest index), appends it to the active set, and
//! re-projects `y` onto the active span through an incrementally maintained
//! thin QR factorization. Selections are never revisited, which is exactly
//! what makes the first step decisive on near-duplicate designs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::instance::Observation;
use crate::solvers::{Estimate, SolverTag, Trace};

/// Least-squares refits whose triangular factor has a diagonal ratio above
/// this are rejected as numerically singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Residuals at or below this times `||y||` stop the pursuit early: the
/// active span already fits `y` to machine precision.
pub const EXACT_FIT_RTOL: f64 = 1e-12;

/// One greedy step of the pursuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpStep {
    /// Column chosen at this step.
    pub selected_index: usize,
    /// Winning absolute correlation |a_j^T r| at selection time.
    pub max_abs_correlation: f64,
    /// Residual norm after the refit that followed the selection.
    pub residual_norm: f64,
}

/// Full execution record of a pursuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpTrace {
    /// Per-step selection summaries, in execution order.
    pub steps: Vec<OmpStep>,
    /// For each step, the absolute correlations |a_j^T r| of every column
    /// with the residual the selection saw (selected columns included).
    pub step_correlations: Vec<Vec<f64>>,
    /// Whether the very first selection fell outside the design's true
    /// support.
    pub first_step_misselection: bool,
}

/// Probability that a single near-duplicate out-correlates its prototype on
/// the first step, for a one-sparse truth of magnitude `beta` under noise
/// level `sigma`.
///
/// The two correlation statistics differ by `beta (1 - rho_in)` in mean with
/// standard deviation `sigma sqrt(2 (1 - rho_in))`, giving
/// `Phi(-beta sqrt(1 - rho_in) / (sigma sqrt(2)))`.
pub fn first_step_flip_probability(beta: f64, rho_in: f64, sigma: f64) -> Result<f64> {
    if !(beta > 0.0) || !(sigma > 0.0) || !(rho_in > 0.0 && rho_in < 1.0) {
        return Err(Error::InfeasibleParams(format!(
            "need beta>0, sigma>0, rho_in in (0,1); got beta={beta}, rho_in={rho_in}, sigma={sigma}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(normal.cdf(-beta * (1.0 - rho_in).sqrt() / (sigma * std::f64::consts::SQRT_2)))
}

/// Runs `steps` greedy selections and returns the final refit.
///
/// The declared support is the set of selected columns (ascending); the
/// coefficient vector holds the least-squares solution on that set. Errors
/// with `SingularLeastSquares` if a refit becomes numerically rank-deficient.
pub fn fit_omp(design: &DesignMatrix, obs: &Observation, steps: usize) -> Result<Estimate> {
    let (m, p) = (design.m(), design.p());
    if steps == 0 {
        return Err(Error::InfeasibleParams(
            "step count must be positive".into(),
        ));
    }
    if steps > p.min(m) {
        return Err(Error::InfeasibleParams(format!(
            "step count {steps} exceeds min(m, p) = {}",
            p.min(m)
        )));
    }
    if obs.y.nrows() != m {
        return Err(Error::InfeasibleParams(format!(
            "observation length {} does not match m={m}",
            obs.y.nrows()
        )));
    }

    let y_norm = obs.y.norm();
    let mut residual = obs.y.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(steps);
    let mut in_active = vec![false; p];

    // Thin QR of the active columns, grown one column per step.
    let mut q = DMatrix::<f64>::zeros(m, steps);
    let mut r = DMatrix::<f64>::zeros(steps, steps);
    let mut qty = DVector::<f64>::zeros(steps);

    let mut trace_steps = Vec::with_capacity(steps);
    let mut step_correlations = Vec::with_capacity(steps);

    for t in 0..steps {
        if residual.norm() <= EXACT_FIT_RTOL * y_norm.max(f64::MIN_POSITIVE) {
            break; // active span already reproduces y exactly
        }
        let correlations = design.columns.transpose() * &residual;
        let abs_correlations: Vec<f64> = correlations.iter().map(|c| c.abs()).collect();

        let mut best_j = usize::MAX;
        let mut best_c = f64::MIN;
        for (j, &c) in abs_correlations.iter().enumerate() {
            if !in_active[j] && c > best_c {
                best_c = c;
                best_j = j; // strict > keeps the lowest index on ties
            }
        }
        step_correlations.push(abs_correlations);
        selected.push(best_j);
        in_active[best_j] = true;

        // Grow the QR factorization with the new column (modified
        // Gram-Schmidt, two passes for orthogonality at machine precision).
        let mut v = design.columns.column(best_j).clone_owned();
        for _pass in 0..2 {
            for i in 0..t {
                let proj = q.column(i).dot(&v);
                r[(i, t)] += proj;
                v.axpy(-proj, &q.column(i).clone_owned(), 1.0);
            }
        }
        let rtt = v.norm();
        r[(t, t)] = rtt;
        let mut diag_min = f64::MAX;
        let mut diag_max = f64::MIN;
        for i in 0..=t {
            diag_min = diag_min.min(r[(i, i)].abs());
            diag_max = diag_max.max(r[(i, i)].abs());
        }
        let cond = if diag_min > 0.0 {
            diag_max / diag_min
        } else {
            f64::INFINITY
        };
        if cond > CONDITION_LIMIT {
            return Err(Error::SingularLeastSquares { cond });
        }
        q.set_column(t, &(v / rtt));
        qty[t] = q.column(t).dot(&obs.y);

        // Projection residual: y minus its image on the active span.
        residual = obs.y.clone();
        for i in 0..=t {
            residual.axpy(-qty[i], &q.column(i).clone_owned(), 1.0);
        }
        trace_steps.push(OmpStep {
            selected_index: best_j,
            max_abs_correlation: best_c,
            residual_norm: residual.norm(),
        });
    }

    let t = selected.len();
    // Back-substitute R beta = Q^T y for the active coefficients.
    let mut beta = DVector::<f64>::zeros(t);
    for i in (0..t).rev() {
        let mut acc = qty[i];
        for j in (i + 1)..t {
            acc -= r[(i, j)] * beta[j];
        }
        beta[i] = acc / r[(i, i)];
    }

    #[cfg(debug_assertions)]
    for &j in &selected {
        let alignment = design.columns.column(j).dot(&residual).abs();
        debug_assert!(
            alignment <= 1e-8 * y_norm.max(1.0),
            "residual not orthogonal to selected column {j}: {alignment}"
        );
    }

    let mut coefficients = DVector::<f64>::zeros(p);
    for (pos, &j) in selected.iter().enumerate() {
        coefficients[j] = beta[pos];
    }
    let mut support = selected.clone();
    support.sort_unstable();

    let first_step_misselection = trace_steps
        .first()
        .map(|s| !design.true_support.contains(&s.selected_index))
        .unwrap_or(false);

    Ok(Estimate {
        solver_tag: SolverTag::Omp,
        coefficients,
        support,
        trace: Trace::Omp(OmpTrace {
            steps: trace_steps,
            step_correlations,
            first_step_misselection,
        }),
    })
}
