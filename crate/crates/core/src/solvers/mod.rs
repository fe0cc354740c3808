//! Sparse regression solvers: l1 coordinate descent, greedy orthogonal
//! matching pursuit, and an iteratively reweighted concave-penalty method.
//!
//! All solvers return an [`Estimate`] carrying the fitted coefficients, the
//! thresholded support, and a solver-specific execution trace.

pub mod lasso;
pub mod omp;
pub mod sbl;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Which algorithm produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    Lasso,
    Omp,
    Sbl,
    Oracle,
}

impl std::fmt::Display for SolverTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolverTag::Lasso => "lasso",
            SolverTag::Omp => "omp",
            SolverTag::Sbl => "sbl",
            SolverTag::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

/// Execution trace attached to an estimate, tagged by solver kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Trace {
    Lasso(lasso::LassoTrace),
    Omp(omp::OmpTrace),
    Sbl(sbl::SblTrace),
}

/// A fitted coefficient vector with its declared support and trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub solver_tag: SolverTag,
    /// Dense p-vector of fitted coefficients.
    #[serde(with = "crate::serde_arrays::vector")]
    pub coefficients: DVector<f64>,
    /// Indices declared active by the solver's own support rule, ascending.
    pub support: Vec<usize>,
    pub trace: Trace,
}

impl Estimate {
    /// True iff the declared support equals `truth` exactly.
    pub fn exactly_recovers(&self, truth: &[usize]) -> bool {
        self.support == truth
    }

    /// Symmetric-difference size between the declared support and `truth`.
    pub fn hamming_distance(&self, truth: &[usize]) -> usize {
        let mut dist = 0;
        let mut i = 0;
        let mut j = 0;
        while i < self.support.len() && j < truth.len() {
            match self.support[i].cmp(&truth[j]) {
                std::cmp::Ordering::Less => {
                    dist += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    dist += 1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        dist + (self.support.len() - i) + (truth.len() - j)
    }
}

/// Indices of entries with magnitude strictly above `threshold`, ascending.
pub(crate) fn thresholded_support(w: &DVector<f64>, threshold: f64) -> Vec<usize> {
    (0..w.nrows()).filter(|&j| w[j].abs() > threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimate_with_support(support: Vec<usize>) -> Estimate {
        Estimate {
            solver_tag: SolverTag::Omp,
            coefficients: DVector::zeros(6),
            support,
            trace: Trace::Omp(omp::OmpTrace {
                steps: vec![],
                step_correlations: vec![],
                first_step_misselection: false,
            }),
        }
    }

    #[test]
    fn hamming_distance_counts_symmetric_difference() {
        let e = estimate_with_support(vec![0, 2, 5]);
        assert_eq!(e.hamming_distance(&[0, 2, 5]), 0);
        assert!(e.exactly_recovers(&[0, 2, 5]));
        assert_eq!(e.hamming_distance(&[0, 2]), 1);
        assert_eq!(e.hamming_distance(&[1, 3]), 5);
        assert_eq!(e.hamming_distance(&[]), 3);
        assert!(!e.exactly_recovers(&[0, 2]));
    }

    #[test]
    fn solver_tags_serialize_lowercase() {
        assert_eq!(
            serde_json::to_string(&SolverTag::Lasso).unwrap(),
            "\"lasso\""
        );
        assert_eq!(serde_json::to_string(&SolverTag::Sbl).unwrap(), "\"sbl\"");
        assert_eq!(SolverTag::Oracle.to_string(), "oracle");
    }

    #[test]
    fn thresholded_support_is_strict() {
        let w = DVector::from_vec(vec![0.0, 1e-6, -2e-6, 0.5]);
        assert_eq!(thresholded_support(&w, 1e-6), vec![2, 3]);
    }
}
