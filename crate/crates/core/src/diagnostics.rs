//! Support-recovery diagnostics for a design: the irrepresentable value,
//! restricted eigenvalue of the support Gram, and coherence summaries.
//!
//! The irrepresentable value for a support `S` and sign vector `s` is
//!
//! ```text
//!   max_{j not in S} | a_j^T A_S (A_S^T A_S)^{-1} s |
//! ```
//!
//! Values below 1 are the classical necessary-and-sufficient regime for
//! sign-consistent l1 recovery as noise vanishes; values at or above 1
//! certify that some off-support column is at least as well aligned with the
//! sign-weighted support as the support itself.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};

/// Support Grams with smallest eigenvalue at or below this are treated as
/// numerically singular.
pub const SINGULAR_GRAM_LIMIT: f64 = 1e-10;

/// Largest support size for exhaustive sign-pattern search.
pub const WORST_CASE_MAX_K: usize = 12;

/// Coherence and recoverability summary of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// Irrepresentable value at the true support and true sign pattern.
    pub ic_value: f64,
    /// Minimum within-group inner product, if any group has duplicates.
    pub mu_in_min: Option<f64>,
    /// Maximum absolute between-group inner product over duplicate pairs,
    /// if any exist.
    pub mu_out_max: Option<f64>,
    /// Smallest eigenvalue of the support Gram.
    pub kappa: f64,
    /// Largest absolute off-diagonal Gram entry over all column pairs.
    pub mutual_coherence: f64,
}

/// Solves `G x = s` for the support Gram `G = A_S^T A_S` via Cholesky,
/// guarding against numerically singular supports.
fn solve_support_gram(
    columns: &DMatrix<f64>,
    support: &[usize],
    signs: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = columns.nrows();
    let k = support.len();
    let mut a_s = DMatrix::zeros(m, k);
    for (t, &j) in support.iter().enumerate() {
        a_s.set_column(t, &columns.column(j));
    }
    let gram = a_s.transpose() * &a_s;
    let kappa = restricted_eigenvalue_of_gram(&gram);
    if kappa <= SINGULAR_GRAM_LIMIT {
        return Err(Error::SingularSupportGram {
            kappa,
            limit: SINGULAR_GRAM_LIMIT,
        });
    }
    let chol = nalgebra::Cholesky::new(gram).ok_or(Error::SingularSupportGram {
        kappa,
        limit: SINGULAR_GRAM_LIMIT,
    })?;
    let x = chol.solve(signs);
    Ok((a_s, x))
}

/// Irrepresentable value of `(support, signs)` against all other columns.
///
/// `signs` entries must be +1/-1 aligned with `support`. Errors with
/// `SingularSupportGram` when the support Gram's smallest eigenvalue is at or
/// below `SINGULAR_GRAM_LIMIT`.
pub fn irrepresentable_value(
    design: &DesignMatrix,
    support: &[usize],
    signs: &[i8],
) -> Result<f64> {
    validate_support(design, support)?;
    if signs.len() != support.len() {
        return Err(Error::InfeasibleParams(format!(
            "sign vector length {} does not match support size {}",
            signs.len(),
            support.len()
        )));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InfeasibleParams(
            "sign entries must be +1 or -1".into(),
        ));
    }
    let s_vec = DVector::from_iterator(signs.len(), signs.iter().map(|&s| f64::from(s)));
    let (a_s, x) = solve_support_gram(&design.columns, support, &s_vec)?;
    // v = A_S (A_S^T A_S)^{-1} s, then the value is max_j |a_j^T v| off S.
    let v = &a_s * x;
    let mut best = 0.0f64;
    for j in 0..design.p() {
        if support.contains(&j) {
            continue;
        }
        best = best.max(design.columns.column(j).dot(&v).abs());
    }
    Ok(best)
}

/// Exhaustive maximum of the irrepresentable value over all sign patterns on
/// `support`. The first sign is fixed to +1 (the value is invariant under a
/// global sign flip), so `2^(k-1)` patterns are evaluated; `k` is capped at
/// `WORST_CASE_MAX_K`.
pub fn worst_case_irrepresentable_value(
    design: &DesignMatrix,
    support: &[usize],
) -> Result<(f64, Vec<i8>)> {
    validate_support(design, support)?;
    let k = support.len();
    if k > WORST_CASE_MAX_K {
        return Err(Error::InfeasibleParams(format!(
            "support size {k} exceeds exhaustive sign-search cap {WORST_CASE_MAX_K}"
        )));
    }
    let mut best = f64::MIN;
    let mut best_signs = vec![1i8; k];
    for mask in 0u32..(1u32 << (k.saturating_sub(1))) {
        let mut signs = vec![1i8; k];
        for (b, sign) in signs.iter_mut().enumerate().skip(1) {
            if (mask >> (b - 1)) & 1 == 1 {
                *sign = -1;
            }
        }
        let value = irrepresentable_value(design, support, &signs)?;
        if value > best {
            best = value;
            best_signs = signs;
        }
    }
    Ok((best, best_signs))
}

/// Smallest eigenvalue of the Gram matrix of the given columns.
pub fn restricted_eigenvalue(design: &DesignMatrix, support: &[usize]) -> Result<f64> {
    validate_support(design, support)?;
    let m = design.m();
    let mut a_s = DMatrix::zeros(m, support.len());
    for (t, &j) in support.iter().enumerate() {
        a_s.set_column(t, &design.columns.column(j));
    }
    let gram = a_s.transpose() * a_s;
    Ok(restricted_eigenvalue_of_gram(&gram))
}

fn restricted_eigenvalue_of_gram(gram: &DMatrix<f64>) -> f64 {
    gram.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::MAX, f64::min)
}

/// Computes the full coherence summary of a design at its true support and
/// the given sign pattern.
pub fn coherence_report(design: &DesignMatrix, signs: &[i8]) -> Result<CoherenceReport> {
    let support = &design.true_support;
    let ic_value = irrepresentable_value(design, support, signs)?;
    let kappa = restricted_eigenvalue(design, support)?;

    let mut mu_in_min: Option<f64> = None;
    let mut mu_out_max: Option<f64> = None;
    for (&proto, dups) in &design.groups {
        for &l in dups {
            let ip = design.columns.column(proto).dot(&design.columns.column(l));
            mu_in_min = Some(mu_in_min.map_or(ip, |v| v.min(ip)));
            for r in 0..design.p() {
                if r == proto || r == l || dups.contains(&r) {
                    continue;
                }
                let cross = design
                    .columns
                    .column(l)
                    .dot(&design.columns.column(r))
                    .abs();
                mu_out_max = Some(mu_out_max.map_or(cross, |v| v.max(cross)));
            }
        }
    }

    let mut mutual_coherence = 0.0f64;
    let gram = design.columns.transpose() * &design.columns;
    for i in 0..design.p() {
        for j in (i + 1)..design.p() {
            mutual_coherence = mutual_coherence.max(gram[(i, j)].abs());
        }
    }

    Ok(CoherenceReport {
        ic_value,
        mu_in_min,
        mu_out_max,
        kappa,
        mutual_coherence,
    })
}

fn validate_support(design: &DesignMatrix, support: &[usize]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::InfeasibleParams("support must be nonempty".into()));
    }
    for &j in support {
        if j >= design.p() {
            return Err(Error::InfeasibleParams(format!(
                "support index {j} out of range for p={}",
                design.p()
            )));
        }
    }
    for w in support.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InfeasibleParams(
                "support indices must be strictly ascending".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design, DesignParams};
    use approx::assert_relative_eq;

    /// Hand-assembled design with explicitly chosen columns.
    fn design_from_columns(cols: Vec<Vec<f64>>) -> DesignMatrix {
        let m = cols[0].len();
        let p = cols.len();
        let mut mat = DMatrix::zeros(m, p);
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                mat[(i, j)] = v;
            }
        }
        DesignMatrix {
            params: DesignParams {
                m,
                p,
                k: 1,
                group_size: 1,
                rho_in: 0.9,
                rho_out_max: 0.3,
                support_gram_offdiag: 0.0,
                seed: 0,
            },
            columns: mat,
            true_support: vec![0],
            groups: std::collections::BTreeMap::new(),
        }
    }

    #[test]
    fn two_columns_at_half_overlap_give_half() {
        // a0 = e1, a1 = 0.5 e1 + sqrt(0.75) e2: support {0}, sign +1.
        let d = design_from_columns(vec![vec![1.0, 0.0], vec![0.5, 0.75f64.sqrt()]]);
        let ic = irrepresentable_value(&d, &[0], &[1]).unwrap();
        assert_relative_eq!(ic, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn an_exact_duplicate_gives_one() {
        let d = design_from_columns(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let ic = irrepresentable_value(&d, &[0], &[1]).unwrap();
        assert_relative_eq!(ic, 1.0, epsilon = 1e-12);
    }

    /// For a built design with k = 1, the duplicate's irrepresentable value
    /// is exactly rho_in: a_dup^T a_proto (a_proto^T a_proto)^{-1} = rho_in.
    #[test]
    fn single_prototype_ic_equals_rho_in() {
        for &rho in &[0.9, 0.95, 0.99] {
            let d = build_design(&DesignParams {
                m: 20,
                p: 6,
                k: 1,
                group_size: 2,
                rho_in: rho,
                rho_out_max: 0.3,
                support_gram_offdiag: 0.0,
                seed: 17,
            })
            .unwrap();
            let ic = irrepresentable_value(&d, &[0], &[1]).unwrap();
            assert_relative_eq!(ic, rho, epsilon = 1e-10);
        }
    }

    /// With an equicorrelated support Gram and all-plus signs, a duplicate of
    /// prototype j sees value rho_in independently of the correlation level:
    /// G^{-1} 1 = 1/(1 + (k-1) gamma) * 1, and a_dup^T A_S 1 =
    /// rho_in * (1 + (k-1) gamma).
    #[test]
    fn equicorrelated_support_keeps_duplicate_value_at_rho_in() {
        let d = build_design(&DesignParams {
            m: 40,
            p: 20,
            k: 4,
            group_size: 2,
            rho_in: 0.97,
            rho_out_max: 0.3,
            support_gram_offdiag: 0.1,
            seed: 23,
        })
        .unwrap();
        let ic = irrepresentable_value(&d, &[0, 1, 2, 3], &[1, 1, 1, 1]).unwrap();
        assert!(
            ic >= 0.97 - 1e-9,
            "duplicate should pin the value at rho_in; got {ic}"
        );
    }

    #[test]
    fn value_is_invariant_under_global_sign_flip() {
        let d = build_design(&DesignParams {
            m: 30,
            p: 16,
            k: 3,
            group_size: 1,
            rho_in: 0.95,
            rho_out_max: 0.3,
            support_gram_offdiag: 0.1,
            seed: 4,
        })
        .unwrap();
        let a = irrepresentable_value(&d, &[0, 1, 2], &[1, -1, 1]).unwrap();
        let b = irrepresentable_value(&d, &[0, 1, 2], &[-1, 1, -1]).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn worst_case_search_dominates_every_fixed_pattern() {
        let d = build_design(&DesignParams {
            m: 30,
            p: 16,
            k: 3,
            group_size: 1,
            rho_in: 0.95,
            rho_out_max: 0.3,
            support_gram_offdiag: 0.1,
            seed: 4,
        })
        .unwrap();
        let (worst, pattern) = worst_case_irrepresentable_value(&d, &[0, 1, 2]).unwrap();
        assert_eq!(pattern[0], 1);
        for signs in [[1i8, 1, 1], [1, 1, -1], [1, -1, 1], [1, -1, -1]] {
            let v = irrepresentable_value(&d, &[0, 1, 2], &signs).unwrap();
            assert!(worst >= v - 1e-12);
        }
        // The reported pattern attains the reported value.
        let attained = irrepresentable_value(&d, &[0, 1, 2], &pattern).unwrap();
        assert_relative_eq!(attained, worst, epsilon = 1e-12);
    }

    #[test]
    fn worst_case_search_caps_support_size() {
        let d = build_design(&DesignParams {
            m: 40,
            p: 30,
            k: 13,
            group_size: 1,
            rho_in: 0.9,
            rho_out_max: 0.3,
            support_gram_offdiag: 0.0,
            seed: 1,
        })
        .unwrap();
        let support: Vec<usize> = (0..13).collect();
        assert!(matches!(
            worst_case_irrepresentable_value(&d, &support),
            Err(Error::InfeasibleParams(_))
        ));
    }

    /// Equicorrelated Gram G = (1-g) I + g J has smallest eigenvalue 1 - g
    /// for k >= 2.
    #[test]
    fn equicorrelated_gram_has_known_smallest_eigenvalue() {
        let d = build_design(&DesignParams {
            m: 30,
            p: 12,
            k: 3,
            group_size: 1,
            rho_in: 0.9,
            rho_out_max: 0.45,
            support_gram_offdiag: 0.45,
            seed: 2,
        })
        .unwrap();
        let kappa = restricted_eigenvalue(&d, &[0, 1, 2]).unwrap();
        assert_relative_eq!(kappa, 0.55, epsilon = 1e-9);
    }

    /// Independent eigenvalue check: cyclic Jacobi rotations on the support
    /// Gram of a built design, implemented from scratch.
    #[test]
    #[allow(clippy::needless_range_loop)] // explicit (i, j) matrix indexing
    fn smallest_eigenvalue_matches_jacobi_oracle() {
        let d = build_design(&DesignParams {
            m: 50,
            p: 100,
            k: 4,
            group_size: 2,
            rho_in: 0.98,
            rho_out_max: 0.3,
            support_gram_offdiag: 0.1,
            seed: 7,
        })
        .unwrap();
        let kappa = restricted_eigenvalue(&d, &[0, 1, 2, 3]).unwrap();

        // Jacobi eigenvalue iteration on the 4x4 support Gram.
        let mut g = [[0.0f64; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for r in 0..50 {
                    acc += d.columns[(r, i)] * d.columns[(r, j)];
                }
                g[i][j] = acc;
            }
        }
        for _sweep in 0..60 {
            for p_idx in 0..3 {
                for q_idx in (p_idx + 1)..4 {
                    let apq = g[p_idx][q_idx];
                    if apq.abs() < 1e-15 {
                        continue;
                    }
                    let app = g[p_idx][p_idx];
                    let aqq = g[q_idx][q_idx];
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..4 {
                        let grp = g[r][p_idx];
                        let grq = g[r][q_idx];
                        g[r][p_idx] = c * grp - s * grq;
                        g[r][q_idx] = s * grp + c * grq;
                    }
                    for r in 0..4 {
                        let gpr = g[p_idx][r];
                        let gqr = g[q_idx][r];
                        g[p_idx][r] = c * gpr - s * gqr;
                        g[q_idx][r] = s * gpr + c * gqr;
                    }
                }
            }
        }
        let jacobi_min = (0..4).map(|i| g[i][i]).fold(f64::MAX, f64::min);
        assert_relative_eq!(kappa, jacobi_min, epsilon = 1e-9);

        // Gershgorin lower bound sanity: kappa >= min_i (g_ii - sum|g_ij|).
        let gram = d.support_gram();
        let mut gersh = f64::MAX;
        for i in 0..4 {
            let mut radius = 0.0;
            for j in 0..4 {
                if i != j {
                    radius += gram[(i, j)].abs();
                }
            }
            gersh = gersh.min(gram[(i, i)] - radius);
        }
        assert!(kappa >= gersh - 1e-12);
    }

    /// Orthonormal two-column support plus a column overlapping both: the
    /// statistic reduces to the sign-weighted sum of overlaps, here
    /// 0.95 + 0.3 = 1.25 — strictly past the recovery boundary.
    #[test]
    fn overlapping_duplicate_pushes_value_past_one() {
        let d = design_from_columns(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.95, 0.3, 0.0075f64.sqrt()],
        ]);
        let ic = irrepresentable_value(&d, &[0, 1], &[1, 1]).unwrap();
        assert_relative_eq!(ic, 1.25, epsilon = 1e-10);
        // Direct dense-algebra oracle: with orthonormal support columns the
        // inverse Gram is the identity, so the value is |<a_l, a_0> s_0 +
        // <a_l, a_1> s_1| computed from raw dot products.
        let manual = (0.95 * 1.0 + 0.3 * 1.0f64).abs();
        assert_relative_eq!(ic, manual, epsilon = 1e-12);
        // Flipping the second sign moves the value to |0.95 - 0.3| = 0.65.
        let flipped = irrepresentable_value(&d, &[0, 1], &[1, -1]).unwrap();
        assert_relative_eq!(flipped, 0.65, epsilon = 1e-10);
        // The worst-case search finds the (+,+) pattern (up to global flip).
        let (worst, _) = worst_case_irrepresentable_value(&d, &[0, 1]).unwrap();
        assert_relative_eq!(worst, 1.25, epsilon = 1e-10);
    }

    #[test]
    fn duplicate_support_is_reported_singular() {
        let d = design_from_columns(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        match irrepresentable_value(&d, &[0, 1], &[1, 1]) {
            Err(Error::SingularSupportGram { kappa, .. }) => {
                assert!(kappa.abs() <= 1e-10);
            }
            other => panic!("expected singular support error, got {other:?}"),
        }
    }

    #[test]
    fn report_summarizes_built_design() {
        let params = DesignParams {
            m: 40,
            p: 30,
            k: 3,
            group_size: 2,
            rho_in: 0.96,
            rho_out_max: 0.3,
            support_gram_offdiag: 0.1,
            seed: 12,
        };
        let d = build_design(&params).unwrap();
        let report = coherence_report(&d, &[1, 1, 1]).unwrap();
        assert!(report.ic_value >= 0.96 - 1e-9);
        let mu_in = report.mu_in_min.unwrap();
        assert!(mu_in >= 0.96 - 1e-8);
        let mu_out = report.mu_out_max.unwrap();
        assert!(mu_out <= 0.3 + 1e-8);
        assert!(report.kappa > 0.0 && report.kappa <= 1.0 + 1e-12);
        // Mutual coherence is at least the within-group level and bounded by 1.
        assert!(report.mutual_coherence >= mu_in - 1e-12);
        assert!(report.mutual_coherence <= 1.0 + 1e-12);
    }

    #[test]
    fn malformed_supports_are_rejected() {
        let d = design_from_columns(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(irrepresentable_value(&d, &[], &[]).is_err());
        assert!(irrepresentable_value(&d, &[5], &[1]).is_err());
        assert!(irrepresentable_value(&d, &[1, 0], &[1, 1]).is_err());
        assert!(irrepresentable_value(&d, &[0], &[2]).is_err());
        assert!(irrepresentable_value(&d, &[0], &[1, 1]).is_err());
    }
}
