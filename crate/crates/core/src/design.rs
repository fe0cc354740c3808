//! Construction of coherent design matrices with controlled duplicate groups.
//!
//! A design consists of three column classes:
//!
//! * `k` *prototype* columns (the true support, indices `0..k`) whose pairwise
//!   inner products equal `support_gram_offdiag` exactly;
//! * `group_size` *near-duplicates* per prototype, each with inner product
//!   exactly `rho_in` to its prototype and at most `rho_out_max` (in absolute
//!   value) to every column outside its group;
//! * random unit *fillers* for the remaining slots, rejection-sampled against
//!   the `rho_out_max` bound with respect to all structured columns.
//!
//! Construction is deterministic in the seed and bit-identical across runs.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Attempts allowed per rejection-sampled column before giving up.
pub const REJECTION_BUDGET: usize = 1000;

/// Absolute tolerance on unit column norms.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Slack on within-/between-group coherence assertions, covering
/// floating-point normalization error.
pub const COHERENCE_TOL: f64 = 1e-8;

/// Parameters controlling a design draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    /// Observation dimension (rows).
    pub m: usize,
    /// Number of candidate columns.
    pub p: usize,
    /// True support size.
    pub k: usize,
    /// Near-duplicates per true column.
    pub group_size: usize,
    /// Target within-group inner product, in (0, 1).
    pub rho_in: f64,
    /// Bound on between-group inner products, in (0, rho_in).
    pub rho_out_max: f64,
    /// Target inner product among true-support columns, in [0, rho_out_max].
    pub support_gram_offdiag: f64,
    /// RNG seed; identical params (including seed) give bit-identical output.
    pub seed: u64,
}

impl DesignParams {
    /// Checks every structural precondition for `build_design`.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleParams(msg));
        if self.m == 0 || self.p == 0 || self.k == 0 {
            return fail(format!(
                "m={}, p={}, k={} must be positive",
                self.m, self.p, self.k
            ));
        }
        if self.group_size == 0 {
            return fail("group_size must be at least 1".into());
        }
        if self.k > self.m {
            return fail(format!(
                "support size k={} exceeds row count m={}",
                self.k, self.m
            ));
        }
        if self.k * (1 + self.group_size) > self.p {
            return fail(format!(
                "k(1+group_size)={} exceeds column count p={}",
                self.k * (1 + self.group_size),
                self.p
            ));
        }
        if !(self.rho_in > 0.0 && self.rho_in < 1.0) {
            return fail(format!("rho_in={} must lie in (0, 1)", self.rho_in));
        }
        if !(self.rho_out_max > 0.0 && self.rho_out_max < self.rho_in) {
            return fail(format!(
                "rho_out_max={} must lie in (0, rho_in={})",
                self.rho_out_max, self.rho_in
            ));
        }
        let gamma = self.support_gram_offdiag;
        if !(0.0..=self.rho_out_max).contains(&gamma) {
            return fail(format!(
                "support_gram_offdiag={} must lie in [0, rho_out_max={}]",
                gamma, self.rho_out_max
            ));
        }
        if self.k >= 2 && gamma >= 1.0 / (self.k - 1) as f64 {
            return fail(format!(
                "support_gram_offdiag={} makes the k x k support Gram indefinite \
                 (needs gamma < 1/(k-1) = {})",
                gamma,
                1.0 / (self.k - 1) as f64
            ));
        }
        Ok(())
    }
}

/// A constructed design: columns plus the group bookkeeping tests and
/// diagnostics rely on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    /// Parameters the matrix was built from.
    pub params: DesignParams,
    /// m x p column matrix; serialized as a row-major array of rows.
    #[serde(with = "crate::serde_arrays::matrix_rows")]
    pub columns: DMatrix<f64>,
    /// True support indices (the prototypes), ascending.
    pub true_support: Vec<usize>,
    /// Prototype index -> indices of its near-duplicates.
    pub groups: BTreeMap<usize, Vec<usize>>,
}

impl DesignMatrix {
    /// Number of rows.
    pub fn m(&self) -> usize {
        self.columns.nrows()
    }

    /// Number of columns.
    pub fn p(&self) -> usize {
        self.columns.ncols()
    }

    /// The j-th column as a vector view.
    pub fn column(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.columns.column(j)
    }

    /// The m x k submatrix of true-support columns.
    pub fn support_columns(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.m(), self.true_support.len());
        for (t, &j) in self.true_support.iter().enumerate() {
            s.set_column(t, &self.columns.column(j));
        }
        s
    }

    /// Gram matrix of the true-support columns.
    pub fn support_gram(&self) -> DMatrix<f64> {
        let s = self.support_columns();
        s.transpose() * s
    }

    /// True iff `a` and `b` belong to the same prototype-plus-duplicates
    /// group (or are the same column).
    pub fn same_group(&self, a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        for (&proto, dups) in &self.groups {
            let in_a = a == proto || dups.contains(&a);
            let in_b = b == proto || dups.contains(&b);
            if in_a && in_b {
                return true;
            }
        }
        false
    }

    /// Verifies every structural invariant of a constructed design, returning
    /// a description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let m = self.m();
        let p = self.p();
        if self.params.m != m || self.params.p != p {
            return Err("params inconsistent with matrix dimensions".into());
        }
        for j in 0..p {
            let norm = self.columns.column(j).norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(format!("column {j} has norm {norm}, not unit"));
            }
        }
        let expected_support: Vec<usize> = (0..self.params.k).collect();
        if self.true_support != expected_support {
            return Err("true support must be the first k columns".into());
        }
        // Group structure: disjoint, off-support, within-group coherence.
        let mut seen = vec![false; p];
        for &j in &self.true_support {
            seen[j] = true;
        }
        for (&proto, dups) in &self.groups {
            if !self.true_support.contains(&proto) {
                return Err(format!("group key {proto} is not a support index"));
            }
            for &l in dups {
                if l >= p {
                    return Err(format!("group member {l} out of range"));
                }
                if seen[l] {
                    return Err(format!(
                        "column {l} appears in two groups or in the support"
                    ));
                }
                seen[l] = true;
                let ip = self.columns.column(proto).dot(&self.columns.column(l));
                if ip < self.params.rho_in - COHERENCE_TOL {
                    return Err(format!(
                        "within-group inner product <a_{proto}, a_{l}> = {ip} below rho_in"
                    ));
                }
            }
        }
        // Between-group separation: every duplicate vs. every column outside
        // its own group (prototype excluded).
        for (&proto, dups) in &self.groups {
            for &l in dups {
                for r in 0..p {
                    if r == proto || r == l || dups.contains(&r) {
                        continue;
                    }
                    let ip = self.columns.column(l).dot(&self.columns.column(r)).abs();
                    if ip > self.params.rho_out_max + COHERENCE_TOL {
                        return Err(format!(
                            "between-group inner product |<a_{l}, a_{r}>| = {ip} \
                             exceeds rho_out_max"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Returns the full p x p Gram matrix of the design.
pub fn gram(design: &DesignMatrix) -> DMatrix<f64> {
    design.columns.transpose() * &design.columns
}

/// Builds a design matrix realizing the requested coherence structure.
///
/// Recipe: (1) prototypes with exact pairwise Gram `gamma`, from a Cholesky
/// factor of the target Gram applied to a random orthonormal frame; (2) per
/// prototype, duplicates `rho_in * a_j + sqrt(1 - rho_in^2) * z` with `z` a
/// random unit vector orthogonal to that prototype (and only to it: a
/// duplicate keeps generic small overlaps with the rest of the dictionary,
/// the way near-identical regressors do in the wild), redrawn until the
/// between-group bound holds against every placed column outside the group;
/// (3) random unit fillers rejection-sampled against all structured columns.
pub fn build_design(params: &DesignParams) -> Result<DesignMatrix> {
    params.validate()?;
    let (m, p, k) = (params.m, params.p, params.k);
    let mut rng = rng_from_seed(params.seed);
    let mut columns = DMatrix::<f64>::zeros(m, p);

    // (1) Prototypes: A_S = Q L^T gives A_S^T A_S = L L^T = G exactly
    // (up to the orthonormality of Q, which modified Gram-Schmidt with
    // re-orthogonalization delivers to machine precision).
    let gamma = params.support_gram_offdiag;
    let target_gram = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { gamma });
    let chol = nalgebra::Cholesky::new(target_gram).ok_or_else(|| {
        Error::InfeasibleParams(format!(
            "support Gram with offdiag {gamma} is not positive definite"
        ))
    })?;
    let frame = random_orthonormal(&mut rng, m, k);
    let prototypes = &frame * chol.l().transpose();
    for j in 0..k {
        columns.set_column(j, &prototypes.column(j));
    }

    // (2) Near-duplicates, group-major layout: group j owns columns
    // k + j*group_size .. k + (j+1)*group_size.
    let rho = params.rho_in;
    let mix = (1.0 - rho * rho).sqrt();
    let structured = k * (1 + params.group_size);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut placed_dups: Vec<(usize, usize)> = Vec::new(); // (column, owner prototype)
    for j in 0..k {
        let proto = columns.column(j).clone_owned();
        let mut members = Vec::with_capacity(params.group_size);
        for slot in 0..params.group_size {
            let idx = k + j * params.group_size + slot;
            let mut accepted = false;
            for _attempt in 0..REJECTION_BUDGET {
                let z = random_unit_orthogonal_to(&mut rng, &proto);
                let mut cand = proto.clone();
                cand *= rho;
                cand.axpy(mix, &z, 1.0);
                cand /= cand.norm();
                // The candidate must respect the between-group bound against
                // every structured column placed so far outside its own
                // group: the other prototypes and other groups' duplicates.
                let ok = (0..k).all(|r| {
                    r == j || cand.dot(&columns.column(r).clone_owned()).abs() <= params.rho_out_max
                }) && placed_dups.iter().all(|&(col, owner)| {
                    owner == j
                        || cand.dot(&columns.column(col).clone_owned()).abs() <= params.rho_out_max
                });
                if ok {
                    columns.set_column(idx, &cand);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::RejectionBudgetExhausted {
                    column: idx,
                    attempts: REJECTION_BUDGET,
                    bound: params.rho_out_max,
                });
            }
            placed_dups.push((idx, j));
            members.push(idx);
        }
        groups.insert(j, members);
    }

    // (3) Fillers: random unit vectors kept only when within the coherence
    // bound against every structured column.
    for idx in structured..p {
        let mut accepted = false;
        for _attempt in 0..REJECTION_BUDGET {
            let cand = random_unit(&mut rng, m);
            let ok = (0..structured)
                .all(|s| cand.dot(&columns.column(s).clone_owned()).abs() <= params.rho_out_max);
            if ok {
                columns.set_column(idx, &cand);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::RejectionBudgetExhausted {
                column: idx,
                attempts: REJECTION_BUDGET,
                bound: params.rho_out_max,
            });
        }
    }

    Ok(DesignMatrix {
        params: params.clone(),
        columns,
        true_support: (0..k).collect(),
        groups,
    })
}

/// A standard-normal m-vector.
fn random_gaussian(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// A uniformly random unit vector.
fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    loop {
        let v = random_gaussian(rng, m);
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// An m x k matrix with orthonormal columns, via modified Gram-Schmidt with
/// one re-orthogonalization pass (degenerate draws are redrawn).
fn random_orthonormal(rng: &mut ChaCha8Rng, m: usize, k: usize) -> DMatrix<f64> {
    assert!(
        k <= m,
        "cannot draw {k} orthonormal vectors in dimension {m}"
    );
    let mut q = DMatrix::<f64>::zeros(m, k);
    let mut col = 0;
    while col < k {
        let mut v = random_gaussian(rng, m);
        for _pass in 0..2 {
            for j in 0..col {
                let proj = q.column(j).dot(&v);
                v.axpy(-proj, &q.column(j).clone_owned(), 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            q.set_column(col, &(v / norm));
            col += 1;
        }
    }
    q
}

/// A random unit vector orthogonal to the given unit vector.
fn random_unit_orthogonal_to(rng: &mut ChaCha8Rng, axis: &DVector<f64>) -> DVector<f64> {
    loop {
        let mut v = random_gaussian(rng, axis.nrows());
        for _pass in 0..2 {
            let proj = axis.dot(&v);
            v.axpy(-proj, axis, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}
