//! Ground-truth coefficient vectors and noisy observations over a design.
//!
//! The generative model is `y = A w* + e` with `e ~ N(0, sigma^2 I)`. The
//! true coefficient vector `w*` is supported on the design's prototype
//! columns, with magnitudes drawn uniformly from `[beta_min, magnitude_max]`
//! and independent random signs.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// A sparse coefficient vector together with its support metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Dense p-vector, zero off the support.
    #[serde(with = "crate::serde_arrays::vector")]
    pub w_star: DVector<f64>,
    /// Indices carrying nonzero coefficients, ascending.
    pub support: Vec<usize>,
    /// Smallest nonzero magnitude actually drawn.
    pub beta_min: f64,
    /// Sign of each support coefficient, aligned with `support`.
    pub sign_pattern: Vec<i8>,
}

/// A noisy linear observation of a ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// The m-vector `A w* + e`.
    #[serde(with = "crate::serde_arrays::vector")]
    pub y: DVector<f64>,
    /// Noise standard deviation used to draw `e`.
    pub sigma: f64,
    /// Seed the noise stream was derived from.
    pub noise_seed: u64,
}

/// A design, truth, and observation bundled for solver consumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub design: DesignMatrix,
    pub truth: GroundTruth,
    pub observation: Observation,
}

/// Draws a ground truth on the design's true support.
///
/// Magnitudes are i.i.d. uniform on `[beta_min, magnitude_max]` (inclusive)
/// and signs are independent fair coin flips, both from a stream seeded by
/// `seed` alone, so a `(design, seed)` pair pins the truth bit-for-bit.
pub fn sample_ground_truth(
    design: &DesignMatrix,
    beta_min: f64,
    magnitude_max: f64,
    seed: u64,
) -> Result<GroundTruth> {
    if !(beta_min > 0.0) {
        return Err(Error::InfeasibleParams(format!(
            "beta_min={beta_min} must be positive"
        )));
    }
    if magnitude_max < beta_min {
        return Err(Error::InfeasibleParams(format!(
            "magnitude_max={magnitude_max} must be at least beta_min={beta_min}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let magnitude = Uniform::new_inclusive(beta_min, magnitude_max)
        .map_err(|e| Error::InfeasibleParams(format!("bad magnitude range: {e}")))?;
    let mut w_star = DVector::zeros(design.p());
    let mut signs = Vec::with_capacity(design.true_support.len());
    let mut smallest = f64::MAX;
    for &j in &design.true_support {
        let mag: f64 = rng.sample(magnitude);
        let sign: i8 = if rng.random::<bool>() { 1 } else { -1 };
        w_star[j] = f64::from(sign) * mag;
        signs.push(sign);
        smallest = smallest.min(mag);
    }
    Ok(GroundTruth {
        w_star,
        support: design.true_support.clone(),
        beta_min: smallest,
        sign_pattern: signs,
    })
}

/// Produces `y = A w* + e` with `e ~ N(0, sigma^2 I)` drawn from a stream
/// seeded by `noise_seed`. `sigma = 0` yields the exact noiseless image.
pub fn observe(
    design: &DesignMatrix,
    truth: &GroundTruth,
    sigma: f64,
    noise_seed: u64,
) -> Result<Observation> {
    if sigma < 0.0 {
        return Err(Error::InfeasibleParams(format!(
            "sigma={sigma} must be nonnegative"
        )));
    }
    let mut y = &design.columns * &truth.w_star;
    if sigma > 0.0 {
        let mut rng = rng_from_seed(noise_seed);
        for i in 0..y.nrows() {
            let e: f64 = rng.sample(StandardNormal);
            y[i] += sigma * e;
        }
    }
    Ok(Observation {
        y,
        sigma,
        noise_seed,
    })
}
