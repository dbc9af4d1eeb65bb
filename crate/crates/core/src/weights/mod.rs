//! Weight vectors on the probability simplex and the samplers that draw them.

mod bo;
mod gp;
mod pool;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bo::bo_propose;
pub use gp::{GaussianProcess, GpConfig, Surrogate};
pub use pool::{BoConfig, CandidateSource, PoolConfig, SamplingStrategy, WeightPool};

/// Tolerance on `Σ w_i = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("weight vector {0:?} is not on the probability simplex")]
    NotOnSimplex(Vec<f64>),
    #[error("grid resolution {0} does not split [0, 1] into whole steps")]
    InvalidResolution(f64),
    #[error("re-sampling requested at iteration {k} with budget {w_budget}")]
    OffSchedule { k: usize, w_budget: usize },
    #[error("surrogate has not been fitted")]
    Unfitted,
    #[error("no candidate weight vectors")]
    NoCandidates,
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("kernel matrix is not positive definite")]
    Singular,
}

/// A point on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, WeightsError> {
        let sum: f64 = w.iter().sum();
        if w.is_empty() || w.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(WeightsError::NotOnSimplex(w));
        }
        Ok(WeightVector(w))
    }

    /// The `i`-th vertex of the simplex.
    pub fn basis(dims: usize, i: usize) -> Self {
        let mut w = vec![0.0; dims];
        w[i] = 1.0;
        WeightVector(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = WeightsError;

    fn try_from(w: Vec<f64>) -> Result<Self, Self::Error> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// All lattice points `k/steps` on the `dims`-simplex, first component
/// descending.
pub fn simplex_grid(dims: usize, steps: u32) -> Vec<Vec<f64>> {
    fn rec(dims: usize, remaining: u32, steps: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() + 1 == dims {
            prefix.push(remaining);
            out.push(prefix.iter().map(|k| *k as f64 / steps as f64).collect());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            rec(dims, remaining - k, steps, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dims > 0 && steps > 0 {
        rec(dims, steps, steps, &mut Vec::with_capacity(dims), &mut out);
    }
    out
}

/// Converts a resolution such as `0.25` or `0.33` into a step count.
pub fn resolution_steps(resolution: f64) -> Result<u32, WeightsError> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(WeightsError::InvalidResolution(resolution));
    }
    let steps = (1.0 / resolution).round();
    // "0.33" is accepted as thirds
    if (steps * resolution - 1.0).abs() > 0.02 {
        return Err(WeightsError::InvalidResolution(resolution));
    }
    Ok(steps as u32)
}

/// Uniform simplex grid with the given resolution.
pub fn grid_pool(resolution: f64, dims: usize) -> Result<Vec<WeightVector>, WeightsError> {
    let steps = resolution_steps(resolution)?;
    simplex_grid(dims, steps)
        .into_iter()
        .map(WeightVector::new)
        .collect()
}

/// Grid points whose `guidance_index` component is at least `min_guidance`.
pub fn warmup_grid(
    resolution: f64,
    dims: usize,
    guidance_index: usize,
    min_guidance: f64,
) -> Result<Vec<WeightVector>, WeightsError> {
    Ok(grid_pool(resolution, dims)?
        .into_iter()
        .filter(|w| w.as_slice()[guidance_index] >= min_guidance - SIMPLEX_TOL)
        .collect())
}

/// Maps a point of the unit cube `[0,1]^(d-1)` onto the `d`-simplex by
/// sorting the coordinates and taking consecutive gaps.
pub fn cube_to_simplex(u: &[f64]) -> Vec<f64> {
    let mut cuts = u.to_vec();
    cuts.sort_by(f64::total_cmp);
    let mut w = Vec::with_capacity(cuts.len() + 1);
    let mut prev = 0.0;
    for c in cuts {
        w.push(c - prev);
        prev = c;
    }
    w.push(1.0 - prev);
    w
}

/// `count` scrambled Sobol points mapped onto the simplex, followed by the
/// `dims` vertices when `extremes` is set.
pub fn sobol_pool(count: usize, dims: usize, seed: u32, extremes: bool) -> Vec<WeightVector> {
    let mut out: Vec<WeightVector> = Vec::with_capacity(count + dims);
    for i in 0..count as u32 {
        let u: Vec<f64> = (0..dims.saturating_sub(1) as u32)
            .map(|d| sobol_burley::sample(i, d, seed) as f64)
            .collect();
        let w = WeightVector(cube_to_simplex(&u));
        if !out.contains(&w) {
            out.push(w);
        }
    }
    if extremes {
        for i in 0..dims {
            let w = WeightVector::basis(dims, i);
            if !out.contains(&w) {
                out.push(w);
            }
        }
    }
    out
}

/// `λ^τ · u0`, or 0 once `τ > τ_max`.
pub fn decay_utility(u0: f64, age: u32, lambda: f64, max_age: u32) -> f64 {
    if age > max_age {
        0.0
    } else {
        lambda.powi(age as i32) * u0
    }
}
