//! Cost vectors and Pareto dominance on a dimension mask.

use serde::{Deserialize, Serialize};

/// Absolute slack used when comparing summed costs.
///
/// Route costs are sums of reaction costs taken in different orders by the
/// search and by the oracle, so exact float equality is too strict.
pub const COST_TOL: f64 = 1e-12;

/// A non-negative cost with one component per objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostVector(pub Vec<f64>);

impl CostVector {
    pub fn zeros(dims: usize) -> Self {
        CostVector(vec![0.0; dims])
    }

    /// The "unreachable" cost, used for dead ends.
    pub fn infinite(dims: usize) -> Self {
        CostVector(vec![f64::INFINITY; dims])
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &CostVector) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn min_assign(&mut self, other: &CostVector) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if *b < *a {
                *a = *b;
            }
        }
    }

    /// Linear scalarization `wᵀv` over all dimensions.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        debug_assert_eq!(self.dims(), weights.len());
        self.0.iter().zip(weights).map(|(v, w)| v * w).sum()
    }
}

/// Which dimensions take part in Pareto dominance and front metrics.
///
/// One mask is shared by every cost vector of a run; the guidance objective
/// is normally excluded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DimMask(pub Vec<bool>);

impl DimMask {
    pub fn all(dims: usize) -> Self {
        DimMask(vec![true; dims])
    }

    pub fn excluding(dims: usize, index: usize) -> Self {
        let mut mask = vec![true; dims];
        mask[index] = false;
        DimMask(mask)
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn active_dims(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Projects a full cost vector onto the masked dimensions.
    pub fn project(&self, cost: &CostVector) -> Vec<f64> {
        cost.0
            .iter()
            .zip(&self.0)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .collect()
    }
}

/// `a ⪯ b` component-wise.
pub fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= *y + COST_TOL)
}

pub fn approx_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= COST_TOL)
}

/// `a ≺ b`: no worse anywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    weakly_dominates(a, b) && a.iter().zip(b).any(|(x, y)| *x < *y - COST_TOL)
}
