use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::cost::{approx_equal, dominates, DimMask};
use crate::graph::Route;
use crate::metrics::{hypervolume, MetricsError};
use crate::weights::WeightVector;

/// An archived route with the weight that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub route: Route,
    /// `None` for routes found by front completion or final extraction.
    pub weight: Option<WeightVector>,
    /// Hypervolume gained when the route was inserted.
    pub hv_gain: f64,
    pub iteration: usize,
}

/// Non-dominated routes on the masked dimensions.
#[derive(Clone, Debug)]
pub struct ParetoArchive {
    mask: DimMask,
    reference: Vec<f64>,
    entries: Vec<ArchiveEntry>,
    masked: Vec<Vec<f64>>,
    identities: HashSet<Vec<String>>,
    hv: f64,
}

impl ParetoArchive {
    pub fn new(mask: DimMask, reference: Vec<f64>) -> Result<Self, MetricsError> {
        if reference.len() != mask.active_dims() {
            return Err(MetricsError::DimensionMismatch {
                expected: mask.active_dims(),
                got: reference.len(),
            });
        }
        hypervolume(&[], &reference)?;
        Ok(ParetoArchive {
            mask,
            reference,
            entries: Vec::new(),
            masked: Vec::new(),
            identities: HashSet::new(),
            hv: 0.0,
        })
    }

    /// Inserts `route` unless an archived route dominates it or matches its
    /// masked cost. Routes it dominates are evicted. Returns the
    /// hypervolume gain on insertion.
    pub fn insert(&mut self, route: Route, weight: Option<WeightVector>, iteration: usize) -> Option<f64> {
        let identity = route.identity();
        if self.identities.contains(&identity) {
            return None;
        }
        let cost = self.mask.project(&route.cost);
        if self
            .masked
            .iter()
            .any(|a| dominates(a, &cost) || approx_equal(a, &cost))
        {
            return None;
        }
        let keep: Vec<bool> = self.masked.iter().map(|a| !dominates(&cost, a)).collect();
        let mut i = 0;
        self.entries.retain(|e| {
            let k = keep[i];
            i += 1;
            if !k {
                self.identities.remove(&e.route.identity());
            }
            k
        });
        let mut i = 0;
        self.masked.retain(|_| {
            let k = keep[i];
            i += 1;
            k
        });
        self.masked.push(cost);
        self.identities.insert(identity);
        let hv = hypervolume(&self.masked, &self.reference).expect("reference validated on construction");
        let gain = (hv - self.hv).max(0.0);
        self.hv = hv;
        self.entries.push(ArchiveEntry {
            route,
            weight,
            hv_gain: gain,
            iteration,
        });
        Some(gain)
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<ArchiveEntry> {
        self.entries
    }

    /// Masked costs, aligned with [`entries`](Self::entries).
    pub fn masked_costs(&self) -> &[Vec<f64>] {
        &self.masked
    }

    pub fn hypervolume(&self) -> f64 {
        self.hv
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn mask(&self) -> &DimMask {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
