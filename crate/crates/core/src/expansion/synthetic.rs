use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ExpansionError, ExpansionProvider, ReactionRecord};
use crate::graph::MoleculeKey;
use crate::objectives::{AgentTable, MoleculeProperties, PropertyLookup};

const BUILDING_BLOCK_PREFIX: &str = "bb";

/// Parameters of a generated retrosynthesis world.
///
/// Intermediates are named by their position in the tree of generated
/// reactions (`t.2.0` is reactant slot 0 of candidate 2 of `t`), so no
/// intermediate is ever shared between two reactions. Stock molecules are
/// drawn from a shared building-block pool named `bb<n>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub seed: u64,
    pub target: String,
    /// Reactants at this depth or deeper are always stock.
    pub depth_max: u32,
    /// Candidate reactions per expanded molecule.
    pub branching: u32,
    pub reactants_min: u32,
    pub reactants_max: u32,
    /// Probability that a reactant at depth 1 is stock.
    pub stock_base: f64,
    /// Added to the stock probability per extra level of depth.
    pub stock_slope: f64,
    pub building_blocks: u32,
    pub target_in_stock: bool,
    pub agent_pool: u32,
    pub max_agents: u32,
    pub temperature_mean: f64,
    pub temperature_sd: f64,
    pub probability_min: f64,
    pub probability_max: f64,
    pub heavy_atoms_min: u32,
    pub heavy_atoms_max: u32,
    pub logp_mean: f64,
    pub logp_sd: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 0,
            target: "t".into(),
            depth_max: 3,
            branching: 3,
            reactants_min: 1,
            reactants_max: 2,
            stock_base: 0.3,
            stock_slope: 0.2,
            building_blocks: 64,
            target_in_stock: false,
            agent_pool: 16,
            max_agents: 2,
            temperature_mean: 40.0,
            temperature_sd: 45.0,
            probability_min: 1e-3,
            probability_max: 1.0,
            heavy_atoms_min: 6,
            heavy_atoms_max: 40,
            logp_mean: 2.0,
            logp_sd: 1.5,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<(), ExpansionError> {
        let fail = |msg: &str| Err(ExpansionError::InvalidWorld(msg.to_string()));
        if self.depth_max < 1 {
            return fail("depth_max must be at least 1");
        }
        if self.branching < 1 {
            return fail("branching must be at least 1");
        }
        if self.reactants_min < 1 || self.reactants_min > self.reactants_max {
            return fail("need 1 <= reactants_min <= reactants_max");
        }
        if self.building_blocks < 1 {
            return fail("building_blocks must be at least 1");
        }
        if self.target.is_empty()
            || self.target.contains('.')
            || self.target.starts_with(BUILDING_BLOCK_PREFIX)
        {
            return fail("target must be non-empty, contain no '.', and not start with `bb`");
        }
        if !(self.probability_min > 0.0 && self.probability_min <= self.probability_max && self.probability_max <= 1.0) {
            return fail("need 0 < probability_min <= probability_max <= 1");
        }
        if self.heavy_atoms_min < 1 || self.heavy_atoms_min > self.heavy_atoms_max {
            return fail("need 1 <= heavy_atoms_min <= heavy_atoms_max");
        }
        if !(self.temperature_sd >= 0.0 && self.logp_sd >= 0.0) {
            return fail("standard deviations must be non-negative");
        }
        Ok(())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator keyed on `(seed, name, counter)`, independent of call order.
fn keyed_rng(seed: u64, name: &str, counter: u64) -> ChaCha8Rng {
    let h = splitmix(splitmix(seed ^ fnv1a(name.as_bytes())) ^ splitmix(counter));
    ChaCha8Rng::seed_from_u64(h)
}

const PROPERTY_STREAM: u64 = u64::MAX;

/// Where a molecule sits in the generated world.
enum Position {
    Intermediate { depth: u32, parent: Option<(String, u32)> },
    BuildingBlock,
}

/// Deterministic, finite, acyclic synthetic world.
#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    spec: WorldSpec,
    temperature: Normal<f64>,
    logp: Normal<f64>,
}

impl SyntheticWorld {
    pub fn new(spec: WorldSpec) -> Result<Self, ExpansionError> {
        spec.validate()?;
        let temperature = Normal::new(spec.temperature_mean, spec.temperature_sd)
            .map_err(|e| ExpansionError::InvalidWorld(e.to_string()))?;
        let logp = Normal::new(spec.logp_mean, spec.logp_sd)
            .map_err(|e| ExpansionError::InvalidWorld(e.to_string()))?;
        Ok(SyntheticWorld {
            spec,
            temperature,
            logp,
        })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn target(&self) -> MoleculeKey {
        MoleculeKey::new(&self.spec.target)
    }

    /// Hazard scores for the world's agent pool.
    pub fn agent_table(&self) -> AgentTable {
        let scores: BTreeMap<String, f64> = (0..self.spec.agent_pool)
            .map(|k| {
                let mut rng = keyed_rng(self.spec.seed, "agent", k as u64);
                (format!("ag{k}"), rng.random::<f64>())
            })
            .collect();
        AgentTable::new(scores)
    }

    fn building_block_index(&self, key: &str) -> Option<u32> {
        let n: u32 = key.strip_prefix(BUILDING_BLOCK_PREFIX)?.parse().ok()?;
        (n < self.spec.building_blocks).then_some(n)
    }

    /// Parses a key without checking that it is actually generated.
    fn position(&self, key: &str) -> Option<Position> {
        if self.building_block_index(key).is_some() {
            return Some(Position::BuildingBlock);
        }
        if key == self.spec.target {
            return Some(Position::Intermediate {
                depth: 0,
                parent: None,
            });
        }
        let rest = key.strip_prefix(&self.spec.target)?.strip_prefix('.')?;
        let parts: Vec<u32> = rest
            .split('.')
            .map(|p| p.parse().ok())
            .collect::<Option<_>>()?;
        if parts.is_empty() || !parts.len().is_multiple_of(2) {
            return None;
        }
        let depth = (parts.len() / 2) as u32;
        // the parent is everything before the last two segments
        let mut segments: Vec<&str> = key.split('.').collect();
        segments.truncate(segments.len() - 2);
        let candidate = parts[parts.len() - 2];
        Some(Position::Intermediate {
            depth,
            parent: Some((segments.join("."), candidate)),
        })
    }

    fn stock_probability(&self, depth: u32) -> f64 {
        if depth >= self.spec.depth_max {
            1.0
        } else {
            (self.spec.stock_base + self.spec.stock_slope * (depth as f64 - 1.0)).clamp(0.0, 1.0)
        }
    }

    /// Generates candidate `index` for `product`, which sits at `depth`.
    fn candidate(&self, product: &str, depth: u32, index: u32) -> ReactionRecord {
        let s = &self.spec;
        let mut rng = keyed_rng(s.seed, product, index as u64);
        let n_reactants = rng.random_range(s.reactants_min..=s.reactants_max);
        let child_depth = depth + 1;
        let p_stock = self.stock_probability(child_depth);
        let reactants = (0..n_reactants)
            .map(|slot| {
                if rng.random::<f64>() < p_stock {
                    let bb = rng.random_range(0..s.building_blocks);
                    MoleculeKey::new(format!("{BUILDING_BLOCK_PREFIX}{bb}"))
                } else {
                    MoleculeKey::new(format!("{product}.{index}.{slot}"))
                }
            })
            .collect();
        let n_agents = rng.random_range(0..=s.max_agents);
        let agents = if s.agent_pool == 0 {
            Vec::new()
        } else {
            (0..n_agents)
                .map(|_| format!("ag{}", rng.random_range(0..s.agent_pool)))
                .collect()
        };
        let temperature = self.temperature.sample(&mut rng);
        let (lo, hi) = (s.probability_min.ln(), s.probability_max.ln());
        let probability = if hi > lo {
            rng.random_range(lo..=hi).exp().min(1.0)
        } else {
            s.probability_max
        };
        let rule_id = format!("tpl{}", rng.random_range(0..1000u32));
        ReactionRecord {
            product: MoleculeKey::new(product),
            reactants,
            agents,
            temperature,
            rule_id,
            probability,
        }
        .canonicalize()
    }

    fn candidates(&self, product: &str, depth: u32) -> Vec<ReactionRecord> {
        (0..self.spec.branching)
            .map(|i| self.candidate(product, depth, i))
            .collect()
    }

    /// True when `key` is reachable from the target.
    fn is_generated(&self, key: &str) -> bool {
        match self.position(key) {
            None => false,
            Some(Position::BuildingBlock) => true,
            Some(Position::Intermediate { parent: None, .. }) => true,
            Some(Position::Intermediate {
                depth,
                parent: Some((parent, index)),
            }) => {
                depth < self.spec.depth_max
                    && index < self.spec.branching
                    && self.is_generated(&parent)
                    && self
                        .candidate(&parent, depth - 1, index)
                        .reactants
                        .iter()
                        .any(|r| r.as_str() == key)
            }
        }
    }
}

impl PropertyLookup for SyntheticWorld {
    fn properties(&self, key: &MoleculeKey) -> Option<MoleculeProperties> {
        if !self.is_generated(key.as_str()) {
            return None;
        }
        let s = &self.spec;
        let mut rng = keyed_rng(s.seed, key.as_str(), PROPERTY_STREAM);
        Some(MoleculeProperties {
            heavy_atoms: rng.random_range(s.heavy_atoms_min..=s.heavy_atoms_max),
            sa: rng.random_range(1.0..=10.0),
            tox: rng.random::<f64>(),
            price: rng.random_range(0.0..=15.0),
            logp: self.logp.sample(&mut rng),
        })
    }
}

impl ExpansionProvider for SyntheticWorld {
    fn expand(&self, product: &MoleculeKey) -> Result<Vec<ReactionRecord>, ExpansionError> {
        if !self.is_generated(product.as_str()) {
            return Err(ExpansionError::UnknownMolecule(product.clone()));
        }
        match self.position(product.as_str()) {
            Some(Position::Intermediate { depth, .. }) if !self.in_stock(product) => {
                Ok(self.candidates(product.as_str(), depth))
            }
            _ => Ok(Vec::new()),
        }
    }

    fn in_stock(&self, molecule: &MoleculeKey) -> bool {
        if molecule.as_str() == self.spec.target {
            return self.spec.target_in_stock;
        }
        self.building_block_index(molecule.as_str()).is_some()
    }
}
