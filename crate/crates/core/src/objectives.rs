//! Reaction cost functions and per-molecule heuristics.
//!
//! Four objectives are supported: sustainability (temperature and atom
//! economy), toxicity of the reaction agents, scale-up potential (logP
//! separability) and a guidance objective derived from the single-step
//! model's reaction probability. Every component is normalized to `[0, 1]`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostVector, DimMask};
use crate::expansion::ReactionRecord;
use crate::graph::MoleculeKey;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("no property record for molecule `{0}`")]
    MissingProperties(MoleculeKey),
    #[error("reactant heavy-atom total is zero for reaction producing `{0}`")]
    ZeroReactantAtoms(MoleculeKey),
    #[error("reaction probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("objective set has no `{0}` objective")]
    MissingObjective(&'static str),
    #[error("normalization bounds for `{name}` must satisfy min < max (got {min}..{max})")]
    InvalidBounds { name: String, min: f64, max: f64 },
    #[error("agent score for `{0}` must lie in [0, 1]")]
    InvalidAgentScore(String),
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse `{path}`: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Molecule-level inputs to the objective functions and heuristics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeProperties {
    pub heavy_atoms: u32,
    /// Synthetic accessibility score, nominally in `[1, 10]`.
    pub sa: f64,
    /// Probability of the molecule being toxic.
    pub tox: f64,
    /// Predicted price score, nominally in `[0, 15]`.
    pub price: f64,
    pub logp: f64,
}

/// Read access to molecule properties.
pub trait PropertyLookup {
    fn properties(&self, key: &MoleculeKey) -> Option<MoleculeProperties>;
}

impl PropertyLookup for BTreeMap<MoleculeKey, MoleculeProperties> {
    fn properties(&self, key: &MoleculeKey) -> Option<MoleculeProperties> {
        self.get(key).cloned()
    }
}

/// Loads a property table: a JSON map from molecule key to properties.
pub fn load_property_table(
    path: &Path,
) -> Result<BTreeMap<MoleculeKey, MoleculeProperties>, ObjectiveError> {
    let text = std::fs::read_to_string(path).map_err(|source| ObjectiveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ObjectiveError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn lookup(props: &dyn PropertyLookup, key: &MoleculeKey) -> Result<MoleculeProperties, ObjectiveError> {
    props
        .properties(key)
        .ok_or_else(|| ObjectiveError::MissingProperties(key.clone()))
}

/// Temperature penalty `C(T)`, with the case boundaries applied literally.
pub fn temperature_penalty(t: f64) -> f64 {
    if (15.0..=25.0).contains(&t) {
        0.0
    } else if (10.0..15.0).contains(&t) || (t > 25.0 && t <= 40.0) {
        0.25
    } else if (-20.0..10.0).contains(&t) {
        0.6
    } else if t < -20.0 {
        1.0
    } else if t > 40.0 && t <= 120.0 {
        0.4
    } else {
        0.8
    }
}

/// `0.5·C(T) + 0.5·(1 − AE)` with `AE = product atoms / reactant atoms`.
pub fn sustainability_cost(
    reaction: &ReactionRecord,
    props: &dyn PropertyLookup,
) -> Result<f64, ObjectiveError> {
    let product_atoms = lookup(props, &reaction.product)?.heavy_atoms as f64;
    let mut reactant_atoms = 0.0;
    for r in &reaction.reactants {
        reactant_atoms += lookup(props, r)?.heavy_atoms as f64;
    }
    if reactant_atoms <= 0.0 {
        return Err(ObjectiveError::ZeroReactantAtoms(reaction.product.clone()));
    }
    let atom_economy = product_atoms / reactant_atoms;
    let cost = 0.5 * temperature_penalty(reaction.temperature) + 0.5 * (1.0 - atom_economy);
    Ok(cost.clamp(0.0, 1.0))
}

/// Separation penalty for a mean logP difference.
pub fn separation_penalty(p_diff: f64) -> f64 {
    if p_diff >= 3.0 {
        0.0
    } else if p_diff >= 2.5 {
        0.2
    } else if p_diff >= 2.0 {
        0.4
    } else if p_diff >= 1.0 {
        0.6
    } else if p_diff >= 0.5 {
        0.8
    } else {
        1.0
    }
}

/// Mean absolute logP difference between the product and each reactant.
pub fn logp_difference(
    reaction: &ReactionRecord,
    props: &dyn PropertyLookup,
) -> Result<f64, ObjectiveError> {
    let product = lookup(props, &reaction.product)?.logp;
    let mut total = 0.0;
    for r in &reaction.reactants {
        total += (product - lookup(props, r)?.logp).abs();
    }
    Ok(total / reaction.reactants.len() as f64)
}

pub fn scaleup_cost(
    reaction: &ReactionRecord,
    props: &dyn PropertyLookup,
) -> Result<f64, ObjectiveError> {
    Ok(separation_penalty(logp_difference(reaction, props)?))
}

/// `clip(−ln p / 10, 0, 1)`.
pub fn guidance_cost(probability: f64) -> Result<f64, ObjectiveError> {
    if !(probability > 0.0 && probability <= 1.0) {
        return Err(ObjectiveError::InvalidProbability(probability));
    }
    Ok((-probability.ln() / 10.0).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentAggregation {
    #[default]
    Max,
    Mean,
}

/// Agent hazard scores in `[0, 1]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct AgentTable {
    pub scores: BTreeMap<String, f64>,
    #[serde(default = "default_unknown_agent_score")]
    pub unknown_score: f64,
    #[serde(default)]
    pub aggregation: AgentAggregation,
    #[serde(skip)]
    unknown_hits: AtomicUsize,
}

fn default_unknown_agent_score() -> f64 {
    0.5
}

impl Clone for AgentTable {
    fn clone(&self) -> Self {
        AgentTable {
            scores: self.scores.clone(),
            unknown_score: self.unknown_score,
            aggregation: self.aggregation,
            unknown_hits: AtomicUsize::new(self.unknown_hits.load(Ordering::Relaxed)),
        }
    }
}

impl Default for AgentTable {
    fn default() -> Self {
        AgentTable::new(BTreeMap::new())
    }
}

impl AgentTable {
    pub fn new(scores: BTreeMap<String, f64>) -> Self {
        AgentTable {
            scores,
            unknown_score: default_unknown_agent_score(),
            aggregation: AgentAggregation::Max,
            unknown_hits: AtomicUsize::new(0),
        }
    }

    /// Loads a JSON map `agent id → score`.
    pub fn load(path: &Path) -> Result<Self, ObjectiveError> {
        let text = std::fs::read_to_string(path).map_err(|source| ObjectiveError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let scores: BTreeMap<String, f64> =
            serde_json::from_str(&text).map_err(|source| ObjectiveError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        for (agent, score) in &scores {
            if !(0.0..=1.0).contains(score) {
                return Err(ObjectiveError::InvalidAgentScore(agent.clone()));
            }
        }
        Ok(AgentTable::new(scores))
    }

    /// Number of lookups that fell back to `unknown_score`.
    pub fn unknown_hits(&self) -> usize {
        self.unknown_hits.load(Ordering::Relaxed)
    }

    fn score(&self, agent: &str) -> f64 {
        match self.scores.get(agent) {
            Some(s) => *s,
            None => {
                if self.unknown_hits.fetch_add(1, Ordering::Relaxed) == 0 {
                    log::warn!(
                        "agent `{agent}` has no toxicity score, using {}",
                        self.unknown_score
                    );
                }
                self.unknown_score
            }
        }
    }

    /// Reaction-level toxicity; 0 for a reaction without agents.
    pub fn toxicity_cost(&self, reaction: &ReactionRecord) -> f64 {
        if reaction.agents.is_empty() {
            return 0.0;
        }
        let scores = reaction.agents.iter().map(|a| self.score(a));
        match self.aggregation {
            AgentAggregation::Max => scores.fold(0.0, f64::max),
            AgentAggregation::Mean => scores.sum::<f64>() / reaction.agents.len() as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Sustainability,
    Toxicity,
    ScaleUp,
    Guidance,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Sustainability => "sustainability",
            ObjectiveKind::Toxicity => "toxicity",
            ObjectiveKind::ScaleUp => "scale_up",
            ObjectiveKind::Guidance => "guidance",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    #[serde(default)]
    pub min: f64,
    #[serde(default = "one")]
    pub max: f64,
}

fn one() -> f64 {
    1.0
}

/// Source of the per-molecule estimates `V_m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicMode {
    /// `V_m = 0`: admissible, used for certified runs.
    #[default]
    Zero,
    /// Property-derived estimates (SA score, toxicity, price).
    Properties,
}

/// Ordered objectives with their normalization bounds.
#[derive(Clone, Debug)]
pub struct ObjectiveSet {
    objectives: Vec<ObjectiveSpec>,
    guidance_index: usize,
    pub agents: AgentTable,
}

impl ObjectiveSet {
    pub fn new(objectives: Vec<ObjectiveSpec>, agents: AgentTable) -> Result<Self, ObjectiveError> {
        for o in &objectives {
            if !(o.min < o.max) {
                return Err(ObjectiveError::InvalidBounds {
                    name: o.kind.name().to_string(),
                    min: o.min,
                    max: o.max,
                });
            }
        }
        let guidance_index = objectives
            .iter()
            .position(|o| o.kind == ObjectiveKind::Guidance)
            .ok_or(ObjectiveError::MissingObjective("guidance"))?;
        Ok(ObjectiveSet {
            objectives,
            guidance_index,
            agents,
        })
    }

    /// Sustainability, toxicity, scale-up, guidance with `[0, 1]` bounds.
    pub fn standard(agents: AgentTable) -> Self {
        let objectives = [
            ObjectiveKind::Sustainability,
            ObjectiveKind::Toxicity,
            ObjectiveKind::ScaleUp,
            ObjectiveKind::Guidance,
        ]
        .into_iter()
        .map(|kind| ObjectiveSpec {
            kind,
            min: 0.0,
            max: 1.0,
        })
        .collect();
        ObjectiveSet::new(objectives, agents).expect("standard objectives are valid")
    }

    pub fn dims(&self) -> usize {
        self.objectives.len()
    }

    pub fn guidance_index(&self) -> usize {
        self.guidance_index
    }

    pub fn objectives(&self) -> &[ObjectiveSpec] {
        &self.objectives
    }

    /// All dimensions except guidance.
    pub fn pareto_mask(&self) -> DimMask {
        DimMask::excluding(self.dims(), self.guidance_index)
    }

    fn normalize(spec: &ObjectiveSpec, raw: f64) -> f64 {
        ((raw - spec.min) / (spec.max - spec.min)).clamp(0.0, 1.0)
    }

    /// Cost vector `c(R)` in objective order.
    pub fn reaction_cost(
        &self,
        reaction: &ReactionRecord,
        props: &dyn PropertyLookup,
    ) -> Result<CostVector, ObjectiveError> {
        let mut values = Vec::with_capacity(self.dims());
        for spec in &self.objectives {
            let raw = match spec.kind {
                ObjectiveKind::Sustainability => sustainability_cost(reaction, props)?,
                ObjectiveKind::Toxicity => self.agents.toxicity_cost(reaction),
                ObjectiveKind::ScaleUp => scaleup_cost(reaction, props)?,
                ObjectiveKind::Guidance => guidance_cost(reaction.probability)?,
            };
            values.push(Self::normalize(spec, raw));
        }
        Ok(CostVector(values))
    }

    /// Heuristic `V_m`; zero for stock molecules and in [`HeuristicMode::Zero`].
    pub fn molecule_heuristic(
        &self,
        key: &MoleculeKey,
        is_stock: bool,
        mode: HeuristicMode,
        props: &dyn PropertyLookup,
    ) -> Result<CostVector, ObjectiveError> {
        if is_stock || mode == HeuristicMode::Zero {
            return Ok(CostVector::zeros(self.dims()));
        }
        let p = lookup(props, key)?;
        let values = self
            .objectives
            .iter()
            .map(|spec| {
                let v = match spec.kind {
                    ObjectiveKind::Sustainability => p.sa / 10.0,
                    ObjectiveKind::Toxicity => p.tox,
                    ObjectiveKind::ScaleUp => p.price / 15.0,
                    ObjectiveKind::Guidance => 0.0,
                };
                v.clamp(0.0, 1.0)
            })
            .collect();
        Ok(CostVector(values))
    }
}
