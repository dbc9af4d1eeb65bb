//! The multi-weight best-first search loop and its baselines.

mod archive;
mod completion;
mod propagate;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostVector, DimMask};
use crate::expansion::{ExpansionError, ExpansionProvider, DEFAULT_TOP_K};
use crate::graph::{Candidate, GraphError, MolId, MoleculeInit, MoleculeKey, Route, SearchGraph};
use crate::metrics::MetricsError;
use crate::objectives::{HeuristicMode, ObjectiveError, ObjectiveSet};
use crate::oracle::{enumerate_routes, GraphSource, OracleError};
use crate::pruning::{compute_bounds, prune_frontier};
use crate::weights::{PoolConfig, WeightPool, WeightVector, WeightsError};

pub use archive::{ArchiveEntry, ParetoArchive};
pub use completion::pareto_completion;
pub use propagate::{propagate, propagate_down, propagate_up};

/// Slack on the scalar optimality test.
const SCALAR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("expanding `{molecule}`: {source}")]
    Expansion {
        molecule: MoleculeKey,
        #[source]
        source: ExpansionError,
    },
    #[error("costing `{molecule}`: {source}")]
    Objective {
        molecule: MoleculeKey,
        #[source]
        source: ObjectiveError,
    },
    #[error("weight vector has {got} components, costs have {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
}

/// `wᵀv` over every dimension.
pub fn scalarize(v: &CostVector, w: &WeightVector) -> Result<f64, SearchError> {
    if v.dims() != w.dims() {
        return Err(SearchError::DimensionMismatch {
            expected: v.dims(),
            got: w.dims(),
        });
    }
    Ok(v.dot(w.as_slice()))
}

/// The open frontier molecule with the smallest value under weight `j`,
/// ties to the earliest inserted. Molecules with an infinite value lie on
/// no complete route and are skipped.
pub fn select(graph: &SearchGraph, j: usize) -> Option<MolId> {
    let mut best: Option<(MolId, f64)> = None;
    for m in graph.frontier() {
        let v = graph.molecule(m).value[j];
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((m, v));
        }
    }
    best.map(|(m, _)| m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Maximum number of single-step expansions.
    pub budget: usize,
    pub time_budget: Option<Duration>,
    pub top_k: usize,
    pub heuristics: HeuristicMode,
    /// Dimensions used for dominance, pruning and hypervolume.
    pub mask: DimMask,
    pub hv_reference: Vec<f64>,
    /// Bound-dominance pruning with certified termination.
    pub pruning: bool,
    pub epsilon: f64,
    /// Stop a single-weight search once its best route provably wins.
    pub scalar_certify: bool,
    /// Archive every complete route in the final graph.
    pub extract_all: bool,
    pub route_cap: usize,
    /// Record wall-clock time in the stats.
    pub record_timing: bool,
}

impl SearchConfig {
    pub fn new(mask: DimMask) -> Self {
        let reference = vec![1.1; mask.active_dims()];
        SearchConfig {
            budget: 300,
            time_budget: None,
            top_k: DEFAULT_TOP_K,
            heuristics: HeuristicMode::Zero,
            mask,
            hv_reference: reference,
            pruning: false,
            epsilon: 0.0,
            scalar_certify: false,
            extract_all: false,
            route_cap: 100_000,
            record_timing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetInStock,
    /// Every frontier molecule is bound-dominated.
    Certified,
    /// The single weight's best route is no worse than any frontier value.
    ScalarOptimal,
    FrontierExhausted,
    Budget,
    Time,
    PoolExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: usize,
    pub iterations: usize,
    pub resamples: usize,
    pub termination: Termination,
    pub archive_size: usize,
    pub hypervolume: f64,
    pub molecules: usize,
    pub reactions: usize,
    pub discarded_cycles: usize,
    pub pruned_count: usize,
    pub frontier_size: usize,
    pub certified: bool,
    pub epsilon: f64,
    /// Pruned share of the pruned plus open frontier, in percent.
    pub search_space_reduction_percent: f64,
    /// Set when final route extraction stopped at the route cap.
    pub route_cap_hit: bool,
    pub unknown_agent_hits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

/// Archive state after one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub expansions: usize,
    pub hypervolume: f64,
    pub archive_size: usize,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub archive: Vec<ArchiveEntry>,
    pub stats: SearchStats,
    pub trace: Vec<TracePoint>,
    pub graph: SearchGraph,
}

fn new_molecule(
    provider: &dyn ExpansionProvider,
    objectives: &ObjectiveSet,
    mode: HeuristicMode,
    key: &MoleculeKey,
) -> Result<MoleculeInit, SearchError> {
    let is_stock = provider.in_stock(key);
    let heuristic = objectives
        .molecule_heuristic(key, is_stock, mode, provider)
        .map_err(|source| SearchError::Objective {
            molecule: key.clone(),
            source,
        })?;
    Ok(MoleculeInit {
        key: key.clone(),
        is_stock,
        heuristic,
    })
}

struct Search<'a> {
    provider: &'a dyn ExpansionProvider,
    objectives: &'a ObjectiveSet,
    config: &'a SearchConfig,
    graph: SearchGraph,
    pool: WeightPool,
    archive: ParetoArchive,
    expansions: usize,
    solved_reactions: usize,
}

impl Search<'_> {
    fn objective_error(molecule: &MoleculeKey) -> impl FnOnce(ObjectiveError) -> SearchError + '_ {
        move |source| SearchError::Objective {
            molecule: molecule.clone(),
            source,
        }
    }

    fn molecule_init(&self, key: &MoleculeKey) -> Result<MoleculeInit, SearchError> {
        if let Some(id) = self.graph.molecule_id(key) {
            let m = self.graph.molecule(id);
            return Ok(MoleculeInit {
                key: key.clone(),
                is_stock: m.is_stock,
                heuristic: m.heuristic.clone(),
            });
        }
        new_molecule(self.provider, self.objectives, self.config.heuristics, key)
    }

    fn expand(&mut self, m: MolId) -> Result<(), SearchError> {
        let key = self.graph.molecule(m).key.clone();
        let records = self
            .provider
            .expand(&key)
            .map_err(|source| SearchError::Expansion {
                molecule: key.clone(),
                source,
            })?;
        self.expansions += 1;
        let mut candidates = Vec::new();
        for record in records.into_iter().take(self.config.top_k) {
            let cost = self
                .objectives
                .reaction_cost(&record, self.provider)
                .map_err(Self::objective_error(&key))?;
            let reactants = record
                .reactants
                .iter()
                .map(|k| self.molecule_init(k))
                .collect::<Result<Vec<_>, _>>()?;
            candidates.push(Candidate {
                record,
                cost,
                reactants,
            });
        }
        let outcome = self.graph.add_expansion(m, candidates)?;
        // a pruned molecule reached through a new parent has routes its
        // old bound did not cover
        for r in outcome.reactions {
            let reactants = self.graph.reaction(r).reactants.clone();
            for c in reactants {
                if !outcome.new_molecules.contains(&c) {
                    self.graph.molecule_mut(c).pruned = false;
                }
            }
        }
        Ok(())
    }

    fn record_solutions(&mut self, k: usize, hv_gain: &mut [f64]) {
        let active = self.pool.active().to_vec();
        for (j, w) in active.iter().enumerate() {
            if let Some(route) = self.graph.best_route(w.as_slice()) {
                if let Some(gain) = self.archive.insert(route, Some(w.clone()), k) {
                    hv_gain[j] += gain;
                }
            }
        }
    }

    fn complete_front(&mut self, k: usize, force: bool) {
        let solved = self.graph.solved_molecules();
        let count = self
            .graph
            .reactions()
            .iter()
            .filter(|r| r.reactants.iter().all(|c| solved[c.index()]))
            .count();
        if !force && count == self.solved_reactions {
            return;
        }
        self.solved_reactions = count;
        for route in pareto_completion(&self.graph, &self.config.mask) {
            self.archive.insert(route, None, k);
        }
    }

    fn scalar_optimal(&self) -> bool {
        let w = &self.pool.active()[0];
        let Some(route) = self.graph.best_route(w.as_slice()) else {
            return false;
        };
        let best = route.cost.dot(w.as_slice());
        let lower = self
            .graph
            .frontier()
            .into_iter()
            .map(|m| self.graph.molecule(m).value[0])
            .fold(f64::INFINITY, f64::min);
        best <= lower + SCALAR_TOL
    }
}

/// Runs the search for `target`.
pub fn run(
    provider: &dyn ExpansionProvider,
    objectives: &ObjectiveSet,
    target: &MoleculeKey,
    config: &SearchConfig,
    pool: PoolConfig,
) -> Result<SearchOutcome, SearchError> {
    let started = Instant::now();
    let unknown_agents_before = objectives.agents.unknown_hits();
    let dims = objectives.dims();
    if config.mask.dims() != dims {
        return Err(SearchError::InvalidConfig(format!(
            "mask covers {} dimensions, objectives have {dims}",
            config.mask.dims()
        )));
    }
    if pool.dims != dims {
        return Err(SearchError::DimensionMismatch {
            expected: dims,
            got: pool.dims,
        });
    }
    if !(config.epsilon >= 0.0) {
        return Err(SearchError::InvalidConfig("epsilon must be non-negative".into()));
    }
    let pool = WeightPool::new(pool)?;
    if config.scalar_certify && pool.active().len() != 1 {
        return Err(SearchError::InvalidConfig(
            "scalar certification needs exactly one weight".into(),
        ));
    }
    let archive = ParetoArchive::new(config.mask.clone(), config.hv_reference.clone())?;
    let mut search = Search {
        provider,
        objectives,
        config,
        graph: SearchGraph::new(
            new_molecule(provider, objectives, config.heuristics, target)?,
            pool.active().len(),
        ),
        pool,
        archive,
        expansions: 0,
        solved_reactions: 0,
    };

    let mut trace = Vec::new();
    let mut k = 0usize;
    let mut hv_gain = vec![0.0; search.pool.active().len()];
    let mut certified = false;
    let termination = if search.graph.molecule(search.graph.root()).is_stock {
        search.archive.insert(Route::empty(target.clone(), dims), None, 0);
        Termination::TargetInStock
    } else {
        propagate(&mut search.graph, search.pool.active());
        loop {
            if config.pruning {
                let bounds = compute_bounds(&search.graph);
                let masked = search.archive.masked_costs().to_vec();
                let report = prune_frontier(&mut search.graph, &bounds, &masked, &config.mask, config.epsilon);
                if report.certified {
                    certified = true;
                    break Termination::Certified;
                }
            }
            if config.scalar_certify && search.scalar_optimal() {
                certified = true;
                break Termination::ScalarOptimal;
            }
            if search.expansions >= config.budget {
                break Termination::Budget;
            }
            if config.time_budget.is_some_and(|t| started.elapsed() >= t) {
                break Termination::Time;
            }
            let mut picks: Vec<MolId> = Vec::new();
            for j in 0..search.pool.active().len() {
                if let Some(m) = select(&search.graph, j) {
                    if !picks.contains(&m) {
                        picks.push(m);
                    }
                }
            }
            if picks.is_empty() {
                break Termination::FrontierExhausted;
            }
            picks.truncate(config.budget - search.expansions);
            for m in picks {
                search.expand(m)?;
            }
            propagate(&mut search.graph, search.pool.active());
            search.record_solutions(k, &mut hv_gain);
            if config.pruning {
                search.complete_front(k, false);
            }
            trace.push(TracePoint {
                iteration: k,
                expansions: search.expansions,
                hypervolume: search.archive.hypervolume(),
                archive_size: search.archive.len(),
            });
            k += 1;
            if search.pool.due(k) {
                let changed = search.pool.resample(k, &hv_gain)?;
                hv_gain = vec![0.0; search.pool.active().len()];
                if changed {
                    propagate(&mut search.graph, search.pool.active());
                }
            }
            if search.pool.is_exhausted() {
                break Termination::PoolExhausted;
            }
        }
    };

    if config.pruning && termination != Termination::TargetInStock {
        search.complete_front(k, true);
    }
    let mut route_cap_hit = false;
    if config.extract_all && termination != Termination::TargetInStock {
        let world = enumerate_routes(&mut GraphSource::new(&search.graph), target, config.route_cap, false)?;
        route_cap_hit = world.overflow;
        for route in world.routes {
            search.archive.insert(route, None, k);
        }
    }

    let pruned_count = search.graph.molecules().iter().filter(|m| m.pruned).count();
    let frontier_size = search.graph.frontier().len();
    let reduction = if pruned_count + frontier_size == 0 {
        0.0
    } else {
        100.0 * pruned_count as f64 / (pruned_count + frontier_size) as f64
    };
    let stats = SearchStats {
        expansions: search.expansions,
        iterations: k,
        resamples: search.pool.resamples(),
        termination,
        archive_size: search.archive.len(),
        hypervolume: search.archive.hypervolume(),
        molecules: search.graph.molecules().len(),
        reactions: search.graph.reactions().len(),
        discarded_cycles: search.graph.discarded_cycles(),
        pruned_count,
        frontier_size,
        certified,
        epsilon: config.epsilon,
        search_space_reduction_percent: reduction,
        route_cap_hit,
        unknown_agent_hits: objectives.agents.unknown_hits() - unknown_agents_before,
        wall_time_ms: config
            .record_timing
            .then(|| started.elapsed().as_secs_f64() * 1e3),
    };
    Ok(SearchOutcome {
        archive: search.archive.into_entries(),
        stats,
        trace,
        graph: search.graph,
    })
}

/// Molecules keys of every pruned molecule.
pub fn pruned_molecules(graph: &SearchGraph) -> BTreeSet<MoleculeKey> {
    graph
        .molecules()
        .iter()
        .filter(|m| m.pruned)
        .map(|m| m.key.clone())
        .collect()
}
