//! Exhaustive ground truth for small worlds.
//!
//! Routes are enumerated depth-first with one producing reaction per
//! molecule, so a molecule needed twice is made once and counted once.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostVector, DimMask};
use crate::expansion::{ExpansionError, ExpansionProvider, ReactionRecord};
use crate::graph::{MoleculeKey, Route, SearchGraph};
use crate::metrics::nd_filter;
use crate::objectives::{ObjectiveError, ObjectiveSet};

pub const DEFAULT_ROUTE_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("expanding `{molecule}`: {source}")]
    Expansion {
        molecule: MoleculeKey,
        #[source]
        source: ExpansionError,
    },
    #[error("costing a reaction of `{molecule}`: {source}")]
    Objective {
        molecule: MoleculeKey,
        #[source]
        source: ObjectiveError,
    },
    #[error("more than {0} routes")]
    CapExceeded(usize),
    #[error("enumeration was truncated at the route cap")]
    Incomplete,
}

/// Where the enumerator gets reactions from.
pub trait RouteSource {
    fn dims(&self) -> usize;
    fn is_stock(&self, molecule: &MoleculeKey) -> bool;
    /// Every reaction producing `molecule` with its cost vector.
    fn reactions(&mut self, molecule: &MoleculeKey) -> Result<Vec<(ReactionRecord, CostVector)>, OracleError>;
}

/// The full world behind a provider, truncated to the same `top_k` as the
/// search.
pub struct ProviderSource<'a> {
    provider: &'a dyn ExpansionProvider,
    objectives: &'a ObjectiveSet,
    top_k: usize,
    memo: HashMap<MoleculeKey, Vec<(ReactionRecord, CostVector)>>,
}

impl<'a> ProviderSource<'a> {
    pub fn new(provider: &'a dyn ExpansionProvider, objectives: &'a ObjectiveSet, top_k: usize) -> Self {
        ProviderSource {
            provider,
            objectives,
            top_k,
            memo: HashMap::new(),
        }
    }
}

impl RouteSource for ProviderSource<'_> {
    fn dims(&self) -> usize {
        self.objectives.dims()
    }

    fn is_stock(&self, molecule: &MoleculeKey) -> bool {
        self.provider.in_stock(molecule)
    }

    fn reactions(&mut self, molecule: &MoleculeKey) -> Result<Vec<(ReactionRecord, CostVector)>, OracleError> {
        if let Some(r) = self.memo.get(molecule) {
            return Ok(r.clone());
        }
        let records = self
            .provider
            .expand(molecule)
            .map_err(|source| OracleError::Expansion {
                molecule: molecule.clone(),
                source,
            })?;
        let mut out = Vec::new();
        for record in records.into_iter().take(self.top_k) {
            let cost = self
                .objectives
                .reaction_cost(&record, self.provider)
                .map_err(|source| OracleError::Objective {
                    molecule: molecule.clone(),
                    source,
                })?;
            out.push((record, cost));
        }
        self.memo.insert(molecule.clone(), out.clone());
        Ok(out)
    }
}

/// Only the reactions already present in a search graph. Unexpanded
/// molecules have none.
pub struct GraphSource<'a> {
    graph: &'a SearchGraph,
}

impl<'a> GraphSource<'a> {
    pub fn new(graph: &'a SearchGraph) -> Self {
        GraphSource { graph }
    }
}

impl RouteSource for GraphSource<'_> {
    fn dims(&self) -> usize {
        self.graph.molecule(self.graph.root()).heuristic.dims()
    }

    fn is_stock(&self, molecule: &MoleculeKey) -> bool {
        self.graph
            .molecule_id(molecule)
            .is_some_and(|m| self.graph.molecule(m).is_stock)
    }

    fn reactions(&mut self, molecule: &MoleculeKey) -> Result<Vec<(ReactionRecord, CostVector)>, OracleError> {
        let Some(m) = self.graph.molecule_id(molecule) else {
            return Ok(Vec::new());
        };
        Ok(self
            .graph
            .molecule(m)
            .children
            .iter()
            .map(|r| {
                let rxn = self.graph.reaction(*r);
                (rxn.record.clone(), rxn.cost.clone())
            })
            .collect())
    }
}

/// Every complete route of a world, or the first `cap` of them.
#[derive(Clone, Debug)]
pub struct EnumeratedWorld {
    pub target: MoleculeKey,
    pub routes: Vec<Route>,
    /// Set when enumeration stopped at the cap.
    pub overflow: bool,
}

struct Enumerator<'s> {
    source: &'s mut dyn RouteSource,
    target: MoleculeKey,
    cap: usize,
    routes: Vec<Route>,
    seen: HashSet<Vec<String>>,
    overflow: bool,
}

impl Enumerator<'_> {
    fn visit(
        &mut self,
        pending: &mut Vec<MoleculeKey>,
        chosen: &mut HashSet<MoleculeKey>,
        steps: &mut Vec<(ReactionRecord, CostVector)>,
    ) -> Result<(), OracleError> {
        if self.overflow {
            return Ok(());
        }
        let Some(m) = pending.pop() else {
            self.emit(steps);
            return Ok(());
        };
        if self.source.is_stock(&m) || chosen.contains(&m) {
            self.visit(pending, chosen, steps)?;
            pending.push(m);
            return Ok(());
        }
        let options = self.source.reactions(&m)?;
        chosen.insert(m.clone());
        for (record, cost) in options {
            let depth = pending.len();
            pending.extend(record.reactants.iter().rev().cloned());
            steps.push((record, cost));
            self.visit(pending, chosen, steps)?;
            steps.pop();
            pending.truncate(depth);
        }
        chosen.remove(&m);
        pending.push(m);
        Ok(())
    }

    fn emit(&mut self, steps: &[(ReactionRecord, CostVector)]) {
        let mut route = Route::empty(self.target.clone(), self.source.dims());
        for (record, cost) in steps {
            route.push(record.clone(), cost.clone());
        }
        let source = &*self.source;
        route.frontier_leaves = steps
            .iter()
            .flat_map(|(r, _)| r.reactants.iter())
            .filter(|m| source.is_stock(m))
            .cloned()
            .collect();
        if steps.is_empty() && source.is_stock(&self.target) {
            route.frontier_leaves.insert(self.target.clone());
        }
        if route.validate(&|m| source.is_stock(m)).is_err() {
            return;
        }
        if !self.seen.insert(route.identity()) {
            return;
        }
        if self.routes.len() == self.cap {
            self.overflow = true;
            return;
        }
        self.routes.push(route);
    }
}

/// Depth-first enumeration of all distinct complete routes for `target`.
/// With `strict`, hitting the cap is an error instead of a flag.
pub fn enumerate_routes(
    source: &mut dyn RouteSource,
    target: &MoleculeKey,
    cap: usize,
    strict: bool,
) -> Result<EnumeratedWorld, OracleError> {
    let mut e = Enumerator {
        source,
        target: target.clone(),
        cap,
        routes: Vec::new(),
        seen: HashSet::new(),
        overflow: false,
    };
    e.visit(&mut vec![target.clone()], &mut HashSet::new(), &mut Vec::new())?;
    if e.overflow && strict {
        return Err(OracleError::CapExceeded(cap));
    }
    Ok(EnumeratedWorld {
        target: target.clone(),
        routes: e.routes,
        overflow: e.overflow,
    })
}

impl EnumeratedWorld {
    fn complete(&self) -> Result<(), OracleError> {
        if self.overflow {
            Err(OracleError::Incomplete)
        } else {
            Ok(())
        }
    }

    /// Indices of routes whose masked cost is not strictly dominated.
    pub fn pareto_routes(&self, mask: &DimMask) -> Result<Vec<usize>, OracleError> {
        self.complete()?;
        let masked: Vec<Vec<f64>> = self.routes.iter().map(|r| mask.project(&r.cost)).collect();
        let front = self.front_indices(mask)?;
        Ok((0..self.routes.len())
            .filter(|&i| {
                front
                    .iter()
                    .any(|&f| crate::cost::approx_equal(&masked[f], &masked[i]))
            })
            .collect())
    }

    fn front_indices(&self, mask: &DimMask) -> Result<Vec<usize>, OracleError> {
        self.complete()?;
        let masked: Vec<Vec<f64>> = self.routes.iter().map(|r| mask.project(&r.cost)).collect();
        Ok(nd_filter(&masked))
    }

    /// The Pareto front as masked cost vectors, one per distinct cost.
    pub fn true_front(&self, mask: &DimMask) -> Result<Vec<Vec<f64>>, OracleError> {
        Ok(self
            .front_indices(mask)?
            .into_iter()
            .map(|i| mask.project(&self.routes[i].cost))
            .collect())
    }

    /// `min_Γ wᵀC(Γ)` over all routes; `+∞` when there are none.
    pub fn scalar_optimum(&self, weights: &[f64]) -> Result<f64, OracleError> {
        self.complete()?;
        Ok(self
            .routes
            .iter()
            .map(|r| r.cost.dot(weights))
            .fold(f64::INFINITY, f64::min))
    }

    /// Every molecule used by some Pareto-optimal route.
    pub fn pareto_molecules(&self, mask: &DimMask) -> Result<BTreeSet<MoleculeKey>, OracleError> {
        let mut out = BTreeSet::new();
        for i in self.pareto_routes(mask)? {
            for step in &self.routes[i].reactions {
                out.insert(step.record.product.clone());
                out.extend(step.record.reactants.iter().cloned());
            }
        }
        Ok(out)
    }

    pub fn dump(&self, mask: &DimMask) -> Result<OracleDump, OracleError> {
        Ok(OracleDump {
            target: self.target.clone(),
            route_costs: self.routes.iter().map(|r| r.cost.clone()).collect(),
            front_indices: self.front_indices(mask)?,
            mask: mask.clone(),
        })
    }
}

/// Serialized oracle output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDump {
    pub target: MoleculeKey,
    pub route_costs: Vec<CostVector>,
    pub front_indices: Vec<usize>,
    pub mask: DimMask,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// Hand-built world: product -> list of (reactants, cost).
    struct Table {
        reactions: BTreeMap<&'static str, Vec<(Vec<&'static str>, Vec<f64>)>>,
        stock: BTreeSet<&'static str>,
    }

    impl RouteSource for Table {
        fn dims(&self) -> usize {
            2
        }

        fn is_stock(&self, m: &MoleculeKey) -> bool {
            self.stock.contains(m.as_str())
        }

        fn reactions(&mut self, m: &MoleculeKey) -> Result<Vec<(ReactionRecord, CostVector)>, OracleError> {
            Ok(self
                .reactions
                .get(m.as_str())
                .into_iter()
                .flatten()
                .enumerate()
                .map(|(i, (rs, c))| {
                    let record = ReactionRecord {
                        product: m.clone(),
                        reactants: rs.iter().map(|k| MoleculeKey::new(*k)).collect(),
                        agents: vec![],
                        temperature: 25.0,
                        rule_id: format!("{m}#{i}"),
                        probability: 1.0,
                    }
                    .canonicalize();
                    (record, CostVector(c.clone()))
                })
                .collect())
        }
    }

    fn key(s: &str) -> MoleculeKey {
        MoleculeKey::new(s)
    }

    #[test]
    fn stock_target_has_one_empty_route() {
        let mut t = Table {
            reactions: BTreeMap::new(),
            stock: BTreeSet::from(["t"]),
        };
        let w = enumerate_routes(&mut t, &key("t"), 10, true).unwrap();
        assert_eq!(w.routes.len(), 1);
        assert!(w.routes[0].is_empty());
    }

    #[test]
    fn unary_chain_counts() {
        // each level: two unary reactions to the next level, depth 3
        let mut reactions = BTreeMap::new();
        reactions.insert("t", vec![(vec!["a1"], vec![1.0, 0.0]), (vec!["a2"], vec![0.0, 1.0])]);
        for a in ["a1", "a2"] {
            reactions.insert(a, vec![(vec!["b1"], vec![1.0, 0.0]), (vec!["b2"], vec![0.0, 1.0])]);
        }
        for b in ["b1", "b2"] {
            reactions.insert(b, vec![(vec!["s1"], vec![1.0, 0.0]), (vec!["s2"], vec![0.0, 1.0])]);
        }
        let mut t = Table {
            reactions,
            stock: BTreeSet::from(["s1", "s2"]),
        };
        let w = enumerate_routes(&mut t, &key("t"), 100, true).unwrap();
        assert_eq!(w.routes.len(), 8);
        for r in &w.routes {
            assert!(r.validate(&|m| t.is_stock(m)).is_ok());
            assert_eq!(r.cost.0.iter().sum::<f64>(), 3.0);
        }
        // all routes lie on the line x + y = 3: four distinct costs
        assert_eq!(w.true_front(&DimMask::all(2)).unwrap().len(), 4);
        assert_eq!(w.scalar_optimum(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn shared_intermediate_is_made_once() {
        // t <- a + b; a <- m; b <- m; m <- s (two options)
        let mut reactions = BTreeMap::new();
        reactions.insert("t", vec![(vec!["a", "b"], vec![1.0, 1.0])]);
        reactions.insert("a", vec![(vec!["m"], vec![1.0, 0.0])]);
        reactions.insert("b", vec![(vec!["m"], vec![0.0, 1.0])]);
        reactions.insert("m", vec![(vec!["s"], vec![5.0, 0.0]), (vec!["s"], vec![0.0, 5.0])]);
        let mut t = Table {
            reactions,
            stock: BTreeSet::from(["s"]),
        };
        let w = enumerate_routes(&mut t, &key("t"), 100, true).unwrap();
        // one consistent choice for m: two routes, m counted once
        assert_eq!(w.routes.len(), 2);
        let mut costs: Vec<Vec<f64>> = w.routes.iter().map(|r| r.cost.0.clone()).collect();
        costs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(costs, vec![vec![2.0, 7.0], vec![7.0, 2.0]]);
    }

    #[test]
    fn dead_ends_and_cycles_yield_no_routes() {
        let mut reactions = BTreeMap::new();
        reactions.insert("t", vec![(vec!["x"], vec![1.0, 1.0]), (vec!["a"], vec![1.0, 1.0])]);
        reactions.insert("a", vec![(vec!["t"], vec![1.0, 1.0])]);
        let mut t = Table {
            reactions,
            stock: BTreeSet::new(),
        };
        let w = enumerate_routes(&mut t, &key("t"), 100, true).unwrap();
        assert!(w.routes.is_empty());
        assert_eq!(w.scalar_optimum(&[0.5, 0.5]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn cap_sets_overflow_or_errors() {
        let mut reactions = BTreeMap::new();
        reactions.insert(
            "t",
            (0..5).map(|i| (vec!["s"], vec![i as f64, 0.0])).collect::<Vec<_>>(),
        );
        let mut t = Table {
            reactions,
            stock: BTreeSet::from(["s"]),
        };
        let w = enumerate_routes(&mut t, &key("t"), 3, false).unwrap();
        assert!(w.overflow);
        assert_eq!(w.routes.len(), 3);
        assert!(w.true_front(&DimMask::all(2)).is_err());
        assert!(matches!(
            enumerate_routes(&mut t, &key("t"), 3, true),
            Err(OracleError::CapExceeded(3))
        ));
        let w = enumerate_routes(&mut t, &key("t"), 5, true).unwrap();
        assert!(!w.overflow);
    }

    #[test]
    fn front_and_pareto_molecules() {
        let mut reactions = BTreeMap::new();
        reactions.insert(
            "t",
            vec![
                (vec!["a"], vec![0.1, 0.9]),
                (vec!["b"], vec![0.9, 0.1]),
                (vec!["c"], vec![0.9, 0.9]),
            ],
        );
        let mut t = Table {
            reactions,
            stock: BTreeSet::from(["a", "b", "c"]),
        };
        let w = enumerate_routes(&mut t, &key("t"), 100, true).unwrap();
        let mask = DimMask::all(2);
        assert_eq!(w.true_front(&mask).unwrap(), vec![vec![0.1, 0.9], vec![0.9, 0.1]]);
        let mols = w.pareto_molecules(&mask).unwrap();
        assert!(mols.contains(&key("a")) && mols.contains(&key("b")));
        assert!(!mols.contains(&key("c")));
        let dump = w.dump(&mask).unwrap();
        assert_eq!(dump.front_indices, vec![0, 1]);
    }
}
