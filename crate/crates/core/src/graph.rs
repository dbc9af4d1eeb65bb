//! The AND-OR search graph.
//!
//! Molecules are OR nodes (one child reaction must be solved) and reactions
//! are AND nodes (every reactant must be solved). Nodes live in arenas and
//! are addressed by insertion index, which doubles as the deterministic
//! tie-breaker everywhere in the search.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostVector;
use crate::expansion::ReactionRecord;

/// Opaque canonical molecule identifier. Equal keys are the same node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MoleculeKey(String);

impl MoleculeKey {
    pub fn new(key: impl Into<String>) -> Self {
        MoleculeKey(key.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MoleculeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MoleculeKey {
    fn from(s: &str) -> Self {
        MoleculeKey::new(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MolId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RxnId(pub u32);

impl MolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RxnId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Molecule(MolId),
    Reaction(RxnId),
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("molecule {0:?} does not exist")]
    MissingMolecule(MolId),
    #[error("molecule `{0}` is not in the frontier (expanded, stock or pruned)")]
    NotInFrontier(String),
    #[error("candidate reactants do not match the reaction record")]
    MismatchedCandidate,
}

#[derive(Clone, Debug)]
pub struct MoleculeNode {
    pub key: MoleculeKey,
    pub is_stock: bool,
    pub expanded: bool,
    pub pruned: bool,
    /// `V_m`; zero for stock molecules.
    pub heuristic: CostVector,
    pub parents: Vec<RxnId>,
    pub children: Vec<RxnId>,
    /// Reaction number per active weight.
    pub rn: Vec<f64>,
    /// Scalarized value `V_{t,j}` per active weight.
    pub value: Vec<f64>,
}

impl MoleculeNode {
    pub fn in_frontier(&self) -> bool {
        !self.is_stock && !self.expanded && !self.pruned
    }
}

#[derive(Clone, Debug)]
pub struct ReactionNode {
    pub product: MolId,
    pub reactants: Vec<MolId>,
    pub record: ReactionRecord,
    pub cost: CostVector,
    pub rn: Vec<f64>,
    pub value: Vec<f64>,
}

/// A molecule as seen by the graph before insertion.
#[derive(Clone, Debug)]
pub struct MoleculeInit {
    pub key: MoleculeKey,
    pub is_stock: bool,
    pub heuristic: CostVector,
}

/// A costed reaction ready for insertion; `reactants` follows
/// `record.reactants` one to one.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub record: ReactionRecord,
    pub cost: CostVector,
    pub reactants: Vec<MoleculeInit>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpansionOutcome {
    pub reactions: Vec<RxnId>,
    pub new_molecules: Vec<MolId>,
    pub discarded_cycles: usize,
}

#[derive(Clone, Debug)]
pub struct SearchGraph {
    molecules: Vec<MoleculeNode>,
    reactions: Vec<ReactionNode>,
    index: HashMap<MoleculeKey, MolId>,
    n_weights: usize,
    discarded_cycles: usize,
}

impl SearchGraph {
    /// A graph holding only the target.
    pub fn new(target: MoleculeInit, n_weights: usize) -> Self {
        let mut graph = SearchGraph {
            molecules: Vec::new(),
            reactions: Vec::new(),
            index: HashMap::new(),
            n_weights,
            discarded_cycles: 0,
        };
        graph.insert_molecule(target);
        graph
    }

    fn insert_molecule(&mut self, init: MoleculeInit) -> MolId {
        let id = MolId(self.molecules.len() as u32);
        let heuristic = if init.is_stock {
            CostVector::zeros(init.heuristic.dims())
        } else {
            init.heuristic
        };
        self.molecules.push(MoleculeNode {
            key: init.key.clone(),
            is_stock: init.is_stock,
            expanded: false,
            pruned: false,
            heuristic,
            parents: Vec::new(),
            children: Vec::new(),
            rn: vec![0.0; self.n_weights],
            value: vec![0.0; self.n_weights],
        });
        self.index.insert(init.key, id);
        id
    }

    pub fn root(&self) -> MolId {
        MolId(0)
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    pub fn molecules(&self) -> &[MoleculeNode] {
        &self.molecules
    }

    pub fn reactions(&self) -> &[ReactionNode] {
        &self.reactions
    }

    pub fn molecule(&self, id: MolId) -> &MoleculeNode {
        &self.molecules[id.index()]
    }

    pub fn molecule_mut(&mut self, id: MolId) -> &mut MoleculeNode {
        &mut self.molecules[id.index()]
    }

    pub fn reaction(&self, id: RxnId) -> &ReactionNode {
        &self.reactions[id.index()]
    }

    pub fn reaction_mut(&mut self, id: RxnId) -> &mut ReactionNode {
        &mut self.reactions[id.index()]
    }

    pub fn molecule_id(&self, key: &MoleculeKey) -> Option<MolId> {
        self.index.get(key).copied()
    }

    /// Candidates dropped so far because they would have closed a cycle.
    pub fn discarded_cycles(&self) -> usize {
        self.discarded_cycles
    }

    /// Resizes the per-weight state arrays, zeroing them.
    pub fn reset_weights(&mut self, n_weights: usize) {
        self.n_weights = n_weights;
        for m in &mut self.molecules {
            m.rn = vec![0.0; n_weights];
            m.value = vec![0.0; n_weights];
        }
        for r in &mut self.reactions {
            r.rn = vec![0.0; n_weights];
            r.value = vec![0.0; n_weights];
        }
    }

    /// `m` itself plus every molecule it can be reached from.
    fn ancestors(&self, m: MolId) -> HashSet<MolId> {
        let mut seen = HashSet::from([m]);
        let mut queue = VecDeque::from([m]);
        while let Some(cur) = queue.pop_front() {
            for r in &self.molecule(cur).parents {
                let p = self.reaction(*r).product;
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Adds the candidate reactions under `parent` and marks it expanded.
    ///
    /// Reactants are merged with existing molecules by key. A candidate is
    /// discarded when any reactant is `parent` or one of its ancestors.
    pub fn add_expansion(
        &mut self,
        parent: MolId,
        candidates: Vec<Candidate>,
    ) -> Result<ExpansionOutcome, GraphError> {
        let node = self
            .molecules
            .get(parent.index())
            .ok_or(GraphError::MissingMolecule(parent))?;
        if !node.in_frontier() {
            return Err(GraphError::NotInFrontier(node.key.to_string()));
        }
        let ancestors = self.ancestors(parent);
        let mut outcome = ExpansionOutcome::default();
        for candidate in candidates {
            if candidate.reactants.len() != candidate.record.reactants.len()
                || candidate
                    .reactants
                    .iter()
                    .zip(&candidate.record.reactants)
                    .any(|(init, key)| &init.key != key)
            {
                return Err(GraphError::MismatchedCandidate);
            }
            let closes_cycle = candidate.reactants.iter().any(|init| {
                self.molecule_id(&init.key)
                    .is_some_and(|id| ancestors.contains(&id))
            });
            if closes_cycle {
                outcome.discarded_cycles += 1;
                continue;
            }
            let rxn = RxnId(self.reactions.len() as u32);
            let mut reactants = Vec::with_capacity(candidate.reactants.len());
            for init in candidate.reactants {
                let id = match self.molecule_id(&init.key) {
                    Some(id) => id,
                    None => {
                        let id = self.insert_molecule(init);
                        outcome.new_molecules.push(id);
                        id
                    }
                };
                self.molecules[id.index()].parents.push(rxn);
                reactants.push(id);
            }
            self.reactions.push(ReactionNode {
                product: parent,
                reactants,
                record: candidate.record,
                cost: candidate.cost,
                rn: vec![0.0; self.n_weights],
                value: vec![0.0; self.n_weights],
            });
            self.molecules[parent.index()].children.push(rxn);
            outcome.reactions.push(rxn);
        }
        self.molecules[parent.index()].expanded = true;
        self.discarded_cycles += outcome.discarded_cycles;
        Ok(outcome)
    }

    /// Unexpanded, non-stock, non-pruned molecules in insertion order.
    pub fn frontier(&self) -> Vec<MolId> {
        self.molecules
            .iter()
            .enumerate()
            .filter(|(_, m)| m.in_frontier())
            .map(|(i, _)| MolId(i as u32))
            .collect()
    }

    /// Parents before children. `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeRef>> {
        let n_mol = self.molecules.len();
        let mut indegree: Vec<usize> = self
            .molecules
            .iter()
            .map(|m| m.parents.len())
            .chain(self.reactions.iter().map(|_| 1))
            .collect();
        let mut queue: VecDeque<NodeRef> = self
            .molecules
            .iter()
            .enumerate()
            .filter(|(_, m)| m.parents.is_empty())
            .map(|(i, _)| NodeRef::Molecule(MolId(i as u32)))
            .collect();
        let mut order = Vec::with_capacity(indegree.len());
        while let Some(node) = queue.pop_front() {
            order.push(node);
            match node {
                NodeRef::Molecule(m) => {
                    for r in &self.molecule(m).children {
                        let slot = &mut indegree[n_mol + r.index()];
                        *slot -= 1;
                        if *slot == 0 {
                            queue.push_back(NodeRef::Reaction(*r));
                        }
                    }
                }
                NodeRef::Reaction(r) => {
                    for c in &self.reaction(r).reactants {
                        let slot = &mut indegree[c.index()];
                        *slot -= 1;
                        if *slot == 0 {
                            queue.push_back(NodeRef::Molecule(*c));
                        }
                    }
                }
            }
        }
        (order.len() == indegree.len()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    fn order(&self) -> Vec<NodeRef> {
        self.topological_order()
            .expect("search graph is acyclic by construction")
    }

    /// Whether each molecule has a complete route to stock inside the graph.
    pub fn solved_molecules(&self) -> Vec<bool> {
        let mut mol = vec![false; self.molecules.len()];
        let mut rxn = vec![false; self.reactions.len()];
        for node in self.order().into_iter().rev() {
            match node {
                NodeRef::Reaction(r) => {
                    rxn[r.index()] = self.reaction(r).reactants.iter().all(|c| mol[c.index()]);
                }
                NodeRef::Molecule(m) => {
                    let node = self.molecule(m);
                    mol[m.index()] =
                        node.is_stock || node.children.iter().any(|r| rxn[r.index()]);
                }
            }
        }
        mol
    }

    /// The cheapest solved route under weights `w`, or `None` if the target
    /// is not solved. At each molecule the solved child reaction with the
    /// smallest scalarized subtree cost is taken, ties to the earliest.
    pub fn best_route(&self, weights: &[f64]) -> Option<Route> {
        let mut best = vec![f64::INFINITY; self.molecules.len()];
        let mut choice: Vec<Option<RxnId>> = vec![None; self.molecules.len()];
        for node in self.order().into_iter().rev() {
            let NodeRef::Molecule(m) = node else { continue };
            let mol = self.molecule(m);
            if mol.is_stock {
                best[m.index()] = 0.0;
                continue;
            }
            for r in &mol.children {
                let rxn = self.reaction(*r);
                let total = rxn.cost.dot(weights)
                    + rxn.reactants.iter().map(|c| best[c.index()]).sum::<f64>();
                if total < best[m.index()] {
                    best[m.index()] = total;
                    choice[m.index()] = Some(*r);
                }
            }
        }
        if !best[self.root().index()].is_finite() {
            return None;
        }
        Some(self.route_from_choice(&|m| choice[m.index()]))
    }

    /// Builds the route picking `choose(m)` at every non-stock molecule
    /// reached from the target. Shared molecules are produced once.
    pub fn route_from_choice(&self, choose: &dyn Fn(MolId) -> Option<RxnId>) -> Route {
        let dims = self.molecule(self.root()).heuristic.dims();
        let mut route = Route::empty(self.molecule(self.root()).key.clone(), dims);
        let mut visited = HashSet::new();
        let mut stack = vec![self.root()];
        while let Some(m) = stack.pop() {
            if !visited.insert(m) {
                continue;
            }
            let mol = self.molecule(m);
            if mol.is_stock {
                route.frontier_leaves.insert(mol.key.clone());
                continue;
            }
            let r = choose(m).expect("every non-stock molecule on a solved route has a choice");
            let rxn = self.reaction(r);
            route.push(rxn.record.clone(), rxn.cost.clone());
            for c in rxn.reactants.iter().rev() {
                stack.push(*c);
            }
        }
        route
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            molecules: self
                .molecules
                .iter()
                .map(|m| MoleculeDump {
                    key: m.key.clone(),
                    is_stock: m.is_stock,
                    expanded: m.expanded,
                    pruned: m.pruned,
                    heuristic: m.heuristic.clone(),
                })
                .collect(),
            reactions: self
                .reactions
                .iter()
                .map(|r| ReactionDump {
                    product: self.molecule(r.product).key.clone(),
                    reactants: r.reactants.iter().map(|c| self.molecule(*c).key.clone()).collect(),
                    cost: r.cost.clone(),
                    rule_id: r.record.rule_id.clone(),
                })
                .collect(),
        }
    }
}

/// Debug snapshot of a search graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDump {
    pub molecules: Vec<MoleculeDump>,
    pub reactions: Vec<ReactionDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoleculeDump {
    pub key: MoleculeKey,
    pub is_stock: bool,
    pub expanded: bool,
    pub pruned: bool,
    pub heuristic: CostVector,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReactionDump {
    pub product: MoleculeKey,
    pub reactants: Vec<MoleculeKey>,
    pub cost: CostVector,
    pub rule_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteStep {
    #[serde(flatten)]
    pub record: ReactionRecord,
    pub cost: CostVector,
}

/// A synthesis route: reactions from the target down to stock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub target: MoleculeKey,
    /// Pre-order from the target.
    pub reactions: Vec<RouteStep>,
    /// Component-wise sum of the reaction costs.
    pub cost: CostVector,
    /// Stock molecules consumed by the route.
    pub frontier_leaves: BTreeSet<MoleculeKey>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("molecule `{0}` has more than one producing reaction")]
    MultipleProducers(MoleculeKey),
    #[error("molecule `{0}` is consumed but neither stock nor produced")]
    Unresolved(MoleculeKey),
    #[error("reaction producing `{0}` is not connected to the target")]
    Dangling(MoleculeKey),
    #[error("leaf set does not match the stock molecules consumed")]
    LeafMismatch,
    #[error("route cost differs from the sum of its reaction costs")]
    CostMismatch,
    #[error("route contains a cycle")]
    Cycle,
}

impl Route {
    pub fn empty(target: MoleculeKey, dims: usize) -> Self {
        Route {
            target,
            reactions: Vec::new(),
            cost: CostVector::zeros(dims),
            frontier_leaves: BTreeSet::new(),
        }
    }

    pub fn push(&mut self, record: ReactionRecord, cost: CostVector) {
        self.cost.add_assign(&cost);
        self.reactions.push(RouteStep { record, cost });
    }

    pub fn len(&self) -> usize {
        self.reactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reactions.is_empty()
    }

    /// Order-free identity of the reaction set, conditions included.
    pub fn identity(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .reactions
            .iter()
            .map(|s| {
                let r = &s.record;
                format!(
                    "{}<{}|{}|{}|{}",
                    r.product,
                    r.reactants.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","),
                    r.rule_id,
                    r.agents.join(","),
                    r.temperature.to_bits()
                )
            })
            .collect();
        ids.sort();
        ids
    }

    /// Reaction signatures (product, sorted reactants, rule) for similarity.
    pub fn signatures(&self) -> BTreeSet<String> {
        self.reactions
            .iter()
            .map(|s| {
                let mut reactants: Vec<&str> = s.record.reactants.iter().map(|m| m.as_str()).collect();
                reactants.sort();
                format!("{}<{}|{}", s.record.product, reactants.join(","), s.record.rule_id)
            })
            .collect()
    }

    /// Checks every structural route invariant.
    pub fn validate(&self, in_stock: &dyn Fn(&MoleculeKey) -> bool) -> Result<(), RouteError> {
        let mut producers: HashMap<&MoleculeKey, usize> = HashMap::new();
        for (i, step) in self.reactions.iter().enumerate() {
            if producers.insert(&step.record.product, i).is_some() {
                return Err(RouteError::MultipleProducers(step.record.product.clone()));
            }
        }
        // walk from the target; every reached molecule must resolve
        let mut leaves = BTreeSet::new();
        let mut reached: HashSet<usize> = HashSet::new();
        let mut on_path: HashSet<&MoleculeKey> = HashSet::new();
        fn visit<'a>(
            route: &'a Route,
            m: &'a MoleculeKey,
            producers: &HashMap<&'a MoleculeKey, usize>,
            in_stock: &dyn Fn(&MoleculeKey) -> bool,
            leaves: &mut BTreeSet<MoleculeKey>,
            reached: &mut HashSet<usize>,
            on_path: &mut HashSet<&'a MoleculeKey>,
        ) -> Result<(), RouteError> {
            if in_stock(m) {
                leaves.insert(m.clone());
                return Ok(());
            }
            let Some(&i) = producers.get(m) else {
                return Err(RouteError::Unresolved(m.clone()));
            };
            if !on_path.insert(m) {
                return Err(RouteError::Cycle);
            }
            if reached.insert(i) {
                for c in &route.reactions[i].record.reactants {
                    visit(route, c, producers, in_stock, leaves, reached, on_path)?;
                }
            }
            on_path.remove(m);
            Ok(())
        }
        visit(
            self,
            &self.target,
            &producers,
            in_stock,
            &mut leaves,
            &mut reached,
            &mut on_path,
        )?;
        if let Some(i) = (0..self.reactions.len()).find(|i| !reached.contains(i)) {
            return Err(RouteError::Dangling(self.reactions[i].record.product.clone()));
        }
        if leaves != self.frontier_leaves {
            return Err(RouteError::LeafMismatch);
        }
        let mut sum = CostVector::zeros(self.cost.dims());
        for s in &self.reactions {
            sum.add_assign(&s.cost);
        }
        if sum.0.iter().zip(&self.cost.0).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(RouteError::CostMismatch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn init(key: &str, stock: bool) -> MoleculeInit {
        MoleculeInit {
            key: MoleculeKey::new(key),
            is_stock: stock,
            heuristic: CostVector::zeros(2),
        }
    }

    pub(crate) fn candidate(product: &str, reactants: &[(&str, bool)], cost: [f64; 2]) -> Candidate {
        let mut keys: Vec<MoleculeKey> = reactants.iter().map(|(k, _)| MoleculeKey::new(*k)).collect();
        keys.sort();
        let mut inits: Vec<MoleculeInit> = reactants.iter().map(|(k, s)| init(k, *s)).collect();
        inits.sort_by(|a, b| a.key.cmp(&b.key));
        Candidate {
            record: ReactionRecord {
                product: MoleculeKey::new(product),
                reactants: keys,
                agents: vec![],
                temperature: 20.0,
                rule_id: format!("{product}-{}", reactants.len()),
                probability: 1.0,
            },
            cost: CostVector(cost.to_vec()),
            reactants: inits,
        }
    }

    fn stock_set(graph: &SearchGraph) -> impl Fn(&MoleculeKey) -> bool + '_ {
        move |k| graph.molecule_id(k).is_some_and(|id| graph.molecule(id).is_stock)
    }

    #[test]
    fn fresh_insertion() {
        let mut g = SearchGraph::new(init("P", false), 1);
        let out = g
            .add_expansion(g.root(), vec![candidate("P", &[("A", false), ("B", false)], [0.1, 0.1])])
            .unwrap();
        assert_eq!(out.reactions.len(), 1);
        assert_eq!(out.new_molecules.len(), 2);
        assert_eq!(g.molecules().len(), 3);
        assert!(g.molecule(g.root()).expanded);
    }

    #[test]
    fn self_loop_is_discarded() {
        let mut g = SearchGraph::new(init("P", false), 1);
        let out = g
            .add_expansion(g.root(), vec![candidate("P", &[("P", false), ("A", true)], [0.1, 0.1])])
            .unwrap();
        assert_eq!(out.discarded_cycles, 1);
        assert!(out.reactions.is_empty());
        assert_eq!(g.discarded_cycles(), 1);
    }

    #[test]
    fn ancestor_reactant_is_discarded() {
        let mut g = SearchGraph::new(init("P", false), 1);
        g.add_expansion(g.root(), vec![candidate("P", &[("A", false)], [0.1, 0.1])]).unwrap();
        let a = g.molecule_id(&"A".into()).unwrap();
        let out = g
            .add_expansion(a, vec![candidate("A", &[("P", false)], [0.1, 0.1]), candidate("A", &[("C", true)], [0.1, 0.1])])
            .unwrap();
        assert_eq!(out.discarded_cycles, 1);
        assert_eq!(out.reactions.len(), 1);
        assert!(g.is_acyclic());
    }

    #[test]
    fn shared_reactant_is_merged() {
        let mut g = SearchGraph::new(init("P", false), 1);
        g.add_expansion(
            g.root(),
            vec![
                candidate("P", &[("A", false), ("B", true)], [0.1, 0.1]),
                candidate("P", &[("A", false), ("C", true)], [0.2, 0.1]),
            ],
        )
        .unwrap();
        // P, A, B, C
        assert_eq!(g.molecules().len(), 4);
        assert_eq!(g.reactions().len(), 2);
        let a = g.molecule_id(&"A".into()).unwrap();
        assert_eq!(g.molecule(a).parents.len(), 2);
    }

    #[test]
    fn expansion_preconditions() {
        let mut g = SearchGraph::new(init("P", false), 1);
        assert_eq!(
            g.add_expansion(MolId(7), vec![]),
            Err(GraphError::MissingMolecule(MolId(7)))
        );
        g.add_expansion(g.root(), vec![]).unwrap();
        assert!(matches!(g.add_expansion(g.root(), vec![]), Err(GraphError::NotInFrontier(_))));
    }

    #[test]
    fn frontier_tracking() {
        let mut g = SearchGraph::new(init("T", false), 1);
        assert_eq!(g.frontier(), vec![g.root()]);
        g.add_expansion(g.root(), vec![candidate("T", &[("A", true), ("B", false)], [0.1, 0.1])])
            .unwrap();
        let b = g.molecule_id(&"B".into()).unwrap();
        assert_eq!(g.frontier(), vec![b]);
        g.molecule_mut(b).pruned = true;
        assert!(g.frontier().is_empty());
    }

    #[test]
    fn stock_target_yields_empty_route() {
        let g = SearchGraph::new(init("T", true), 1);
        let route = g.best_route(&[1.0, 0.0]).unwrap();
        assert!(route.is_empty());
        assert_eq!(route.cost, CostVector::zeros(2));
        route.validate(&stock_set(&g)).unwrap();
    }

    #[test]
    fn cheaper_branch_is_extracted() {
        let mut g = SearchGraph::new(init("T", false), 1);
        g.add_expansion(
            g.root(),
            vec![
                candidate("T", &[("A", true)], [0.5, 0.5]),
                candidate("T", &[("B", true)], [0.3, 0.3]),
            ],
        )
        .unwrap();
        let route = g.best_route(&[0.5, 0.5]).unwrap();
        assert_eq!(route.len(), 1);
        assert_eq!(route.cost.0, vec![0.3, 0.3]);
        route.validate(&stock_set(&g)).unwrap();
    }

    #[test]
    fn ties_go_to_the_earliest_reaction() {
        let mut g = SearchGraph::new(init("T", false), 1);
        g.add_expansion(
            g.root(),
            vec![
                candidate("T", &[("A", true)], [0.4, 0.2]),
                candidate("T", &[("B", true)], [0.2, 0.4]),
            ],
        )
        .unwrap();
        let route = g.best_route(&[0.5, 0.5]).unwrap();
        assert_eq!(route.frontier_leaves, BTreeSet::from([MoleculeKey::new("A")]));
    }

    #[test]
    fn unsolved_graph_has_no_route() {
        let mut g = SearchGraph::new(init("T", false), 1);
        assert!(g.best_route(&[1.0, 0.0]).is_none());
        g.add_expansion(g.root(), vec![candidate("T", &[("A", false)], [0.1, 0.1])]).unwrap();
        assert!(g.best_route(&[1.0, 0.0]).is_none());
    }

    #[test]
    fn solved_route_skips_unsolved_cheaper_branch() {
        let mut g = SearchGraph::new(init("T", false), 1);
        g.add_expansion(
            g.root(),
            vec![
                candidate("T", &[("A", false)], [0.0, 0.0]),
                candidate("T", &[("B", true)], [0.9, 0.9]),
            ],
        )
        .unwrap();
        let route = g.best_route(&[0.5, 0.5]).unwrap();
        assert_eq!(route.cost.0, vec![0.9, 0.9]);
    }

    #[test]
    fn validator_catches_broken_routes() {
        let stock = |k: &MoleculeKey| k.as_str().starts_with('s');
        let step = |p: &str, rs: &[&str], c: f64| RouteStep {
            record: ReactionRecord {
                product: p.into(),
                reactants: rs.iter().map(|r| MoleculeKey::new(*r)).collect(),
                agents: vec![],
                temperature: 20.0,
                rule_id: "r".into(),
                probability: 1.0,
            },
            cost: CostVector(vec![c]),
        };
        let mut ok = Route::empty("T".into(), 1);
        ok.push(step("T", &["A", "s1"], 0.1).record, CostVector(vec![0.1]));
        ok.push(step("A", &["s2"], 0.2).record, CostVector(vec![0.2]));
        ok.frontier_leaves = ["s1", "s2"].iter().map(|s| MoleculeKey::new(*s)).collect();
        ok.validate(&stock).unwrap();

        let mut unresolved = ok.clone();
        unresolved.reactions.pop();
        unresolved.cost = CostVector(vec![0.1]);
        assert_eq!(unresolved.validate(&stock), Err(RouteError::Unresolved("A".into())));

        let mut double = ok.clone();
        double.push(step("A", &["s3"], 0.0).record, CostVector(vec![0.0]));
        assert!(matches!(double.validate(&stock), Err(RouteError::MultipleProducers(_))));

        let mut bad_cost = ok.clone();
        bad_cost.cost = CostVector(vec![0.5]);
        assert_eq!(bad_cost.validate(&stock), Err(RouteError::CostMismatch));

        let mut dangling = ok.clone();
        dangling.push(step("Z", &["s1"], 0.0).record, CostVector(vec![0.0]));
        assert!(matches!(dangling.validate(&stock), Err(RouteError::Dangling(_))));

        let mut leaves = ok.clone();
        leaves.frontier_leaves.remove(&MoleculeKey::new("s1"));
        assert_eq!(leaves.validate(&stock), Err(RouteError::LeafMismatch));
    }

    #[test]
    fn dump_lists_nodes() {
        let mut g = SearchGraph::new(init("T", false), 1);
        g.add_expansion(g.root(), vec![candidate("T", &[("A", true)], [0.1, 0.2])]).unwrap();
        let json = serde_json::to_value(g.dump()).unwrap();
        assert_eq!(json["molecules"].as_array().unwrap().len(), 2);
        assert_eq!(json["reactions"][0]["product"], "T");
        assert_eq!(json["reactions"][0]["reactants"][0], "A");
        assert_eq!(json["molecules"][1]["is_stock"], true);
    }
}
