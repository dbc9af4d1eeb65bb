//! Vector-valued lower bounds and bound-dominance pruning.
//!
//! `pn` is computed bottom-up with component-wise sums and minima, then
//! pushed down from the target to give `V_bound`, a component-wise lower
//! bound on the cost of any complete route through a node. A frontier
//! molecule whose bound is strictly dominated by an archived route cannot
//! lie on a Pareto-optimal route and is pruned.

use serde::{Deserialize, Serialize};

use crate::cost::{dominates, CostVector, DimMask};
use crate::graph::{MolId, NodeRef, SearchGraph};

/// `pn` and `V_bound` for every molecule and reaction, indexed like the
/// graph arenas.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub mol_pn: Vec<CostVector>,
    pub rxn_pn: Vec<CostVector>,
    pub mol_vbound: Vec<CostVector>,
    pub rxn_vbound: Vec<CostVector>,
}

fn dims(graph: &SearchGraph) -> usize {
    graph.molecule(graph.root()).heuristic.dims()
}

/// Pruning numbers. Unexpanded molecules take their heuristic, stock
/// molecules zero, and expanded molecules without children `+∞`.
pub fn compute_pn(graph: &SearchGraph) -> (Vec<CostVector>, Vec<CostVector>) {
    let d = dims(graph);
    let mut mol = vec![CostVector::zeros(d); graph.molecules().len()];
    let mut rxn = vec![CostVector::zeros(d); graph.reactions().len()];
    let order = graph
        .topological_order()
        .expect("search graph is acyclic by construction");
    for node in order.into_iter().rev() {
        match node {
            NodeRef::Reaction(r) => {
                let reaction = graph.reaction(r);
                let mut pn = reaction.cost.clone();
                for c in &reaction.reactants {
                    pn.add_assign(&mol[c.index()]);
                }
                rxn[r.index()] = pn;
            }
            NodeRef::Molecule(m) => {
                let node = graph.molecule(m);
                mol[m.index()] = if node.is_stock {
                    CostVector::zeros(d)
                } else if !node.expanded {
                    node.heuristic.clone()
                } else {
                    let mut pn = CostVector::infinite(d);
                    for r in &node.children {
                        pn.min_assign(&rxn[r.index()]);
                    }
                    pn
                };
            }
        }
    }
    (mol, rxn)
}

/// `V_bound(R) = pn(R) − pn(pr(R)) + V_bound(pr(R))`, minimised over
/// parents at molecules. A component is `+∞` whenever the parent's `pn`
/// is, since no route passes through that parent.
pub fn compute_vbound(
    graph: &SearchGraph,
    mol_pn: &[CostVector],
    rxn_pn: &[CostVector],
) -> (Vec<CostVector>, Vec<CostVector>) {
    let d = dims(graph);
    let mut mol = vec![CostVector::infinite(d); graph.molecules().len()];
    let mut rxn = vec![CostVector::infinite(d); graph.reactions().len()];
    let order = graph
        .topological_order()
        .expect("search graph is acyclic by construction");
    for node in order {
        match node {
            NodeRef::Molecule(m) => {
                if m == graph.root() {
                    mol[m.index()] = mol_pn[m.index()].clone();
                    continue;
                }
                let mut v = CostVector::infinite(d);
                for r in &graph.molecule(m).parents {
                    v.min_assign(&rxn[r.index()]);
                }
                mol[m.index()] = v;
            }
            NodeRef::Reaction(r) => {
                let p = graph.reaction(r).product.index();
                let values = (0..d)
                    .map(|i| {
                        let (own, parent, above) =
                            (rxn_pn[r.index()].0[i], mol_pn[p].0[i], mol[p].0[i]);
                        if parent.is_infinite() || above.is_infinite() || own.is_infinite() {
                            f64::INFINITY
                        } else {
                            own - parent + above
                        }
                    })
                    .collect();
                rxn[r.index()] = CostVector(values);
            }
        }
    }
    (mol, rxn)
}

pub fn compute_bounds(graph: &SearchGraph) -> Bounds {
    let (mol_pn, rxn_pn) = compute_pn(graph);
    let (mol_vbound, rxn_vbound) = compute_vbound(graph, &mol_pn, &rxn_pn);
    Bounds {
        mol_pn,
        rxn_pn,
        mol_vbound,
        rxn_vbound,
    }
}

/// True when some archived masked cost strictly dominates `V_bound + ε`
/// on the masked dimensions.
pub fn bound_dominated(vbound: &CostVector, archive: &[Vec<f64>], mask: &DimMask, epsilon: f64) -> bool {
    let slack: Vec<f64> = mask.project(vbound).into_iter().map(|v| v + epsilon).collect();
    archive.iter().any(|a| dominates(a, &slack))
}

/// Outcome of one pruning pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneReport {
    pub newly_pruned: usize,
    /// Frontier molecules still open after the pass.
    pub open: usize,
    /// Every frontier molecule is pruned.
    pub certified: bool,
}

/// Marks bound-dominated frontier molecules as pruned. Molecules with an
/// infinite bound lie on no complete route and are pruned regardless of
/// the archive.
pub fn prune_frontier(
    graph: &mut SearchGraph,
    bounds: &Bounds,
    archive: &[Vec<f64>],
    mask: &DimMask,
    epsilon: f64,
) -> PruneReport {
    let mut report = PruneReport::default();
    let frontier: Vec<MolId> = graph.frontier();
    for m in frontier {
        let vb = &bounds.mol_vbound[m.index()];
        let dead = mask.project(vb).iter().any(|v| v.is_infinite());
        if dead || bound_dominated(vb, archive, mask, epsilon) {
            graph.molecule_mut(m).pruned = true;
            report.newly_pruned += 1;
        } else {
            report.open += 1;
        }
    }
    report.certified = report.open == 0;
    report
}
