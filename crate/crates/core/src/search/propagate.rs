use crate::graph::{NodeRef, SearchGraph};
use crate::weights::WeightVector;

/// Per-weight reaction numbers, bottom-up. Stock molecules are 0,
/// unexpanded molecules `wᵀV_m`, expanded molecules the minimum over child
/// reactions (`+∞` without children), reactions `wᵀc(R)` plus the sum over
/// reactants.
pub fn propagate_up(graph: &mut SearchGraph, weights: &[WeightVector], order: &[NodeRef]) {
    for node in order.iter().rev() {
        match *node {
            NodeRef::Reaction(r) => {
                let rxn = graph.reaction(r);
                let rn: Vec<f64> = weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| {
                        rxn.cost.dot(w.as_slice())
                            + rxn
                                .reactants
                                .iter()
                                .map(|c| graph.molecule(*c).rn[j])
                                .sum::<f64>()
                    })
                    .collect();
                graph.reaction_mut(r).rn = rn;
            }
            NodeRef::Molecule(m) => {
                let mol = graph.molecule(m);
                let rn: Vec<f64> = weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| {
                        if mol.is_stock {
                            0.0
                        } else if !mol.expanded {
                            mol.heuristic.dot(w.as_slice())
                        } else {
                            mol.children
                                .iter()
                                .map(|r| graph.reaction(*r).rn[j])
                                .fold(f64::INFINITY, f64::min)
                        }
                    })
                    .collect();
                graph.molecule_mut(m).rn = rn;
            }
        }
    }
}

/// Per-weight values `V_t`, top-down: the target takes its own reaction
/// number, a reaction `rn(R) − rn(pr(R)) + V(pr(R))`, a molecule the
/// minimum over its parent reactions.
pub fn propagate_down(graph: &mut SearchGraph, order: &[NodeRef]) {
    let n = graph.n_weights();
    let root = graph.root();
    for node in order {
        match *node {
            NodeRef::Molecule(m) => {
                let value: Vec<f64> = if m == root {
                    graph.molecule(m).rn.clone()
                } else {
                    let mol = graph.molecule(m);
                    (0..n)
                        .map(|j| {
                            mol.parents
                                .iter()
                                .map(|r| graph.reaction(*r).value[j])
                                .fold(f64::INFINITY, f64::min)
                        })
                        .collect()
                };
                graph.molecule_mut(m).value = value;
            }
            NodeRef::Reaction(r) => {
                let rxn = graph.reaction(r);
                let parent = graph.molecule(rxn.product);
                let value: Vec<f64> = (0..n)
                    .map(|j| {
                        let (own, pr, above) = (rxn.rn[j], parent.rn[j], parent.value[j]);
                        if own.is_infinite() || pr.is_infinite() || above.is_infinite() {
                            f64::INFINITY
                        } else {
                            own - pr + above
                        }
                    })
                    .collect();
                graph.reaction_mut(r).value = value;
            }
        }
    }
}

/// Rebuilds every per-weight array for `weights`.
pub fn propagate(graph: &mut SearchGraph, weights: &[WeightVector]) {
    if graph.n_weights() != weights.len() {
        graph.reset_weights(weights.len());
    }
    let order = graph
        .topological_order()
        .expect("search graph is acyclic by construction");
    propagate_up(graph, weights, &order);
    propagate_down(graph, &order);
}
