//! Pareto completion over the solved part of the graph.
//!
//! Linear scalarization only ever extracts supported points of the front.
//! This pass keeps, at every molecule, the non-dominated set of costs of
//! its complete sub-routes and combines them bottom-up, so every
//! non-dominated route already present in the graph can be archived.

use std::collections::HashMap;

use crate::cost::{approx_equal, dominates, CostVector, DimMask};
use crate::graph::{MolId, NodeRef, Route, RxnId, SearchGraph};

#[derive(Clone, Debug)]
struct Label {
    cost: CostVector,
    masked: Vec<f64>,
    /// Producing reaction and the label chosen for each of its reactants.
    choice: Option<(RxnId, Vec<usize>)>,
}

fn insert_nd(set: &mut Vec<Label>, label: Label) {
    if set
        .iter()
        .any(|l| dominates(&l.masked, &label.masked) || approx_equal(&l.masked, &label.masked))
    {
        return;
    }
    set.retain(|l| !dominates(&label.masked, &l.masked));
    set.push(label);
}

fn labels(graph: &SearchGraph, mask: &DimMask) -> Vec<Vec<Label>> {
    let dims = graph.molecule(graph.root()).heuristic.dims();
    let mut out: Vec<Vec<Label>> = vec![Vec::new(); graph.molecules().len()];
    let order = graph
        .topological_order()
        .expect("search graph is acyclic by construction");
    for node in order.into_iter().rev() {
        let NodeRef::Molecule(m) = node else { continue };
        let mol = graph.molecule(m);
        if mol.is_stock {
            let zero = CostVector::zeros(dims);
            out[m.index()] = vec![Label {
                masked: mask.project(&zero),
                cost: zero,
                choice: None,
            }];
            continue;
        }
        let mut set: Vec<Label> = Vec::new();
        for &r in &mol.children {
            let rxn = graph.reaction(r);
            // partial sums over the reactants folded so far
            let mut partial: Vec<(CostVector, Vec<usize>)> = vec![(rxn.cost.clone(), Vec::new())];
            for c in &rxn.reactants {
                let child = &out[c.index()];
                let mut next: Vec<Label> = Vec::new();
                for (cost, parts) in &partial {
                    for (i, l) in child.iter().enumerate() {
                        let mut sum = cost.clone();
                        sum.add_assign(&l.cost);
                        let mut p = parts.clone();
                        p.push(i);
                        insert_nd(
                            &mut next,
                            Label {
                                masked: mask.project(&sum),
                                cost: sum,
                                choice: Some((r, p)),
                            },
                        );
                    }
                }
                partial = next
                    .into_iter()
                    .map(|l| (l.cost, l.choice.expect("set above").1))
                    .collect();
                if partial.is_empty() {
                    break;
                }
            }
            for (cost, parts) in partial {
                insert_nd(
                    &mut set,
                    Label {
                        masked: mask.project(&cost),
                        cost,
                        choice: Some((r, parts)),
                    },
                );
            }
        }
        out[m.index()] = set;
    }
    out
}

fn build(
    graph: &SearchGraph,
    labels: &[Vec<Label>],
    m: MolId,
    label: usize,
    route: &mut Route,
    chosen: &mut HashMap<MolId, (RxnId, usize)>,
) -> bool {
    let mol = graph.molecule(m);
    if mol.is_stock {
        route.frontier_leaves.insert(mol.key.clone());
        return true;
    }
    let Some((r, parts)) = &labels[m.index()][label].choice else {
        return false;
    };
    if let Some(prev) = chosen.get(&m) {
        // a molecule needed twice must be made the same way both times
        return *prev == (*r, label);
    }
    chosen.insert(m, (*r, label));
    let rxn = graph.reaction(*r);
    route.push(rxn.record.clone(), rxn.cost.clone());
    rxn.reactants
        .iter()
        .zip(parts)
        .all(|(c, i)| build(graph, labels, *c, *i, route, chosen))
}

/// One route per non-dominated masked cost among the complete routes in
/// `graph`.
pub fn pareto_completion(graph: &SearchGraph, mask: &DimMask) -> Vec<Route> {
    let labels = labels(graph, mask);
    let root = graph.root();
    let dims = graph.molecule(root).heuristic.dims();
    let mut routes = Vec::new();
    for i in 0..labels[root.index()].len() {
        let mut route = Route::empty(graph.molecule(root).key.clone(), dims);
        if build(graph, &labels, root, i, &mut route, &mut HashMap::new()) {
            routes.push(route);
        }
    }
    routes
}
