//! Multi-objective best-first search over retrosynthesis AND-OR graphs.
//!
//! The search runs several weight vectors over one shared graph, records
//! every non-dominated route it finds, and can certify that the recovered
//! front is exactly the Pareto front by bounding the cost of every route
//! through the remaining frontier.

pub mod cost;
pub mod expansion;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod objectives;
pub mod oracle;
pub mod pruning;
pub mod search;
pub mod weights;

pub use cost::{CostVector, DimMask};
pub use graph::{MoleculeKey, Route, SearchGraph};
