//! Single-step expansion providers.
//!
//! A provider plays the role of the single-step model composed with the
//! condition model: given a product molecule it returns candidate reactions
//! complete with agents, temperature and probability. Two providers are
//! included, a deterministic synthetic world generator and a file-backed
//! template table.

mod synthetic;
mod template;

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::MoleculeKey;
use crate::objectives::PropertyLookup;

pub use synthetic::{SyntheticWorld, WorldSpec};
pub use template::{FileProvider, FileProviderError, TemplateTable};

/// Default number of candidate reactions kept per expansion.
pub const DEFAULT_TOP_K: usize = 25;

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("molecule `{0}` is not part of this world")]
    UnknownMolecule(MoleculeKey),
    #[error("invalid world spec: {0}")]
    InvalidWorld(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A fully specified candidate reaction for one product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub product: MoleculeKey,
    /// Sorted, without duplicates.
    pub reactants: Vec<MoleculeKey>,
    pub agents: Vec<String>,
    /// Degrees Celsius.
    pub temperature: f64,
    pub rule_id: String,
    /// Single-step model likelihood in `(0, 1]`.
    pub probability: f64,
}

impl ReactionRecord {
    /// Sorts and deduplicates reactants and agents.
    pub fn canonicalize(mut self) -> Self {
        self.reactants.sort();
        self.reactants.dedup();
        self.agents.sort();
        self.agents.dedup();
        self
    }
}

/// The single-step predictor plus stock and property lookups.
pub trait ExpansionProvider: PropertyLookup + Send + Sync {
    /// Candidate reactions for `product`, best first. Deterministic.
    fn expand(&self, product: &MoleculeKey) -> Result<Vec<ReactionRecord>, ExpansionError>;

    fn in_stock(&self, molecule: &MoleculeKey) -> bool;
}

/// Reads a newline-separated stock file. Blank lines are ignored.
pub fn load_stock(path: &Path) -> Result<BTreeSet<MoleculeKey>, ExpansionError> {
    let file = std::fs::File::open(path).map_err(|source| ExpansionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut stock = BTreeSet::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|source| ExpansionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let key = line.trim();
        if !key.is_empty() {
            stock.insert(MoleculeKey::new(key));
        }
    }
    Ok(stock)
}
