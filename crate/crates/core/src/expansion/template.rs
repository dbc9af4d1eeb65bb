use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use super::{load_stock, ExpansionError, ExpansionProvider, ReactionRecord, DEFAULT_TOP_K};
use crate::graph::MoleculeKey;
use crate::objectives::{load_property_table, MoleculeProperties, ObjectiveError, PropertyLookup};

/// Condition variants kept per template row.
pub const CONDITIONS_PER_ROW: usize = 2;

#[derive(Clone, Debug, Deserialize)]
struct Condition {
    #[serde(default)]
    agents: Vec<String>,
    temp: f64,
}

#[derive(Clone, Debug, Deserialize)]
struct TemplateRow {
    product: String,
    reactants: Vec<String>,
    prob: f64,
    rule_id: String,
    conditions: Vec<Condition>,
}

/// Precomputed single-step predictions loaded from JSON lines.
///
/// Each line is `{product, reactants[], prob, rule_id, conditions:[{agents[], temp}]}`.
#[derive(Clone, Debug, Default)]
pub struct TemplateTable {
    rows: BTreeMap<MoleculeKey, Vec<TemplateRow>>,
    top_k: usize,
}

impl TemplateTable {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, ExpansionError> {
        let mut rows: BTreeMap<MoleculeKey, Vec<TemplateRow>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| ExpansionError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let fail = |message: String| ExpansionError::Parse {
                line: line_no,
                message,
            };
            let row: TemplateRow = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
            if row.reactants.is_empty() {
                return Err(fail("row has no reactants".into()));
            }
            if row.reactants.contains(&row.product) {
                return Err(fail("product appears among its own reactants".into()));
            }
            if !(row.prob > 0.0 && row.prob <= 1.0) {
                return Err(fail(format!("probability {} outside (0, 1]", row.prob)));
            }
            if row.conditions.is_empty() {
                return Err(fail("row has no conditions".into()));
            }
            if row.conditions.iter().any(|c| !c.temp.is_finite()) {
                return Err(fail("non-finite temperature".into()));
            }
            rows.entry(MoleculeKey::new(&row.product)).or_default().push(row);
        }
        for product_rows in rows.values_mut() {
            // stable: equal probabilities keep file order
            product_rows.sort_by(|a, b| b.prob.total_cmp(&a.prob));
        }
        Ok(TemplateTable {
            rows,
            top_k: DEFAULT_TOP_K,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ExpansionError> {
        let file = std::fs::File::open(path).map_err(|source| ExpansionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn products(&self) -> impl Iterator<Item = &MoleculeKey> {
        self.rows.keys()
    }

    /// Rows for `product` by descending probability, truncated to `top_k`,
    /// each expanded into one record per condition variant.
    pub fn expand(&self, product: &MoleculeKey) -> Vec<ReactionRecord> {
        let Some(rows) = self.rows.get(product) else {
            return Vec::new();
        };
        rows.iter()
            .take(self.top_k)
            .flat_map(|row| {
                row.conditions.iter().take(CONDITIONS_PER_ROW).map(move |c| {
                    ReactionRecord {
                        product: product.clone(),
                        reactants: row.reactants.iter().map(MoleculeKey::new).collect(),
                        agents: c.agents.clone(),
                        temperature: c.temp,
                        rule_id: row.rule_id.clone(),
                        probability: row.prob,
                    }
                    .canonicalize()
                })
            })
            .collect()
    }
}

/// File-backed provider: template table, stock list and property table.
#[derive(Clone, Debug)]
pub struct FileProvider {
    pub table: TemplateTable,
    pub stock: BTreeSet<MoleculeKey>,
    pub properties: BTreeMap<MoleculeKey, MoleculeProperties>,
}

impl FileProvider {
    pub fn load(templates: &Path, stock: &Path, properties: &Path) -> Result<Self, FileProviderError> {
        Ok(FileProvider {
            table: TemplateTable::load(templates)?,
            stock: load_stock(stock)?,
            properties: load_property_table(properties)?,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FileProviderError {
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

impl PropertyLookup for FileProvider {
    fn properties(&self, key: &MoleculeKey) -> Option<MoleculeProperties> {
        self.properties.get(key).cloned()
    }
}

impl ExpansionProvider for FileProvider {
    fn expand(&self, product: &MoleculeKey) -> Result<Vec<ReactionRecord>, ExpansionError> {
        Ok(self.table.expand(product))
    }

    fn in_stock(&self, molecule: &MoleculeKey) -> bool {
        self.stock.contains(molecule)
    }
}
