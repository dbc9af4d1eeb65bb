//! Config-driven runs, benchmark aggregation and plot data.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::DimMask;
use crate::expansion::{
    ExpansionError, ExpansionProvider, FileProvider, FileProviderError, SyntheticWorld, WorldSpec,
    DEFAULT_TOP_K,
};
use crate::graph::MoleculeKey;
use crate::metrics::{default_r2_weights, dominance_coverage, hypervolume, nd_filter, r2_indicator, PercentileNormalizer};
use crate::oracle::{enumerate_routes, OracleDump, OracleError, ProviderSource};
use crate::objectives::{AgentTable, HeuristicMode, ObjectiveError, ObjectiveSet};
use crate::search::{self, ArchiveEntry, SearchConfig, SearchError, SearchStats, TracePoint};
use crate::weights::{PoolConfig, SamplingStrategy, WeightVector};

/// Utility behind the reported R2 values.
pub const R2_UTILITY: &str = "weighted Chebyshev, utopia 0, simplex weight grid with step 1/10 over masked dims";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Provider(#[from] FileProviderError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Where expansions come from. Exactly one per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    Synthetic(WorldSpec),
    Files {
        templates: PathBuf,
        stock: PathBuf,
        properties: PathBuf,
        /// JSON map of agent hazard scores.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agents: Option<PathBuf>,
        target: String,
    },
}

impl ProviderSpec {
    /// Short label used in benchmark rows.
    pub fn label(&self) -> String {
        match self {
            ProviderSpec::Synthetic(w) => format!("synthetic:{}:{}", w.seed, w.target),
            ProviderSpec::Files { target, .. } => target.clone(),
        }
    }
}

/// A loaded provider with its objectives and target.
pub struct Problem {
    pub provider: Box<dyn ExpansionProvider>,
    pub objectives: ObjectiveSet,
    pub target: MoleculeKey,
}

impl Problem {
    pub fn load(spec: &ProviderSpec) -> Result<Self, ExperimentError> {
        match spec {
            ProviderSpec::Synthetic(w) => {
                let world = SyntheticWorld::new(w.clone())?;
                Ok(Problem {
                    objectives: ObjectiveSet::standard(world.agent_table()),
                    target: world.target(),
                    provider: Box::new(world),
                })
            }
            ProviderSpec::Files {
                templates,
                stock,
                properties,
                agents,
                target,
            } => {
                let provider = FileProvider::load(templates, stock, properties)?;
                let agents = match agents {
                    Some(p) => AgentTable::load(p)?,
                    None => AgentTable::default(),
                };
                Ok(Problem {
                    provider: Box::new(provider),
                    objectives: ObjectiveSet::standard(agents),
                    target: MoleculeKey::new(target.as_str()),
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    MoretroBo,
    MoretroGrid,
    MoretroSobol,
    /// Single guidance-only weight, every graph route extracted at the end.
    RetroStar,
    /// User-supplied weights.
    Fixed,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::MoretroBo,
        Strategy::MoretroGrid,
        Strategy::MoretroSobol,
        Strategy::RetroStar,
        Strategy::Fixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::MoretroBo => "moretro-bo",
            Strategy::MoretroGrid => "moretro-grid",
            Strategy::MoretroSobol => "moretro-sobol",
            Strategy::RetroStar => "retro-star",
            Strategy::Fixed => "fixed",
        }
    }

    pub fn is_moretro(self) -> bool {
        matches!(self, Strategy::MoretroBo | Strategy::MoretroGrid | Strategy::MoretroSobol)
    }

    fn sampling(self) -> Option<SamplingStrategy> {
        match self {
            Strategy::MoretroBo => Some(SamplingStrategy::Bo),
            Strategy::MoretroGrid => Some(SamplingStrategy::Grid),
            Strategy::MoretroSobol => Some(SamplingStrategy::Sobol),
            Strategy::RetroStar | Strategy::Fixed => None,
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Strategy::ALL.iter().map(|x| x.name()).collect();
                format!("unknown strategy `{s}`, expected one of {}", names.join(", "))
            })
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_budget() -> usize {
    300
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

fn default_strategy() -> Strategy {
    Strategy::MoretroBo
}

/// Search settings shared by single runs and benchmark suites. Unset
/// options fall back to the per-strategy defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// N_S, weights active at once.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_weights: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_budget: Option<usize>,
    /// N_B, single-step expansions.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget_s: Option<f64>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub epsilon: f64,
    /// Bound pruning with certified termination.
    #[serde(default)]
    pub certify: bool,
    #[serde(default)]
    pub heuristics: HeuristicMode,
    /// Dominance dimensions; all but guidance when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hv_reference: Option<Vec<f64>>,
    /// Seeds the weight sampler.
    #[serde(default)]
    pub seed: u64,
    /// Adds wall time to the stats, which makes run JSON non-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            n_weights: None,
            w_budget: None,
            budget: default_budget(),
            time_budget_s: None,
            top_k: default_top_k(),
            epsilon: 0.0,
            certify: false,
            heuristics: HeuristicMode::Zero,
            mask: None,
            hv_reference: None,
            seed: 0,
            record_timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub provider: ProviderSpec,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Weights for the fixed strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightVector>>,
    #[serde(flatten)]
    pub settings: RunSettings,
    /// Run JSON destination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Hypervolume trace CSV destination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(provider: ProviderSpec, strategy: Strategy) -> Self {
        RunConfig {
            provider,
            strategy,
            weights: None,
            settings: RunSettings::default(),
            output: None,
            trace_output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        read_json(path)
    }

    /// Checks everything that does not need the provider loaded.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: &str| Err(ExperimentError::Config(m.to_string()));
        let s = &self.settings;
        match (self.strategy, &self.weights) {
            (Strategy::Fixed, None) => return fail("the fixed strategy needs `weights`"),
            (Strategy::Fixed, Some(w)) if w.is_empty() => return fail("`weights` is empty"),
            (Strategy::Fixed, Some(_)) => {}
            (_, Some(_)) => return fail("`weights` is only used by the fixed strategy"),
            (_, None) => {}
        }
        if s.n_weights == Some(0) {
            return fail("n_weights must be positive");
        }
        if s.w_budget == Some(0) {
            return fail("w_budget must be positive");
        }
        if s.top_k == 0 {
            return fail("top_k must be positive");
        }
        if !(s.epsilon >= 0.0 && s.epsilon.is_finite()) {
            return fail("epsilon must be a non-negative number");
        }
        if s.time_budget_s.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return fail("time_budget_s must be positive");
        }
        if let Some(m) = &s.mask {
            if !m.iter().any(|b| *b) {
                return fail("mask must keep at least one dimension");
            }
        }
        if let ProviderSpec::Synthetic(w) = &self.provider {
            w.validate()?;
        }
        Ok(())
    }

    pub fn search_config(&self, objectives: &ObjectiveSet) -> Result<SearchConfig, ExperimentError> {
        let s = &self.settings;
        let mask = match &s.mask {
            Some(m) if m.len() != objectives.dims() => {
                return Err(ExperimentError::Config(format!(
                    "mask has {} entries, there are {} objectives",
                    m.len(),
                    objectives.dims()
                )))
            }
            Some(m) => DimMask(m.clone()),
            None => objectives.pareto_mask(),
        };
        let mut config = SearchConfig::new(mask);
        if let Some(r) = &s.hv_reference {
            if r.len() != config.mask.active_dims() {
                return Err(ExperimentError::Config(format!(
                    "hv_reference has {} entries, the mask keeps {}",
                    r.len(),
                    config.mask.active_dims()
                )));
            }
            config.hv_reference = r.clone();
        }
        config.budget = s.budget;
        config.time_budget = s.time_budget_s.map(Duration::from_secs_f64);
        config.top_k = s.top_k;
        config.heuristics = s.heuristics;
        config.pruning = s.certify;
        config.epsilon = s.epsilon;
        config.extract_all = self.strategy == Strategy::RetroStar;
        config.record_timing = s.record_timing;
        Ok(config)
    }

    pub fn pool_config(&self, objectives: &ObjectiveSet) -> Result<PoolConfig, ExperimentError> {
        let dims = objectives.dims();
        let guidance = objectives.guidance_index();
        let s = &self.settings;
        let mut pool = match self.strategy.sampling() {
            Some(sampling) => {
                let mut p = PoolConfig::new(sampling, dims, guidance);
                if let Some(n) = s.n_weights {
                    p.n_weights = n;
                }
                if let Some(b) = s.w_budget {
                    p.w_budget = b;
                }
                p
            }
            None => {
                let weights = match self.strategy {
                    Strategy::RetroStar => vec![WeightVector::basis(dims, guidance)],
                    _ => self.weights.clone().unwrap_or_default(),
                };
                if let Some(w) = weights.iter().find(|w| w.dims() != dims) {
                    return Err(ExperimentError::Config(format!(
                        "weight has {} components, there are {dims} objectives",
                        w.dims()
                    )));
                }
                let mut p = PoolConfig::fixed(weights);
                p.guidance_index = guidance;
                p
            }
        };
        pool.seed = s.seed;
        pool.recycle = s.certify;
        Ok(pool)
    }
}

/// Front quality of one run on its own scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub hypervolume: f64,
    pub hv_reference: Vec<f64>,
    pub r2: Option<f64>,
    pub r2_utility: String,
    pub n_routes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub target: MoleculeKey,
    pub objectives: Vec<String>,
    pub mask: DimMask,
    /// At least one route was found.
    pub success: bool,
    pub metrics: RunMetrics,
    pub stats: SearchStats,
    pub archive: Vec<ArchiveEntry>,
    pub trace: Vec<TracePoint>,
}

impl RunReport {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        read_json(path)
    }

    /// Masked costs of the archived routes.
    pub fn front(&self) -> Vec<Vec<f64>> {
        self.archive.iter().map(|e| self.mask.project(&e.route.cost)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run reports serialize")
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    fs::write(path, bytes).map_err(io_error(path))
}

/// Runs the search described by `config` without writing anything.
pub fn execute(config: &RunConfig) -> Result<RunReport, ExperimentError> {
    config.validate()?;
    let problem = Problem::load(&config.provider)?;
    let search_config = config.search_config(&problem.objectives)?;
    let pool = config.pool_config(&problem.objectives)?;
    let outcome = search::run(
        problem.provider.as_ref(),
        &problem.objectives,
        &problem.target,
        &search_config,
        pool,
    )?;
    let mask = search_config.mask.clone();
    let front: Vec<Vec<f64>> = outcome.archive.iter().map(|e| mask.project(&e.route.cost)).collect();
    let r2 = r2_indicator(
        &front,
        &default_r2_weights(mask.active_dims()),
        &vec![0.0; mask.active_dims()],
    );
    let metrics = RunMetrics {
        hypervolume: outcome.stats.hypervolume,
        hv_reference: search_config.hv_reference.clone(),
        r2,
        r2_utility: R2_UTILITY.to_string(),
        n_routes: outcome.archive.len(),
    };
    Ok(RunReport {
        config: config.clone(),
        target: problem.target,
        objectives: problem
            .objectives
            .objectives()
            .iter()
            .map(|o| o.kind.name().to_string())
            .collect(),
        mask,
        success: !outcome.archive.is_empty(),
        metrics,
        stats: outcome.stats,
        archive: outcome.archive,
        trace: outcome.trace,
    })
}

/// HV trace as CSV: `iteration,expansions,hypervolume,archive_size`.
pub fn trace_csv(trace: &[TracePoint]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "expansions", "hypervolume", "archive_size"])?;
    for p in trace {
        w.write_record([
            p.iteration.to_string(),
            p.expansions.to_string(),
            p.hypervolume.to_string(),
            p.archive_size.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
}

/// Executes `config` and writes the run JSON and trace CSV where the
/// config asks for them.
pub fn run_single(config: &RunConfig) -> Result<RunReport, ExperimentError> {
    let report = execute(config)?;
    if let Some(path) = &config.output {
        write_file(path, report.to_json().as_bytes())?;
    }
    if let Some(path) = &config.trace_output {
        write_file(path, trace_csv(&report.trace)?.as_bytes())?;
    }
    Ok(report)
}

/// Enumerates every route of the configured world and reports the true
/// front on the configured mask. Fails when there are more than `cap`
/// routes.
pub fn oracle_dump(config: &RunConfig, cap: usize) -> Result<OracleDump, ExperimentError> {
    config.validate()?;
    let problem = Problem::load(&config.provider)?;
    let search_config = config.search_config(&problem.objectives)?;
    let mut source = ProviderSource::new(problem.provider.as_ref(), &problem.objectives, search_config.top_k);
    let world = enumerate_routes(&mut source, &problem.target, cap, true)?;
    Ok(world.dump(&search_config.mask)?)
}

/// Synthetic worlds generated from one template, one per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSuite {
    #[serde(default)]
    pub world: WorldSpec,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<ProviderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSuite>,
    pub strategies: Vec<Strategy>,
    /// Weights for the fixed strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightVector>>,
    #[serde(flatten)]
    pub settings: RunSettings,
    #[serde(default = "default_p_lo")]
    pub p_lo: f64,
    #[serde(default = "default_p_hi")]
    pub p_hi: f64,
    /// Aggregate CSV destination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Directory for the per-run JSON files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs_dir: Option<PathBuf>,
}

fn default_p_lo() -> f64 {
    5.0
}

fn default_p_hi() -> f64 {
    95.0
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        read_json(path)
    }

    pub fn all_targets(&self) -> Vec<ProviderSpec> {
        let mut out = self.targets.clone();
        if let Some(s) = &self.synthetic {
            out.extend(s.seeds.iter().map(|&seed| {
                ProviderSpec::Synthetic(WorldSpec {
                    seed,
                    ..s.world.clone()
                })
            }));
        }
        out
    }

    /// One run config per (target, strategy), target-major.
    pub fn run_configs(&self) -> Result<Vec<RunConfig>, ExperimentError> {
        let targets = self.all_targets();
        if targets.is_empty() {
            return Err(ExperimentError::Config("the suite has no targets".into()));
        }
        if self.strategies.is_empty() {
            return Err(ExperimentError::Config("the suite has no strategies".into()));
        }
        if !(0.0 <= self.p_lo && self.p_lo < self.p_hi && self.p_hi <= 100.0) {
            return Err(ExperimentError::Config("need 0 <= p_lo < p_hi <= 100".into()));
        }
        let mut out = Vec::new();
        for t in &targets {
            for &strategy in &self.strategies {
                let config = RunConfig {
                    provider: t.clone(),
                    strategy,
                    weights: (strategy == Strategy::Fixed).then(|| self.weights.clone()).flatten(),
                    settings: self.settings.clone(),
                    output: None,
                    trace_output: None,
                };
                config.validate()?;
                out.push(config);
            }
        }
        Ok(out)
    }
}

/// One (target, strategy) row of the aggregate table. Quality columns use
/// percentile-normalized costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub target_index: usize,
    pub target: String,
    pub strategy: Strategy,
    /// Empty on success, the error message otherwise.
    pub error: String,
    pub success: bool,
    pub n_routes: usize,
    pub hv: f64,
    pub r2: Option<f64>,
    /// Percent of this baseline's front dominated by the reference strategy.
    pub baseline_dominated_pct: Option<f64>,
    /// Percent of the reference strategy's front dominated by this baseline.
    pub self_dominated_pct: Option<f64>,
    pub expansions: usize,
    pub certified: bool,
    pub pruned_count: usize,
    pub search_space_reduction_percent: f64,
    pub termination: String,
}

/// Mean and standard deviation over a strategy's rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub runs: usize,
    pub failures: usize,
    pub successes: usize,
    pub certified: usize,
    pub hv_mean: f64,
    pub hv_std: f64,
    pub r2_mean: Option<f64>,
    pub r2_std: Option<f64>,
    pub n_routes_mean: f64,
    pub n_routes_std: f64,
    pub baseline_dominated_pct_mean: Option<f64>,
    pub self_dominated_pct_mean: Option<f64>,
    pub expansions_mean: f64,
    pub search_space_reduction_percent_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// Strategy the dominance columns compare against.
    pub reference: Option<Strategy>,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<StrategySummary>,
}

/// A finished or failed benchmark run.
#[derive(Clone, Debug)]
pub struct BenchRun {
    pub target_index: usize,
    pub target: String,
    pub strategy: Strategy,
    pub result: Result<RunReport, String>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Builds the aggregate table from finished runs. Fronts of one target are
/// normalized together; the reference strategy is the first MORetro*
/// variant present.
pub fn aggregate(runs: &[BenchRun], p_lo: f64, p_hi: f64) -> BenchReport {
    let mut strategies: Vec<Strategy> = Vec::new();
    for r in runs {
        if !strategies.contains(&r.strategy) {
            strategies.push(r.strategy);
        }
    }
    let reference = strategies.iter().copied().find(|s| s.is_moretro());
    let mut targets: Vec<usize> = runs.iter().map(|r| r.target_index).collect();
    targets.sort_unstable();
    targets.dedup();

    let mut rows = Vec::new();
    for t in targets {
        let group: Vec<&BenchRun> = runs.iter().filter(|r| r.target_index == t).collect();
        let fronts: Vec<Vec<Vec<f64>>> = group
            .iter()
            .map(|r| r.result.as_ref().map(RunReport::front).unwrap_or_default())
            .collect();
        let all: Vec<Vec<f64>> = fronts.iter().flatten().cloned().collect();
        let normalizer = PercentileNormalizer::fit(&all, p_lo, p_hi);
        let normalized: Vec<Vec<Vec<f64>>> = fronts
            .iter()
            .map(|f| match &normalizer {
                Some(n) => {
                    let pts: Vec<Vec<f64>> = f.iter().map(|p| n.apply(p)).collect();
                    nd_filter(&pts).into_iter().map(|i| pts[i].clone()).collect()
                }
                None => Vec::new(),
            })
            .collect();
        let reference_front = reference
            .and_then(|s| group.iter().position(|r| r.strategy == s && r.result.is_ok()))
            .map(|i| &normalized[i]);
        for (i, run) in group.iter().enumerate() {
            let front = &normalized[i];
            let dims = front.first().map_or(0, Vec::len);
            let hv = if front.is_empty() {
                0.0
            } else {
                hypervolume(front, &vec![1.1; dims]).expect("normalized front is finite")
            };
            let r2 = r2_indicator(front, &default_r2_weights(dims.max(1)), &vec![0.0; dims]);
            let (baseline_dominated_pct, self_dominated_pct) = match (reference_front, run.result.is_ok()) {
                (Some(rf), true) if Some(run.strategy) != reference => {
                    let (b, s) = dominance_coverage(rf, front);
                    (Some(b), Some(s))
                }
                _ => (None, None),
            };
            let row = match &run.result {
                Ok(report) => BenchRow {
                    target_index: run.target_index,
                    target: run.target.clone(),
                    strategy: run.strategy,
                    error: String::new(),
                    success: report.success,
                    n_routes: report.archive.len(),
                    hv,
                    r2,
                    baseline_dominated_pct,
                    self_dominated_pct,
                    expansions: report.stats.expansions,
                    certified: report.stats.certified,
                    pruned_count: report.stats.pruned_count,
                    search_space_reduction_percent: report.stats.search_space_reduction_percent,
                    termination: serde_json::to_value(report.stats.termination)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                },
                Err(e) => BenchRow {
                    target_index: run.target_index,
                    target: run.target.clone(),
                    strategy: run.strategy,
                    error: e.clone(),
                    success: false,
                    n_routes: 0,
                    hv: 0.0,
                    r2: None,
                    baseline_dominated_pct: None,
                    self_dominated_pct: None,
                    expansions: 0,
                    certified: false,
                    pruned_count: 0,
                    search_space_reduction_percent: 0.0,
                    termination: String::new(),
                },
            };
            rows.push(row);
        }
    }

    let summary = strategies
        .iter()
        .map(|&s| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.strategy == s).collect();
            let ok: Vec<&&BenchRow> = mine.iter().filter(|r| r.error.is_empty()).collect();
            let col = |f: &dyn Fn(&BenchRow) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let opt = |f: &dyn Fn(&BenchRow) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| mean_std(&v))
            };
            let (hv_mean, hv_std) = col(&|r| r.hv);
            let r2 = opt(&|r| r.r2);
            let (n_routes_mean, n_routes_std) = col(&|r| r.n_routes as f64);
            StrategySummary {
                strategy: s,
                runs: mine.len(),
                failures: mine.len() - ok.len(),
                successes: ok.iter().filter(|r| r.success).count(),
                certified: ok.iter().filter(|r| r.certified).count(),
                hv_mean,
                hv_std,
                r2_mean: r2.map(|x| x.0),
                r2_std: r2.map(|x| x.1),
                n_routes_mean,
                n_routes_std,
                baseline_dominated_pct_mean: opt(&|r| r.baseline_dominated_pct).map(|x| x.0),
                self_dominated_pct_mean: opt(&|r| r.self_dominated_pct).map(|x| x.0),
                expansions_mean: col(&|r| r.expansions as f64).0,
                search_space_reduction_percent_mean: col(&|r| r.search_space_reduction_percent).0,
            }
        })
        .collect();
    BenchReport {
        reference,
        rows,
        summary,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BenchReport {
    /// Per-row table, a blank line, then the per-strategy summary table.
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut rows = csv::Writer::from_writer(Vec::new());
        rows.write_record([
            "target_index",
            "target",
            "strategy",
            "error",
            "success",
            "n_routes",
            "hv",
            "r2",
            "baseline_dominated_pct",
            "self_dominated_pct",
            "expansions",
            "certified",
            "pruned_count",
            "search_space_reduction_percent",
            "termination",
        ])?;
        for r in &self.rows {
            rows.write_record([
                r.target_index.to_string(),
                r.target.clone(),
                r.strategy.to_string(),
                r.error.clone(),
                r.success.to_string(),
                r.n_routes.to_string(),
                r.hv.to_string(),
                opt(r.r2),
                opt(r.baseline_dominated_pct),
                opt(r.self_dominated_pct),
                r.expansions.to_string(),
                r.certified.to_string(),
                r.pruned_count.to_string(),
                r.search_space_reduction_percent.to_string(),
                r.termination.clone(),
            ])?;
        }
        let mut summary = csv::Writer::from_writer(Vec::new());
        summary.write_record([
            "strategy",
            "runs",
            "failures",
            "successes",
            "certified",
            "hv_mean",
            "hv_std",
            "r2_mean",
            "r2_std",
            "n_routes_mean",
            "n_routes_std",
            "baseline_dominated_pct_mean",
            "self_dominated_pct_mean",
            "expansions_mean",
            "search_space_reduction_percent_mean",
        ])?;
        for s in &self.summary {
            summary.write_record([
                s.strategy.to_string(),
                s.runs.to_string(),
                s.failures.to_string(),
                s.successes.to_string(),
                s.certified.to_string(),
                s.hv_mean.to_string(),
                s.hv_std.to_string(),
                opt(s.r2_mean),
                opt(s.r2_std),
                s.n_routes_mean.to_string(),
                s.n_routes_std.to_string(),
                opt(s.baseline_dominated_pct_mean),
                opt(s.self_dominated_pct_mean),
                s.expansions_mean.to_string(),
                s.search_space_reduction_percent_mean.to_string(),
            ])?;
        }
        let mut out = rows.into_inner().expect("in-memory writer");
        out.push(b'\n');
        out.extend(summary.into_inner().expect("in-memory writer"));
        Ok(String::from_utf8(out).expect("utf-8"))
    }
}

/// File name of a run JSON inside a benchmark's runs directory.
pub fn run_file_name(target_index: usize, strategy: Strategy) -> String {
    format!("{target_index:04}_{}.json", strategy.name())
}

/// Runs every (target, strategy) pair on `workers` threads, then
/// aggregates. Failed runs become error rows.
pub fn run_benchmark(suite: &SuiteConfig, workers: usize) -> Result<BenchReport, ExperimentError> {
    let configs = suite.run_configs()?;
    let per_target = suite.strategies.len();
    let labels: Vec<String> = suite.all_targets().iter().map(ProviderSpec::label).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunReport, String>>>> = Mutex::new(vec![None; configs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                let result = execute(config).map_err(|e| e.to_string());
                if let Err(e) = &result {
                    log::warn!("{} / {}: {e}", labels[i / per_target], config.strategy);
                }
                results.lock().expect("worker panicked")[i] = Some(result);
            });
        }
    });
    let results = results.into_inner().expect("worker panicked");
    let mut runs = Vec::with_capacity(configs.len());
    for (i, (config, result)) in configs.iter().zip(results).enumerate() {
        let result = result.expect("every job ran");
        if let (Some(dir), Ok(report)) = (&suite.runs_dir, &result) {
            let path = dir.join(run_file_name(i / per_target, config.strategy));
            write_file(&path, report.to_json().as_bytes())?;
        }
        runs.push(BenchRun {
            target_index: i / per_target,
            target: labels[i / per_target].clone(),
            strategy: config.strategy,
            result,
        });
    }
    let report = aggregate(&runs, suite.p_lo, suite.p_hi);
    if let Some(path) = &suite.output {
        write_file(path, report.to_csv()?.as_bytes())?;
    }
    Ok(report)
}

/// Front points of a run: masked cost components, the generating weight
/// (empty for routes added by completion or extraction) and route length.
pub fn emit_front_plotdata(report: &RunReport) -> Result<String, ExperimentError> {
    let active: Vec<&String> = report
        .objectives
        .iter()
        .zip(&report.mask.0)
        .filter(|(_, keep)| **keep)
        .map(|(n, _)| n)
        .collect();
    let mut header: Vec<String> = active.iter().map(|n| n.to_string()).collect();
    header.extend(report.objectives.iter().map(|n| format!("w_{n}")));
    header.push("route_length".into());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for entry in &report.archive {
        let mut rec: Vec<String> = report.mask.project(&entry.route.cost).iter().map(f64::to_string).collect();
        match &entry.weight {
            Some(wv) => rec.extend(wv.as_slice().iter().map(f64::to_string)),
            None => rec.extend(report.objectives.iter().map(|_| String::new())),
        }
        rec.push(entry.route.len().to_string());
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
}
