//! The ten acceptance criteria, one pass/fail line each.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use moretro::cost::{approx_equal, DimMask};
use moretro::expansion::{SyntheticWorld, WorldSpec, DEFAULT_TOP_K};
use moretro::experiment::{execute, run_benchmark, ProviderSpec, RunConfig, RunSettings, Strategy, SuiteConfig, SyntheticSuite};
use moretro::metrics::hypervolume;
use moretro::objectives::ObjectiveSet;
use moretro::oracle::{enumerate_routes, EnumeratedWorld, ProviderSource};
use moretro::pruning::compute_bounds;
use moretro::search::{run, SearchConfig, SearchOutcome};
use moretro::weights::{grid_pool, sobol_pool, warmup_grid, PoolConfig, SamplingStrategy, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FRONT_TOL: f64 = 1e-9;
const ROUTE_LIMIT: usize = 10_000;

struct World {
    spec: WorldSpec,
    world: SyntheticWorld,
    objectives: ObjectiveSet,
    oracle: EnumeratedWorld,
}

impl World {
    fn new(spec: WorldSpec) -> Option<World> {
        let world = SyntheticWorld::new(spec.clone()).unwrap();
        let objectives = ObjectiveSet::standard(world.agent_table());
        let mut source = ProviderSource::new(&world, &objectives, DEFAULT_TOP_K);
        let oracle = enumerate_routes(&mut source, &world.target(), ROUTE_LIMIT, false).unwrap();
        if oracle.overflow {
            return None;
        }
        Some(World {
            spec,
            world,
            objectives,
            oracle,
        })
    }

    fn mask(&self) -> DimMask {
        self.objectives.pareto_mask()
    }

    fn front(&self) -> Vec<Vec<f64>> {
        self.oracle.true_front(&self.mask()).unwrap()
    }

    fn certify(&self, epsilon: f64) -> SearchOutcome {
        let mut config = SearchConfig::new(self.mask());
        config.budget = usize::MAX;
        config.pruning = true;
        config.epsilon = epsilon;
        let mut pool = PoolConfig::new(SamplingStrategy::Bo, 4, self.objectives.guidance_index());
        pool.recycle = true;
        pool.seed = self.spec.seed;
        run(&self.world, &self.objectives, &self.world.target(), &config, pool).unwrap()
    }
}

/// 100 worlds with depth ≤ 4, branching ≤ 3 and at most 10⁴ routes, drawn
/// until enough qualify.
fn suite(count: usize, seed: u64) -> Vec<World> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut world_seed = 0;
    while out.len() < count {
        let spec = WorldSpec {
            seed: world_seed,
            depth_max: rng.random_range(2..=4),
            branching: rng.random_range(1..=3),
            ..WorldSpec::default()
        };
        world_seed += 1;
        if let Some(w) = World::new(spec) {
            out.push(w);
        }
    }
    out
}

fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn same_front(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> bool {
    let (a, b) = (sorted(a), sorted(b));
    a.len() == b.len()
        && a.iter().zip(&b).all(|(x, y)| {
            approx_equal(x, y) && x.iter().zip(y).all(|(p, q)| (p - q).abs() <= FRONT_TOL)
        })
}

fn random_weight(rng: &mut ChaCha8Rng, dims: usize) -> WeightVector {
    let e: Vec<f64> = (0..dims).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    WeightVector::new(e.iter().map(|x| x / s).collect()).unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn certification(worlds: &[World]) -> Verdict {
    let mut mismatches = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut uncertified = 0;
    for w in worlds {
        let started = Instant::now();
        let out = w.certify(0.0);
        slowest = slowest.max(started.elapsed());
        if !out.stats.certified {
            uncertified += 1;
        }
        let got: Vec<Vec<f64>> = out.archive.iter().map(|e| w.mask().project(&e.route.cost)).collect();
        if !same_front(got, w.front()) {
            mismatches.push(w.spec.seed);
        }
    }
    verdict(
        mismatches.is_empty() && uncertified == 0 && slowest < Duration::from_secs(5),
        format!(
            "{} worlds, {} front mismatches {:?}, {uncertified} uncertified, slowest {:.3}s",
            worlds.len(),
            mismatches.len(),
            mismatches,
            slowest.as_secs_f64()
        ),
    )
}

fn safe_pruning(worlds: &[World]) -> Verdict {
    let mut pruned_total = 0;
    let mut violations = 0;
    for w in worlds {
        let out = w.certify(0.0);
        let on_front = w.oracle.pareto_molecules(&w.mask()).unwrap();
        for m in out.graph.molecules().iter().filter(|m| m.pruned) {
            pruned_total += 1;
            if on_front.contains(&m.key) {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0,
        format!("{pruned_total} pruned molecules across {} worlds, {violations} on an optimal route", worlds.len()),
    )
}

fn epsilon_front(worlds: &[World]) -> Verdict {
    const EPS: f64 = 0.1;
    let mut uncovered = 0;
    let mut fewer_or_equal = 0;
    let (mut exact_total, mut eps_total) = (0, 0);
    for w in worlds {
        let exact = w.certify(0.0);
        let approx = w.certify(EPS);
        let archived: Vec<Vec<f64>> = approx.archive.iter().map(|e| w.mask().project(&e.route.cost)).collect();
        for f in w.front() {
            let covered = archived
                .iter()
                .any(|a| f.iter().zip(a).all(|(fi, ai)| *fi >= ai - EPS - 1e-12));
            if !covered {
                uncovered += 1;
            }
        }
        if approx.stats.expansions <= exact.stats.expansions {
            fewer_or_equal += 1;
        }
        exact_total += exact.stats.expansions;
        eps_total += approx.stats.expansions;
    }
    let share = fewer_or_equal as f64 / worlds.len() as f64;
    verdict(
        uncovered == 0 && share >= 0.8,
        format!(
            "{uncovered} uncovered front points, ε-expansions ≤ exact on {:.0}% of worlds ({eps_total} vs {exact_total} total)",
            100.0 * share
        ),
    )
}

fn scalar_optimality(worlds: &[World]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    let mut failures = 0;
    for w in worlds.iter().take(25) {
        for _ in 0..20 {
            let weight = random_weight(&mut rng, 4);
            let mut config = SearchConfig::new(w.mask());
            config.budget = usize::MAX;
            config.scalar_certify = true;
            let out = run(&w.world, &w.objectives, &w.world.target(), &config, PoolConfig::fixed(vec![weight.clone()]))
                .unwrap();
            runs += 1;
            let best = out.graph.best_route(weight.as_slice()).map(|r| r.cost.dot(weight.as_slice()));
            let optimum = w.oracle.scalar_optimum(weight.as_slice()).unwrap();
            match best {
                Some(b) => worst = worst.max((b - optimum).abs()),
                None => failures += 1,
            }
        }
    }
    verdict(
        failures == 0 && worst <= 1e-9,
        format!("{runs} runs, {failures} without a route, max |wᵀC − optimum| = {worst:.2e}"),
    )
}

fn admissibility(worlds: &[World]) -> Verdict {
    const TRIPLES: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    let mut violations = 0;
    let mut round = 0;
    while checked < TRIPLES {
        let w = &worlds[round % worlds.len()];
        round += 1;
        // a partial graph from a short search
        let mut config = SearchConfig::new(w.mask());
        config.budget = rng.random_range(1..=25);
        let strategy = [SamplingStrategy::Grid, SamplingStrategy::Sobol, SamplingStrategy::Bo][rng.random_range(0..3)];
        let mut pool = PoolConfig::new(strategy, 4, w.objectives.guidance_index());
        pool.seed = rng.random();
        let graph = run(&w.world, &w.objectives, &w.world.target(), &config, pool).unwrap().graph;
        let bounds = compute_bounds(&graph);
        for route in &w.oracle.routes {
            // molecules the route reaches through reactions already in the
            // graph; the bound says nothing about paths the graph lacks
            let mut reached: BTreeSet<&moretro::MoleculeKey> = BTreeSet::new();
            reached.insert(&route.target);
            let mut grew = true;
            while grew {
                grew = false;
                for step in &route.reactions {
                    let in_graph = graph
                        .molecule_id(&step.record.product)
                        .is_some_and(|p| graph.molecule(p).expanded);
                    if in_graph && reached.contains(&step.record.product) {
                        for r in &step.record.reactants {
                            grew |= reached.insert(r);
                        }
                    }
                }
            }
            for key in reached {
                let Some(m) = graph.molecule_id(key) else { continue };
                let vb = &bounds.mol_vbound[m.index()];
                checked += 1;
                if vb.0.iter().zip(&route.cost.0).any(|(b, c)| *b > c + 1e-9) {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        violations == 0,
        format!("{checked} (world, molecule, route) triples over {round} graphs, {violations} violations"),
    )
}

fn hypervolume_oracle() -> Verdict {
    const SAMPLES: usize = 10_000_000;
    let reference = [1.1; 3];
    let fronts: Vec<Vec<Vec<f64>>> = (0..50u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
            let n = rng.random_range(1..=20);
            (0..n)
                .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect()
        })
        .collect();
    let errors: Vec<f64> = std::thread::scope(|scope| {
        let handles: Vec<_> = fronts
            .iter()
            .enumerate()
            .map(|(i, front)| {
                scope.spawn(move || {
                    let exact = hypervolume(front, &reference).unwrap();
                    let mut rng = ChaCha8Rng::seed_from_u64(700 + i as u64);
                    let mut hits = 0usize;
                    for _ in 0..SAMPLES {
                        let x: [f64; 3] = [
                            rng.random_range(0.0..1.1),
                            rng.random_range(0.0..1.1),
                            rng.random_range(0.0..1.1),
                        ];
                        if front.iter().any(|p| p[0] <= x[0] && p[1] <= x[1] && p[2] <= x[2]) {
                            hits += 1;
                        }
                    }
                    let mc = 1.331 * hits as f64 / SAMPLES as f64;
                    (exact - mc).abs()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    let unit = hypervolume(&[vec![0.0; 3]], &reference).unwrap();
    let unit_ok = unit == 1.1 * 1.1 * 1.1 && (unit - 1.331).abs() < 1e-12;
    verdict(
        worst <= 1e-3 && unit_ok,
        format!("max |exact − MC| = {worst:.2e} over 50 fronts, HV({{0}}, [1.1]³) = {unit}"),
    )
}

fn pool_counts() -> Verdict {
    let grid = grid_pool(1.0 / 3.0, 4).unwrap().len();
    let warmup = warmup_grid(0.25, 4, 3, 0.5).unwrap().len();
    let sobol = sobol_pool(32, 4, 0, true).len();
    verdict(
        grid == 20 && warmup == 10 && sobol == 36,
        format!("grid {grid}, warm-up {warmup}, sobol {sobol}"),
    )
}

fn strategy_ordering() -> Verdict {
    let suite = SuiteConfig {
        targets: Vec::new(),
        synthetic: Some(SyntheticSuite {
            world: WorldSpec {
                depth_max: 8,
                branching: 4,
                stock_slope: 0.05,
                ..WorldSpec::default()
            },
            seeds: (0..50).collect(),
        }),
        strategies: vec![Strategy::MoretroBo, Strategy::Fixed],
        weights: Some(vec![WeightVector::new(vec![0.2, 0.2, 0.2, 0.4]).unwrap()]),
        settings: RunSettings {
            budget: 300,
            ..RunSettings::default()
        },
        p_lo: 5.0,
        p_hi: 95.0,
        output: None,
        runs_dir: None,
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_benchmark(&suite, workers).unwrap();
    let bo = &report.summary[0];
    let fixed = &report.summary[1];
    let self_dom = fixed.self_dominated_pct_mean.unwrap_or(0.0);
    let base_dom = fixed.baseline_dominated_pct_mean.unwrap_or(0.0);
    verdict(
        bo.failures + fixed.failures == 0 && bo.hv_mean >= fixed.hv_mean && self_dom < base_dom,
        format!(
            "mean HV {:.4} (bo) vs {:.4} (fixed), self-dominated {self_dom:.2}% vs baseline-dominated {base_dom:.2}%",
            bo.hv_mean, fixed.hv_mean
        ),
    )
}

fn sample_configs(count: usize, seed: u64) -> Vec<RunConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let strategy = Strategy::ALL[i % Strategy::ALL.len()];
            let mut c = RunConfig::new(
                ProviderSpec::Synthetic(WorldSpec {
                    seed: rng.random_range(0..1000),
                    depth_max: rng.random_range(2..=6),
                    branching: rng.random_range(1..=4),
                    stock_slope: 0.1,
                    ..WorldSpec::default()
                }),
                strategy,
            );
            if strategy == Strategy::Fixed {
                c.weights = Some(vec![random_weight(&mut rng, 4), random_weight(&mut rng, 4)]);
            }
            c.settings.budget = rng.random_range(1..=80);
            c.settings.seed = rng.random();
            c.settings.certify = rng.random_bool(0.3);
            c.settings.n_weights = Some(rng.random_range(1..=6));
            c
        })
        .collect()
}

fn determinism() -> Verdict {
    let configs = sample_configs(40, 9);
    let differing = configs
        .iter()
        .filter(|c| execute(c).unwrap().to_json() != execute(c).unwrap().to_json())
        .count();
    verdict(differing == 0, format!("{} configs run twice, {differing} differ", configs.len()))
}

fn budget_compliance() -> Verdict {
    let configs = sample_configs(100, 10);
    let mut over = 0;
    let mut miscounted = 0;
    for c in &configs {
        let report = execute(c).unwrap();
        if report.stats.expansions > c.settings.budget {
            over += 1;
        }
        // every weight starts on the target, so the first iteration costs one
        let first_ok = report.trace.first().is_none_or(|p| p.expansions == 1);
        let mut prev = 0;
        let mut steps_ok = true;
        for p in &report.trace {
            let n_s = c.settings.n_weights.unwrap_or(5).max(c.weights.as_ref().map_or(1, Vec::len));
            steps_ok &= p.expansions > prev && p.expansions - prev <= n_s;
            prev = p.expansions;
        }
        if !first_ok || !steps_ok {
            miscounted += 1;
        }
    }
    // a stricter check on the graph: one expansion per expanded molecule
    let mut graph_mismatch = 0;
    for seed in 0..20 {
        let world = SyntheticWorld::new(WorldSpec {
            seed,
            depth_max: 5,
            branching: 3,
            stock_slope: 0.1,
            ..WorldSpec::default()
        })
        .unwrap();
        let objectives = ObjectiveSet::standard(world.agent_table());
        let mut config = SearchConfig::new(objectives.pareto_mask());
        config.budget = 5 + seed as usize * 3;
        let pool = PoolConfig::new(SamplingStrategy::Bo, 4, 3);
        let out = run(&world, &objectives, &world.target(), &config, pool).unwrap();
        let expanded = out.graph.molecules().iter().filter(|m| m.expanded).count();
        if expanded != out.stats.expansions || out.stats.expansions > config.budget {
            graph_mismatch += 1;
        }
    }
    verdict(
        over == 0 && miscounted == 0 && graph_mismatch == 0,
        format!(
            "{} runs, {over} over budget, {miscounted} with bad per-iteration counts, {graph_mismatch} graph count mismatches",
            configs.len()
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let worlds = suite(100, 1);
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("certified front equals oracle front", Box::new(|| certification(&worlds))),
        ("pruning is safe", Box::new(|| safe_pruning(&worlds))),
        ("epsilon front", Box::new(|| epsilon_front(&worlds))),
        ("scalar optimality", Box::new(|| scalar_optimality(&worlds))),
        ("bound admissibility", Box::new(|| admissibility(&worlds))),
        ("hypervolume correctness", Box::new(hypervolume_oracle)),
        ("sampling pool counts", Box::new(pool_counts)),
        ("strategy ordering", Box::new(strategy_ordering)),
        ("determinism", Box::new(determinism)),
        ("budget compliance", Box::new(budget_compliance)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed in {:.1}s", criteria.len() - failed, criteria.len(), started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
