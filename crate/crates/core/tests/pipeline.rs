use std::fs;
use std::path::Path;

use moretro::cost::approx_equal;
use moretro::expansion::{FileProvider, SyntheticWorld, WorldSpec, DEFAULT_TOP_K};
use moretro::experiment::{emit_front_plotdata, oracle_dump, run_single, ProviderSpec, RunConfig, RunReport, Strategy};
use moretro::objectives::{AgentTable, HeuristicMode, ObjectiveSet};
use moretro::oracle::{enumerate_routes, GraphSource, ProviderSource};
use moretro::search::{run, SearchConfig};
use moretro::weights::{PoolConfig, SamplingStrategy};

fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn assert_same_front(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) {
    let (a, b) = (sorted(a), sorted(b));
    assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
    for (x, y) in a.iter().zip(&b) {
        assert!(approx_equal(x, y), "{x:?} vs {y:?}");
    }
}

/// A small diamond-free template world with trade-offs between routes.
fn write_world(dir: &Path) -> ProviderSpec {
    let rows = [
        r#"{"product":"t","reactants":["a","b"],"prob":0.6,"rule_id":"t1","conditions":[{"agents":["dcm"],"temp":25},{"agents":["thf"],"temp":80}]}"#,
        r#"{"product":"t","reactants":["c"],"prob":0.3,"rule_id":"t2","conditions":[{"agents":[],"temp":-10}]}"#,
        r#"{"product":"a","reactants":["s1"],"prob":0.9,"rule_id":"a1","conditions":[{"agents":["dcm"],"temp":20}]}"#,
        r#"{"product":"a","reactants":["s2","s3"],"prob":0.2,"rule_id":"a2","conditions":[{"agents":["water"],"temp":60}]}"#,
        r#"{"product":"c","reactants":["s1","s4"],"prob":0.5,"rule_id":"c1","conditions":[{"agents":["thf"],"temp":150}]}"#,
        r#"{"product":"c","reactants":["d"],"prob":0.7,"rule_id":"c2","conditions":[{"agents":[],"temp":22}]}"#,
        r#"{"product":"d","reactants":["s2"],"prob":0.4,"rule_id":"d1","conditions":[{"agents":["water"],"temp":40}]}"#,
    ];
    fs::write(dir.join("templates.jsonl"), rows.join("\n")).unwrap();
    fs::write(dir.join("stock.txt"), "b\ns1\ns2\ns3\ns4\n").unwrap();
    let mut props = serde_json::Map::new();
    for (i, k) in ["t", "a", "b", "c", "d", "s1", "s2", "s3", "s4"].iter().enumerate() {
        props.insert(
            k.to_string(),
            serde_json::json!({
                "heavy_atoms": 30 - 3 * i as u32,
                "sa": 2.0 + 0.5 * i as f64,
                "tox": 0.05 * i as f64,
                "price": 1.0 + i as f64,
                "logp": 3.0 - 0.4 * i as f64,
            }),
        );
    }
    fs::write(dir.join("props.json"), serde_json::to_string(&props).unwrap()).unwrap();
    fs::write(dir.join("agents.json"), r#"{"dcm":0.8,"thf":0.4,"water":0.0}"#).unwrap();
    ProviderSpec::Files {
        templates: dir.join("templates.jsonl"),
        stock: dir.join("stock.txt"),
        properties: dir.join("props.json"),
        agents: Some(dir.join("agents.json")),
        target: "t".into(),
    }
}

#[test]
fn certified_run_on_files_matches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::new(write_world(dir.path()), Strategy::MoretroSobol);
    config.settings.certify = true;
    config.settings.budget = 1000;
    config.output = Some(dir.path().join("run.json"));
    let report = run_single(&config).unwrap();
    assert!(report.stats.certified);
    let dump = oracle_dump(&config, 1000).unwrap();
    let expected: Vec<Vec<f64>> = dump
        .front_indices
        .iter()
        .map(|&i| dump.mask.project(&dump.route_costs[i]))
        .collect();
    assert_same_front(report.front(), expected);

    let reloaded = RunReport::load(&dir.path().join("run.json")).unwrap();
    assert_eq!(reloaded, report);
    let csv = emit_front_plotdata(&reloaded).unwrap();
    assert_eq!(csv.lines().count(), report.archive.len() + 1);
}

#[test]
fn file_world_routes_use_known_agents() {
    let dir = tempfile::tempdir().unwrap();
    let ProviderSpec::Files {
        templates,
        stock,
        properties,
        agents,
        ..
    } = write_world(dir.path())
    else {
        unreachable!()
    };
    let provider = FileProvider::load(&templates, &stock, &properties).unwrap();
    let objectives = ObjectiveSet::standard(AgentTable::load(&agents.unwrap()).unwrap());
    let mut source = ProviderSource::new(&provider, &objectives, DEFAULT_TOP_K);
    let world = enumerate_routes(&mut source, &"t".into(), 1000, true).unwrap();
    // t1 × 2 conditions × a{a1,a2} + t2 × c{c1, c2·d1}
    assert_eq!(world.routes.len(), 6);
    assert_eq!(objectives.agents.unknown_hits(), 0);
}

#[test]
fn every_sampler_certifies_the_same_front() {
    for seed in 0..8 {
        let world = SyntheticWorld::new(WorldSpec {
            seed: 100 + seed,
            depth_max: 4,
            branching: 2,
            ..WorldSpec::default()
        })
        .unwrap();
        let objectives = ObjectiveSet::standard(world.agent_table());
        let mask = objectives.pareto_mask();
        let oracle = enumerate_routes(
            &mut ProviderSource::new(&world, &objectives, DEFAULT_TOP_K),
            &world.target(),
            100_000,
            true,
        )
        .unwrap();
        for strategy in [SamplingStrategy::Grid, SamplingStrategy::Sobol, SamplingStrategy::Bo] {
            let mut config = SearchConfig::new(mask.clone());
            config.budget = usize::MAX;
            config.pruning = true;
            let mut pool = PoolConfig::new(strategy, 4, 3);
            pool.recycle = true;
            let out = run(&world, &objectives, &world.target(), &config, pool).unwrap();
            assert!(out.stats.certified);
            let got = out.archive.iter().map(|e| mask.project(&e.route.cost)).collect();
            assert_same_front(got, oracle.true_front(&mask).unwrap());
        }
    }
}

#[test]
fn property_heuristics_still_give_valid_routes() {
    let world = SyntheticWorld::new(WorldSpec {
        seed: 77,
        depth_max: 5,
        branching: 3,
        ..WorldSpec::default()
    })
    .unwrap();
    let objectives = ObjectiveSet::standard(world.agent_table());
    let mut config = SearchConfig::new(objectives.pareto_mask());
    config.heuristics = HeuristicMode::Properties;
    config.budget = 60;
    let out = run(&world, &objectives, &world.target(), &config, PoolConfig::new(SamplingStrategy::Bo, 4, 3)).unwrap();
    assert!(out.stats.expansions <= 60);
    for e in &out.archive {
        e.route.validate(&|m| moretro::expansion::ExpansionProvider::in_stock(&world, m)).unwrap();
    }
    // every archived route exists in the final graph
    let in_graph = enumerate_routes(&mut GraphSource::new(&out.graph), &world.target(), 1_000_000, true).unwrap();
    let ids: Vec<Vec<String>> = in_graph.routes.iter().map(|r| r.identity()).collect();
    assert!(out.archive.iter().all(|e| ids.contains(&e.route.identity())));
}
