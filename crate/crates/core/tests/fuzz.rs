// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use rareseed::concolic::InputBytes;
use rareseed::fuzz::{
    branch_targets, compare_experiment, fuzz, CoverageMap, ExperimentConfig, FuzzConfig,
};
use rareseed::paths::{rare_paths, EnumOptions, PathKind};
use rareseed::prob::Rounding;
use rareseed::programs::RUNNING_EXAMPLE;
use rareseed::Analysis;

use common::{gen_program, GenConfig};

fn running() -> Analysis {
    Analysis::from_source(RUNNING_EXAMPLE, Rounding::Paper).unwrap()
}

#[test]
fn campaigns_are_reproducible_and_well_formed() {
    let a = running();
    let exec = a.executor();
    let seeds = [InputBytes::from_slice(b"DOC", 16)];
    let mut cfg = FuzzConfig::new(3000, 4);
    cfg.sample_every = 250;
    cfg.targets = branch_targets(a.graph());
    let s1 = fuzz(&exec, &seeds, &cfg).unwrap();
    let s2 = fuzz(&exec, &seeds, &cfg).unwrap();
    assert_eq!(s1.series, s2.series);
    assert_eq!(s1.first_hit, s2.first_hit);
    assert_eq!(s1.executions, 3000);
    assert_eq!(s1.series.len(), 12);
    assert_eq!(s1.series.last().unwrap().execs, 3000);
    assert!(s1
        .series
        .windows(2)
        .all(|w| w[0].execs < w[1].execs && w[0].covered_edges <= w[1].covered_edges));
    assert_eq!(s1.covered_edges, s1.series.last().unwrap().covered_edges);
    assert_eq!(s1.total_edges, a.graph().edges.len());
    assert_eq!(
        s1.coverage.iter().filter(|e| e.2 > 0).count(),
        s1.covered_edges
    );
    for hit in &s1.time_to_cover {
        if let Some(n) = hit.execs {
            assert!((1..=3000).contains(&n));
        }
    }
    let other = fuzz(
        &exec,
        &seeds,
        &FuzzConfig {
            rng_seed: 5,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_ne!(s1.first_hit, other.first_hit);
}

#[test]
fn seeds_alone_cover_the_union_of_their_traces() {
    for seed in 0..50 {
        let a = Analysis::from_source(&gen_program(seed, &GenConfig::default()), Rounding::Exact)
            .unwrap();
        let exec = a.executor();
        let seeds: Vec<InputBytes> = (0..5u8)
            .map(|k| InputBytes::new(vec![k, k * 3, 15 - k]))
            .collect();
        let mut edges = BTreeSet::new();
        let mut map = CoverageMap::new(a.graph());
        for s in &seeds {
            let t = exec.execute(s);
            edges.extend(t.vertices.windows(2).map(|w| (w[0], w[1])));
            map.record(&t.vertices);
        }
        let stats = fuzz(&exec, &seeds, &FuzzConfig::new(seeds.len(), 0)).unwrap();
        assert_eq!(stats.covered_edges, edges.len(), "seed {seed}");
        assert_eq!(map.covered(), edges.len());
        assert_eq!(stats.corpus_size, seeds.len());
        for &(s, d) in &edges {
            assert!(map.hits(s, d) > 0);
        }
    }
}

#[test]
fn a_rare_seed_reaches_the_deep_edge_immediately() {
    let a = running();
    let exec = a.executor();
    let mut cfg = FuzzConfig::new(1, 0);
    cfg.targets = branch_targets(a.graph());
    let deep = cfg.targets.iter().position(|t| t.name == "b3:T").unwrap();
    let stats = fuzz(&exec, &[InputBytes::from_slice(b"DOC<ATT", 16)], &cfg).unwrap();
    assert_eq!(stats.time_to_cover[deep].execs, Some(1));
    let stats = fuzz(&exec, &[InputBytes::zeros(16)], &cfg).unwrap();
    assert_eq!(stats.time_to_cover[deep].execs, None);
}

#[test]
fn experiment_accounts_for_seed_generation() {
    let a = running();
    let all = a.paths(&EnumOptions::new(PathKind::Ii).bound(60)).unwrap();
    let rare = rare_paths(&all, 3);
    let exec = a.executor();
    let mut cfg = ExperimentConfig::new(2000, 4);
    cfg.sample_every = 500;
    cfg.targets = branch_targets(a.graph());
    cfg.jobs = 1;
    let serial = compare_experiment(&exec, &rare, &cfg).unwrap();
    cfg.jobs = 3;
    let parallel = compare_experiment(&exec, &rare, &cfg).unwrap();
    assert_eq!(serial.csv(), parallel.csv());
    for t in &serial.trials {
        assert_eq!(t.rng_seed, t.trial as u64);
        assert_eq!(t.random.executions, 2000);
        assert_eq!(t.rare.executions + t.gce_executions, 2000);
        assert!(t.gce_executions <= 500);
        assert!(!t.corpus_empty);
    }
    let csv = serial.csv();
    assert!(csv.starts_with("trial,campaign,execs,covered_edges\n"));
    assert_eq!(serial.summary.trials, 4);
    let deep = serial
        .summary
        .targets
        .iter()
        .find(|t| t.name == "b3:T")
        .unwrap();
    assert_eq!(deep.rare_hits, 4);
}
