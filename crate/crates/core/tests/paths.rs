// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::One;
use rareseed::cfg::{CfGraph, EdgeKind, VertexId, VertexKind};
use rareseed::paths::{
    format_sci, path_probability, rare_paths, CfPath, EnumOptions, PathError, PathKind,
};
use rareseed::prob::Rounding;
use rareseed::programs::RUNNING_EXAMPLE;
use rareseed::Analysis;

use common::{gen_program, GenConfig};

/// Plain depth-first walk over the graph with a call stack and no pruning.
fn oracle(g: &CfGraph, kind: PathKind, bound: usize, proc: &str) -> BTreeSet<Vec<VertexId>> {
    fn walk(
        g: &CfGraph,
        kind: PathKind,
        bound: usize,
        target: VertexId,
        path: &mut Vec<VertexId>,
        stack: &mut Vec<VertexId>,
        out: &mut BTreeSet<Vec<VertexId>>,
    ) {
        let v = *path.last().unwrap();
        if v == target && stack.is_empty() {
            out.insert(path.clone());
            return;
        }
        if path.len() == bound {
            return;
        }
        let edges: Vec<_> = g.out_edges(v).copied().collect();
        for e in edges {
            match (kind, e.kind) {
                (PathKind::Intra, k) if !k.is_intra() => continue,
                (PathKind::Inter, EdgeKind::Shortcut) => continue,
                (PathKind::Intra, _) => {
                    path.push(e.dst);
                    walk(g, kind, bound, target, path, stack, out);
                    path.pop();
                }
                (_, EdgeKind::CallEntry) => {
                    stack.push(g.return_site_of(v).unwrap());
                    path.push(e.dst);
                    walk(g, kind, bound, target, path, stack, out);
                    path.pop();
                    stack.pop();
                }
                (_, EdgeKind::ReturnExit) => {
                    if stack.last() != Some(&e.dst) {
                        continue;
                    }
                    let rs = stack.pop().unwrap();
                    path.push(e.dst);
                    walk(g, kind, bound, target, path, stack, out);
                    path.pop();
                    stack.push(rs);
                }
                (_, EdgeKind::Global) if !stack.is_empty() => continue,
                _ => {
                    path.push(e.dst);
                    walk(g, kind, bound, target, path, stack, out);
                    path.pop();
                }
            }
        }
    }
    let (start, target) = match kind {
        PathKind::Intra => {
            let p = g.proc_info(proc).unwrap();
            (p.entry, p.exit)
        }
        _ => (g.entry, g.exit),
    };
    let mut out = BTreeSet::new();
    walk(
        g,
        kind,
        bound,
        target,
        &mut vec![start],
        &mut Vec::new(),
        &mut out,
    );
    if kind == PathKind::Inter && g.vertices.iter().any(|v| v.kind == VertexKind::Call) {
        out.retain(|p| p.iter().any(|&v| g.vertex(v).kind == VertexKind::Call));
    }
    out
}

fn vertex_sets(paths: &[CfPath]) -> BTreeSet<Vec<VertexId>> {
    paths.iter().map(|p| p.vertices.clone()).collect()
}

fn small() -> GenConfig {
    GenConfig {
        procs: 2,
        max_depth: 1,
        max_stmts: 2,
        ..GenConfig::default()
    }
}

#[test]
fn enumeration_matches_brute_force_on_random_programs() {
    let mut checked = 0;
    for seed in 0..120 {
        let a = Analysis::from_source(&gen_program(seed, &small()), Rounding::Exact).unwrap();
        for kind in [PathKind::Ii, PathKind::Inter, PathKind::Intra] {
            for bound in [8, 16, 22] {
                let opts = EnumOptions::new(kind).bound(bound).max_paths(20_000);
                let got = match a.paths(&opts) {
                    Ok(p) => p,
                    Err(PathError::CapExceeded { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                let want = oracle(a.graph(), kind, bound, "main");
                let set = vertex_sets(&got);
                assert_eq!(set.len(), got.len(), "seed {seed}: duplicates");
                assert_eq!(set, want, "seed {seed} {kind} bound {bound}");
                for (i, p) in got.iter().enumerate() {
                    assert_eq!(p.index, i + 1);
                    assert_eq!(
                        p.probability,
                        path_probability(&a.prob, &p.vertices).unwrap()
                    );
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 500, "only {checked} cases checked");
}

#[test]
fn running_example_counts() {
    let a = Analysis::from_source(RUNNING_EXAMPLE, Rounding::Paper).unwrap();
    let count = |kind| a.paths(&EnumOptions::new(kind).bound(60)).unwrap().len();
    assert_eq!(count(PathKind::Ii), 43);
    assert_eq!(count(PathKind::Intra), 5);
    assert_eq!(count(PathKind::Inter), 24);
    let g = a.graph();
    for kind in [PathKind::Ii, PathKind::Inter, PathKind::Intra] {
        let paths = a.paths(&EnumOptions::new(kind).bound(60)).unwrap();
        assert_eq!(vertex_sets(&paths), oracle(g, kind, 60, "main"));
    }
    let longest = a
        .paths(&EnumOptions::new(PathKind::Ii).bound(60))
        .unwrap()
        .iter()
        .map(CfPath::len)
        .max();
    assert_eq!(longest, Some(27));
    for (name, n) in [("parse_cmt", 3), ("parse_att", 4)] {
        let p = a
            .paths(&EnumOptions::new(PathKind::Intra).procedure(name))
            .unwrap();
        assert_eq!(p.len(), n, "{name}");
    }
}

#[test]
fn inter_and_intra_paths_are_ii_paths() {
    for seed in 0..60 {
        let a = Analysis::from_source(&gen_program(seed, &small()), Rounding::Exact).unwrap();
        let opts = |k| EnumOptions::new(k).bound(18).max_paths(50_000);
        let (Ok(ii), Ok(inter), Ok(intra)) = (
            a.paths(&opts(PathKind::Ii)),
            a.paths(&opts(PathKind::Inter)),
            a.paths(&opts(PathKind::Intra)),
        ) else {
            continue;
        };
        let ii = vertex_sets(&ii);
        for p in &inter {
            assert!(
                ii.contains(&p.vertices),
                "seed {seed}: inter {:?}",
                p.vertices
            );
        }
        for p in &intra {
            // Lifting adds two vertices.
            if p.len() + 2 <= 18 {
                assert!(
                    ii.contains(&p.lifted(a.graph())),
                    "seed {seed}: intra {:?}",
                    p.vertices
                );
            }
        }
    }
}

#[test]
fn raising_the_bound_only_adds_paths() {
    for seed in 0..40 {
        let a = Analysis::from_source(&gen_program(seed, &small()), Rounding::Exact).unwrap();
        let mut prev: BTreeSet<Vec<VertexId>> = BTreeSet::new();
        for bound in 2..24 {
            let Ok(p) = a.paths(
                &EnumOptions::new(PathKind::Ii)
                    .bound(bound)
                    .max_paths(50_000),
            ) else {
                break;
            };
            let cur = vertex_sets(&p);
            assert!(prev.is_subset(&cur), "seed {seed} bound {bound}");
            assert!(p.iter().all(|x| x.len() <= bound));
            prev = cur;
        }
    }
}

#[test]
fn rare_paths_are_the_smallest_under_the_total_order() {
    let a = Analysis::from_source(RUNNING_EXAMPLE, Rounding::Paper).unwrap();
    let all = a.paths(&EnumOptions::new(PathKind::Ii).bound(60)).unwrap();
    let rare = rare_paths(&all, 3);
    assert!(!rare.short);
    let idx: Vec<usize> = rare.paths.iter().map(|p| p.index).collect();
    assert_eq!(idx, [24, 23, 14]);
    let probs: Vec<String> = rare
        .paths
        .iter()
        .map(|p| format_sci(&p.probability, 3))
        .collect();
    assert_eq!(probs, ["8.16e-18", "8.16e-18", "8.19e-18"]);
    // Same probability: fewer vertices first.
    assert_eq!(rare.paths[0].probability, rare.paths[1].probability);
    assert!(rare.paths[0].len() < rare.paths[1].len());
    for p in &all {
        if !idx.contains(&p.index) {
            assert!(p.probability >= rare.paths[2].probability);
        }
    }
    let short = rare_paths(&all[..2], 3);
    assert!(short.short && short.paths.len() == 2);
}

#[test]
fn straight_line_probability_is_one() {
    let a = Analysis::from_source("int main() { int x = 1; return x; }", Rounding::Exact).unwrap();
    let p = a.paths(&EnumOptions::new(PathKind::Ii)).unwrap();
    assert_eq!(p.len(), 1);
    assert!(p[0].probability.is_one());
    assert_eq!(p[0].probability, BigRational::one());
}

#[test]
fn errors() {
    let a = Analysis::from_source(RUNNING_EXAMPLE, Rounding::Paper).unwrap();
    assert_eq!(
        a.paths(&EnumOptions::new(PathKind::Ii).bound(1))
            .unwrap_err(),
        PathError::BadBound(1)
    );
    assert!(matches!(
        a.paths(&EnumOptions::new(PathKind::Intra).procedure("nope")),
        Err(PathError::UnknownProcedure(_))
    ));
    match a.paths(&EnumOptions::new(PathKind::Ii).bound(60).max_paths(10)) {
        Err(PathError::CapExceeded { cap, partial }) => {
            assert_eq!(cap, 10);
            assert_eq!(partial.len(), 10);
        }
        other => panic!("{other:?}"),
    }
}
