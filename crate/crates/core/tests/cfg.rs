// SPDX-License-Identifier: Apache-2.0

mod common;

use rareseed::cfg::{
    build_cfg, build_eip_cfg, build_ip_cfg, export_dot, export_json, EdgeKind, Flavor, VertexKind,
    ENTRY_GLOBAL, EXIT_GLOBAL,
};
use rareseed::lang::parse;
use rareseed::programs::RUNNING_EXAMPLE;

use common::{gen_program, GenConfig};

#[test]
fn running_example_shape() {
    let p = parse(RUNNING_EXAMPLE).unwrap();
    let g = build_eip_cfg(&p);
    assert_eq!(g.len(), 29);
    assert_eq!(g.edges.len(), 39);
    let shortcuts: Vec<_> = g
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Shortcut)
        .collect();
    assert_eq!(shortcuts.len(), 2);
    assert_eq!((g.entry, g.exit), (ENTRY_GLOBAL, EXIT_GLOBAL));
    assert_eq!(g.branch_vertices().len(), 9);
    let ip = build_ip_cfg(&p);
    assert_eq!(ip.len(), 29);
    assert_eq!(ip.edges.len(), 37);
    g.validate().unwrap();
    ip.validate().unwrap();
}

#[test]
fn running_example_vertex_roles() {
    let g = build_eip_cfg(&parse(RUNNING_EXAMPLE).unwrap());
    let calls: Vec<_> = g
        .vertices
        .iter()
        .filter(|v| v.kind == VertexKind::Call)
        .map(|v| (v.id, v.callee().unwrap().to_string()))
        .collect();
    assert_eq!(
        calls,
        [(8, "parse_cmt".to_string()), (10, "parse_att".to_string())]
    );
    assert_eq!(g.return_site_of(8), Some(9));
    assert_eq!(g.return_site_of(10), Some(11));
    let cmt = g.proc_info("parse_cmt").unwrap();
    assert_eq!((cmt.entry, cmt.exit), (16, 21));
    assert!(g.has_edge(8, 16) && g.has_edge(21, 9) && g.has_edge(8, 9));
    assert_eq!(g.edge(21, 9).unwrap().kind, EdgeKind::ReturnExit);
}

#[test]
fn random_programs_build_valid_graphs() {
    for seed in 0..300 {
        let p = parse(&gen_program(seed, &GenConfig::default())).unwrap();
        let eip = build_eip_cfg(&p);
        let ip = build_ip_cfg(&p);
        eip.validate()
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        ip.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(eip.len(), ip.len());
        let calls = eip
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::Call)
            .count();
        assert_eq!(eip.edges.len(), ip.edges.len() + calls, "seed {seed}");
        for proc in &p.procedures {
            let g = build_cfg(proc);
            assert_eq!(g.flavor, Flavor::Procedure);
            g.validate()
                .unwrap_or_else(|e| panic!("seed {seed} {}: {e}", proc.name));
        }
        // Same program, same graph.
        assert_eq!(export_dot(&eip), export_dot(&build_eip_cfg(&p)));
    }
}

#[test]
fn every_vertex_is_reachable_from_the_entry() {
    for seed in 0..100 {
        let g = build_eip_cfg(&parse(&gen_program(seed, &GenConfig::default())).unwrap());
        let mut seen = vec![false; g.len()];
        let mut todo = vec![g.entry];
        while let Some(v) = todo.pop() {
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            todo.extend(g.out_edges(v).map(|e| e.dst));
        }
        // Uncalled procedures stay unreachable; inside a reached procedure
        // every vertex must be reached.
        for v in &g.vertices {
            if let Some(pi) = v.proc {
                if seen[g.procs[pi].entry] {
                    assert!(seen[v.id], "seed {seed}: vertex {} unreachable", v.id);
                }
            }
        }
    }
}

#[test]
fn dot_and_json_exports() {
    let g = build_eip_cfg(&parse(RUNNING_EXAMPLE).unwrap());
    let dot = export_dot(&g);
    assert!(dot.starts_with("digraph eip"));
    assert!(dot.trim_end().ends_with('}'));
    assert_eq!(dot.matches("->").count(), g.edges.len());
    let json = serde_json::to_value(export_json(&g, None)).unwrap();
    assert_eq!(json["vertices"].as_array().unwrap().len(), 29);
    assert_eq!(json["edges"].as_array().unwrap().len(), 39);
}
