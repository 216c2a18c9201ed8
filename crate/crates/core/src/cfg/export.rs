// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use super::*;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Deterministic Graphviz rendering. Branch edges are labeled `T`/`F`,
/// shortcut edges are dashed.
pub fn export_dot(g: &CfGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", g.flavor.as_str());
    out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
    for v in &g.vertices {
        let shape = match v.kind {
            VertexKind::Branch => "diamond",
            VertexKind::Entry | VertexKind::Exit => "oval",
            VertexKind::EntryGlobal | VertexKind::ExitGlobal => "doubleoctagon",
            _ => "box",
        };
        let _ = writeln!(
            out,
            "  n{} [label=\"{}: {}\", shape={}];",
            v.id,
            v.id,
            escape(&g.label(v.id)),
            shape
        );
    }
    for e in &g.edges {
        let mut attrs = Vec::new();
        match e.kind {
            EdgeKind::True => attrs.push("label=\"T\"".to_string()),
            EdgeKind::False => attrs.push("label=\"F\"".to_string()),
            EdgeKind::Shortcut => attrs.push("style=dashed".to_string()),
            _ => {}
        }
        if attrs.is_empty() {
            let _ = writeln!(out, "  n{} -> n{};", e.src, e.dst);
        } else {
            let _ = writeln!(out, "  n{} -> n{} [{}];", e.src, e.dst, attrs.join(", "));
        }
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexJson {
    pub id: VertexId,
    pub kind: VertexKind,
    pub label: String,
    pub procedure: Option<String>,
}

/// JSON graph dump: `{vertices:[{id,kind,label}], edges:[[src,dst,prob?]]}`.
#[derive(Debug, Clone, Serialize)]
pub struct GraphJson {
    pub flavor: Flavor,
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<Vec<Value>>,
}

/// Builds the JSON dump; `score` supplies an optional per-edge annotation
/// (indexed like `g.edges`).
pub fn export_json(g: &CfGraph, score: Option<&dyn Fn(usize) -> Value>) -> GraphJson {
    GraphJson {
        flavor: g.flavor,
        vertices: g
            .vertices
            .iter()
            .map(|v| VertexJson {
                id: v.id,
                kind: v.kind,
                label: g.label(v.id),
                procedure: v.proc.map(|p| g.procs[p].name.clone()),
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut row = vec![Value::from(e.src), Value::from(e.dst)];
                if let Some(f) = score {
                    row.push(f(i));
                }
                row
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    #[test]
    fn two_vertex_graph_dot() {
        let p = parse("void main() { }").unwrap();
        let dot = export_dot(&build_cfg(p.main()));
        assert_eq!(dot.matches(" [label=").count(), 2);
        assert_eq!(dot.matches("->").count(), 1);
    }

    #[test]
    fn branch_edges_are_labeled() {
        let p = parse("int main() { if (in[0] == 'a') { return 1; } return 0; }").unwrap();
        let dot = export_dot(&build_eip_cfg(&p));
        assert!(dot.contains("[label=\"T\"]"));
        assert!(dot.contains("[label=\"F\"]"));
        assert_eq!(dot, export_dot(&build_eip_cfg(&p)));
    }

    #[test]
    fn json_dump_has_one_row_per_edge() {
        let p = parse("void f() { } int main() { f(); return 0; }").unwrap();
        let g = build_eip_cfg(&p);
        let j = export_json(&g, None);
        assert_eq!(j.vertices.len(), g.len());
        assert_eq!(j.edges.len(), g.edges.len());
        assert!(j.edges.iter().all(|r| r.len() == 2));
    }
}
