// SPDX-License-Identifier: Apache-2.0

//! Control-flow graphs: per-procedure, inter-procedural (IP) and extended
//! inter-procedural (EIP) flavors over one shared vertex numbering.

mod build;
mod export;

use std::fmt;

use serde::Serialize;

use crate::lang::{AtomicCond, BranchId, Expr, Stmt};

pub use build::{build_cfg, build_eip_cfg, build_ip_cfg};
pub use export::{export_dot, export_json, GraphJson};

pub type VertexId = usize;

/// Vertex id of the global entry in IP and EIP graphs.
pub const ENTRY_GLOBAL: VertexId = 0;
/// Vertex id of the global exit in IP and EIP graphs.
pub const EXIT_GLOBAL: VertexId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Entry,
    Exit,
    Basic,
    Branch,
    Call,
    ReturnSite,
    EntryGlobal,
    ExitGlobal,
}

impl VertexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::Entry => "entry",
            VertexKind::Exit => "exit",
            VertexKind::Basic => "basic",
            VertexKind::Branch => "branch",
            VertexKind::Call => "call",
            VertexKind::ReturnSite => "return_site",
            VertexKind::EntryGlobal => "entry_global",
            VertexKind::ExitGlobal => "exit_global",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Payload {
    None,
    /// Straight-line declarations and assignments; empty for a join vertex.
    Block(Vec<Stmt>),
    Return(Option<Expr>),
    Branch {
        id: BranchId,
        cond: AtomicCond,
        is_loop: bool,
        bound: Option<u32>,
    },
    Call {
        callee: String,
        /// Program-wide call-site index.
        site: usize,
        args: Vec<Expr>,
        target: Option<String>,
    },
    ReturnSite {
        callee: String,
        site: usize,
        target: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub id: VertexId,
    pub kind: VertexKind,
    /// Index of the owning procedure; `None` for the global vertices.
    pub proc: Option<usize>,
    pub payload: Payload,
}

impl Vertex {
    pub fn branch_id(&self) -> Option<BranchId> {
        match &self.payload {
            Payload::Branch { id, .. } => Some(*id),
            _ => None,
        }
    }

    pub fn cond(&self) -> Option<&AtomicCond> {
        match &self.payload {
            Payload::Branch { cond, .. } => Some(cond),
            _ => None,
        }
    }

    pub fn call_site(&self) -> Option<usize> {
        match &self.payload {
            Payload::Call { site, .. } | Payload::ReturnSite { site, .. } => Some(*site),
            _ => None,
        }
    }

    pub fn callee(&self) -> Option<&str> {
        match &self.payload {
            Payload::Call { callee, .. } | Payload::ReturnSite { callee, .. } => Some(callee),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Flow,
    True,
    False,
    /// call → return-site inside one procedure.
    Shortcut,
    /// call → callee entry.
    CallEntry,
    /// callee exit → return-site.
    ReturnExit,
    /// entry-global → entry-main and exit-main → exit-global.
    Global,
}

impl EdgeKind {
    /// Edge kinds belonging to a single procedure's own CFG.
    pub fn is_intra(self) -> bool {
        matches!(
            self,
            EdgeKind::Flow | EdgeKind::True | EdgeKind::False | EdgeKind::Shortcut
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub kind: EdgeKind,
    /// Loop back edge (body end or `continue`-like flow into a loop header).
    pub back: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Procedure,
    Ip,
    Eip,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Procedure => "procedure",
            Flavor::Ip => "ip",
            Flavor::Eip => "eip",
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "procedure" => Ok(Flavor::Procedure),
            "ip" => Ok(Flavor::Ip),
            "eip" => Ok(Flavor::Eip),
            other => Err(format!("unknown graph flavor `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProcInfo {
    pub name: String,
    pub entry: VertexId,
    pub exit: VertexId,
    /// Call vertices of this procedure in source order.
    pub calls: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfGraph {
    pub flavor: Flavor,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub procs: Vec<ProcInfo>,
    pub entry: VertexId,
    pub exit: VertexId,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl CfGraph {
    pub(crate) fn new(
        flavor: Flavor,
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        procs: Vec<ProcInfo>,
        entry: VertexId,
        exit: VertexId,
    ) -> CfGraph {
        let mut succ = vec![Vec::new(); vertices.len()];
        let mut pred = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            succ[e.src].push(i);
            pred[e.dst].push(i);
        }
        for list in &mut succ {
            // Branch edges may be created false-first; keep the true edge first.
            list.sort_by_key(|&i| edges[i].kind == EdgeKind::False);
        }
        CfGraph {
            flavor,
            vertices,
            edges,
            procs,
            entry,
            exit,
            succ,
            pred,
        }
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Outgoing edges of `v`; a branch lists its true edge first.
    pub fn out_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        self.succ[v].iter().map(move |&i| &self.edges[i])
    }

    pub fn in_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        self.pred[v].iter().map(move |&i| &self.edges[i])
    }

    /// Index into `edges` of the edge `src → dst`, if present.
    pub fn edge_index(&self, src: VertexId, dst: VertexId) -> Option<usize> {
        self.succ
            .get(src)?
            .iter()
            .copied()
            .find(|&i| self.edges[i].dst == dst)
    }

    pub fn edge(&self, src: VertexId, dst: VertexId) -> Option<&Edge> {
        self.edge_index(src, dst).map(|i| &self.edges[i])
    }

    pub fn proc_info(&self, name: &str) -> Option<&ProcInfo> {
        self.procs.iter().find(|p| p.name == name)
    }

    /// Whether the graph contains the edge; used for path validation.
    pub fn has_edge(&self, src: VertexId, dst: VertexId) -> bool {
        self.edge_index(src, dst).is_some()
    }

    /// Branch vertices in ascending branch-id order.
    pub fn branch_vertices(&self) -> Vec<VertexId> {
        let mut out: Vec<(BranchId, VertexId)> = self
            .vertices
            .iter()
            .filter_map(|v| v.branch_id().map(|b| (b, v.id)))
            .collect();
        out.sort();
        out.into_iter().map(|(_, v)| v).collect()
    }

    /// The return-site vertex paired with a call vertex.
    pub fn return_site_of(&self, call: VertexId) -> Option<VertexId> {
        let site = self.vertices[call].call_site()?;
        self.vertices
            .iter()
            .find(|v| v.kind == VertexKind::ReturnSite && v.call_site() == Some(site))
            .map(|v| v.id)
    }

    pub fn label(&self, v: VertexId) -> String {
        let vx = &self.vertices[v];
        let proc_name = vx.proc.map(|p| self.procs[p].name.as_str()).unwrap_or("");
        match (&vx.kind, &vx.payload) {
            (VertexKind::EntryGlobal, _) => "entry-global".to_string(),
            (VertexKind::ExitGlobal, _) => "exit-global".to_string(),
            (VertexKind::Entry, _) => format!("entry-{proc_name}"),
            (VertexKind::Exit, _) => format!("exit-{proc_name}"),
            (_, Payload::Block(stmts)) if stmts.is_empty() => "skip".to_string(),
            (_, Payload::Block(stmts)) => {
                stmts.iter().map(stmt_text).collect::<Vec<_>>().join("; ")
            }
            (_, Payload::Return(None)) => "return".to_string(),
            (_, Payload::Return(Some(e))) => format!("return {e}"),
            (_, Payload::Branch { cond, is_loop, .. }) => {
                if *is_loop {
                    format!("while {cond}")
                } else {
                    format!("if {cond}")
                }
            }
            (_, Payload::Call { callee, site, .. }) => format!("call-{callee}#{site}"),
            (_, Payload::ReturnSite { callee, site, .. }) => format!("return-{callee}#{site}"),
            (_, Payload::None) => String::new(),
        }
    }

    /// Checks the structural invariants of the flavor; returns a description
    /// of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for v in &self.vertices {
            let outs: Vec<&Edge> = self.out_edges(v.id).collect();
            match v.kind {
                VertexKind::Branch => {
                    if outs.len() != 2
                        || outs[0].kind != EdgeKind::True
                        || outs[1].kind != EdgeKind::False
                    {
                        return Err(format!(
                            "branch {} must have a true then a false edge",
                            v.id
                        ));
                    }
                }
                VertexKind::EntryGlobal if self.in_edges(v.id).next().is_some() => {
                    return Err("entry-global has incoming edges".to_string());
                }
                VertexKind::ExitGlobal if !outs.is_empty() => {
                    return Err("exit-global has outgoing edges".to_string());
                }
                VertexKind::Call => {
                    let has = |k: EdgeKind| outs.iter().any(|e| e.kind == k);
                    let ok = match self.flavor {
                        Flavor::Procedure => has(EdgeKind::Shortcut) && outs.len() == 1,
                        Flavor::Ip => has(EdgeKind::CallEntry) && outs.len() == 1,
                        Flavor::Eip => {
                            has(EdgeKind::CallEntry) && has(EdgeKind::Shortcut) && outs.len() == 2
                        }
                    };
                    if !ok {
                        return Err(format!("call vertex {} has wrong successors", v.id));
                    }
                }
                _ => {}
            }
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if !seen.insert((e.src, e.dst)) {
                return Err(format!("duplicate edge {} -> {}", e.src, e.dst));
            }
        }
        // Every procedure vertex lies on an entry-pr to exit-pr path of its own
        // procedure; the global vertices are wired to main.
        for (pi, info) in self.procs.iter().enumerate() {
            let fwd = self.reach_intra(info.entry, true);
            let bwd = self.reach_intra(info.exit, false);
            if let Some(v) = self
                .vertices
                .iter()
                .find(|v| v.proc == Some(pi) && (!fwd[v.id] || !bwd[v.id]))
            {
                return Err(format!("vertex {} is not on an entry-to-exit path", v.id));
            }
        }
        if self.flavor != Flavor::Procedure {
            let reaches_main = self
                .out_edges(self.entry)
                .any(|e| e.kind == EdgeKind::Global);
            let from_main = self.in_edges(self.exit).any(|e| e.kind == EdgeKind::Global);
            if !reaches_main || !from_main {
                return Err("global vertices are not wired to main".to_string());
            }
        }
        Ok(())
    }

    /// Reachability inside one procedure; a call vertex steps to its
    /// return-site whether or not the shortcut edge is present.
    fn reach_intra(&self, start: VertexId, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            let mut next: Vec<VertexId> = if forward {
                self.out_edges(v)
                    .filter(|e| e.kind.is_intra())
                    .map(|e| e.dst)
                    .collect()
            } else {
                self.in_edges(v)
                    .filter(|e| e.kind.is_intra())
                    .map(|e| e.src)
                    .collect()
            };
            match (forward, self.vertices[v].kind) {
                (true, VertexKind::Call) => next.extend(self.return_site_of(v)),
                (false, VertexKind::ReturnSite) => next.extend(
                    self.vertices
                        .iter()
                        .find(|c| {
                            c.kind == VertexKind::Call
                                && c.call_site() == self.vertices[v].call_site()
                        })
                        .map(|c| c.id),
                ),
                _ => {}
            }
            for n in next {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        seen
    }
}

fn stmt_text(s: &Stmt) -> String {
    match s {
        Stmt::Decl { name, init: None } => format!("int {name}"),
        Stmt::Decl {
            name,
            init: Some(e),
        } => format!("int {name} = {e}"),
        Stmt::Assign { target, value } => format!("{target} = {value}"),
        other => format!("{other:?}"),
    }
}

impl fmt::Display for CfGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vertices {
            let succ: Vec<String> = self.out_edges(v.id).map(|e| e.dst.to_string()).collect();
            writeln!(
                f,
                "{:>3} {:<12} {} -> [{}]",
                v.id,
                v.kind.as_str(),
                self.label(v.id),
                succ.join(", ")
            )?;
        }
        Ok(())
    }
}
