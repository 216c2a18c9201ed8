// SPDX-License-Identifier: Apache-2.0

use crate::lang::{Procedure, Program, Stmt};

use super::*;

#[derive(Debug, Clone, Copy)]
struct Pending {
    src: VertexId,
    kind: EdgeKind,
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    next_site: usize,
    loops: Vec<Vec<Pending>>,
    returns: Vec<Pending>,
}

impl Builder {
    fn add(&mut self, kind: VertexKind, proc: Option<usize>, payload: Payload) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(Vertex {
            id,
            kind,
            proc,
            payload,
        });
        id
    }

    fn edge(&mut self, src: VertexId, dst: VertexId, kind: EdgeKind, back: bool) {
        self.edges.push(Edge {
            src,
            dst,
            kind,
            back,
        });
    }

    fn has_edge(&self, src: VertexId, dst: VertexId) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    /// Wires dangling edges to `dst`. A second edge between the same pair
    /// (an empty `if` arm) is routed through a fresh join vertex instead.
    fn connect(&mut self, pending: &[Pending], dst: VertexId, proc: usize, back: bool) {
        for p in pending {
            if self.has_edge(p.src, dst) {
                let skip = self.add(VertexKind::Basic, Some(proc), Payload::Block(Vec::new()));
                self.edge(p.src, skip, p.kind, false);
                self.edge(skip, dst, EdgeKind::Flow, back);
            } else {
                self.edge(p.src, dst, p.kind, back);
            }
        }
    }

    fn procedure(&mut self, index: usize, proc: &Procedure) -> ProcInfo {
        let entry = self.add(VertexKind::Entry, Some(index), Payload::None);
        self.returns.clear();
        let out = self.block(
            index,
            &proc.body,
            vec![Pending {
                src: entry,
                kind: EdgeKind::Flow,
            }],
        );
        let exit = self.add(VertexKind::Exit, Some(index), Payload::None);
        let mut tail = std::mem::take(&mut self.returns);
        tail.extend(out);
        self.connect(&tail, exit, index, false);
        let calls = self
            .vertices
            .iter()
            .filter(|v| v.proc == Some(index) && v.kind == VertexKind::Call)
            .map(|v| v.id)
            .collect();
        ProcInfo {
            name: proc.name.clone(),
            entry,
            exit,
            calls,
        }
    }

    fn flush(&mut self, proc: usize, buf: &mut Vec<Stmt>, pending: &mut Vec<Pending>) {
        if buf.is_empty() {
            return;
        }
        let v = self.add(
            VertexKind::Basic,
            Some(proc),
            Payload::Block(std::mem::take(buf)),
        );
        self.connect(pending, v, proc, false);
        *pending = vec![Pending {
            src: v,
            kind: EdgeKind::Flow,
        }];
    }

    fn block(&mut self, proc: usize, stmts: &[Stmt], mut pending: Vec<Pending>) -> Vec<Pending> {
        let mut buf: Vec<Stmt> = Vec::new();
        for s in stmts {
            if pending.is_empty() {
                // Statements after `return` or `break` are unreachable.
                break;
            }
            match s {
                Stmt::Decl { .. } | Stmt::Assign { .. } => buf.push(s.clone()),
                Stmt::If {
                    id,
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    self.flush(proc, &mut buf, &mut pending);
                    let b = self.add(
                        VertexKind::Branch,
                        Some(proc),
                        Payload::Branch {
                            id: *id,
                            cond: cond.clone(),
                            is_loop: false,
                            bound: None,
                        },
                    );
                    self.connect(&pending, b, proc, false);
                    let mut out = self.block(
                        proc,
                        then_branch,
                        vec![Pending {
                            src: b,
                            kind: EdgeKind::True,
                        }],
                    );
                    out.extend(self.block(
                        proc,
                        else_branch,
                        vec![Pending {
                            src: b,
                            kind: EdgeKind::False,
                        }],
                    ));
                    pending = out;
                }
                Stmt::While {
                    id,
                    cond,
                    bound,
                    body,
                } => {
                    self.flush(proc, &mut buf, &mut pending);
                    let h = self.add(
                        VertexKind::Branch,
                        Some(proc),
                        Payload::Branch {
                            id: *id,
                            cond: cond.clone(),
                            is_loop: true,
                            bound: *bound,
                        },
                    );
                    self.connect(&pending, h, proc, false);
                    self.loops.push(Vec::new());
                    let body_out = self.block(
                        proc,
                        body,
                        vec![Pending {
                            src: h,
                            kind: EdgeKind::True,
                        }],
                    );
                    self.connect(&body_out, h, proc, true);
                    let breaks = self.loops.pop().unwrap_or_default();
                    pending = vec![Pending {
                        src: h,
                        kind: EdgeKind::False,
                    }];
                    pending.extend(breaks);
                }
                Stmt::Call {
                    target,
                    callee,
                    args,
                } => {
                    self.flush(proc, &mut buf, &mut pending);
                    let site = self.next_site;
                    self.next_site += 1;
                    let c = self.add(
                        VertexKind::Call,
                        Some(proc),
                        Payload::Call {
                            callee: callee.clone(),
                            site,
                            args: args.clone(),
                            target: target.clone(),
                        },
                    );
                    self.connect(&pending, c, proc, false);
                    let rs = self.add(
                        VertexKind::ReturnSite,
                        Some(proc),
                        Payload::ReturnSite {
                            callee: callee.clone(),
                            site,
                            target: target.clone(),
                        },
                    );
                    self.edge(c, rs, EdgeKind::Shortcut, false);
                    pending = vec![Pending {
                        src: rs,
                        kind: EdgeKind::Flow,
                    }];
                }
                Stmt::Break => {
                    self.flush(proc, &mut buf, &mut pending);
                    let p = std::mem::take(&mut pending);
                    self.loops
                        .last_mut()
                        .expect("parser rejects break outside loops")
                        .extend(p);
                }
                Stmt::Return(value) => {
                    self.flush(proc, &mut buf, &mut pending);
                    let r = self.add(
                        VertexKind::Basic,
                        Some(proc),
                        Payload::Return(value.clone()),
                    );
                    self.connect(&pending, r, proc, false);
                    self.returns.push(Pending {
                        src: r,
                        kind: EdgeKind::Flow,
                    });
                    pending.clear();
                }
            }
        }
        self.flush(proc, &mut buf, &mut pending);
        pending
    }
}

/// Control-flow graph of a single procedure, numbered from 0 in source order.
/// Each call is a call vertex joined to its return-site by a shortcut edge.
pub fn build_cfg(proc: &Procedure) -> CfGraph {
    let mut b = Builder::default();
    let info = b.procedure(0, proc);
    let (entry, exit) = (info.entry, info.exit);
    CfGraph::new(
        Flavor::Procedure,
        b.vertices,
        b.edges,
        vec![info],
        entry,
        exit,
    )
}

fn whole_program(p: &Program) -> (Builder, Vec<ProcInfo>) {
    let mut b = Builder::default();
    b.add(VertexKind::EntryGlobal, None, Payload::None);
    b.add(VertexKind::ExitGlobal, None, Payload::None);
    let procs = p
        .procedures
        .iter()
        .enumerate()
        .map(|(i, proc)| b.procedure(i, proc))
        .collect();
    (b, procs)
}

fn interprocedural(p: &Program, keep_shortcuts: bool) -> CfGraph {
    let (mut b, procs) = whole_program(p);
    if !keep_shortcuts {
        b.edges.retain(|e| e.kind != EdgeKind::Shortcut);
    }
    let main = &procs[p
        .procedure_index(&p.entry)
        .expect("checked program has main")];
    b.edge(ENTRY_GLOBAL, main.entry, EdgeKind::Global, false);
    b.edge(main.exit, EXIT_GLOBAL, EdgeKind::Global, false);
    let calls: Vec<(VertexId, String, usize)> = b
        .vertices
        .iter()
        .filter_map(|v| match &v.payload {
            Payload::Call { callee, site, .. } => Some((v.id, callee.clone(), *site)),
            _ => None,
        })
        .collect();
    for (call, callee, site) in calls {
        let target = procs
            .iter()
            .find(|pi| pi.name == callee)
            .expect("checked program binds every call");
        let rs = b
            .vertices
            .iter()
            .find(|v| v.kind == VertexKind::ReturnSite && v.call_site() == Some(site))
            .map(|v| v.id)
            .expect("call has a return-site");
        b.edge(call, target.entry, EdgeKind::CallEntry, false);
        b.edge(target.exit, rs, EdgeKind::ReturnExit, false);
    }
    let flavor = if keep_shortcuts {
        Flavor::Eip
    } else {
        Flavor::Ip
    };
    CfGraph::new(
        flavor,
        b.vertices,
        b.edges,
        procs,
        ENTRY_GLOBAL,
        EXIT_GLOBAL,
    )
}

/// Inter-procedural CFG: all procedure CFGs, calls wired to callee entry and
/// callee exit wired back to every return-site, without shortcut edges.
pub fn build_ip_cfg(p: &Program) -> CfGraph {
    interprocedural(p, false)
}

/// IP-CFG plus the call → return-site shortcut edge of every call.
pub fn build_eip_cfg(p: &Program) -> CfGraph {
    interprocedural(p, true)
}
