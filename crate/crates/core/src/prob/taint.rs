// SPDX-License-Identifier: Apache-2.0

//! Forward taint from input bytes, over-approximating input dependence.
//!
//! The analysis is flow-insensitive within a procedure and tracks implicit
//! flows: anything assigned or returned under an input-dependent branch is
//! tainted, as is everything after such a branch when one of its arms can
//! leave the enclosing block early.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::cfg::{CfGraph, VertexId};
use crate::lang::{AtomicCond, BranchId, Expr, Operand, Program, Scopes, Slot, Stmt};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Origin {
    Input(String),
    Var(Slot),
    Control(BranchId),
    Return(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DepResult {
    /// Input-dependent branch vertices.
    pub input_dependent: BTreeSet<VertexId>,
    pub dependent_branches: BTreeSet<BranchId>,
    /// Dependency chain per input-dependent branch vertex, for diagnostics.
    pub reasons: BTreeMap<VertexId, Vec<String>>,
    /// Variables (by procedure, name) that only ever hold a copy of one
    /// input byte; conditions over them are countable.
    pub byte_copies: BTreeSet<(Option<String>, String)>,
}

impl DepResult {
    pub fn is_dependent(&self, v: VertexId) -> bool {
        self.input_dependent.contains(&v)
    }

    /// Whether `name`, as seen from procedure `proc`, is a byte copy.
    pub fn is_byte_copy(&self, proc: &str, name: &str) -> bool {
        self.byte_copies
            .contains(&(Some(proc.to_string()), name.to_string()))
            || self.byte_copies.contains(&(None, name.to_string()))
    }
}

struct State<'a> {
    p: &'a Program,
    scopes: &'a Scopes,
    vars: HashMap<Slot, Origin>,
    ret: Vec<Option<Origin>>,
    ctx: Vec<Option<Origin>>,
    branches: BTreeMap<BranchId, Origin>,
    changed: bool,
}

impl State<'_> {
    fn taint_var(&mut self, slot: Slot, o: Origin) {
        if let std::collections::hash_map::Entry::Vacant(e) = self.vars.entry(slot) {
            e.insert(o);
            self.changed = true;
        }
    }

    fn expr(&self, proc: usize, e: &Expr) -> Option<Origin> {
        match e {
            Expr::Lit(_) => None,
            Expr::Input(r) => Some(Origin::Input(r.to_string())),
            Expr::Var(v) => {
                let s = self.scopes.resolve(proc, v);
                self.vars.contains_key(&s).then_some(Origin::Var(s))
            }
            Expr::Neg(x) => self.expr(proc, x),
            Expr::Bin(_, l, r) => self.expr(proc, l).or_else(|| self.expr(proc, r)),
        }
    }

    fn operand(&self, proc: usize, o: &Operand) -> Option<Origin> {
        match o {
            Operand::Input(r) => Some(Origin::Input(r.to_string())),
            Operand::Var(v) => self.expr(proc, &Expr::Var(v.clone())),
            Operand::Lit(_) => None,
        }
    }

    fn cond(&self, proc: usize, c: &AtomicCond) -> Option<Origin> {
        self.operand(proc, &c.lhs)
            .or_else(|| self.operand(proc, &c.rhs))
    }

    fn block(&mut self, proc: usize, stmts: &[Stmt], ctx: Option<Origin>) {
        let mut ctx = ctx;
        for s in stmts {
            match s {
                Stmt::Decl { name, init } => {
                    let o = init.as_ref().and_then(|e| self.expr(proc, e));
                    if let Some(o) = o.or_else(|| ctx.clone()) {
                        self.taint_var(self.scopes.resolve(proc, name), o);
                    }
                }
                Stmt::Assign { target, value } => {
                    if let Some(o) = self.expr(proc, value).or_else(|| ctx.clone()) {
                        self.taint_var(self.scopes.resolve(proc, target), o);
                    }
                }
                Stmt::Call {
                    target,
                    callee,
                    args,
                } => {
                    let ci = self.p.procedure_index(callee).expect("bound callee");
                    for (i, a) in args.iter().enumerate() {
                        if let Some(o) = self.expr(proc, a).or_else(|| ctx.clone()) {
                            self.taint_var(Slot::Local(ci, i), o);
                        }
                    }
                    if let Some(o) = &ctx {
                        if self.ctx[ci].is_none() {
                            self.ctx[ci] = Some(o.clone());
                            self.changed = true;
                        }
                    }
                    if let Some(t) = target {
                        let o = self.ret[ci]
                            .as_ref()
                            .map(|_| Origin::Return(ci))
                            .or_else(|| ctx.clone());
                        if let Some(o) = o {
                            self.taint_var(self.scopes.resolve(proc, t), o);
                        }
                    }
                }
                Stmt::Return(value) => {
                    let o = value
                        .as_ref()
                        .and_then(|e| self.expr(proc, e))
                        .or_else(|| ctx.clone());
                    if let (Some(o), None) = (o, &self.ret[proc]) {
                        self.ret[proc] = Some(o);
                        self.changed = true;
                    }
                }
                Stmt::Break => {}
                Stmt::If {
                    id,
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    let dep = self.mark_branch(proc, *id, cond);
                    let inner = ctx.clone().or_else(|| dep.then_some(Origin::Control(*id)));
                    self.block(proc, then_branch, inner.clone());
                    self.block(proc, else_branch, inner.clone());
                    if dep && (leaves_early(then_branch) || leaves_early(else_branch)) {
                        ctx = inner;
                    }
                }
                Stmt::While { id, cond, body, .. } => {
                    let dep = self.mark_branch(proc, *id, cond);
                    let inner = ctx.clone().or_else(|| dep.then_some(Origin::Control(*id)));
                    self.block(proc, body, inner.clone());
                    if dep && contains_return(body) {
                        ctx = inner;
                    }
                }
            }
        }
    }

    fn mark_branch(&mut self, proc: usize, id: BranchId, cond: &AtomicCond) -> bool {
        if self.branches.contains_key(&id) {
            return true;
        }
        match self.cond(proc, cond) {
            Some(o) => {
                self.branches.insert(id, o);
                self.changed = true;
                true
            }
            None => false,
        }
    }

    fn chain(&self, o: &Origin, seen: &mut HashSet<String>, out: &mut Vec<String>) {
        let key = format!("{o:?}");
        if !seen.insert(key) || out.len() > 16 {
            return;
        }
        match o {
            Origin::Input(r) => out.push(format!("reads {r}")),
            Origin::Var(s) => {
                let owner = match s {
                    Slot::Global(_) => "global".to_string(),
                    Slot::Local(p, _) => self.p.procedures[*p].name.clone(),
                };
                out.push(format!(
                    "`{}` ({owner}) is tainted",
                    self.scopes.slot_name(*s)
                ));
                if let Some(next) = self.vars.get(s) {
                    self.chain(next, seen, out);
                }
            }
            Origin::Control(b) => {
                out.push(format!("assigned under input-dependent branch {b}"));
                if let Some(next) = self.branches.get(b) {
                    self.chain(next, seen, out);
                }
            }
            Origin::Return(p) => {
                out.push(format!(
                    "return value of `{}` is tainted",
                    self.p.procedures[*p].name
                ));
                if let Some(next) = &self.ret[*p] {
                    self.chain(next, seen, out);
                }
            }
        }
    }
}

fn leaves_early(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Return(_) | Stmt::Break => true,
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => leaves_early(then_branch) || leaves_early(else_branch),
        Stmt::While { body, .. } => contains_return(body),
        _ => false,
    })
}

fn contains_return(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Return(_) => true,
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => contains_return(then_branch) || contains_return(else_branch),
        Stmt::While { body, .. } => contains_return(body),
        _ => false,
    })
}

fn byte_copies(p: &Program, scopes: &Scopes) -> BTreeSet<(Option<String>, String)> {
    let mut all_input: HashMap<Slot, bool> = HashMap::new();
    fn walk(scopes: &Scopes, proc: usize, stmts: &[Stmt], acc: &mut HashMap<Slot, bool>) {
        for s in stmts {
            match s {
                Stmt::Decl { name, init } => {
                    let ok = matches!(init, Some(Expr::Input(_)));
                    let e = acc.entry(scopes.resolve(proc, name)).or_insert(true);
                    *e &= ok;
                }
                Stmt::Assign { target, value } => {
                    let ok = matches!(value, Expr::Input(_));
                    let e = acc.entry(scopes.resolve(proc, target)).or_insert(true);
                    *e &= ok;
                }
                Stmt::Call {
                    target: Some(t), ..
                } => {
                    acc.insert(scopes.resolve(proc, t), false);
                }
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(scopes, proc, then_branch, acc);
                    walk(scopes, proc, else_branch, acc);
                }
                Stmt::While { body, .. } => walk(scopes, proc, body, acc),
                _ => {}
            }
        }
    }
    for (i, proc) in p.procedures.iter().enumerate() {
        walk(scopes, i, &proc.body, &mut all_input);
    }
    all_input
        .into_iter()
        .filter(|(slot, ok)| {
            *ok && match slot {
                // Globals start from a constant, parameters from arguments.
                Slot::Global(_) => false,
                Slot::Local(pi, li) => *li >= p.procedures[*pi].params.len(),
            }
        })
        .map(|(slot, _)| match slot {
            Slot::Local(pi, _) => (
                Some(p.procedures[pi].name.clone()),
                scopes.slot_name(slot).to_string(),
            ),
            Slot::Global(_) => unreachable!(),
        })
        .collect()
}

/// Marks every branch whose condition transitively reads input.
pub fn analyze_dependency(p: &Program, g: &CfGraph) -> DepResult {
    let scopes = Scopes::new(p);
    let n = p.procedures.len();
    let mut st = State {
        p,
        scopes: &scopes,
        vars: HashMap::new(),
        ret: vec![None; n],
        ctx: vec![None; n],
        branches: BTreeMap::new(),
        changed: true,
    };
    while st.changed {
        st.changed = false;
        for (i, proc) in p.procedures.iter().enumerate() {
            let ctx = st.ctx[i].clone();
            st.block(i, &proc.body, ctx);
        }
    }

    let mut input_dependent = BTreeSet::new();
    let mut reasons = BTreeMap::new();
    for v in &g.vertices {
        if let Some(b) = v.branch_id() {
            if let Some(o) = st.branches.get(&b) {
                input_dependent.insert(v.id);
                let mut chain = Vec::new();
                st.chain(o, &mut HashSet::new(), &mut chain);
                reasons.insert(v.id, chain);
            }
        }
    }
    DepResult {
        input_dependent,
        dependent_branches: st.branches.keys().copied().collect(),
        reasons,
        byte_copies: byte_copies(p, &scopes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build_eip_cfg;
    use crate::lang::parse;

    fn deps(src: &str) -> (DepResult, usize) {
        let p = parse(src).unwrap();
        let g = build_eip_cfg(&p);
        (analyze_dependency(&p, &g), g.branch_vertices().len())
    }

    #[test]
    fn constant_local_is_independent() {
        let (d, n) = deps("int main() { int k = 3; if (k == 3) { return 1; } return 0; }");
        assert_eq!(n, 1);
        assert!(d.input_dependent.is_empty());
    }

    #[test]
    fn assignment_from_input() {
        let (d, _) = deps("int main() { int x = in[0]; if (x > 5) { return 1; } return 0; }");
        assert_eq!(d.input_dependent.len(), 1);
        assert!(d.is_byte_copy("main", "x"));
    }

    #[test]
    fn return_value_carries_taint() {
        let (d, _) = deps(
            "int f() { if (in[0] == 1) { return 1; } return 0; } \
             int main() { int r = 0; r = f(); if (r == 1) { return 1; } return 0; }",
        );
        assert_eq!(d.input_dependent.len(), 2);
        assert!(!d.is_byte_copy("main", "r"));
        let chain = d.reasons.values().find(|c| c.len() > 1).unwrap();
        assert!(chain.iter().any(|s| s.contains("return value of `f`")));
    }

    #[test]
    fn early_exit_taints_the_rest() {
        let (d, _) = deps(
            "int g = 0; int f() { if (in[0] == 1) { return 1; } g = 2; return 0; } \
             int main() { f(); if (g == 2) { return 1; } return 0; }",
        );
        assert_eq!(d.input_dependent.len(), 2);
    }

    #[test]
    fn parameter_taint() {
        let (d, _) = deps(
            "int f(int a) { if (a < 3) { return 1; } return 0; } \
             int main() { int r = 0; r = f(in[2]); r = f(7); return r; }",
        );
        assert_eq!(d.input_dependent.len(), 1);
        let (d, _) =
            deps("int f(int a) { if (a < 3) { return 1; } return 0; } int main() { int r = 0; r = f(7); return r; }");
        assert!(d.input_dependent.is_empty());
    }
}
