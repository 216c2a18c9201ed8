// SPDX-License-Identifier: Apache-2.0

//! Concrete execution of MiniC over the EIP-CFG with symbolic tracking of
//! input-byte copies, and the constraint language used to steer it.

mod solver;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::cfg::{build_eip_cfg, CfGraph, EdgeKind, Payload, VertexId, VertexKind};
use crate::lang::{
    BinOp, ByteRef, CmpOp, Expr, Operand, Program, Scopes, Slot, Stmt, DEFAULT_UNROLL_BOUND,
};

pub use solver::Solver;

/// Interpreter steps (vertices visited) before a run is cut off.
pub const DEFAULT_STEP_BUDGET: usize = 100_000;

/// A program input: exactly L bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputBytes(Vec<u8>);

impl InputBytes {
    pub fn new(bytes: Vec<u8>) -> InputBytes {
        InputBytes(bytes)
    }

    /// Pads with zeros or truncates to `len`.
    pub fn from_slice(bytes: &[u8], len: usize) -> InputBytes {
        let mut v = bytes.to_vec();
        v.resize(len, 0);
        InputBytes(v)
    }

    pub fn zeros(len: usize) -> InputBytes {
        InputBytes(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    /// Bytes up to the first NUL, the way a C string would read them.
    pub fn as_c_str(&self) -> &[u8] {
        let end = self.0.iter().position(|b| *b == 0).unwrap_or(self.0.len());
        &self.0[..end]
    }
}

impl fmt::Display for InputBytes {
    /// Escaped form: printable ASCII as is, everything else as `\xNN`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            match b {
                b'\\' => f.write_str("\\\\")?,
                0x20..=0x7e => write!(f, "{}", *b as char)?,
                _ => write!(f, "\\x{b:02x}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for InputBytes {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Operand of a resolved constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    /// Input byte at a concrete index.
    Byte(usize),
    Const(i64),
}

impl Term {
    fn value(&self, input: &[u8]) -> i64 {
        match self {
            Term::Byte(i) => input.get(*i).copied().unwrap_or(0) as i64,
            Term::Const(c) => *c,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Byte(i) => write!(f, "in[{i}]"),
            Term::Const(c) if (0..=255).contains(c) => write!(f, "0x{c:02X}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// Atomic comparison over input bytes at fixed indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymCond {
    pub op: CmpOp,
    pub lhs: Term,
    pub rhs: Term,
}

impl SymCond {
    pub fn new(op: CmpOp, lhs: Term, rhs: Term) -> SymCond {
        SymCond { op, lhs, rhs }
    }

    pub fn negated(&self) -> SymCond {
        SymCond::new(self.op.negate(), self.lhs, self.rhs)
    }

    pub fn eval(&self, input: &[u8]) -> bool {
        self.op.eval(self.lhs.value(input), self.rhs.value(input))
    }

    /// Input bytes the condition mentions.
    pub fn bytes(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for t in [self.lhs, self.rhs] {
            if let Term::Byte(i) = t {
                if !v.contains(&i) {
                    v.push(i);
                }
            }
        }
        v
    }
}

impl fmt::Display for SymCond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

/// One branch evaluation during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub vertex: VertexId,
    /// Index of the branch vertex in the trace's vertex sequence.
    pub position: usize,
    /// The condition as written, with operands resolved.
    pub cond: SymCond,
    pub taken: bool,
}

impl Constraint {
    /// The condition the run actually satisfied.
    pub fn literal(&self) -> SymCond {
        if self.taken {
            self.cond.clone()
        } else {
            self.cond.negated()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Normal,
    BoundExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecTrace {
    pub vertices: Vec<VertexId>,
    pub constraints: Vec<Constraint>,
    pub terminated: Termination,
    /// Value returned by the entry procedure (0 if cut off).
    pub return_value: i64,
}

impl ExecTrace {
    pub fn path_constraint(&self) -> PathConstraint {
        PathConstraint {
            conjuncts: self.constraints.iter().map(Constraint::literal).collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let constraints: Vec<_> = self
            .constraints
            .iter()
            .map(|c| {
                serde_json::json!({
                    "vertex": c.vertex,
                    "position": c.position,
                    "cond": c.cond.to_string(),
                    "taken": c.taken,
                })
            })
            .collect();
        serde_json::json!({
            "vertices": self.vertices,
            "constraints": constraints,
            "terminated": self.terminated,
            "return_value": self.return_value,
        })
    }
}

/// Conjunction of atomic byte conditions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PathConstraint {
    pub conjuncts: Vec<SymCond>,
}

impl PathConstraint {
    pub fn eval(&self, input: &[u8]) -> bool {
        self.conjuncts.iter().all(|c| c.eval(input))
    }
}

impl fmt::Display for PathConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConcolicError {
    #[error("position {index} is not preceded by a branch vertex in the trace")]
    NotAfterBranch { index: usize },
    #[error("constraint is infeasible")]
    Infeasible,
}

/// Constraint prefix before the branch at `index - 1`, plus that branch's
/// outcome negated.
pub fn negated_path(t: &ExecTrace, index: usize) -> Result<PathConstraint, ConcolicError> {
    let err = ConcolicError::NotAfterBranch { index };
    if index == 0 || index >= t.vertices.len() {
        return Err(err);
    }
    let at = t
        .constraints
        .iter()
        .position(|c| c.position == index - 1)
        .ok_or(err)?;
    let mut conjuncts: Vec<SymCond> = t.constraints[..at]
        .iter()
        .map(Constraint::literal)
        .collect();
    conjuncts.push(t.constraints[at].literal().negated());
    Ok(PathConstraint { conjuncts })
}

/// One-shot execution; builds the EIP-CFG on every call.
pub fn execute(p: &Program, input: &InputBytes) -> ExecTrace {
    Executor::new(p).execute(input)
}

pub fn is_feasible(p: &Program, pc: &PathConstraint) -> bool {
    Solver::new(p.input_len).is_feasible(pc)
}

pub fn solve(p: &Program, pc: &PathConstraint) -> Result<InputBytes, ConcolicError> {
    Solver::new(p.input_len)
        .solve(pc)
        .ok_or(ConcolicError::Infeasible)
}

#[derive(Debug, Clone, Copy)]
enum Var {
    Global(usize),
    Local(usize),
}

#[derive(Debug, Clone)]
enum CExpr {
    Lit(i64),
    Var(Var),
    Input(Option<Var>, i64),
    Neg(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone)]
enum Op {
    Goto(VertexId),
    Block(Vec<(Var, CExpr)>, VertexId),
    Return(Option<CExpr>, VertexId),
    Branch {
        op: CmpOp,
        lhs: CExpr,
        rhs: CExpr,
        on_true: VertexId,
        on_false: VertexId,
        /// Loop header: iteration cap and the sources of back edges.
        looping: Option<(u32, Vec<VertexId>)>,
    },
    Call {
        args: Vec<CExpr>,
        entry: VertexId,
        locals: usize,
    },
    Exit,
    ReturnSite(Option<Var>, VertexId),
    Halt,
}

/// Value plus the input byte it is a verbatim copy of, if any.
#[derive(Debug, Clone, Copy, Default)]
struct Val {
    n: i64,
    byte: Option<usize>,
}

impl Val {
    fn term(self) -> Term {
        match self.byte {
            Some(i) => Term::Byte(i),
            None => Term::Const(self.n),
        }
    }
}

struct Frame {
    locals: Vec<Val>,
    call: VertexId,
    loops: Vec<(VertexId, u32)>,
}

/// Interpreter compiled once per program; reusable across inputs and threads.
#[derive(Debug, Clone)]
pub struct Executor {
    graph: CfGraph,
    ops: Vec<Op>,
    /// Return site of each call vertex.
    return_site: Vec<VertexId>,
    globals: Vec<i64>,
    main_locals: usize,
    input_len: usize,
    pub step_budget: usize,
}

impl Executor {
    pub fn new(p: &Program) -> Executor {
        Executor::with_graph(p, build_eip_cfg(p))
    }

    pub fn with_graph(p: &Program, graph: CfGraph) -> Executor {
        let scopes = Scopes::new(p);
        let mut ops = Vec::with_capacity(graph.len());
        let mut return_site = vec![usize::MAX; graph.len()];
        for v in &graph.vertices {
            let proc = v.proc.unwrap_or(0);
            let var = |name: &str| match scopes.resolve(proc, name) {
                Slot::Global(i) => Var::Global(i),
                Slot::Local(_, i) => Var::Local(i),
            };
            let mut next = None;
            let (mut on_true, mut on_false) = (None, None);
            let mut back = Vec::new();
            for e in graph.out_edges(v.id) {
                match e.kind {
                    EdgeKind::True => on_true = Some(e.dst),
                    EdgeKind::False => on_false = Some(e.dst),
                    EdgeKind::Shortcut => return_site[v.id] = e.dst,
                    EdgeKind::Flow | EdgeKind::CallEntry => next = Some(e.dst),
                    EdgeKind::Global if v.kind == VertexKind::EntryGlobal => next = Some(e.dst),
                    _ => {}
                }
            }
            for e in graph.in_edges(v.id) {
                if e.back {
                    back.push(e.src);
                }
            }
            let op = match (&v.kind, &v.payload) {
                (VertexKind::ExitGlobal, _) => Op::Halt,
                (VertexKind::Exit, _) => Op::Exit,
                (_, Payload::Block(stmts)) => {
                    let assigns = stmts
                        .iter()
                        .filter_map(|s| match s {
                            Stmt::Decl { name, init } => Some((
                                var(name),
                                init.as_ref().map_or(CExpr::Lit(0), |e| compile(e, &var)),
                            )),
                            Stmt::Assign { target, value } => {
                                Some((var(target), compile(value, &var)))
                            }
                            _ => None,
                        })
                        .collect();
                    Op::Block(assigns, next.expect("block successor"))
                }
                (_, Payload::Return(e)) => Op::Return(
                    e.as_ref().map(|e| compile(e, &var)),
                    next.expect("return successor"),
                ),
                (
                    _,
                    Payload::Branch {
                        cond,
                        is_loop,
                        bound,
                        ..
                    },
                ) => Op::Branch {
                    op: cond.op,
                    lhs: compile_operand(&cond.lhs, &var),
                    rhs: compile_operand(&cond.rhs, &var),
                    on_true: on_true.expect("true edge"),
                    on_false: on_false.expect("false edge"),
                    looping: is_loop.then(|| (bound.unwrap_or(DEFAULT_UNROLL_BOUND), back)),
                },
                (_, Payload::Call { callee, args, .. }) => {
                    let callee_idx = p.procedure_index(callee).expect("checked callee");
                    Op::Call {
                        args: args.iter().map(|e| compile(e, &var)).collect(),
                        entry: graph.procs[callee_idx].entry,
                        locals: scopes.locals[callee_idx].len(),
                    }
                }
                (_, Payload::ReturnSite { target, .. }) => Op::ReturnSite(
                    target.as_deref().map(&var),
                    next.expect("return-site successor"),
                ),
                _ => Op::Goto(next.expect("successor")),
            };
            ops.push(op);
        }
        let mut globals = vec![0];
        globals.extend(p.globals.iter().map(|g| g.init));
        let main_idx = p.procedure_index(&p.entry).expect("entry procedure");
        Executor {
            graph,
            ops,
            return_site,
            globals,
            main_locals: scopes.locals[main_idx].len(),
            input_len: p.input_len,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn graph(&self) -> &CfGraph {
        &self.graph
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn execute(&self, input: &InputBytes) -> ExecTrace {
        self.run(input.as_slice(), true)
    }

    /// Vertex sequence only; skips constraint bookkeeping.
    pub fn execute_path(&self, input: &[u8]) -> (Vec<VertexId>, Termination) {
        let t = self.run(input, false);
        (t.vertices, t.terminated)
    }

    fn run(&self, input: &[u8], record: bool) -> ExecTrace {
        let mut bytes = input.to_vec();
        bytes.resize(self.input_len, 0);
        let mut globals: Vec<Val> = self
            .globals
            .iter()
            .map(|&n| Val { n, byte: None })
            .collect();
        let mut stack = vec![Frame {
            locals: vec![Val::default(); self.main_locals],
            call: usize::MAX,
            loops: Vec::new(),
        }];
        let mut vertices = Vec::new();
        let mut constraints = Vec::new();
        let mut ret = Val::default();
        let mut prev = usize::MAX;
        let mut at = self.graph.entry;
        let mut terminated = Termination::Normal;
        loop {
            if vertices.len() >= self.step_budget {
                terminated = Termination::BoundExceeded;
                break;
            }
            vertices.push(at);
            let Some(frame) = stack.last_mut() else {
                break;
            };
            let next = match &self.ops[at] {
                Op::Halt => break,
                Op::Goto(n) => *n,
                Op::Block(assigns, n) => {
                    for (target, e) in assigns {
                        let v = eval(e, &bytes, &globals, &frame.locals);
                        store(*target, v, &mut globals, &mut frame.locals);
                    }
                    *n
                }
                Op::Return(e, n) => {
                    ret = match e {
                        Some(e) => eval(e, &bytes, &globals, &frame.locals),
                        None => Val::default(),
                    };
                    *n
                }
                Op::Branch {
                    op,
                    lhs,
                    rhs,
                    on_true,
                    on_false,
                    looping,
                } => {
                    if let Some((bound, back)) = looping {
                        let slot = match frame.loops.iter().position(|(v, _)| *v == at) {
                            Some(i) => i,
                            None => {
                                frame.loops.push((at, 0));
                                frame.loops.len() - 1
                            }
                        };
                        if back.contains(&prev) {
                            frame.loops[slot].1 += 1;
                        } else {
                            frame.loops[slot].1 = 0;
                        }
                        if frame.loops[slot].1 > *bound {
                            terminated = Termination::BoundExceeded;
                            break;
                        }
                    }
                    let l = eval(lhs, &bytes, &globals, &frame.locals);
                    let r = eval(rhs, &bytes, &globals, &frame.locals);
                    let taken = op.eval(l.n, r.n);
                    if record {
                        constraints.push(Constraint {
                            vertex: at,
                            position: vertices.len() - 1,
                            cond: SymCond::new(*op, l.term(), r.term()),
                            taken,
                        });
                    }
                    if taken {
                        *on_true
                    } else {
                        *on_false
                    }
                }
                Op::Call {
                    args,
                    entry,
                    locals,
                } => {
                    let mut callee = vec![Val::default(); *locals];
                    for (slot, e) in callee.iter_mut().zip(args) {
                        *slot = eval(e, &bytes, &globals, &frame.locals);
                    }
                    stack.push(Frame {
                        locals: callee,
                        call: at,
                        loops: Vec::new(),
                    });
                    ret = Val::default();
                    *entry
                }
                Op::Exit => {
                    let done = stack.pop().expect("frame");
                    if stack.is_empty() {
                        self.graph.exit
                    } else {
                        self.return_site[done.call]
                    }
                }
                Op::ReturnSite(target, n) => {
                    if let Some(t) = target {
                        store(*t, ret, &mut globals, &mut frame.locals);
                    }
                    *n
                }
            };
            prev = at;
            at = next;
        }
        let return_value = match terminated {
            Termination::Normal => ret.n,
            Termination::BoundExceeded => 0,
        };
        ExecTrace {
            vertices,
            constraints,
            terminated,
            return_value,
        }
    }
}

fn compile(e: &Expr, var: &dyn Fn(&str) -> Var) -> CExpr {
    match e {
        Expr::Lit(n) => CExpr::Lit(*n),
        Expr::Var(v) => CExpr::Var(var(v)),
        Expr::Input(r) => compile_ref(r, var),
        Expr::Neg(e) => CExpr::Neg(Box::new(compile(e, var))),
        Expr::Bin(op, l, r) => {
            CExpr::Bin(*op, Box::new(compile(l, var)), Box::new(compile(r, var)))
        }
    }
}

fn compile_ref(r: &ByteRef, var: &dyn Fn(&str) -> Var) -> CExpr {
    CExpr::Input(r.base.as_deref().map(var), r.offset)
}

fn compile_operand(o: &Operand, var: &dyn Fn(&str) -> Var) -> CExpr {
    match o {
        Operand::Input(r) => compile_ref(r, var),
        Operand::Var(v) => CExpr::Var(var(v)),
        Operand::Lit(n) => CExpr::Lit(*n),
    }
}

fn load(v: Var, globals: &[Val], locals: &[Val]) -> Val {
    match v {
        Var::Global(i) => globals[i],
        Var::Local(i) => locals[i],
    }
}

fn store(v: Var, x: Val, globals: &mut [Val], locals: &mut [Val]) {
    match v {
        Var::Global(i) => globals[i] = x,
        Var::Local(i) => locals[i] = x,
    }
}

/// Out-of-range input reads yield 0 and carry no byte identity.
fn eval(e: &CExpr, input: &[u8], globals: &[Val], locals: &[Val]) -> Val {
    match e {
        CExpr::Lit(n) => Val { n: *n, byte: None },
        CExpr::Var(v) => load(*v, globals, locals),
        CExpr::Input(base, off) => {
            let b = base.map_or(0, |v| load(v, globals, locals).n);
            let idx = b.wrapping_add(*off);
            match usize::try_from(idx).ok().filter(|&i| i < input.len()) {
                Some(i) => Val {
                    n: input[i] as i64,
                    byte: Some(i),
                },
                None => Val::default(),
            }
        }
        CExpr::Neg(e) => Val {
            n: eval(e, input, globals, locals).n.wrapping_neg(),
            byte: None,
        },
        CExpr::Bin(op, l, r) => Val {
            n: op.apply(
                eval(l, input, globals, locals).n,
                eval(r, input, globals, locals).n,
            ),
            byte: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::programs::RUNNING_EXAMPLE;

    fn running() -> (Program, Executor) {
        let p = parse(RUNNING_EXAMPLE).unwrap();
        let x = Executor::new(&p);
        (p, x)
    }

    fn input(p: &Program, s: &[u8]) -> InputBytes {
        InputBytes::from_slice(s, p.input_len)
    }

    #[test]
    fn doc_trace() {
        let (p, x) = running();
        let t = x.execute(&input(&p, b"DOC"));
        assert_eq!(t.terminated, Termination::Normal);
        let taken: Vec<bool> = t.constraints.iter().map(|c| c.taken).collect();
        assert_eq!(taken, [true, true, true, false, false, false, false]);
        assert_eq!(t.constraints[3].cond.to_string(), "in[3] == 0x3E");
        assert_eq!(t.constraints[5].cond.to_string(), "in[3] == 0x41");
        assert_eq!(t.vertices.first(), Some(&0));
        assert_eq!(t.vertices.last(), Some(&1));
    }

    #[test]
    fn xyz_leaves_at_first_branch() {
        let (p, x) = running();
        let t = x.execute(&input(&p, b"XYZ"));
        assert_eq!(t.vertices, [0, 2, 3, 4, 14, 15, 1]);
        let pc = negated_path(&t, 4).unwrap();
        assert_eq!(pc.to_string(), "in[0] == 0x44");
        let w = Solver::new(p.input_len).solve(&pc).unwrap();
        assert_eq!(w.as_c_str(), b"D");
        assert!(negated_path(&t, 3).is_err());
    }

    #[test]
    fn return_value_branch_is_constant() {
        let (p, x) = running();
        let t = x.execute(&input(&p, b"DOC<ATT"));
        let last = t.constraints.last().unwrap();
        assert_eq!(last.cond.to_string(), "0x01 == 0x01");
        assert!(t.vertices.contains(&13));
        let pc = negated_path(&t, last.position + 1).unwrap();
        assert!(!Solver::new(p.input_len).is_feasible(&pc));
    }

    #[test]
    fn loops_hit_their_bound() {
        let src = "int main() { int i = 0; while (i < 10) bound 3 { i = i + 1; } return i; }";
        let p = parse(src).unwrap();
        let t = execute(&p, &InputBytes::zeros(p.input_len));
        assert_eq!(t.terminated, Termination::BoundExceeded);
        let src = "int main() { int i = 0; while (i < 3) bound 3 { i = i + 1; } return i; }";
        let p = parse(src).unwrap();
        let t = execute(&p, &InputBytes::zeros(p.input_len));
        assert_eq!((t.terminated, t.return_value), (Termination::Normal, 3));
    }

    #[test]
    fn step_budget() {
        let src = "int main() { int i = 0; while (i < 1000000) { i = i + 1; } return 0; }";
        let p = parse(src).unwrap();
        let mut x = Executor::new(&p);
        x.step_budget = 50;
        assert_eq!(
            x.execute(&InputBytes::zeros(16)).terminated,
            Termination::BoundExceeded
        );
    }

    #[test]
    fn escaped_display() {
        assert_eq!(
            InputBytes::new(b"DOC\0\n".to_vec()).to_string(),
            "DOC\\x00\\x0a"
        );
    }
}
