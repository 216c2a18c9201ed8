// SPDX-License-Identifier: Apache-2.0

//! Bounded enumeration of intra-, inter- and II-paths, path probability and
//! rare-path selection.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::cfg::{CfGraph, EdgeKind, VertexId, VertexKind, ENTRY_GLOBAL, EXIT_GLOBAL};
use crate::prob::{rational_text, ProbCfg};

/// Default maximum path length in vertices.
pub const DEFAULT_BOUND: usize = 60;
/// Default cap on the number of enumerated paths.
pub const DEFAULT_MAX_PATHS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    /// Inside one procedure, stepping over calls.
    Intra,
    /// Whole program, always entering callees.
    Inter,
    /// Whole program, entering or stepping over each call.
    Ii,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Intra => "intra",
            PathKind::Inter => "inter",
            PathKind::Ii => "ii",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PathKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intra" => Ok(PathKind::Intra),
            "inter" => Ok(PathKind::Inter),
            "ii" => Ok(PathKind::Ii),
            other => Err(format!("unknown path kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CfPath {
    /// 1-based position in enumeration order.
    pub index: usize,
    pub kind: PathKind,
    pub vertices: Vec<VertexId>,
    #[serde(serialize_with = "crate::ser_rational")]
    pub probability: BigRational,
}

impl CfPath {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn probability_decimal(&self) -> String {
        format_sci(&self.probability, 3)
    }

    /// Vertex sequence over the whole-program graph: intra-paths of `main`
    /// are wrapped in the global entry and exit.
    pub fn lifted(&self, g: &CfGraph) -> Vec<VertexId> {
        let main_entry = g.procs.iter().find(|p| p.name == "main").map(|p| p.entry);
        if self.kind == PathKind::Intra && self.vertices.first().copied() == main_entry {
            let mut v = Vec::with_capacity(self.len() + 2);
            v.push(ENTRY_GLOBAL);
            v.extend(&self.vertices);
            v.push(EXIT_GLOBAL);
            v
        } else {
            self.vertices.clone()
        }
    }

    pub fn report(&self) -> PathRecord {
        PathRecord {
            index: self.index,
            kind: self.kind,
            length: self.len(),
            vertices: self.vertices.clone(),
            probability_decimal: self.probability_decimal(),
            probability_exact: rational_text(&self.probability),
        }
    }
}

/// One JSON-lines record of a path report.
#[derive(Debug, Clone, Serialize)]
pub struct PathRecord {
    pub index: usize,
    pub kind: PathKind,
    pub length: usize,
    pub vertices: Vec<VertexId>,
    pub probability_decimal: String,
    pub probability_exact: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path bound must be at least 2, got {0}")]
    BadBound(usize),
    #[error("unknown procedure `{0}`")]
    UnknownProcedure(String),
    #[error("more than {cap} paths; enumeration stopped")]
    CapExceeded { cap: usize, partial: Vec<CfPath> },
    #[error("no edge {0} -> {1} in the graph")]
    MissingEdge(VertexId, VertexId),
}

#[derive(Debug, Clone)]
pub struct EnumOptions {
    pub kind: PathKind,
    pub bound: usize,
    pub max_paths: usize,
    /// Procedure for intra-paths (default `main`).
    pub procedure: Option<String>,
}

impl EnumOptions {
    pub fn new(kind: PathKind) -> Self {
        EnumOptions {
            kind,
            bound: DEFAULT_BOUND,
            max_paths: DEFAULT_MAX_PATHS,
            procedure: None,
        }
    }

    pub fn bound(mut self, bound: usize) -> Self {
        self.bound = bound;
        self
    }

    pub fn max_paths(mut self, cap: usize) -> Self {
        self.max_paths = cap;
        self
    }

    pub fn procedure(mut self, name: impl Into<String>) -> Self {
        self.procedure = Some(name.into());
        self
    }
}

const INF: usize = usize::MAX / 4;

/// Fewest vertices from each vertex to its own procedure's exit, inclusive,
/// when calls are stepped over (`enter == false`) or entered.
fn min_to_exit(g: &CfGraph, enter: bool) -> Vec<usize> {
    let mut d = vec![INF; g.len()];
    for p in &g.procs {
        d[p.exit] = 1;
    }
    loop {
        let mut changed = false;
        for v in &g.vertices {
            if v.kind == VertexKind::Exit || v.proc.is_none() {
                continue;
            }
            let best = if v.kind == VertexKind::Call {
                let rs = g.return_site_of(v.id).expect("call has a return-site");
                let through = if enter {
                    let callee = g.proc_info(v.callee().unwrap_or_default());
                    callee.map(|c| d[c.entry]).unwrap_or(INF)
                } else {
                    0
                };
                through.saturating_add(d[rs])
            } else {
                g.out_edges(v.id)
                    .filter(|e| e.kind.is_intra())
                    .map(|e| d[e.dst])
                    .min()
                    .unwrap_or(INF)
            };
            let cand = best.saturating_add(1).min(INF);
            if cand < d[v.id] {
                d[v.id] = cand;
                changed = true;
            }
        }
        if !changed {
            return d;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    to: VertexId,
    edge: usize,
    push: Option<VertexId>,
    pop: bool,
}

struct Node {
    steps: Vec<Step>,
    next: usize,
    applied: Option<(Step, Option<VertexId>)>,
}

/// Enumerates all paths of the requested kind with at most `bound`
/// vertices, depth-first with true edges before false edges. At a call
/// vertex II-paths try the shortcut before entering the callee.
///
/// Inter-paths must enter at least one procedure when the program has
/// calls; paths that never reach a call are intra-paths of `main`.
pub fn enumerate(pg: &ProbCfg, opts: &EnumOptions) -> Result<Vec<CfPath>, PathError> {
    if opts.bound < 2 {
        return Err(PathError::BadBound(opts.bound));
    }
    let g = &pg.graph;
    let enter = opts.kind == PathKind::Inter;
    let dist = min_to_exit(g, enter);
    let (start, target) = match opts.kind {
        PathKind::Intra => {
            let name = opts.procedure.as_deref().unwrap_or("main");
            let info = g
                .proc_info(name)
                .ok_or_else(|| PathError::UnknownProcedure(name.to_string()))?;
            (info.entry, info.exit)
        }
        _ => (g.entry, g.exit),
    };
    let whole = opts.kind != PathKind::Intra;
    let rest = |v: VertexId| -> usize {
        if v == target {
            0
        } else if whole {
            // remaining vertices in v's procedure, then the global exit
            dist[v].saturating_sub(1).saturating_add(1)
        } else {
            dist[v].saturating_sub(1)
        }
    };
    let has_calls = g.vertices.iter().any(|v| v.kind == VertexKind::Call);
    let rs_cost = |call: VertexId| dist[g.return_site_of(call).expect("return-site")];

    let successors = |v: VertexId, stack: &[VertexId]| -> Vec<Step> {
        let vx = g.vertex(v);
        let plain = |e: &crate::cfg::Edge, i: usize| Step {
            to: e.dst,
            edge: i,
            push: None,
            pop: false,
        };
        let idx = |src: VertexId, dst: VertexId| g.edge_index(src, dst).expect("edge");
        if !whole {
            return g
                .out_edges(v)
                .filter(|e| e.kind.is_intra())
                .map(|e| plain(e, idx(e.src, e.dst)))
                .collect();
        }
        match vx.kind {
            VertexKind::Exit => match stack.last() {
                Some(&call) => {
                    let rs = g.return_site_of(call).expect("return-site");
                    vec![Step {
                        to: rs,
                        edge: idx(v, rs),
                        push: None,
                        pop: true,
                    }]
                }
                None => g
                    .out_edges(v)
                    .filter(|e| e.kind == EdgeKind::Global)
                    .map(|e| plain(e, idx(e.src, e.dst)))
                    .collect(),
            },
            VertexKind::Call => {
                let mut out = Vec::new();
                for e in g.out_edges(v) {
                    let step = Step {
                        to: e.dst,
                        edge: idx(e.src, e.dst),
                        push: (e.kind == EdgeKind::CallEntry).then_some(v),
                        pop: false,
                    };
                    match (e.kind, opts.kind) {
                        (EdgeKind::Shortcut, PathKind::Ii) => out.insert(0, step),
                        (EdgeKind::CallEntry, _) => out.push(step),
                        _ => {}
                    }
                }
                out
            }
            _ => g
                .out_edges(v)
                .map(|e| plain(e, idx(e.src, e.dst)))
                .collect(),
        }
    };

    let mut out: Vec<CfPath> = Vec::new();
    let mut path = vec![start];
    let mut probs = vec![BigRational::one()];
    let mut stack: Vec<VertexId> = Vec::new();
    let mut tail = 0usize;
    let mut nodes = vec![Node {
        steps: successors(start, &stack),
        next: 0,
        applied: None,
    }];

    while let Some(top) = nodes.last_mut() {
        if top.next == top.steps.len() {
            let node = nodes.pop().expect("non-empty");
            if let Some((step, popped)) = node.applied {
                path.pop();
                probs.pop();
                if step.push.is_some() {
                    let call = stack.pop().expect("pushed frame");
                    tail -= rs_cost(call);
                }
                if let Some(call) = popped {
                    stack.push(call);
                    tail += rs_cost(call);
                }
            }
            continue;
        }
        let step = top.steps[top.next];
        top.next += 1;

        let mut popped = None;
        if let Some(call) = step.push {
            stack.push(call);
            tail += rs_cost(call);
        }
        if step.pop {
            let call = stack.pop().expect("frame to return to");
            tail -= rs_cost(call);
            popped = Some(call);
        }
        let undo = |stack: &mut Vec<VertexId>, tail: &mut usize| {
            if step.push.is_some() {
                let call = stack.pop().expect("pushed frame");
                *tail -= rs_cost(call);
            }
            if let Some(call) = popped {
                stack.push(call);
                *tail += rs_cost(call);
            }
        };
        let lower = (path.len() + 1)
            .saturating_add(rest(step.to))
            .saturating_add(tail);
        if lower > opts.bound {
            undo(&mut stack, &mut tail);
            continue;
        }
        let prob = probs.last().expect("prefix probability") * &pg.scores[step.edge];
        path.push(step.to);
        if step.to == target && stack.is_empty() {
            let keep = opts.kind != PathKind::Inter
                || !has_calls
                || path.iter().any(|&v| g.vertex(v).kind == VertexKind::Call);
            if keep {
                if out.len() == opts.max_paths {
                    return Err(PathError::CapExceeded {
                        cap: opts.max_paths,
                        partial: out,
                    });
                }
                out.push(CfPath {
                    index: out.len() + 1,
                    kind: opts.kind,
                    vertices: path.clone(),
                    probability: prob,
                });
            }
            path.pop();
            undo(&mut stack, &mut tail);
            continue;
        }
        probs.push(prob);
        let steps = successors(step.to, &stack);
        nodes.push(Node {
            steps,
            next: 0,
            applied: Some((step, popped)),
        });
    }
    Ok(out)
}

/// Product of the edge scores along `vertices`.
pub fn path_probability(pg: &ProbCfg, vertices: &[VertexId]) -> Result<BigRational, PathError> {
    let mut p = BigRational::one();
    for w in vertices.windows(2) {
        let i = pg
            .graph
            .edge_index(w[0], w[1])
            .ok_or(PathError::MissingEdge(w[0], w[1]))?;
        p *= &pg.scores[i];
    }
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct RareSet {
    /// Lowest-probability paths, ascending.
    pub paths: Vec<CfPath>,
    pub k: usize,
    /// Set when fewer than `k` paths were available.
    pub short: bool,
}

/// Ascending probability, then fewer vertices, then lexicographic vertices.
pub fn rarity_order(a: &CfPath, b: &CfPath) -> Ordering {
    a.probability
        .cmp(&b.probability)
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

/// The `k` rarest paths.
pub fn rare_paths(paths: &[CfPath], k: usize) -> RareSet {
    let mut sorted: Vec<CfPath> = paths.to_vec();
    sorted.sort_by(rarity_order);
    sorted.truncate(k);
    RareSet {
        short: paths.len() < k,
        paths: sorted,
        k,
    }
}

/// Scientific notation with `sig` significant figures, e.g. `8.16e-18`,
/// rounded half away from zero from the exact value.
pub fn format_sci(r: &BigRational, sig: usize) -> String {
    assert!(sig >= 1);
    if r.is_zero() {
        return format!("{:.*}e+00", sig - 1, 0.0);
    }
    let neg = r.is_negative();
    let x = r.abs();
    let ten = BigRational::from_integer(BigInt::from(10));
    let pow10 = |e: i64| -> BigRational {
        if e >= 0 {
            BigRational::from_integer(BigInt::from(10).pow(e as u32))
        } else {
            BigRational::one() / BigRational::from_integer(BigInt::from(10).pow((-e) as u32))
        }
    };
    let mut e = x.numer().to_string().len() as i64 - x.denom().to_string().len() as i64;
    let mut m = &x / pow10(e);
    while m >= ten {
        m /= &ten;
        e += 1;
    }
    while m < BigRational::one() {
        m *= &ten;
        e -= 1;
    }
    let scale = pow10(sig as i64 - 1);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut digits = (m * &scale + half).floor().to_integer();
    if digits >= BigInt::from(10).pow(sig as u32) {
        digits /= 10;
        e += 1;
    }
    let s = digits.to_string();
    let mantissa = if sig == 1 {
        s
    } else {
        format!("{}.{}", &s[..1], &s[1..])
    };
    let sign = if e < 0 { '-' } else { '+' };
    format!(
        "{}{}e{}{:02}",
        if neg { "-" } else { "" },
        mantissa,
        sign,
        e.abs()
    )
}
