// SPDX-License-Identifier: Apache-2.0

//! Domain-propagation solver for conjunctions of byte comparisons.

use super::{InputBytes, PathConstraint, SymCond, Term};
use crate::lang::CmpOp;

/// Set of byte values as a 256-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dom([u64; 4]);

impl Dom {
    fn upto(max: u8) -> Dom {
        let mut d = Dom([0; 4]);
        for v in 0..=max as usize {
            d.0[v / 64] |= 1 << (v % 64);
        }
        d
    }

    fn has(&self, v: usize) -> bool {
        v < 256 && self.0[v / 64] & (1 << (v % 64)) != 0
    }

    fn remove(&mut self, v: usize) {
        self.0[v / 64] &= !(1 << (v % 64));
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..256).filter(move |&v| self.has(v))
    }

    fn min(&self) -> Option<usize> {
        self.iter().next()
    }

    fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) -> bool {
        let before = *self;
        for v in 0..256 {
            if self.has(v) && !keep(v) {
                self.remove(v);
            }
        }
        before != *self
    }
}

/// Binary constraint `x op y` between two distinct bytes.
#[derive(Debug, Clone, Copy)]
struct Pair {
    x: usize,
    y: usize,
    op: CmpOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Solver {
    /// Input length L.
    pub len: usize,
    /// Largest byte value considered (255 normally; smaller for reduced
    /// exhaustive checks).
    pub domain_max: u8,
}

impl Solver {
    pub fn new(len: usize) -> Solver {
        Solver {
            len,
            domain_max: u8::MAX,
        }
    }

    pub fn with_domain_max(mut self, max: u8) -> Solver {
        self.domain_max = max;
        self
    }

    pub fn is_feasible(&self, pc: &PathConstraint) -> bool {
        self.solve(pc).is_some()
    }

    /// Lexicographically smallest satisfying input: each byte takes the least
    /// value consistent with the bytes before it. Unconstrained bytes are 0.
    pub fn solve(&self, pc: &PathConstraint) -> Option<InputBytes> {
        let mut doms = vec![Dom::upto(self.domain_max); self.len];
        let mut pairs = Vec::new();
        for c in &pc.conjuncts {
            if !self.add(c, &mut doms, &mut pairs) {
                return None;
            }
        }
        if !arc_consistency(&mut doms, &pairs) {
            return None;
        }
        let mut assign: Vec<Option<usize>> = vec![None; self.len];
        let involved: Vec<usize> = {
            let mut v: Vec<usize> = pairs.iter().flat_map(|p| [p.x, p.y]).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        if !search(&involved, 0, &doms, &pairs, &mut assign) {
            return None;
        }
        let bytes = (0..self.len)
            .map(|i| assign[i].or_else(|| doms[i].min()).unwrap_or(0) as u8)
            .collect();
        Some(InputBytes::new(bytes))
    }

    fn add(&self, c: &SymCond, doms: &mut [Dom], pairs: &mut Vec<Pair>) -> bool {
        match (c.lhs, c.rhs) {
            (Term::Const(a), Term::Const(b)) => c.op.eval(a, b),
            (Term::Byte(i), Term::Const(k)) | (Term::Const(k), Term::Byte(i)) if i >= self.len => {
                // Out-of-range bytes never arise from execution; treat as 0.
                let (l, r) = if matches!(c.lhs, Term::Byte(_)) {
                    (0, k)
                } else {
                    (k, 0)
                };
                c.op.eval(l, r)
            }
            (Term::Byte(i), Term::Const(k)) => {
                doms[i].retain(|v| c.op.eval(v as i64, k));
                !doms[i].is_empty()
            }
            (Term::Const(k), Term::Byte(i)) => {
                doms[i].retain(|v| c.op.eval(k, v as i64));
                !doms[i].is_empty()
            }
            (Term::Byte(i), Term::Byte(j)) if i == j => {
                if i < self.len {
                    doms[i].retain(|v| c.op.eval(v as i64, v as i64));
                    !doms[i].is_empty()
                } else {
                    c.op.eval(0, 0)
                }
            }
            (Term::Byte(i), Term::Byte(j)) => {
                if i >= self.len || j >= self.len {
                    return false;
                }
                pairs.push(Pair {
                    x: i,
                    y: j,
                    op: c.op,
                });
                true
            }
        }
    }
}

fn arc_consistency(doms: &mut [Dom], pairs: &[Pair]) -> bool {
    let mut changed = true;
    while changed {
        changed = false;
        for p in pairs {
            let dy = doms[p.y];
            changed |= doms[p.x].retain(|a| dy.iter().any(|b| p.op.eval(a as i64, b as i64)));
            let dx = doms[p.x];
            changed |= doms[p.y].retain(|b| dx.iter().any(|a| p.op.eval(a as i64, b as i64)));
            if doms[p.x].is_empty() || doms[p.y].is_empty() {
                return false;
            }
        }
    }
    true
}

fn search(
    vars: &[usize],
    at: usize,
    doms: &[Dom],
    pairs: &[Pair],
    assign: &mut Vec<Option<usize>>,
) -> bool {
    let Some(&x) = vars.get(at) else {
        return true;
    };
    for v in doms[x].iter() {
        let ok = pairs.iter().all(|p| {
            let (a, b) = match (p.x == x, p.y == x) {
                (true, _) => (Some(v), assign[p.y]),
                (_, true) => (assign[p.x], Some(v)),
                _ => return true,
            };
            match (a, b) {
                (Some(a), Some(b)) => p.op.eval(a as i64, b as i64),
                _ => true,
            }
        });
        if !ok {
            continue;
        }
        assign[x] = Some(v);
        // Forward check: every later variable keeps a supported value.
        let mut pruned = doms.to_vec();
        pruned[x] = Dom([0; 4]);
        pruned[x].0[v / 64] |= 1 << (v % 64);
        if arc_consistency(&mut pruned, pairs) && search(vars, at + 1, &pruned, pairs, assign) {
            return true;
        }
        assign[x] = None;
    }
    false
}
