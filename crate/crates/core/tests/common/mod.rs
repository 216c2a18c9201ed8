// SPDX-License-Identifier: Apache-2.0

//! Random MiniC programs for property tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub input_len: usize,
    /// Largest literal compared against input bytes.
    pub max_lit: i64,
    pub procs: usize,
    pub max_depth: usize,
    pub max_stmts: usize,
    pub loops: bool,
    /// Allow arithmetic on input-derived values (these get concretized).
    pub input_arith: bool,
    /// Allow `&&`, `||` and `!` in conditions.
    pub compound: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            input_len: 3,
            max_lit: 15,
            procs: 2,
            max_depth: 2,
            max_stmts: 3,
            loops: true,
            input_arith: false,
            compound: true,
        }
    }
}

struct Proc {
    name: String,
    params: usize,
    returns: bool,
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GenConfig,
    procs: Vec<Proc>,
    /// Locals that only ever hold an input byte.
    copies: Vec<String>,
    /// Locals free to reassign.
    scratch: Vec<String>,
    globals: Vec<String>,
}

pub fn gen_program(seed: u64, cfg: &GenConfig) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg,
        procs: Vec::new(),
        copies: Vec::new(),
        scratch: Vec::new(),
        globals: vec!["g0".into(), "g1".into()],
    };
    g.procs.push(Proc {
        name: "main".into(),
        params: 0,
        returns: true,
    });
    for i in 1..=cfg.procs {
        let params = g.rng.gen_range(0..=2);
        let returns = g.rng.gen_bool(0.5);
        g.procs.push(Proc {
            name: format!("p{i}"),
            params,
            returns,
        });
    }
    let mut out = format!("input[{}];\nint g0 = 0;\nint g1 = 1;\n\n", cfg.input_len);
    for i in 0..g.procs.len() {
        g.proc(i, &mut out);
    }
    out
}

impl Gen<'_> {
    fn proc(&mut self, idx: usize, out: &mut String) {
        let (name, params, returns) = {
            let p = &self.procs[idx];
            (p.name.clone(), p.params, p.returns)
        };
        let plist: Vec<String> = (0..params).map(|i| format!("int a{i}")).collect();
        let ret = if returns { "int" } else { "void" };
        out.push_str(&format!("{ret} {name}({}) {{\n", plist.join(", ")));
        self.copies = (0..2).map(|i| format!("c{i}")).collect();
        self.scratch = (0..2).map(|i| format!("v{i}")).collect();
        self.scratch.extend((0..params).map(|i| format!("a{i}")));
        for c in self.copies.clone() {
            let r = self.byte_ref();
            out.push_str(&format!("    int {c} = {r};\n"));
        }
        for i in 0..2 {
            let k = self.rng.gen_range(0..=self.cfg.max_lit);
            out.push_str(&format!("    int v{i} = {k};\n"));
        }
        let body = self.block(idx, 1, false);
        out.push_str(&body);
        if returns {
            let e = self.expr();
            out.push_str(&format!("    return {e};\n"));
        }
        out.push_str("}\n\n");
    }

    fn indent(depth: usize) -> String {
        "    ".repeat(depth)
    }

    fn block(&mut self, proc: usize, depth: usize, in_loop: bool) -> String {
        let n = self.rng.gen_range(1..=self.cfg.max_stmts);
        let mut s = String::new();
        for _ in 0..n {
            s.push_str(&self.stmt(proc, depth, in_loop));
        }
        s
    }

    fn stmt(&mut self, proc: usize, depth: usize, in_loop: bool) -> String {
        let ind = Gen::indent(depth);
        let nested = depth <= self.cfg.max_depth;
        let callees: Vec<usize> = (proc + 1..self.procs.len()).collect();
        let choice = self.rng.gen_range(0..10);
        match choice {
            0..=2 if nested => {
                let c = self.cond(0);
                let t = self.block(proc, depth + 1, in_loop);
                if self.rng.gen_bool(0.5) {
                    let e = self.block(proc, depth + 1, in_loop);
                    format!("{ind}if ({c}) {{\n{t}{ind}}} else {{\n{e}{ind}}}\n")
                } else {
                    format!("{ind}if ({c}) {{\n{t}{ind}}}\n")
                }
            }
            3 if nested && self.cfg.loops => {
                // Loop conditions may not contain a disjunction.
                let c = if self.cfg.compound && self.rng.gen_bool(0.3) {
                    format!("{} && {}", self.atom(), self.atom())
                } else {
                    self.atom()
                };
                let bound = self.rng.gen_range(1..=3);
                let body = self.block(proc, depth + 1, true);
                format!("{ind}while ({c}) bound {bound} {{\n{body}{ind}}}\n")
            }
            4 | 5 if !callees.is_empty() => {
                let callee = callees[self.rng.gen_range(0..callees.len())];
                let args: Vec<String> = (0..self.procs[callee].params)
                    .map(|_| self.expr())
                    .collect();
                let call = format!("{}({})", self.procs[callee].name, args.join(", "));
                if self.procs[callee].returns && self.rng.gen_bool(0.6) {
                    let t = self.assign_target();
                    format!("{ind}{t} = {call};\n")
                } else {
                    format!("{ind}{call};\n")
                }
            }
            6 if in_loop && self.rng.gen_bool(0.3) => format!("{ind}break;\n"),
            7 if self.rng.gen_bool(0.2) => format!("{ind}cur = cur + 1;\n"),
            8 if depth > 1 && self.procs[proc].returns && self.rng.gen_bool(0.3) => {
                let e = self.expr();
                format!("{ind}return {e};\n")
            }
            _ => {
                let t = self.assign_target();
                let e = self.expr();
                format!("{ind}{t} = {e};\n")
            }
        }
    }

    fn assign_target(&mut self) -> String {
        if self.rng.gen_bool(0.25) {
            self.globals[self.rng.gen_range(0..self.globals.len())].clone()
        } else {
            self.scratch[self.rng.gen_range(0..self.scratch.len())].clone()
        }
    }

    fn byte_ref(&mut self) -> String {
        let l = self.cfg.input_len as i64;
        if self.rng.gen_bool(0.7) {
            format!("in[{}]", self.rng.gen_range(0..l))
        } else {
            let k = self.rng.gen_range(0..l);
            if k == 0 {
                "in[cur]".to_string()
            } else {
                format!("in[cur+{k}]")
            }
        }
    }

    fn lit(&mut self) -> String {
        let k = self.rng.gen_range(0..=self.cfg.max_lit);
        k.to_string()
    }

    fn operand(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 | 1 => self.byte_ref(),
            2 => self.copies[self.rng.gen_range(0..self.copies.len())].clone(),
            3 => self.scratch[self.rng.gen_range(0..self.scratch.len())].clone(),
            4 => self.globals[self.rng.gen_range(0..self.globals.len())].clone(),
            _ => self.lit(),
        }
    }

    /// Right-hand sides; input-derived arithmetic only when allowed.
    fn expr(&mut self) -> String {
        match self.rng.gen_range(0..5) {
            0 => self.lit(),
            1 => {
                // Scratch variables may hold input copies, so arithmetic on
                // them counts as input arithmetic.
                let v = if self.cfg.input_arith {
                    self.scratch[self.rng.gen_range(0..self.scratch.len())].clone()
                } else {
                    self.lit()
                };
                let k = self.lit();
                let op = ["+", "-", "*"][self.rng.gen_range(0..3)];
                format!("{v} {op} {k}")
            }
            2 if self.cfg.input_arith => {
                let r = self.byte_ref();
                let k = self.lit();
                format!("{r} + {k}")
            }
            2 | 3 => {
                if self.cfg.input_arith {
                    self.byte_ref()
                } else {
                    self.copies[self.rng.gen_range(0..self.copies.len())].clone()
                }
            }
            _ => self.globals[self.rng.gen_range(0..self.globals.len())].clone(),
        }
    }

    fn atom(&mut self) -> String {
        let ops = ["==", "!=", "<", "<=", ">", ">="];
        let op = ops[self.rng.gen_range(0..ops.len())];
        let l = self.operand();
        let r = if self.rng.gen_bool(0.6) {
            self.lit()
        } else {
            self.operand()
        };
        format!("{l} {op} {r}")
    }

    fn cond(&mut self, depth: usize) -> String {
        if !self.cfg.compound || depth >= 2 || self.rng.gen_bool(0.5) {
            return self.atom();
        }
        match self.rng.gen_range(0..3) {
            0 => format!("{} && {}", self.cond(depth + 1), self.cond(depth + 1)),
            1 => format!("({} || {})", self.cond(depth + 1), self.cond(depth + 1)),
            _ => format!("!({})", self.cond(depth + 1)),
        }
    }
}
