// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use super::ast::{Program, Stmt, CURSOR};

/// Storage location of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Global(usize),
    /// Local of a procedure; parameters come first, in order.
    Local(usize, usize),
}

/// Name resolution for a checked program. A name is local to a procedure if
/// it is a parameter or declared anywhere in the body; otherwise it is a
/// global. Global slot 0 is the cursor.
#[derive(Debug, Clone)]
pub struct Scopes {
    pub globals: Vec<String>,
    pub locals: Vec<Vec<String>>,
    global_index: HashMap<String, usize>,
    local_index: Vec<HashMap<String, usize>>,
}

impl Scopes {
    pub fn new(p: &Program) -> Scopes {
        let mut globals = vec![CURSOR.to_string()];
        globals.extend(p.globals.iter().map(|g| g.name.clone()));
        let global_index = globals
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut locals = Vec::new();
        let mut local_index = Vec::new();
        for proc in &p.procedures {
            let mut names: Vec<String> = proc.params.clone();
            collect_decls(&proc.body, &mut names);
            let mut index = HashMap::new();
            let mut uniq = Vec::new();
            for n in names {
                if !index.contains_key(&n) {
                    index.insert(n.clone(), uniq.len());
                    uniq.push(n);
                }
            }
            locals.push(uniq);
            local_index.push(index);
        }
        Scopes {
            globals,
            locals,
            global_index,
            local_index,
        }
    }

    pub fn resolve(&self, proc: usize, name: &str) -> Slot {
        if let Some(&i) = self.local_index[proc].get(name) {
            return Slot::Local(proc, i);
        }
        match self.global_index.get(name) {
            Some(&i) => Slot::Global(i),
            None => panic!("unresolved variable `{name}` in checked program"),
        }
    }

    pub fn slot_name(&self, slot: Slot) -> &str {
        match slot {
            Slot::Global(i) => &self.globals[i],
            Slot::Local(p, i) => &self.locals[p][i],
        }
    }

    pub fn cursor() -> Slot {
        Slot::Global(0)
    }
}

fn collect_decls(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match s {
            Stmt::Decl { name, .. } => out.push(name.clone()),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_decls(then_branch, out);
                collect_decls(else_branch, out);
            }
            Stmt::While { body, .. } => collect_decls(body, out),
            _ => {}
        }
    }
}
