// SPDX-License-Identifier: Apache-2.0

//! MiniC frontend: lexer, parser and pretty-printer.

pub mod ast;
mod lexer;
mod parser;
mod printer;
mod scope;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use parser::parse;
pub use printer::unparse;
pub use scope::{Scopes, Slot};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: call to unknown procedure `{name}`")]
    UnboundProcedure {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("recursion is not supported: {}", cycle.join(" -> "))]
    Recursion { cycle: Vec<String> },
    #[error("{message}")]
    Invalid { message: String },
}

impl LangError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        LangError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    pub(crate) fn semantic(line: usize, col: usize, message: impl Into<String>) -> Self {
        LangError::Semantic {
            line,
            col,
            message: message.into(),
        }
    }

    /// Source position (line, column), when the error has one.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            LangError::Syntax { line, col, .. }
            | LangError::Semantic { line, col, .. }
            | LangError::UnboundProcedure { line, col, .. } => Some((*line, *col)),
            LangError::Recursion { .. } | LangError::Invalid { .. } => None,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            LangError::Syntax { .. } => "syntax",
            LangError::Semantic { .. } => "semantic",
            LangError::UnboundProcedure { .. } => "unbound_procedure",
            LangError::Recursion { .. } => "recursion",
            LangError::Invalid { .. } => "invalid_program",
        }
    }
}

/// One atomic branch of a program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchInfo {
    pub procedure: String,
    pub id: BranchId,
    pub cond: AtomicCond,
    pub is_loop: bool,
}

/// All atomic branches in source order (ascending id).
pub fn list_branches(p: &Program) -> Vec<BranchInfo> {
    fn walk(proc_name: &str, stmts: &[Stmt], out: &mut Vec<BranchInfo>) {
        for s in stmts {
            match s {
                Stmt::If {
                    id,
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    out.push(BranchInfo {
                        procedure: proc_name.to_string(),
                        id: *id,
                        cond: cond.clone(),
                        is_loop: false,
                    });
                    walk(proc_name, then_branch, out);
                    walk(proc_name, else_branch, out);
                }
                Stmt::While { id, cond, body, .. } => {
                    out.push(BranchInfo {
                        procedure: proc_name.to_string(),
                        id: *id,
                        cond: cond.clone(),
                        is_loop: true,
                    });
                    walk(proc_name, body, out);
                }
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    for proc in &p.procedures {
        walk(&proc.name, &proc.body, &mut out);
    }
    out.sort_by_key(|b| b.id);
    out
}

/// Checks that every constant input index fits a different input length.
pub fn check_input_len(p: &Program, len: usize) -> Result<(), LangError> {
    if len == 0 {
        return Err(LangError::Invalid {
            message: "input length must be at least 1".to_string(),
        });
    }
    let mut bad = None;
    let mut check = |r: &ByteRef| {
        if r.base.is_none() && (r.offset < 0 || r.offset as usize >= len) && bad.is_none() {
            bad = Some(r.offset);
        }
    };
    fn expr_refs(e: &Expr, f: &mut impl FnMut(&ByteRef)) {
        match e {
            Expr::Input(r) => f(r),
            Expr::Neg(x) => expr_refs(x, f),
            Expr::Bin(_, l, r) => {
                expr_refs(l, f);
                expr_refs(r, f);
            }
            Expr::Lit(_) | Expr::Var(_) => {}
        }
    }
    fn cond_refs(c: &AtomicCond, f: &mut impl FnMut(&ByteRef)) {
        for o in [&c.lhs, &c.rhs] {
            if let Operand::Input(r) = o {
                f(r)
            }
        }
    }
    fn walk(stmts: &[Stmt], f: &mut impl FnMut(&ByteRef)) {
        for s in stmts {
            match s {
                Stmt::Decl { init: Some(e), .. } | Stmt::Assign { value: e, .. } => expr_refs(e, f),
                Stmt::Return(Some(e)) => expr_refs(e, f),
                Stmt::Call { args, .. } => args.iter().for_each(|a| expr_refs(a, f)),
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    ..
                } => {
                    cond_refs(cond, f);
                    walk(then_branch, f);
                    walk(else_branch, f);
                }
                Stmt::While { cond, body, .. } => {
                    cond_refs(cond, f);
                    walk(body, f);
                }
                _ => {}
            }
        }
    }
    for proc in &p.procedures {
        walk(&proc.body, &mut check);
    }
    match bad {
        Some(k) => Err(LangError::Invalid {
            message: format!("constant input index {k} outside 0..{}", len - 1),
        }),
        None => Ok(()),
    }
}
