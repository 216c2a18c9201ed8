// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::ast::*;

/// Renders a program as MiniC source that parses back to an equal AST.
pub fn unparse(p: &Program) -> String {
    let mut out = String::new();
    if p.input_declared {
        let _ = writeln!(out, "input[{}];", p.input_len);
    }
    for g in &p.globals {
        let _ = writeln!(out, "int {} = {};", g.name, g.init);
    }
    for proc in &p.procedures {
        let ret = if proc.returns_value { "int" } else { "void" };
        let params: Vec<String> = proc.params.iter().map(|x| format!("int {x}")).collect();
        let _ = writeln!(out, "\n{ret} {}({}) {{", proc.name, params.join(", "));
        block(&mut out, &proc.body, 1);
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        indent(out, depth);
        match s {
            Stmt::Decl { name, init: None } => {
                let _ = writeln!(out, "int {name};");
            }
            Stmt::Decl {
                name,
                init: Some(e),
            } => {
                let _ = writeln!(out, "int {name} = {e};");
            }
            Stmt::Assign { target, value } => {
                let _ = writeln!(out, "{target} = {value};");
            }
            Stmt::Call {
                target,
                callee,
                args,
            } => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                if let Some(t) = target {
                    let _ = write!(out, "{t} = ");
                }
                let _ = writeln!(out, "{callee}({});", args.join(", "));
            }
            Stmt::Break => out.push_str("break;\n"),
            Stmt::Return(None) => out.push_str("return;\n"),
            Stmt::Return(Some(e)) => {
                let _ = writeln!(out, "return {e};");
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let _ = writeln!(out, "if ({cond}) {{");
                block(out, then_branch, depth + 1);
                indent(out, depth);
                if else_branch.is_empty() {
                    out.push_str("}\n");
                } else {
                    out.push_str("} else {\n");
                    block(out, else_branch, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
            }
            Stmt::While {
                cond, bound, body, ..
            } => {
                let _ = write!(out, "while ({cond})");
                if let Some(n) = bound {
                    let _ = write!(out, " bound {n}");
                }
                out.push_str(" {\n");
                block(out, body, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
    }
}
