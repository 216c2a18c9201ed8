// SPDX-License-Identifier: Apache-2.0

//! Abstract syntax for MiniC after short-circuit desugaring.
//!
//! Every `if`/`while` condition in a [`Program`] is an [`AtomicCond`]: the
//! parser expands `&&`, `||` and `!` into nested single-comparison branches
//! before the AST is handed out.

use std::fmt;

use serde::Serialize;

/// Name of the implicit global cursor into the input array.
pub const CURSOR: &str = "cur";

/// Input length used when a program carries no `input[N];` declaration.
pub const DEFAULT_INPUT_LEN: usize = 16;

/// Iteration cap applied to `while` loops without an explicit `bound N`.
pub const DEFAULT_UNROLL_BOUND: u32 = 256;

/// Source-order identifier of an atomic branch (an `if` or `while` test).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BranchId(pub u32);

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Neq,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];

    /// Operator of the logically negated comparison.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Neq,
            CmpOp::Neq => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// Operator obtained by swapping the operands (`a < b` is `b > a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Neq => CmpOp::Neq,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }

    pub fn eval(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Neq => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Neq => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A read of one input byte: `in[k]`, `in[cur+k]` or `in[v-k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ByteRef {
    /// Variable the index is relative to; `None` for a constant index.
    pub base: Option<String>,
    pub offset: i64,
}

impl ByteRef {
    pub fn absolute(index: i64) -> Self {
        ByteRef {
            base: None,
            offset: index,
        }
    }

    pub fn cursor(offset: i64) -> Self {
        ByteRef {
            base: Some(CURSOR.to_string()),
            offset,
        }
    }
}

impl fmt::Display for ByteRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.base, self.offset) {
            (None, k) => write!(f, "in[{k}]"),
            (Some(b), 0) => write!(f, "in[{b}]"),
            (Some(b), k) if k > 0 => write!(f, "in[{b}+{k}]"),
            (Some(b), k) => write!(f, "in[{b}-{}]", k.unsigned_abs()),
        }
    }
}

/// One side of an atomic comparison.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Operand {
    Input(ByteRef),
    Var(String),
    Lit(i64),
}

impl Operand {
    /// The variable this operand reads, if any (an index base counts).
    pub fn var(&self) -> Option<&str> {
        match self {
            Operand::Input(r) => r.base.as_deref(),
            Operand::Var(v) => Some(v),
            Operand::Lit(_) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Input(r) => r.fmt(f),
            Operand::Var(v) => f.write_str(v),
            Operand::Lit(n) => write!(f, "{n}"),
        }
    }
}

/// A single comparison; the only condition form left after desugaring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AtomicCond {
    pub op: CmpOp,
    pub lhs: Operand,
    pub rhs: Operand,
}

impl AtomicCond {
    pub fn new(op: CmpOp, lhs: Operand, rhs: Operand) -> Self {
        AtomicCond { op, lhs, rhs }
    }

    pub fn negated(&self) -> AtomicCond {
        AtomicCond {
            op: self.op.negate(),
            lhs: self.lhs.clone(),
            rhs: self.rhs.clone(),
        }
    }

    pub fn reads_input(&self) -> bool {
        matches!(self.lhs, Operand::Input(_)) || matches!(self.rhs, Operand::Input(_))
    }
}

impl fmt::Display for AtomicCond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 2,
        }
    }

    /// Wrapping integer semantics; division and remainder by zero yield 0.
    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Div => {
                if b == 0 {
                    0
                } else {
                    a.wrapping_div(b)
                }
            }
            BinOp::Rem => {
                if b == 0 {
                    0
                } else {
                    a.wrapping_rem(b)
                }
            }
        }
    }
}

/// Integer expression (right-hand sides, call arguments, return values).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Expr {
    Lit(i64),
    Var(String),
    Input(ByteRef),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    /// Calls `f` for each variable read by the expression, including index bases.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => f(v),
            Expr::Input(r) => {
                if let Some(b) = &r.base {
                    f(b)
                }
            }
            Expr::Neg(e) => e.for_each_var(f),
            Expr::Bin(_, l, r) => {
                l.for_each_var(f);
                r.for_each_var(f);
            }
        }
    }

    pub fn reads_input(&self) -> bool {
        match self {
            Expr::Input(_) => true,
            Expr::Lit(_) | Expr::Var(_) => false,
            Expr::Neg(e) => e.reads_input(),
            Expr::Bin(_, l, r) => l.reads_input() || r.reads_input(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Expr::Lit(n) if *n < 0 => write!(f, "({n})"),
            Expr::Lit(n) => write!(f, "{n}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Input(r) => write!(f, "{r}"),
            Expr::Neg(e) if matches!(**e, Expr::Neg(_)) => {
                f.write_str("-(")?;
                e.fmt_prec(f, 0)?;
                f.write_str(")")
            }
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_prec(f, 3)
            }
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                if p < parent {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                // Left associative: the right operand binds one level tighter.
                r.fmt_prec(f, p + 1)?;
                if p < parent {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Stmt {
    /// `int x;` or `int x = e;` inside a procedure body.
    Decl {
        name: String,
        init: Option<Expr>,
    },
    /// `x = e;` (also used for the cursor: `cur = cur + 3;`).
    Assign {
        target: String,
        value: Expr,
    },
    If {
        id: BranchId,
        cond: AtomicCond,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    While {
        id: BranchId,
        cond: AtomicCond,
        /// Iteration bound from a `bound N` annotation.
        bound: Option<u32>,
        body: Vec<Stmt>,
    },
    /// `f(args);` or `x = f(args);`.
    Call {
        target: Option<String>,
        callee: String,
        args: Vec<Expr>,
    },
    Break,
    Return(Option<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Procedure {
    pub name: String,
    pub params: Vec<String>,
    pub returns_value: bool,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Global {
    pub name: String,
    pub init: i64,
}

/// A checked MiniC compilation unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Program {
    /// Fixed input length L; inputs are byte arrays of exactly this length.
    pub input_len: usize,
    /// Whether `input_len` came from an `input[N];` declaration.
    pub input_declared: bool,
    pub globals: Vec<Global>,
    /// Procedures in source order.
    pub procedures: Vec<Procedure>,
    /// Name of the entry procedure (always `main`).
    pub entry: String,
}

impl Program {
    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn procedure_index(&self, name: &str) -> Option<usize> {
        self.procedures.iter().position(|p| p.name == name)
    }

    pub fn main(&self) -> &Procedure {
        self.procedure(&self.entry)
            .expect("checked program always has an entry procedure")
    }

    /// Returns a copy with a different input length L.
    pub fn with_input_len(mut self, len: usize) -> Program {
        self.input_len = len;
        self.input_declared = true;
        self
    }
}
