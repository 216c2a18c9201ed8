// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for MiniC with short-circuit desugaring.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::LangError;

/// Condition tree as written, before desugaring.
#[derive(Debug, Clone)]
enum RawCond {
    Atom(AtomicCond),
    And(Box<RawCond>, Box<RawCond>),
    Or(Box<RawCond>, Box<RawCond>),
    Not(Box<RawCond>),
}

impl RawCond {
    /// Pushes negations down to the atoms.
    fn nnf(self, negate: bool) -> RawCond {
        match self {
            RawCond::Atom(a) if negate => RawCond::Atom(a.negated()),
            RawCond::Atom(a) => RawCond::Atom(a),
            RawCond::Not(c) => c.nnf(!negate),
            RawCond::And(a, b) if negate => {
                RawCond::Or(Box::new(a.nnf(true)), Box::new(b.nnf(true)))
            }
            RawCond::Or(a, b) if negate => {
                RawCond::And(Box::new(a.nnf(true)), Box::new(b.nnf(true)))
            }
            RawCond::And(a, b) => RawCond::And(Box::new(a.nnf(false)), Box::new(b.nnf(false))),
            RawCond::Or(a, b) => RawCond::Or(Box::new(a.nnf(false)), Box::new(b.nnf(false))),
        }
    }
}

#[derive(Debug, Clone)]
enum RawStmt {
    Simple(Stmt),
    If {
        cond: RawCond,
        then_branch: Vec<RawStmt>,
        else_branch: Vec<RawStmt>,
    },
    While {
        cond: RawCond,
        bound: Option<u32>,
        body: Vec<RawStmt>,
        line: usize,
        col: usize,
    },
}

struct RawProc {
    name: String,
    params: Vec<String>,
    returns_value: bool,
    body: Vec<RawStmt>,
}

struct CallSite {
    caller: String,
    callee: String,
    arity: usize,
    wants_value: bool,
    line: usize,
    col: usize,
}

struct IndexUse {
    index: i64,
    line: usize,
    col: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    globals: Vec<Global>,
    global_names: HashSet<String>,
    /// Variables visible in the procedure being parsed.
    scope: HashSet<String>,
    current: Option<(String, bool)>,
    loop_depth: usize,
    calls: Vec<CallSite>,
    const_indices: Vec<IndexUse>,
}

const KEYWORDS: &[&str] = &[
    "input", "int", "void", "if", "else", "while", "bound", "break", "return", "call", "in",
];

/// Parses and checks a MiniC compilation unit.
pub fn parse(source: &str) -> Result<Program, LangError> {
    let toks = tokenize(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        globals: Vec::new(),
        global_names: HashSet::new(),
        scope: HashSet::new(),
        current: None,
        loop_depth: 0,
        calls: Vec::new(),
        const_indices: Vec::new(),
    };
    let mut input_len: Option<usize> = None;
    let mut raw_procs: Vec<RawProc> = Vec::new();

    while !p.at(&Tok::Eof) {
        let (line, col) = p.here();
        let kw = p.expect_ident("a declaration")?;
        match kw.as_str() {
            "input" => {
                if input_len.is_some() {
                    return Err(LangError::semantic(
                        line,
                        col,
                        "duplicate input declaration",
                    ));
                }
                p.expect(&Tok::LBracket)?;
                let n = p.expect_int()?;
                if n < 1 {
                    return Err(LangError::semantic(
                        line,
                        col,
                        "input length must be at least 1",
                    ));
                }
                p.expect(&Tok::RBracket)?;
                p.expect(&Tok::Semi)?;
                input_len = Some(n as usize);
            }
            "int" | "void" => {
                let (nl, nc) = p.here();
                let name = p.expect_ident("a name")?;
                p.check_name(&name, nl, nc)?;
                if p.at(&Tok::LParen) {
                    if raw_procs.iter().any(|r| r.name == name) {
                        return Err(LangError::semantic(
                            nl,
                            nc,
                            format!("procedure `{name}` defined twice"),
                        ));
                    }
                    raw_procs.push(p.procedure(name, kw == "int")?);
                } else {
                    if kw == "void" {
                        return Err(LangError::syntax(
                            nl,
                            nc,
                            "expected `(` after procedure name",
                        ));
                    }
                    if !p.global_names.insert(name.clone()) {
                        return Err(LangError::semantic(
                            nl,
                            nc,
                            format!("global `{name}` declared twice"),
                        ));
                    }
                    let init = if p.eat(&Tok::Assign) {
                        p.signed_int()?
                    } else {
                        0
                    };
                    p.expect(&Tok::Semi)?;
                    p.globals.push(Global { name, init });
                }
            }
            other => {
                return Err(LangError::syntax(
                    line,
                    col,
                    format!("expected `input`, `int` or `void`, found `{other}`"),
                ))
            }
        }
    }

    let input_len_value = input_len.unwrap_or(DEFAULT_INPUT_LEN);
    p.check_calls(&raw_procs)?;
    for u in &p.const_indices {
        if u.index < 0 || u.index as usize >= input_len_value {
            return Err(LangError::semantic(
                u.line,
                u.col,
                format!(
                    "constant input index {} outside 0..{}",
                    u.index,
                    input_len_value - 1
                ),
            ));
        }
    }

    let mut next_branch = 0u32;
    let procedures = raw_procs
        .into_iter()
        .map(|r| {
            Ok(Procedure {
                name: r.name,
                params: r.params,
                returns_value: r.returns_value,
                body: desugar_block(r.body, &mut next_branch)?,
            })
        })
        .collect::<Result<Vec<_>, LangError>>()?;

    let program = Program {
        input_len: input_len_value,
        input_declared: input_len.is_some(),
        globals: p.globals,
        procedures,
        entry: "main".to_string(),
    };
    if program.procedure("main").is_none() {
        return Err(LangError::Invalid {
            message: "program has no `main` procedure".to_string(),
        });
    }
    check_acyclic(&program)?;
    Ok(program)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error_here(&self, expected: &str) -> LangError {
        let (l, c) = self.here();
        LangError::syntax(
            l,
            c,
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, t: &Tok) -> Result<(), LangError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error_here(&t.describe()))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn expect_int(&mut self) -> Result<i64, LangError> {
        match *self.peek() {
            Tok::Int(n) => {
                self.advance();
                Ok(n)
            }
            _ => Err(self.error_here("an integer")),
        }
    }

    fn signed_int(&mut self) -> Result<i64, LangError> {
        if self.eat(&Tok::Minus) {
            Ok(-self.expect_int()?)
        } else {
            self.expect_int()
        }
    }

    fn check_name(&self, name: &str, line: usize, col: usize) -> Result<(), LangError> {
        if KEYWORDS.contains(&name) || name == CURSOR {
            return Err(LangError::syntax(
                line,
                col,
                format!("`{name}` is reserved"),
            ));
        }
        Ok(())
    }

    fn visible(&self, name: &str) -> bool {
        name == CURSOR || self.scope.contains(name) || self.global_names.contains(name)
    }

    fn use_var(&self, name: &str, line: usize, col: usize) -> Result<(), LangError> {
        if self.visible(name) {
            Ok(())
        } else {
            Err(LangError::semantic(
                line,
                col,
                format!("use of undeclared variable `{name}`"),
            ))
        }
    }

    fn procedure(&mut self, name: String, returns_value: bool) -> Result<RawProc, LangError> {
        self.expect(&Tok::LParen)?;
        let mut params = Vec::new();
        self.scope.clear();
        if !self.at(&Tok::RParen) {
            loop {
                let (l, c) = self.here();
                let kw = self.expect_ident("`int`")?;
                if kw != "int" {
                    return Err(LangError::syntax(l, c, "parameters must be declared `int`"));
                }
                let (l, c) = self.here();
                let pn = self.expect_ident("a parameter name")?;
                self.check_name(&pn, l, c)?;
                if !self.scope.insert(pn.clone()) {
                    return Err(LangError::semantic(
                        l,
                        c,
                        format!("duplicate parameter `{pn}`"),
                    ));
                }
                params.push(pn);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen)?;
        self.current = Some((name.clone(), returns_value));
        let body = self.block()?;
        self.current = None;
        Ok(RawProc {
            name,
            params,
            returns_value,
            body,
        })
    }

    fn block(&mut self) -> Result<Vec<RawStmt>, LangError> {
        self.expect(&Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return Err(self.error_here("`}`"));
            }
            self.statement(&mut out)?;
        }
        self.expect(&Tok::RBrace)?;
        Ok(out)
    }

    /// A braced block or a single statement.
    fn body(&mut self) -> Result<Vec<RawStmt>, LangError> {
        if self.at(&Tok::LBrace) {
            self.block()
        } else {
            let mut out = Vec::new();
            self.statement(&mut out)?;
            Ok(out)
        }
    }

    fn statement(&mut self, out: &mut Vec<RawStmt>) -> Result<(), LangError> {
        let (line, col) = self.here();
        if self.at(&Tok::LBrace) {
            out.extend(self.block()?);
            return Ok(());
        }
        if self.eat(&Tok::Semi) {
            return Ok(());
        }
        let word = match self.peek().clone() {
            Tok::Ident(w) => w,
            _ => return Err(self.error_here("a statement")),
        };
        match word.as_str() {
            "int" => {
                self.advance();
                let (l, c) = self.here();
                let name = self.expect_ident("a variable name")?;
                self.check_name(&name, l, c)?;
                if self.global_names.contains(&name) && !self.scope.contains(&name) {
                    return Err(LangError::semantic(
                        l,
                        c,
                        format!("local `{name}` shadows a global"),
                    ));
                }
                let init = if self.eat(&Tok::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(&Tok::Semi)?;
                self.scope.insert(name.clone());
                out.push(RawStmt::Simple(Stmt::Decl { name, init }));
            }
            "if" => {
                self.advance();
                self.expect(&Tok::LParen)?;
                let cond = self.cond()?;
                self.expect(&Tok::RParen)?;
                let then_branch = self.body()?;
                let else_branch = if self.at_ident("else") {
                    self.advance();
                    self.body()?
                } else {
                    Vec::new()
                };
                out.push(RawStmt::If {
                    cond,
                    then_branch,
                    else_branch,
                });
            }
            "while" => {
                self.advance();
                self.expect(&Tok::LParen)?;
                let cond = self.cond()?;
                self.expect(&Tok::RParen)?;
                let bound = if self.at_ident("bound") {
                    self.advance();
                    let n = self.expect_int()?;
                    if !(0..=u32::MAX as i64).contains(&n) {
                        return Err(LangError::syntax(line, col, "loop bound out of range"));
                    }
                    Some(n as u32)
                } else {
                    None
                };
                self.loop_depth += 1;
                let body = self.body()?;
                self.loop_depth -= 1;
                out.push(RawStmt::While {
                    cond,
                    bound,
                    body,
                    line,
                    col,
                });
            }
            "break" => {
                self.advance();
                if self.loop_depth == 0 {
                    return Err(LangError::semantic(line, col, "`break` outside of a loop"));
                }
                self.expect(&Tok::Semi)?;
                out.push(RawStmt::Simple(Stmt::Break));
            }
            "return" => {
                self.advance();
                let (_, returns_value) = self.current.clone().expect("inside a procedure");
                let value = if self.at(&Tok::Semi) {
                    None
                } else {
                    Some(self.expr()?)
                };
                match (&value, returns_value) {
                    (Some(_), false) => {
                        return Err(LangError::semantic(
                            line,
                            col,
                            "`void` procedure cannot return a value",
                        ))
                    }
                    (None, true) => {
                        return Err(LangError::semantic(line, col, "`return` needs a value"))
                    }
                    _ => {}
                }
                self.expect(&Tok::Semi)?;
                out.push(RawStmt::Simple(Stmt::Return(value)));
            }
            "call" => {
                self.advance();
                let (l, c) = self.here();
                let callee = self.expect_ident("a procedure name")?;
                let stmt = self.call_rest(None, callee, l, c)?;
                out.push(RawStmt::Simple(stmt));
            }
            _ if KEYWORDS.contains(&word.as_str()) => {
                return Err(LangError::syntax(
                    line,
                    col,
                    format!("unexpected keyword `{word}`"),
                ))
            }
            _ => {
                self.advance();
                match self.peek().clone() {
                    Tok::LParen => {
                        let stmt = self.call_rest(None, word, line, col)?;
                        out.push(RawStmt::Simple(stmt));
                    }
                    Tok::Assign => {
                        self.advance();
                        self.use_var(&word, line, col)?;
                        if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::LParen {
                            let (l, c) = self.here();
                            let callee = self.expect_ident("a procedure name")?;
                            if callee == "in" {
                                return Err(LangError::syntax(l, c, "expected `[` after `in`"));
                            }
                            let stmt = self.call_rest(Some(word), callee, l, c)?;
                            out.push(RawStmt::Simple(stmt));
                        } else {
                            let value = self.expr()?;
                            self.expect(&Tok::Semi)?;
                            out.push(RawStmt::Simple(Stmt::Assign {
                                target: word,
                                value,
                            }));
                        }
                    }
                    Tok::PlusPlus | Tok::MinusMinus => {
                        let op = if self.advance() == Tok::PlusPlus {
                            BinOp::Add
                        } else {
                            BinOp::Sub
                        };
                        self.use_var(&word, line, col)?;
                        self.expect(&Tok::Semi)?;
                        out.push(RawStmt::Simple(Stmt::Assign {
                            target: word.clone(),
                            value: Expr::bin(op, Expr::Var(word), Expr::Lit(1)),
                        }));
                    }
                    Tok::PlusAssign | Tok::MinusAssign => {
                        let op = if self.advance() == Tok::PlusAssign {
                            BinOp::Add
                        } else {
                            BinOp::Sub
                        };
                        self.use_var(&word, line, col)?;
                        let rhs = self.expr()?;
                        self.expect(&Tok::Semi)?;
                        out.push(RawStmt::Simple(Stmt::Assign {
                            target: word.clone(),
                            value: Expr::bin(op, Expr::Var(word), rhs),
                        }));
                    }
                    _ => return Err(self.error_here("`=`, `(` or `++`")),
                }
            }
        }
        Ok(())
    }

    fn call_rest(
        &mut self,
        target: Option<String>,
        callee: String,
        line: usize,
        col: usize,
    ) -> Result<Stmt, LangError> {
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen)?;
        self.expect(&Tok::Semi)?;
        let caller = self
            .current
            .as_ref()
            .map(|c| c.0.clone())
            .unwrap_or_default();
        self.calls.push(CallSite {
            caller,
            callee: callee.clone(),
            arity: args.len(),
            wants_value: target.is_some(),
            line,
            col,
        });
        Ok(Stmt::Call {
            target,
            callee,
            args,
        })
    }

    fn check_calls(&self, procs: &[RawProc]) -> Result<(), LangError> {
        let by_name: BTreeMap<&str, &RawProc> =
            procs.iter().map(|p| (p.name.as_str(), p)).collect();
        for c in &self.calls {
            let Some(p) = by_name.get(c.callee.as_str()) else {
                return Err(LangError::UnboundProcedure {
                    name: c.callee.clone(),
                    line: c.line,
                    col: c.col,
                });
            };
            if p.params.len() != c.arity {
                return Err(LangError::semantic(
                    c.line,
                    c.col,
                    format!(
                        "`{}` takes {} argument(s), {} given (in `{}`)",
                        c.callee,
                        p.params.len(),
                        c.arity,
                        c.caller
                    ),
                ));
            }
            if c.wants_value && !p.returns_value {
                return Err(LangError::semantic(
                    c.line,
                    c.col,
                    format!("`{}` is void and has no value", c.callee),
                ));
            }
        }
        Ok(())
    }

    fn byte_ref(&mut self) -> Result<ByteRef, LangError> {
        // `in` already consumed.
        self.expect(&Tok::LBracket)?;
        let (line, col) = self.here();
        let r = match self.peek().clone() {
            Tok::Int(k) => {
                self.advance();
                self.const_indices.push(IndexUse {
                    index: k,
                    line,
                    col,
                });
                ByteRef::absolute(k)
            }
            Tok::Ident(base) => {
                self.advance();
                self.use_var(&base, line, col)?;
                let offset = if self.eat(&Tok::Plus) {
                    self.expect_int()?
                } else if self.eat(&Tok::Minus) {
                    -self.expect_int()?
                } else {
                    0
                };
                ByteRef {
                    base: Some(base),
                    offset,
                }
            }
            _ => {
                return Err(LangError::syntax(
                    line,
                    col,
                    "input index must be `k`, `v`, `v+k` or `v-k`",
                ))
            }
        };
        self.expect(&Tok::RBracket)?;
        Ok(r)
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Lit(n) => Expr::Lit(n.wrapping_neg()),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Lit(n))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) if name == "in" => {
                self.advance();
                Ok(Expr::Input(self.byte_ref()?))
            }
            Tok::Ident(name) => {
                self.advance();
                if self.at(&Tok::LParen) {
                    return Err(LangError::syntax(
                        line,
                        col,
                        "a call may only be a statement or the whole right-hand side of `=`",
                    ));
                }
                self.check_name(&name, line, col).or_else(|e| {
                    if name == CURSOR {
                        Ok(())
                    } else {
                        Err(e)
                    }
                })?;
                self.use_var(&name, line, col)?;
                Ok(Expr::Var(name))
            }
            _ => Err(self.error_here("an expression")),
        }
    }

    fn cond(&mut self) -> Result<RawCond, LangError> {
        let mut lhs = self.cond_and()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.cond_and()?;
            lhs = RawCond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_and(&mut self) -> Result<RawCond, LangError> {
        let mut lhs = self.cond_unary()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.cond_unary()?;
            lhs = RawCond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_unary(&mut self) -> Result<RawCond, LangError> {
        if self.eat(&Tok::Bang) {
            return Ok(RawCond::Not(Box::new(self.cond_unary()?)));
        }
        if self.eat(&Tok::LParen) {
            let c = self.cond()?;
            self.expect(&Tok::RParen)?;
            return Ok(c);
        }
        let lhs = self.operand()?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Neq,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => {
                return Ok(RawCond::Atom(AtomicCond::new(
                    CmpOp::Neq,
                    lhs,
                    Operand::Lit(0),
                )))
            }
        };
        self.advance();
        let rhs = self.operand()?;
        Ok(RawCond::Atom(AtomicCond::new(op, lhs, rhs)))
    }

    fn operand(&mut self) -> Result<Operand, LangError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Operand::Lit(n))
            }
            Tok::Minus => {
                self.advance();
                Ok(Operand::Lit(-self.expect_int()?))
            }
            Tok::Ident(name) if name == "in" => {
                self.advance();
                Ok(Operand::Input(self.byte_ref()?))
            }
            Tok::Ident(name) => {
                self.advance();
                if self.at(&Tok::LParen) {
                    return Err(LangError::syntax(
                        line,
                        col,
                        "calls are not allowed inside conditions; assign the result first",
                    ));
                }
                if name != CURSOR && KEYWORDS.contains(&name.as_str()) {
                    return Err(LangError::syntax(
                        line,
                        col,
                        format!("`{name}` is reserved"),
                    ));
                }
                self.use_var(&name, line, col)?;
                Ok(Operand::Var(name))
            }
            _ => Err(self.error_here("a comparison operand")),
        }
    }
}

/// Expands compound conditions into nested atomic branches, numbering
/// branches in the order they appear in the expanded tree.
fn desugar_block(stmts: Vec<RawStmt>, next: &mut u32) -> Result<Vec<Stmt>, LangError> {
    let mut out = Vec::with_capacity(stmts.len());
    for s in stmts {
        match s {
            RawStmt::Simple(st) => out.push(st),
            RawStmt::If {
                cond,
                then_branch,
                else_branch,
            } => out.push(desugar_if(cond.nnf(false), then_branch, else_branch, next)?),
            RawStmt::While {
                cond,
                bound,
                body,
                line,
                col,
            } => match cond.nnf(false) {
                RawCond::Atom(a) => {
                    let id = fresh(next);
                    out.push(Stmt::While {
                        id,
                        cond: a,
                        bound,
                        body: desugar_block(body, next)?,
                    });
                }
                RawCond::And(first, rest) => {
                    let RawCond::Atom(a) = *first else {
                        return Err(while_shape(line, col));
                    };
                    let id = fresh(next);
                    let guard = RawStmt::If {
                        cond: *rest,
                        then_branch: body,
                        else_branch: vec![RawStmt::Simple(Stmt::Break)],
                    };
                    out.push(Stmt::While {
                        id,
                        cond: a,
                        bound,
                        body: desugar_block(vec![guard], next)?,
                    });
                }
                _ => return Err(while_shape(line, col)),
            },
        }
    }
    Ok(out)
}

fn while_shape(line: usize, col: usize) -> LangError {
    LangError::semantic(
        line,
        col,
        "`while` condition must be a comparison or a `&&` chain of comparisons",
    )
}

fn fresh(next: &mut u32) -> BranchId {
    let id = BranchId(*next);
    *next += 1;
    id
}

fn desugar_if(
    cond: RawCond,
    then_branch: Vec<RawStmt>,
    else_branch: Vec<RawStmt>,
    next: &mut u32,
) -> Result<Stmt, LangError> {
    match cond {
        RawCond::Atom(a) => {
            let id = fresh(next);
            Ok(Stmt::If {
                id,
                cond: a,
                then_branch: desugar_block(then_branch, next)?,
                else_branch: desugar_block(else_branch, next)?,
            })
        }
        // a && b  =>  if (a) { if (b) T else E } else E
        RawCond::And(a, b) => {
            let inner = RawStmt::If {
                cond: *b,
                then_branch,
                else_branch: else_branch.clone(),
            };
            desugar_if(*a, vec![inner], else_branch, next)
        }
        // a || b  =>  if (a) T else { if (b) T else E }
        RawCond::Or(a, b) => {
            let inner = RawStmt::If {
                cond: *b,
                then_branch: then_branch.clone(),
                else_branch,
            };
            desugar_if(*a, then_branch, vec![inner], next)
        }
        RawCond::Not(_) => unreachable!("conditions are in negation normal form"),
    }
}

fn check_acyclic(p: &Program) -> Result<(), LangError> {
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for proc in &p.procedures {
        let set = edges.entry(proc.name.as_str()).or_default();
        visit_calls(&proc.body, &mut |c| {
            set.insert(c);
        });
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn dfs<'a>(
        n: &'a str,
        edges: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Result<(), LangError> {
        marks.insert(n, Mark::Active);
        stack.push(n);
        for &m in edges.get(n).into_iter().flatten() {
            match marks.get(m) {
                Some(Mark::Active) => {
                    let start = stack.iter().position(|s| *s == m).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(m.to_string());
                    return Err(LangError::Recursion { cycle });
                }
                Some(Mark::Done) => {}
                None => dfs(m, edges, marks, stack)?,
            }
        }
        stack.pop();
        marks.insert(n, Mark::Done);
        Ok(())
    }
    let mut marks = BTreeMap::new();
    for proc in &p.procedures {
        if !marks.contains_key(proc.name.as_str()) {
            dfs(&proc.name, &edges, &mut marks, &mut Vec::new())?;
        }
    }
    Ok(())
}

pub(crate) fn visit_calls<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a str)) {
    for s in stmts {
        match s {
            Stmt::Call { callee, .. } => f(callee),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                visit_calls(then_branch, f);
                visit_calls(else_branch, f);
            }
            Stmt::While { body, .. } => visit_calls(body, f),
            _ => {}
        }
    }
}
