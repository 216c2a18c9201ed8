// SPDX-License-Identifier: Apache-2.0

//! Branch selectivity by exact model counting over byte domains.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::lang::{AtomicCond, ByteRef, CmpOp, Operand};

/// Size of one input byte's domain.
pub const BYTE_DOMAIN: u64 = 256;

/// Score used for input-dependent conditions whose satisfying set cannot be
/// counted (e.g. tests of a procedure's return value).
pub fn uncountable_score() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Selectivity {
    #[serde(serialize_with = "crate::ser_rational")]
    pub value: BigRational,
    pub countable: bool,
    /// |D_b|: product of the domains of the condition's free variables.
    pub domain_size: Option<u64>,
    /// |T_b|: number of satisfying assignments.
    pub sat_count: Option<u64>,
    /// Why the default score was used, when it was.
    pub note: Option<String>,
}

impl Selectivity {
    fn counted(sat: u64, domain: u64) -> Selectivity {
        Selectivity {
            value: BigRational::new(BigInt::from(sat), BigInt::from(domain)),
            countable: true,
            domain_size: Some(domain),
            sat_count: Some(sat),
            note: None,
        }
    }

    fn uncountable(note: String) -> Selectivity {
        Selectivity {
            value: uncountable_score(),
            countable: false,
            domain_size: None,
            sat_count: None,
            note: Some(note),
        }
    }

    /// Selectivity of the negated condition: 1 − S when countable.
    pub fn complement(&self) -> Selectivity {
        match (self.countable, self.domain_size, self.sat_count) {
            (true, Some(d), Some(t)) => Selectivity::counted(d - t, d),
            _ => self.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    Byte(ByteVar),
    Lit(i64),
    Unbounded(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ByteVar {
    Ref(ByteRef),
    Var(String),
}

/// Selectivity treating every scalar-variable operand as uncountable.
pub fn selectivity(cond: &AtomicCond) -> Selectivity {
    selectivity_with(cond, &|_| false)
}

/// Selectivity where `byte_var(name)` tells whether a scalar variable only
/// ever holds a copy of one input byte (and so ranges over 0..=255).
pub fn selectivity_with(cond: &AtomicCond, byte_var: &dyn Fn(&str) -> bool) -> Selectivity {
    let term = |o: &Operand| match o {
        Operand::Input(r) => Term::Byte(ByteVar::Ref(r.clone())),
        Operand::Lit(n) => Term::Lit(*n),
        Operand::Var(v) if byte_var(v) => Term::Byte(ByteVar::Var(v.clone())),
        Operand::Var(v) => Term::Unbounded(v.clone()),
    };
    let (l, r) = (term(&cond.lhs), term(&cond.rhs));
    match (&l, &r) {
        (Term::Unbounded(v), _) | (_, Term::Unbounded(v)) => Selectivity::uncountable(format!(
            "`{v}` is not a copy of an input byte; its domain is not countable"
        )),
        (Term::Lit(a), Term::Lit(b)) => Selectivity::counted(cond.op.eval(*a, *b) as u64, 1),
        (Term::Byte(_), Term::Lit(c)) => {
            Selectivity::counted(count_byte_lit(cond.op, *c), BYTE_DOMAIN)
        }
        (Term::Lit(c), Term::Byte(_)) => {
            Selectivity::counted(count_byte_lit(cond.op.flip(), *c), BYTE_DOMAIN)
        }
        (Term::Byte(a), Term::Byte(b)) if a == b => {
            let sat = if matches!(cond.op, CmpOp::Eq | CmpOp::Le | CmpOp::Ge) {
                BYTE_DOMAIN
            } else {
                0
            };
            Selectivity::counted(sat, BYTE_DOMAIN)
        }
        (Term::Byte(_), Term::Byte(_)) => {
            Selectivity::counted(count_byte_byte(cond.op), BYTE_DOMAIN * BYTE_DOMAIN)
        }
    }
}

/// |{x in 0..=255 : x op c}|.
pub fn count_byte_lit(op: CmpOp, c: i64) -> u64 {
    let n = BYTE_DOMAIN as i64;
    let below = c.clamp(0, n); // x < c
    let at_most = c.saturating_add(1).clamp(0, n); // x <= c
    let eq = (0..n).contains(&c) as i64;
    let count = match op {
        CmpOp::Eq => eq,
        CmpOp::Neq => n - eq,
        CmpOp::Lt => below,
        CmpOp::Le => at_most,
        CmpOp::Gt => n - at_most,
        CmpOp::Ge => n - below,
    };
    count as u64
}

/// |{(x, y) in (0..=255)^2 : x op y}| for two independent bytes.
pub fn count_byte_byte(op: CmpOp) -> u64 {
    let n = BYTE_DOMAIN;
    let strict = n * (n - 1) / 2;
    match op {
        CmpOp::Eq => n,
        CmpOp::Neq => n * n - n,
        CmpOp::Lt | CmpOp::Gt => strict,
        CmpOp::Le | CmpOp::Ge => strict + n,
    }
}

/// Rounds to three decimal places, half away from zero.
pub fn round_3dp(x: &BigRational) -> BigRational {
    let thousand = BigRational::from_integer(BigInt::from(1000));
    let scaled = x * &thousand;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let rounded = if scaled >= BigRational::zero() {
        (scaled + half).floor()
    } else {
        (scaled - half).ceil()
    };
    rounded / thousand
}
