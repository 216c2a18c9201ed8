// SPDX-License-Identifier: Apache-2.0

//! Rare-path guided seed generation for MiniC programs.
//!
//! A program is parsed ([`lang`]), turned into an extended inter-procedural
//! CFG ([`cfg`]), annotated with branch selectivities ([`prob`]), and its
//! bounded paths are enumerated and ranked by probability ([`paths`]).
//! Guided concolic execution ([`gce`], on top of [`concolic`]) turns the
//! rarest paths into concrete inputs, which seed a small coverage-guided
//! fuzzer ([`fuzz`]).

pub mod cfg;
pub mod concolic;
pub mod fuzz;
pub mod gce;
pub mod lang;
pub mod paths;
pub mod prob;
pub mod programs;

use num_rational::BigRational;

use cfg::CfGraph;
use lang::{LangError, Program};
use paths::{CfPath, EnumOptions, PathError, PathKind, RareSet};
use prob::{DepResult, ProbCfg, Rounding};

pub(crate) fn ser_rational<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&prob::rational_text(r))
}

/// The static pipeline for one program: EIP-CFG, dependence and scores.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub program: Program,
    pub prob: ProbCfg,
}

impl Analysis {
    pub fn new(program: Program, rounding: Rounding) -> Analysis {
        let g = cfg::build_eip_cfg(&program);
        let dep = prob::analyze_dependency(&program, &g);
        let prob = prob::build_prob_cfg(&program, &g, &dep, rounding);
        Analysis { program, prob }
    }

    pub fn from_source(source: &str, rounding: Rounding) -> Result<Analysis, LangError> {
        Ok(Analysis::new(lang::parse(source)?, rounding))
    }

    pub fn graph(&self) -> &CfGraph {
        &self.prob.graph
    }

    pub fn dep(&self) -> &DepResult {
        &self.prob.dep
    }

    pub fn paths(&self, opts: &EnumOptions) -> Result<Vec<CfPath>, PathError> {
        paths::enumerate(&self.prob, opts)
    }

    /// The `k` rarest paths of the given kind with at most `bound` vertices.
    pub fn rare(&self, kind: PathKind, bound: usize, k: usize) -> Result<RareSet, PathError> {
        let all = self.paths(&EnumOptions::new(kind).bound(bound))?;
        Ok(paths::rare_paths(&all, k))
    }

    pub fn executor(&self) -> concolic::Executor {
        concolic::Executor::with_graph(&self.program, self.prob.graph.clone())
    }
}
