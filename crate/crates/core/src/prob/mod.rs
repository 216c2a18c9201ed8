// SPDX-License-Identifier: Apache-2.0

//! Probability-annotated EIP-CFG: input dependence, branch selectivity and
//! the per-edge score function.

mod selectivity;
mod taint;

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::cfg::{export_json, CfGraph, EdgeKind, GraphJson, VertexId, VertexKind};
use crate::lang::{BranchId, Program};

pub use selectivity::{
    count_byte_byte, count_byte_lit, round_3dp, selectivity, selectivity_with, uncountable_score,
    Selectivity, BYTE_DOMAIN,
};
pub use taint::{analyze_dependency, DepResult};

/// How selectivities enter the edge scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Exact rationals throughout.
    #[default]
    Exact,
    /// Each selectivity rounded to three decimals before use; the false
    /// edge gets one minus the rounded value.
    Paper,
}

#[derive(Debug, Clone)]
pub struct ProbCfg {
    pub graph: CfGraph,
    /// Score of `graph.edges[i]`.
    pub scores: Vec<BigRational>,
    pub rounding: Rounding,
    pub dep: DepResult,
    /// Selectivity of every branch vertex, dependent or not.
    pub selectivity: BTreeMap<VertexId, Selectivity>,
}

impl ProbCfg {
    pub fn score(&self, src: VertexId, dst: VertexId) -> Option<&BigRational> {
        self.graph.edge_index(src, dst).map(|i| &self.scores[i])
    }

    /// Graph dump with each edge's exact score as `num/den`.
    pub fn to_json(&self) -> GraphJson {
        let score = |i: usize| serde_json::Value::from(rational_text(&self.scores[i]));
        export_json(&self.graph, Some(&score))
    }
}

pub fn rational_text(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Assigns edge scores: a dependent branch scores S on its true edge and
/// 1 − S on its false edge; every other edge scores 1.
pub fn build_prob_cfg(p: &Program, g: &CfGraph, dep: &DepResult, rounding: Rounding) -> ProbCfg {
    let mut sel = BTreeMap::new();
    for v in &g.vertices {
        if let Some(cond) = v.cond() {
            let proc_name = v.proc.map(|i| p.procedures[i].name.as_str()).unwrap_or("");
            let s = selectivity_with(cond, &|name| dep.is_byte_copy(proc_name, name));
            sel.insert(v.id, s);
        }
    }
    let scores = g
        .edges
        .iter()
        .map(|e| {
            let src = g.vertex(e.src);
            if src.kind != VertexKind::Branch || !dep.is_dependent(e.src) {
                return BigRational::one();
            }
            let s = &sel[&e.src].value;
            let s = match rounding {
                Rounding::Exact => s.clone(),
                Rounding::Paper => round_3dp(s),
            };
            match e.kind {
                EdgeKind::True => s,
                EdgeKind::False => BigRational::one() - s,
                _ => BigRational::one(),
            }
        })
        .collect();
    ProbCfg {
        graph: g.clone(),
        scores,
        rounding,
        dep: dep.clone(),
        selectivity: sel,
    }
}

/// One row of the selectivity report.
#[derive(Debug, Clone, Serialize)]
pub struct SelectivityRow {
    pub branch_id: BranchId,
    pub vertex: VertexId,
    pub procedure: String,
    pub cond_text: String,
    pub dependent: bool,
    pub selectivity_num: String,
    pub selectivity_den: String,
    pub countable: bool,
    pub domain_size: Option<u64>,
    pub sat_count: Option<u64>,
    pub note: Option<String>,
    pub reasons: Vec<String>,
}

pub fn selectivity_report(pg: &ProbCfg) -> Vec<SelectivityRow> {
    let g = &pg.graph;
    g.branch_vertices()
        .into_iter()
        .map(|v| {
            let vx = g.vertex(v);
            let s = &pg.selectivity[&v];
            SelectivityRow {
                branch_id: vx.branch_id().expect("branch vertex"),
                vertex: v,
                procedure: vx.proc.map(|i| g.procs[i].name.clone()).unwrap_or_default(),
                cond_text: vx.cond().map(|c| c.to_string()).unwrap_or_default(),
                dependent: pg.dep.is_dependent(v),
                selectivity_num: s.value.numer().to_string(),
                selectivity_den: s.value.denom().to_string(),
                countable: s.countable,
                domain_size: s.domain_size,
                sat_count: s.sat_count,
                note: s.note.clone(),
                reasons: pg.dep.reasons.get(&v).cloned().unwrap_or_default(),
            }
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}
