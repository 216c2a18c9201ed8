// SPDX-License-Identifier: Apache-2.0

//! Coverage-guided mutation fuzzing over EIP-CFG edges, and a paired
//! random-seed vs rare-seed experiment runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cfg::{CfGraph, EdgeKind, VertexId};
use crate::concolic::{Executor, InputBytes};
use crate::gce::{Gce, GceError, GceOptions};
use crate::paths::RareSet;

/// Hit counts per EIP-CFG edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    hits: Vec<u64>,
    edges: Vec<(VertexId, VertexId)>,
    succ: Vec<Vec<(VertexId, usize)>>,
}

impl CoverageMap {
    pub fn new(g: &CfGraph) -> CoverageMap {
        let mut succ = vec![Vec::new(); g.len()];
        for (i, e) in g.edges.iter().enumerate() {
            succ[e.src].push((e.dst, i));
        }
        CoverageMap {
            hits: vec![0; g.edges.len()],
            edges: g.edges.iter().map(|e| (e.src, e.dst)).collect(),
            succ,
        }
    }

    fn edge_index(&self, src: VertexId, dst: VertexId) -> Option<usize> {
        self.succ[src]
            .iter()
            .find(|(d, _)| *d == dst)
            .map(|(_, i)| *i)
    }

    /// Adds a run's edges; returns the indices of edges seen for the first time.
    pub fn record(&mut self, vertices: &[VertexId]) -> Vec<usize> {
        let mut fresh = Vec::new();
        for w in vertices.windows(2) {
            if let Some(i) = self.edge_index(w[0], w[1]) {
                if self.hits[i] == 0 {
                    fresh.push(i);
                }
                self.hits[i] += 1;
            }
        }
        fresh
    }

    pub fn hits(&self, src: VertexId, dst: VertexId) -> u64 {
        self.edge_index(src, dst).map_or(0, |i| self.hits[i])
    }

    pub fn covered(&self) -> usize {
        self.hits.iter().filter(|h| **h > 0).count()
    }

    pub fn total(&self) -> usize {
        self.hits.len()
    }

    /// `(src, dst, hits)` for every edge with a nonzero count.
    pub fn entries(&self) -> Vec<(VertexId, VertexId, u64)> {
        self.edges
            .iter()
            .zip(&self.hits)
            .filter(|(_, h)| **h > 0)
            .map(|(&(s, d), &h)| (s, d, h))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mutation {
    Flip,
    Replace,
    Insert,
    Delete,
    Splice,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::Flip,
        Mutation::Replace,
        Mutation::Insert,
        Mutation::Delete,
        Mutation::Splice,
    ];
}

/// Applies one mutation; the result keeps the input length.
pub fn mutate(
    m: Mutation,
    input: &InputBytes,
    other: &InputBytes,
    rng: &mut ChaCha8Rng,
) -> InputBytes {
    let len = input.len();
    let mut b = input.as_slice().to_vec();
    if len == 0 {
        return input.clone();
    }
    match m {
        Mutation::Flip => {
            let i = rng.gen_range(0..len);
            b[i] ^= 1 << rng.gen_range(0..8);
        }
        Mutation::Replace => {
            let i = rng.gen_range(0..len);
            b[i] = rng.gen();
        }
        Mutation::Insert => {
            let i = rng.gen_range(0..len);
            b.insert(i, rng.gen());
        }
        Mutation::Delete => {
            let i = rng.gen_range(0..len);
            b.remove(i);
        }
        Mutation::Splice => {
            let cut = rng.gen_range(0..=len);
            b.truncate(cut);
            b.extend_from_slice(&other.as_slice()[cut.min(other.len())..]);
        }
    }
    InputBytes::from_slice(&b, len)
}

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    /// Number of executions, seeds included.
    pub budget: usize,
    pub rng_seed: u64,
    /// Coverage is sampled every this many executions (and at the end).
    pub sample_every: usize,
    /// Named edges whose first hit is reported.
    pub targets: Vec<Target>,
}

impl FuzzConfig {
    pub fn new(budget: usize, rng_seed: u64) -> FuzzConfig {
        FuzzConfig {
            budget,
            rng_seed,
            sample_every: 1000,
            targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Target {
    pub name: String,
    pub src: VertexId,
    pub dst: VertexId,
}

/// Every branch outcome edge, named `b<id>:T` / `b<id>:F`.
pub fn branch_targets(g: &CfGraph) -> Vec<Target> {
    let mut out = Vec::new();
    for v in g.branch_vertices() {
        let id = g.vertex(v).branch_id().expect("branch");
        for e in g.out_edges(v) {
            let tag = match e.kind {
                EdgeKind::True => "T",
                EdgeKind::False => "F",
                _ => continue,
            };
            out.push(Target {
                name: format!("{id}:{tag}"),
                src: e.src,
                dst: e.dst,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub execs: usize,
    pub covered_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetHit {
    pub name: String,
    pub src: VertexId,
    pub dst: VertexId,
    /// 1-based execution that first covered the edge.
    pub execs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FuzzStats {
    pub executions: usize,
    pub covered_edges: usize,
    pub total_edges: usize,
    pub corpus_size: usize,
    pub series: Vec<Sample>,
    pub time_to_cover: Vec<TargetHit>,
    /// First-hit execution of every covered edge, keyed by edge index.
    #[serde(skip)]
    pub first_hit: BTreeMap<usize, usize>,
    #[serde(skip)]
    pub coverage: Vec<(VertexId, VertexId, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FuzzError {
    #[error("the seed corpus is empty")]
    NoSeeds,
    #[error("execution budget must be at least 1")]
    ZeroBudget,
}

/// Runs the seeds, then mutates corpus entries round-robin until the budget
/// is spent. An input joins the corpus only if it covers a new edge.
pub fn fuzz(
    exec: &Executor,
    seeds: &[InputBytes],
    cfg: &FuzzConfig,
) -> Result<FuzzStats, FuzzError> {
    if seeds.is_empty() {
        return Err(FuzzError::NoSeeds);
    }
    if cfg.budget == 0 {
        return Err(FuzzError::ZeroBudget);
    }
    let len = exec.input_len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut cov = CoverageMap::new(exec.graph());
    let mut queue: Vec<InputBytes> = Vec::new();
    let mut first_hit = BTreeMap::new();
    let mut series = Vec::new();
    let mut execs = 0;
    let sample_every = cfg.sample_every.max(1);

    let mut run = |input: &InputBytes, execs: &mut usize, cov: &mut CoverageMap| {
        *execs += 1;
        let (vertices, _) = exec.execute_path(input.as_slice());
        let fresh = cov.record(&vertices);
        for &e in &fresh {
            first_hit.insert(e, *execs);
        }
        !fresh.is_empty()
    };

    for s in seeds {
        if execs == cfg.budget {
            break;
        }
        let s = InputBytes::from_slice(s.as_slice(), len);
        run(&s, &mut execs, &mut cov);
        queue.push(s);
        if execs % sample_every == 0 {
            series.push(Sample {
                execs,
                covered_edges: cov.covered(),
            });
        }
    }
    let mut cursor = 0;
    while execs < cfg.budget {
        let parent = &queue[cursor % queue.len()];
        cursor += 1;
        let m = Mutation::ALL[rng.gen_range(0..Mutation::ALL.len())];
        let other = &queue[rng.gen_range(0..queue.len())];
        let child = mutate(m, parent, other, &mut rng);
        if run(&child, &mut execs, &mut cov) {
            queue.push(child);
        }
        if execs % sample_every == 0 {
            series.push(Sample {
                execs,
                covered_edges: cov.covered(),
            });
        }
    }
    if series.last().map(|s| s.execs) != Some(execs) {
        series.push(Sample {
            execs,
            covered_edges: cov.covered(),
        });
    }
    let time_to_cover = cfg
        .targets
        .iter()
        .map(|t| TargetHit {
            name: t.name.clone(),
            src: t.src,
            dst: t.dst,
            execs: cov
                .edge_index(t.src, t.dst)
                .and_then(|i| first_hit.get(&i).copied()),
        })
        .collect();
    Ok(FuzzStats {
        executions: execs,
        covered_edges: cov.covered(),
        total_edges: cov.total(),
        corpus_size: queue.len(),
        series,
        time_to_cover,
        first_hit,
        coverage: cov.entries(),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub budget: usize,
    pub trials: usize,
    /// Trial `t` uses PRNG seed `rng_seed + t`.
    pub rng_seed: u64,
    /// Fraction of each trial's budget available to seed generation.
    pub split: f64,
    pub sample_every: usize,
    pub targets: Vec<Target>,
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(budget: usize, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            budget,
            trials,
            rng_seed: 0,
            split: 0.25,
            sample_every: 1000,
            targets: Vec::new(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trial {
    pub trial: usize,
    pub rng_seed: u64,
    pub random: FuzzStats,
    pub rare: FuzzStats,
    /// Executions spent generating the rare seeds.
    pub gce_executions: usize,
    pub rare_seeds: usize,
    /// Seed generation produced nothing; the rare campaign fell back to the
    /// random seed.
    pub corpus_empty: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetSummary {
    pub name: String,
    pub random_hits: usize,
    pub rare_hits: usize,
    pub random_mean_execs: Option<f64>,
    pub rare_mean_execs: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub budget: usize,
    pub trials: usize,
    pub split: f64,
    pub total_edges: usize,
    pub random_mean_covered: f64,
    pub rare_mean_covered: f64,
    /// Trials where the rare campaign covered strictly more edges.
    pub rare_wins: usize,
    pub ties: usize,
    pub targets: Vec<TargetSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub trials: Vec<Trial>,
}

impl ExperimentReport {
    /// Coverage series of every campaign: `trial,campaign,execs,covered_edges`.
    pub fn csv(&self) -> String {
        let mut out = String::from("trial,campaign,execs,covered_edges\n");
        for t in &self.trials {
            for (name, stats) in [("random", &t.random), ("rare", &t.rare)] {
                for s in &stats.series {
                    let _ = writeln!(out, "{},{},{},{}", t.trial, name, s.execs, s.covered_edges);
                }
            }
        }
        out
    }
}

fn run_trial(
    exec: &Executor,
    rare: &RareSet,
    cfg: &ExperimentConfig,
    trial: usize,
) -> Result<Trial, FuzzError> {
    let rng_seed = cfg.rng_seed.wrapping_add(trial as u64);
    let gce_cap = ((cfg.budget as f64) * cfg.split).floor() as usize;
    let gce = Gce::with_executor(
        exec.clone(),
        GceOptions {
            rng_seed,
            max_executions: Some(gce_cap.max(1)),
            ..GceOptions::default()
        },
    );
    let random_seed = gce.random_input(rng_seed);
    let fuzz_cfg = |budget| FuzzConfig {
        budget,
        rng_seed,
        sample_every: cfg.sample_every,
        targets: cfg.targets.clone(),
    };
    let random = fuzz(
        exec,
        std::slice::from_ref(&random_seed),
        &fuzz_cfg(cfg.budget),
    )?;
    let (seeds, gce_executions, corpus_empty) = match gce.corpus(rare) {
        Ok(c) => (c.inputs(), c.executions, false),
        Err(GceError::EmptyCorpus { .. }) | Err(GceError::NoPaths) => {
            (vec![random_seed.clone()], gce_cap.min(cfg.budget - 1), true)
        }
        Err(e) => unreachable!("in-memory seed generation failed: {e}"),
    };
    let rare_budget = cfg.budget.saturating_sub(gce_executions).max(1);
    let rare_stats = fuzz(exec, &seeds, &fuzz_cfg(rare_budget))?;
    Ok(Trial {
        trial,
        rng_seed,
        random,
        rare: rare_stats,
        gce_executions,
        rare_seeds: seeds.len(),
        corpus_empty,
    })
}

/// Paired campaigns per trial: one from a single random seed with the full
/// budget, one from the rare-path seeds with what seed generation left over.
pub fn compare_experiment(
    exec: &Executor,
    rare: &RareSet,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, FuzzError> {
    if cfg.budget == 0 {
        return Err(FuzzError::ZeroBudget);
    }
    let jobs = cfg.jobs.clamp(1, cfg.trials.max(1));
    let mut results: Vec<Option<Result<Trial, FuzzError>>> = vec![None; cfg.trials];
    std::thread::scope(|s| {
        let chunks: Vec<_> = results
            .chunks_mut(cfg.trials.div_ceil(jobs).max(1))
            .enumerate()
            .collect();
        let per = cfg.trials.div_ceil(jobs).max(1);
        for (c, chunk) in chunks {
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_trial(exec, rare, cfg, c * per + i));
                }
            });
        }
    });
    let trials = results
        .into_iter()
        .map(|r| r.expect("trial ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentReport {
        summary: summarize(cfg, &trials),
        trials,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(cfg: &ExperimentConfig, trials: &[Trial]) -> ExperimentSummary {
    let targets = cfg
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let hits = |pick: &dyn Fn(&Trial) -> &FuzzStats| {
                trials
                    .iter()
                    .filter_map(|tr| pick(tr).time_to_cover[i].execs)
                    .collect::<Vec<_>>()
            };
            let random = hits(&|tr| &tr.random);
            let rare = hits(&|tr| &tr.rare);
            TargetSummary {
                name: t.name.clone(),
                random_hits: random.len(),
                rare_hits: rare.len(),
                random_mean_execs: mean(random.iter().map(|&x| x as f64)),
                rare_mean_execs: mean(rare.iter().map(|&x| x as f64)),
            }
        })
        .collect();
    ExperimentSummary {
        budget: cfg.budget,
        trials: trials.len(),
        split: cfg.split,
        total_edges: trials.first().map_or(0, |t| t.random.total_edges),
        random_mean_covered: mean(trials.iter().map(|t| t.random.covered_edges as f64))
            .unwrap_or(0.0),
        rare_mean_covered: mean(trials.iter().map(|t| t.rare.covered_edges as f64)).unwrap_or(0.0),
        rare_wins: trials
            .iter()
            .filter(|t| t.rare.covered_edges > t.random.covered_edges)
            .count(),
        ties: trials
            .iter()
            .filter(|t| t.rare.covered_edges == t.random.covered_edges)
            .count(),
        targets,
    }
}
