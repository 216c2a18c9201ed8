// SPDX-License-Identifier: Apache-2.0

//! Path-guided concolic execution: steer concrete runs towards a target path
//! by negating branch outcomes and re-solving.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{CfGraph, EdgeKind, VertexId, VertexKind, ENTRY_GLOBAL, EXIT_GLOBAL};
use crate::concolic::{negated_path, ExecTrace, Executor, InputBytes, PathConstraint, Solver};
use crate::lang::Program;
use crate::paths::{CfPath, RareSet};

/// How a seed relates to the path it was generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Achieved {
    Exact,
    Partial {
        overlap: usize,
    },
    /// A required branch outcome was unsatisfiable.
    InfeasibleFiltered,
}

impl Achieved {
    pub fn as_str(&self) -> &'static str {
        match self {
            Achieved::Exact => "exact",
            Achieved::Partial { .. } => "partial",
            Achieved::InfeasibleFiltered => "infeasible_filtered",
        }
    }
}

/// One negation attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GceStep {
    /// Position in the current trace whose incoming branch was negated.
    pub index: usize,
    pub branch: VertexId,
    pub feasible: bool,
    pub accepted: bool,
    /// Matched prefix (IP) or overlap (IIP) after the step.
    pub score: usize,
    /// The negated path constraint handed to the solver.
    #[serde(skip)]
    pub constraint: PathConstraint,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRecord {
    pub input: InputBytes,
    pub path_index: usize,
    #[serde(skip)]
    pub source_path: CfPath,
    pub achieved: Achieved,
    /// Negation rounds performed.
    pub iterations: usize,
    /// LCS overlap of the final trace with the target.
    pub overlap: usize,
    /// Concrete executions performed.
    pub executions: usize,
    pub history: Vec<GceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// IP-GCE for complete inter-paths, IIP-GCE otherwise.
    #[default]
    Auto,
    Ip,
    Iip,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "ip" => Ok(Strategy::Ip),
            "iip" => Ok(Strategy::Iip),
            _ => Err(format!("unknown strategy `{s}` (expected auto, ip or iip)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GceOptions {
    /// Seed of the PRNG drawing the initial random input.
    pub rng_seed: u64,
    pub strategy: Strategy,
    /// Negation rounds allowed per path, as a multiple of its length.
    pub round_factor: usize,
    /// Overall cap on concrete executions across a corpus run.
    pub max_executions: Option<usize>,
}

impl Default for GceOptions {
    fn default() -> Self {
        GceOptions {
            rng_seed: 0,
            strategy: Strategy::Auto,
            round_factor: 4,
            max_executions: None,
        }
    }
}

/// Length of the longest common subsequence of two vertex sequences.
pub fn overlap(a: &[VertexId], b: &[VertexId]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut row = vec![0u32; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()] as usize
}

fn matched_prefix(a: &[VertexId], b: &[VertexId]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Whether a path is a complete inter-path: global entry to global exit
/// with every call entered.
pub fn is_inter_path(g: &CfGraph, vertices: &[VertexId]) -> bool {
    vertices.first() == Some(&ENTRY_GLOBAL)
        && vertices.last() == Some(&EXIT_GLOBAL)
        && vertices.windows(2).all(|w| {
            g.edge(w[0], w[1])
                .is_some_and(|e| e.kind != EdgeKind::Shortcut)
        })
}

/// Guided concolic execution over one program.
#[derive(Debug, Clone)]
pub struct Gce {
    exec: Executor,
    solver: Solver,
    pub options: GceOptions,
}

struct Run<'a> {
    gce: &'a Gce,
    rounds_left: usize,
    executions: usize,
    exec_cap: usize,
}

impl Run<'_> {
    fn execute(&mut self, input: &InputBytes) -> ExecTrace {
        self.executions += 1;
        self.gce.exec.execute(input)
    }

    fn exhausted(&self) -> bool {
        self.rounds_left == 0 || self.executions >= self.exec_cap
    }
}

impl Gce {
    pub fn new(p: &Program, options: GceOptions) -> Gce {
        Gce::with_executor(Executor::new(p), options)
    }

    pub fn with_executor(exec: Executor, options: GceOptions) -> Gce {
        let solver = Solver::new(exec.input_len());
        Gce {
            exec,
            solver,
            options,
        }
    }

    pub fn with_solver(mut self, solver: Solver) -> Gce {
        self.solver = solver;
        self
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    /// The initial random input for a given PRNG seed.
    pub fn random_input(&self, rng_seed: u64) -> InputBytes {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut bytes = vec![0u8; self.exec.input_len()];
        rng.fill_bytes(&mut bytes);
        if self.solver.domain_max < u8::MAX {
            let m = self.solver.domain_max as u16 + 1;
            bytes.iter_mut().for_each(|b| *b = (*b as u16 % m) as u8);
        }
        InputBytes::new(bytes)
    }

    fn run(&self, t_r: &CfPath, executions: usize) -> Run<'_> {
        Run {
            gce: self,
            rounds_left: t_r.len() * self.options.round_factor,
            executions,
            exec_cap: self.options.max_executions.unwrap_or(usize::MAX),
        }
    }

    fn target(&self, t_r: &CfPath) -> Vec<VertexId> {
        t_r.lifted(self.exec.graph())
    }

    pub fn generate(&self, t_r: &CfPath) -> SeedRecord {
        let inter = is_inter_path(self.exec.graph(), &self.target(t_r));
        match self.options.strategy {
            Strategy::Ip => self.ip(t_r),
            Strategy::Iip => self.iip(t_r),
            Strategy::Auto if inter => self.ip(t_r),
            Strategy::Auto => self.iip(t_r),
        }
    }

    /// Walks the trace and the target in lockstep; at the first mismatch the
    /// branch leading into it is negated and the input re-solved.
    pub fn ip(&self, t_r: &CfPath) -> SeedRecord {
        self.ip_from(t_r, self.random_input(self.options.rng_seed))
    }

    pub fn ip_from(&self, t_r: &CfPath, start: InputBytes) -> SeedRecord {
        let target = self.target(t_r);
        let mut run = self.run(t_r, 0);
        let mut input = start;
        let mut t_c = run.execute(&input);
        let mut history = Vec::new();
        let mut infeasible = false;
        let mut index = 1;
        while index < t_c.vertices.len() && index < target.len() {
            if t_c.vertices[index] != target[index] {
                if run.exhausted() {
                    break;
                }
                let Ok(pc) = negated_path(&t_c, index) else {
                    break;
                };
                run.rounds_left -= 1;
                let branch = t_c.vertices[index - 1];
                match self.solver.solve(&pc) {
                    Some(next) => {
                        input = next;
                        t_c = run.execute(&input);
                        history.push(GceStep {
                            index,
                            branch,
                            feasible: true,
                            accepted: true,
                            score: matched_prefix(&t_c.vertices, &target),
                            constraint: pc,
                        });
                    }
                    None => {
                        history.push(GceStep {
                            index,
                            branch,
                            feasible: false,
                            accepted: false,
                            score: matched_prefix(&t_c.vertices, &target),
                            constraint: pc,
                        });
                        infeasible = true;
                        break;
                    }
                }
            }
            index += 1;
        }
        let ov = overlap(&t_c.vertices, &target);
        let achieved = if t_c.vertices == target {
            Achieved::Exact
        } else if infeasible {
            Achieved::InfeasibleFiltered
        } else {
            Achieved::Partial { overlap: ov }
        };
        SeedRecord {
            input,
            path_index: t_r.index,
            source_path: t_r.clone(),
            achieved,
            iterations: history.len(),
            overlap: ov,
            executions: run.executions,
            history,
        }
    }

    /// Single pass over the trace's branches, keeping a negation only when it
    /// strictly increases the overlap with the target.
    pub fn iip(&self, t_r: &CfPath) -> SeedRecord {
        self.iip_from(t_r, self.random_input(self.options.rng_seed))
    }

    pub fn iip_from(&self, t_r: &CfPath, start: InputBytes) -> SeedRecord {
        let target = self.target(t_r);
        let g = self.exec.graph();
        let mut run = self.run(t_r, 0);
        let mut input = start;
        let mut t_c = run.execute(&input);
        let mut max_overlap = overlap(&t_c.vertices, &target);
        let mut max_input = input.clone();
        let mut history = Vec::new();
        let mut index = 0;
        while index < t_c.vertices.len() {
            let v = t_c.vertices[index];
            if g.vertex(v).kind == VertexKind::Branch && differ(&t_c.vertices, index, &target) {
                if run.exhausted() {
                    break;
                }
                if let Ok(pc) = negated_path(&t_c, index + 1) {
                    run.rounds_left -= 1;
                    let mut step = GceStep {
                        index: index + 1,
                        branch: v,
                        feasible: false,
                        accepted: false,
                        score: max_overlap,
                        constraint: pc.clone(),
                    };
                    if let Some(next) = self.solver.solve(&pc) {
                        step.feasible = true;
                        input = next;
                        t_c = run.execute(&input);
                        let ov = overlap(&t_c.vertices, &target);
                        if ov > max_overlap {
                            max_overlap = ov;
                            max_input = input.clone();
                            step.accepted = true;
                            step.score = ov;
                        } else {
                            input = max_input.clone();
                            t_c = run.execute(&input);
                        }
                    }
                    history.push(step);
                }
            }
            index += 1;
        }
        let achieved = if t_c.vertices == target {
            Achieved::Exact
        } else {
            Achieved::Partial {
                overlap: max_overlap,
            }
        };
        SeedRecord {
            input,
            path_index: t_r.index,
            source_path: t_r.clone(),
            achieved,
            iterations: history.len(),
            overlap: max_overlap,
            executions: run.executions,
            history,
        }
    }

    /// Seeds for every path of a rare set, in order, deduplicated by input.
    pub fn corpus(&self, rare: &RareSet) -> Result<SeedCorpus, GceError> {
        if rare.paths.is_empty() {
            return Err(GceError::NoPaths);
        }
        let mut seeds = Vec::new();
        let mut filtered = Vec::new();
        let mut duplicates = Vec::new();
        let mut seen = BTreeSet::new();
        let mut executions = 0;
        for t_r in &rare.paths {
            let mut gce = self.clone();
            if let Some(cap) = self.options.max_executions {
                if executions >= cap {
                    break;
                }
                gce.options.max_executions = Some(cap - executions);
            }
            let rec = gce.generate(t_r);
            executions += rec.executions;
            if rec.achieved == Achieved::InfeasibleFiltered {
                filtered.push(rec);
            } else if !seen.insert(rec.input.clone()) {
                duplicates.push(rec);
            } else {
                seeds.push(rec);
            }
        }
        if seeds.is_empty() {
            return Err(GceError::EmptyCorpus {
                filtered: filtered.iter().map(|r| r.path_index).collect(),
            });
        }
        Ok(SeedCorpus {
            seeds,
            filtered,
            duplicates,
            executions,
        })
    }
}

/// Whether the target takes a different outcome at the branch occurrence
/// `t_c[index]`, or has no matching occurrence at all.
fn differ(t_c: &[VertexId], index: usize, target: &[VertexId]) -> bool {
    let v = t_c[index];
    let ordinal = t_c[..index].iter().filter(|&&x| x == v).count();
    let Some(at) = target
        .iter()
        .enumerate()
        .filter(|(_, &x)| x == v)
        .nth(ordinal)
        .map(|(i, _)| i)
    else {
        return true;
    };
    target.get(at + 1) != t_c.get(index + 1)
}

pub fn ip_gce(p: &Program, t_r: &CfPath) -> SeedRecord {
    Gce::new(p, GceOptions::default()).ip(t_r)
}

pub fn iip_gce(p: &Program, t_r: &CfPath) -> SeedRecord {
    Gce::new(p, GceOptions::default()).iip(t_r)
}

pub fn gen_seed_corpus(
    p: &Program,
    rare: &RareSet,
    options: GceOptions,
) -> Result<SeedCorpus, GceError> {
    Gce::new(p, options).corpus(rare)
}

#[derive(Debug, Error)]
pub enum GceError {
    #[error("rare path set is empty")]
    NoPaths,
    #[error("every rare path was infeasible (paths {filtered:?}); no seeds generated")]
    EmptyCorpus { filtered: Vec<usize> },
    #[error("corpus I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad corpus manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct SeedCorpus {
    pub seeds: Vec<SeedRecord>,
    /// Records whose target path was shown infeasible.
    pub filtered: Vec<SeedRecord>,
    /// Records whose input duplicated an earlier seed.
    pub duplicates: Vec<SeedRecord>,
    pub executions: usize,
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub path_id: usize,
    pub achieved: String,
    pub iterations: usize,
    pub overlap: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub input_len: usize,
    pub seeds: Vec<ManifestEntry>,
    /// Path ids dropped as infeasible.
    pub filtered: Vec<usize>,
    /// Path ids whose seed duplicated an earlier one.
    pub duplicates: Vec<usize>,
}

impl SeedCorpus {
    pub fn inputs(&self) -> Vec<InputBytes> {
        self.seeds.iter().map(|s| s.input.clone()).collect()
    }

    pub fn file_name(idx: usize, path_id: usize) -> String {
        format!("seed_{idx}_{path_id}.bin")
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            input_len: self.seeds.first().map_or(0, |s| s.input.len()),
            seeds: self
                .seeds
                .iter()
                .enumerate()
                .map(|(i, s)| ManifestEntry {
                    file: SeedCorpus::file_name(i, s.path_index),
                    path_id: s.path_index,
                    achieved: s.achieved.as_str().to_string(),
                    iterations: s.iterations,
                    overlap: s.overlap,
                })
                .collect(),
            filtered: self.filtered.iter().map(|s| s.path_index).collect(),
            duplicates: self.duplicates.iter().map(|s| s.path_index).collect(),
        }
    }

    /// Writes one raw file per seed plus the manifest.
    pub fn write(&self, dir: &Path) -> Result<Manifest, GceError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| GceError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let manifest = self.manifest();
        for (s, entry) in self.seeds.iter().zip(&manifest.seeds) {
            let f = dir.join(&entry.file);
            fs::write(&f, s.input.as_slice()).map_err(io(&f))?;
        }
        let f = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&f, text + "\n").map_err(io(&f))?;
        Ok(manifest)
    }
}

/// Loads a seed directory: the files listed in its manifest if there is
/// one, otherwise every `*.bin` file in name order. Inputs are padded or
/// truncated to `len`.
pub fn read_corpus(dir: &Path, len: usize) -> Result<Vec<InputBytes>, GceError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GceError::Io { path, source }
    };
    let manifest_path = dir.join(MANIFEST);
    let files: Vec<PathBuf> = if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path).map_err(io(&manifest_path))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| GceError::Manifest {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        m.seeds.iter().map(|e| dir.join(&e.file)).collect()
    } else {
        let mut v: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "bin"))
            .collect();
        v.sort();
        v
    };
    files
        .iter()
        .map(|f| {
            fs::read(f)
                .map(|b| InputBytes::from_slice(&b, len))
                .map_err(io(f))
        })
        .collect()
}
