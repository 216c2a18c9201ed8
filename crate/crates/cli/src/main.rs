// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rareseed::cfg::{build_cfg, build_eip_cfg, build_ip_cfg, export_dot, export_json, Flavor};
use rareseed::fuzz::{
    branch_targets, compare_experiment, fuzz, ExperimentConfig, FuzzConfig, Target,
};
use rareseed::gce::{read_corpus, Gce, GceError, GceOptions, Strategy};
use rareseed::lang::{self, LangError, Program};
use rareseed::paths::{
    rare_paths, EnumOptions, PathError, PathKind, DEFAULT_BOUND, DEFAULT_MAX_PATHS,
};
use rareseed::prob::{selectivity_report, Rounding};
use rareseed::Analysis;

#[derive(Parser)]
#[command(
    name = "rareseed",
    version,
    about = "Rare-path guided seed generation for MiniC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a control flow graph as DOT or JSON.
    Cfg(CfgArgs),
    /// Report the selectivity and input dependence of every branch.
    Selectivity(SelectivityArgs),
    /// Enumerate bounded paths with their probabilities.
    Paths(PathsArgs),
    /// Select the k least probable paths.
    Rare(RareArgs),
    /// Generate a seed corpus for the rare paths.
    GenSeeds(GenSeedsArgs),
    /// Run the coverage-guided fuzzer.
    Fuzz(FuzzArgs),
    /// Compare random-seeded and rare-seeded fuzzing campaigns.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Common {
    /// MiniC source file.
    program: PathBuf,
    /// Override the program's input length.
    #[arg(long)]
    input_len: Option<usize>,
    /// Directory receiving output artifacts.
    #[arg(long, short, default_value = "rareseed-out")]
    out: PathBuf,
}

#[derive(Args)]
struct PathSel {
    /// Path kind: intra, inter or ii.
    #[arg(long, default_value = "ii")]
    kind: PathKind,
    /// Maximum path length in vertices.
    #[arg(long, default_value_t = DEFAULT_BOUND)]
    bound: usize,
    /// Procedure for intra-paths.
    #[arg(long = "proc")]
    procedure: Option<String>,
    /// Stop after this many paths.
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: usize,
    /// Selectivity rounding: paper (three decimals) or exact.
    #[arg(long, default_value = "paper", value_parser = parse_rounding)]
    rounding: Rounding,
}

#[derive(Args)]
struct CfgArgs {
    #[command(flatten)]
    common: Common,
    /// procedure, ip or eip.
    #[arg(long, default_value = "eip")]
    flavor: Flavor,
    /// Procedure to draw with `--flavor procedure`.
    #[arg(long = "proc", default_value = "main")]
    procedure: String,
    #[arg(long, default_value = "dot", value_parser = ["dot", "json"])]
    format: String,
}

#[derive(Args)]
struct SelectivityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "paper", value_parser = parse_rounding)]
    rounding: Rounding,
}

#[derive(Args)]
struct PathsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sel: PathSel,
}

#[derive(Args)]
struct RareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sel: PathSel,
    /// Number of rare paths.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Rank the paths found so far when the path cap is hit.
    #[arg(long)]
    allow_partial: bool,
}

#[derive(Args)]
struct GenSeedsArgs {
    #[command(flatten)]
    rare: RareArgs,
    /// auto, ip or iip.
    #[arg(long, default_value = "auto")]
    strategy: Strategy,
    /// Seed of the initial random input.
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Also write the final execution trace of each seed.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    common: Common,
    /// Seed corpus directory; a single random input if omitted.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Executions.
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Coverage sampling interval in executions.
    #[arg(long, default_value_t = 1000)]
    sample_every: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sel: PathSel,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Executions per campaign.
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Trial t uses PRNG seed rng_seed + t.
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Share of the budget available to seed generation.
    #[arg(long, default_value_t = 0.25)]
    split: f64,
    #[arg(long, default_value_t = 1000)]
    sample_every: usize,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_rounding(s: &str) -> Result<Rounding, String> {
    match s {
        "paper" => Ok(Rounding::Paper),
        "exact" => Ok(Rounding::Exact),
        _ => Err(format!("unknown rounding `{s}` (expected paper or exact)")),
    }
}

/// A failure with its exit status and diagnostic category.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    extra: Value,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            kind: "usage",
            message: message.into(),
            extra: Value::Null,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
        Failure {
            code: 1,
            kind: "io",
            message: format!("{}: {e}", path.display()),
            extra: Value::Null,
        }
    }

    fn analysis(kind: &'static str, message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            kind,
            message: message.into(),
            extra: Value::Null,
        }
    }
}

impl From<LangError> for Failure {
    fn from(e: LangError) -> Failure {
        let extra = match e.position() {
            Some((line, col)) => json!({ "line": line, "col": col }),
            None => Value::Null,
        };
        Failure {
            code: 2,
            kind: e.kind(),
            message: e.to_string(),
            extra,
        }
    }
}

impl From<PathError> for Failure {
    fn from(e: PathError) -> Failure {
        match e {
            PathError::BadBound(_) | PathError::UnknownProcedure(_) => {
                Failure::usage(e.to_string())
            }
            _ => Failure::analysis("paths", e.to_string()),
        }
    }
}

type Outcome = Result<Value, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            eprint!("{msg}");
            diagnostic(&Failure::usage(msg.lines().next().unwrap_or("usage error")));
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Cfg(a) => cmd_cfg(a),
        Command::Selectivity(a) => cmd_selectivity(a),
        Command::Paths(a) => cmd_paths(a),
        Command::Rare(a) => cmd_rare(a).map(|(v, _)| v),
        Command::GenSeeds(a) => cmd_gen_seeds(a),
        Command::Fuzz(a) => cmd_fuzz(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match outcome {
        Ok(v) => {
            // A closed stdout (e.g. piped into `head`) is not an error.
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&v).expect("json")
            );
            ExitCode::SUCCESS
        }
        Err(f) => {
            diagnostic(&f);
            ExitCode::from(f.code)
        }
    }
}

fn diagnostic(f: &Failure) {
    let mut v = json!({
        "status": "error",
        "code": f.code,
        "kind": f.kind,
        "message": f.message,
    });
    if let Value::Object(extra) = &f.extra {
        for (k, x) in extra {
            v[k] = x.clone();
        }
    }
    eprintln!("{v}");
}

fn load(c: &Common) -> Result<Program, Failure> {
    let src = fs::read_to_string(&c.program).map_err(|e| Failure::io(&c.program, e))?;
    let mut p = lang::parse(&src)?;
    if let Some(len) = c.input_len {
        lang::check_input_len(&p, len)?;
        p = p.with_input_len(len);
    }
    Ok(p)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let f = dir.join(name);
    fs::write(&f, text).map_err(|e| Failure::io(&f, e))?;
    Ok(f)
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cmd_cfg(a: CfgArgs) -> Outcome {
    let p = load(&a.common)?;
    let g = match a.flavor {
        Flavor::Procedure => {
            let proc = p
                .procedure(&a.procedure)
                .ok_or_else(|| Failure::usage(format!("unknown procedure `{}`", a.procedure)))?;
            build_cfg(proc)
        }
        Flavor::Ip => build_ip_cfg(&p),
        Flavor::Eip => build_eip_cfg(&p),
    };
    let (text, ext) = match a.format.as_str() {
        "json" => (
            serde_json::to_string_pretty(&export_json(&g, None)).expect("json") + "\n",
            "json",
        ),
        _ => (export_dot(&g), "dot"),
    };
    let f = write(
        &a.common.out,
        &format!("cfg_{}.{ext}", a.flavor.as_str()),
        &text,
    )?;
    Ok(json!({
        "status": "ok",
        "file": f,
        "vertices": g.len(),
        "edges": g.edges.len(),
    }))
}

fn cmd_selectivity(a: SelectivityArgs) -> Outcome {
    let an = Analysis::new(load(&a.common)?, a.rounding);
    let rows = to_json(&selectivity_report(&an.prob));
    let f = write(
        &a.common.out,
        "selectivity.json",
        &(serde_json::to_string_pretty(&rows).expect("json") + "\n"),
    )?;
    Ok(json!({ "status": "ok", "file": f, "branches": rows }))
}

fn options(sel: &PathSel) -> EnumOptions {
    let mut o = EnumOptions::new(sel.kind)
        .bound(sel.bound)
        .max_paths(sel.max_paths);
    if let Some(p) = &sel.procedure {
        o = o.procedure(p.clone());
    }
    o
}

fn cmd_paths(a: PathsArgs) -> Outcome {
    let an = Analysis::new(load(&a.common)?, a.sel.rounding);
    let (paths, capped) = match an.paths(&options(&a.sel)) {
        Ok(p) => (p, false),
        Err(PathError::CapExceeded { partial, .. }) => (partial, true),
        Err(e) => return Err(e.into()),
    };
    let mut lines = String::new();
    for p in &paths {
        lines.push_str(&serde_json::to_string(&p.report()).expect("json"));
        lines.push('\n');
    }
    let f = write(&a.common.out, "paths.jsonl", &lines)?;
    if capped {
        let mut fail = Failure::analysis(
            "path_cap",
            format!("more than {} paths; partial list written", a.sel.max_paths),
        );
        fail.extra = json!({ "file": f, "count": paths.len() });
        return Err(fail);
    }
    Ok(json!({
        "status": "ok",
        "file": f,
        "kind": a.sel.kind,
        "bound": a.sel.bound,
        "count": paths.len(),
    }))
}

fn cmd_rare(a: RareArgs) -> Result<(Value, (Analysis, rareseed::paths::RareSet)), Failure> {
    if a.k == 0 {
        return Err(Failure::usage("--k must be at least 1"));
    }
    let an = Analysis::new(load(&a.common)?, a.sel.rounding);
    let (paths, capped) = match an.paths(&options(&a.sel)) {
        Ok(p) => (p, false),
        Err(PathError::CapExceeded { partial, .. }) if a.allow_partial => (partial, true),
        Err(e) => return Err(e.into()),
    };
    if paths.is_empty() {
        return Err(Failure::analysis("no_paths", "no paths within the bound"));
    }
    let rare = rare_paths(&paths, a.k);
    let records: Vec<_> = rare.paths.iter().map(|p| p.report()).collect();
    let doc = json!({
        "kind": a.sel.kind,
        "bound": a.sel.bound,
        "k": a.k,
        "rounding": a.sel.rounding,
        "enumerated": paths.len(),
        "partial": capped,
        "short": rare.short,
        "paths": records,
    });
    let f = write(
        &a.common.out,
        "rare.json",
        &(serde_json::to_string_pretty(&doc).expect("json") + "\n"),
    )?;
    let mut out = doc;
    out["status"] = json!("ok");
    out["file"] = json!(f);
    Ok((out, (an, rare)))
}

fn cmd_gen_seeds(a: GenSeedsArgs) -> Outcome {
    let out_dir = a.rare.common.out.clone();
    let (_, (an, rare)) = cmd_rare(a.rare)?;
    let gce = Gce::with_executor(
        an.executor(),
        GceOptions {
            rng_seed: a.rng_seed,
            strategy: a.strategy,
            ..GceOptions::default()
        },
    );
    let corpus = match gce.corpus(&rare) {
        Ok(c) => c,
        Err(e @ GceError::EmptyCorpus { .. }) => {
            return Err(Failure::analysis("empty_corpus", e.to_string()))
        }
        Err(e) => return Err(Failure::analysis("gce", e.to_string())),
    };
    let manifest = corpus
        .write(&out_dir)
        .map_err(|e| Failure::analysis("io", e.to_string()))?;
    if a.trace {
        for (s, entry) in corpus.seeds.iter().zip(&manifest.seeds) {
            let t = gce.executor().execute(&s.input);
            let name = entry.file.replace(".bin", ".trace.json");
            write(
                &out_dir,
                &name,
                &(serde_json::to_string_pretty(&t.to_json()).expect("json") + "\n"),
            )?;
        }
    }
    let seeds: Vec<Value> = corpus
        .seeds
        .iter()
        .zip(&manifest.seeds)
        .map(|(s, m)| {
            json!({
                "file": m.file,
                "path_id": s.path_index,
                "achieved": s.achieved,
                "iterations": s.iterations,
                "input": s.input,
            })
        })
        .collect();
    Ok(json!({
        "status": "ok",
        "dir": out_dir,
        "seeds": seeds,
        "filtered": manifest.filtered,
        "duplicates": manifest.duplicates,
    }))
}

fn cmd_fuzz(a: FuzzArgs) -> Outcome {
    if a.budget == 0 {
        return Err(Failure::usage("--budget must be at least 1"));
    }
    let p = load(&a.common)?;
    let an = Analysis::new(p, Rounding::Exact);
    let exec = an.executor();
    let seeds = match &a.seeds {
        Some(dir) => read_corpus(dir, exec.input_len()).map_err(|e| Failure::io(dir, e))?,
        None => {
            vec![Gce::with_executor(exec.clone(), GceOptions::default()).random_input(a.rng_seed)]
        }
    };
    if seeds.is_empty() {
        return Err(Failure::analysis(
            "empty_corpus",
            "seed directory holds no seeds",
        ));
    }
    let cfg = FuzzConfig {
        budget: a.budget,
        rng_seed: a.rng_seed,
        sample_every: a.sample_every,
        targets: branch_targets(an.graph()),
    };
    let stats = fuzz(&exec, &seeds, &cfg).map_err(|e| Failure::usage(e.to_string()))?;
    let mut csv = String::from("execs,covered_edges\n");
    for s in &stats.series {
        csv.push_str(&format!("{},{}\n", s.execs, s.covered_edges));
    }
    let csv_file = write(&a.common.out, "coverage.csv", &csv)?;
    let stats_json = to_json(&stats);
    let json_file = write(
        &a.common.out,
        "fuzz_stats.json",
        &(serde_json::to_string_pretty(&stats_json).expect("json") + "\n"),
    )?;
    Ok(json!({
        "status": "ok",
        "files": [csv_file, json_file],
        "seeds": seeds.len(),
        "executions": stats.executions,
        "covered_edges": stats.covered_edges,
        "total_edges": stats.total_edges,
        "corpus_size": stats.corpus_size,
    }))
}

fn cmd_experiment(a: ExperimentArgs) -> Outcome {
    if a.trials == 0 || a.budget == 0 || a.k == 0 {
        return Err(Failure::usage(
            "--trials, --budget and --k must be at least 1",
        ));
    }
    if !(0.0..1.0).contains(&a.split) {
        return Err(Failure::usage("--split must be in [0, 1)"));
    }
    let an = Analysis::new(load(&a.common)?, a.sel.rounding);
    let paths = match an.paths(&options(&a.sel)) {
        Ok(p) => p,
        Err(PathError::CapExceeded { partial, .. }) => partial,
        Err(e) => return Err(e.into()),
    };
    let rare = rare_paths(&paths, a.k);
    let exec = an.executor();
    let targets: Vec<Target> = branch_targets(an.graph());
    let cfg = ExperimentConfig {
        budget: a.budget,
        trials: a.trials,
        rng_seed: a.rng_seed,
        split: a.split,
        sample_every: a.sample_every,
        targets,
        jobs: a.jobs,
    };
    let report =
        compare_experiment(&exec, &rare, &cfg).map_err(|e| Failure::usage(e.to_string()))?;
    let csv = write(&a.common.out, "experiment.csv", &report.csv())?;
    let summary = to_json(&report.summary);
    let sum = write(
        &a.common.out,
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("json") + "\n"),
    )?;
    Ok(json!({
        "status": "ok",
        "files": [csv, sum],
        "summary": summary,
    }))
}
