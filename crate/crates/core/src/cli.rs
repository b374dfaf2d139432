//! Command-line surface: `solve`, `robust`, `verify`, `bench`.
//!
//! Exit codes: 0 success, 1 negative outcome (unsatisfiable / failed verdict),
//! 2 error. Reports are JSON; bench output is CSV.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{is_compatible, require_witness, singleton_expand, verify_bw_witness, OperationTable};
use crate::binarize::{binarize, lift_assignment};
use crate::consistency::{search, solve_bounded_width};
use crate::error::{Error, Result};
use crate::generate::{plant_and_corrupt, two_sat};
use crate::instance::{value, ConstraintLanguage, Instance};
use crate::io::{parse_instance, parse_language, parse_prague, parse_vectors, read_to_string};
use crate::prague::{check_23_extendability, sdp_to_prague, verify_weak_prague};
use crate::rounding::{
    check_tolerance_contract, choose_level, derandomized_round_with, robust_round_with, RoundingOptions,
    RoundingParams, RoundingReport,
};
use crate::sdp::{build_sdp, check_sdp_feasibility, solve_sdp_with, SdpVectors, SolverConfig, DEFAULT_ETA};

/// Version of the per-run bench CSV schema.
pub const BENCH_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "robust-csp", version, about = "Robust approximation of bounded-width CSPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide satisfiability exactly by local consistency.
    Solve(SolveArgs),
    /// Exact solve, else SDP + rounding; writes a JSON report.
    Robust(RobustArgs),
    /// Check a Prague instance or SDP vectors.
    Verify(VerifyArgs),
    /// Sweep planted instances and write a CSV of removal fractions and values.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Randomized,
    Derandomized,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub language: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub language: PathBuf,
    /// Rounding level n; chosen from the SDP value when absent.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub level: Option<u64>,
    #[arg(long, value_enum, default_value = "randomized")]
    pub mode: ModeArg,
    /// Rounding seed (randomized) or candidate-pool seed (derandomized).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SDP optimality gap; defaults to 1/m.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Feasibility tolerance the vectors must meet.
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    /// Reduce constraints of arity > 2 to binary ones first, then lift back.
    #[arg(long)]
    pub binarize: bool,
    /// Go straight to the rounding path.
    #[arg(long)]
    pub skip_exact: bool,
    /// Use these vectors instead of solving the SDP.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Candidate pool size for derandomized rounding.
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Include wall-clock timings (makes reports non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub prague: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Threshold for reading a Prague instance off vectors.
    #[arg(long, default_value_t = 1e-9)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    /// Also report (2,3)-extendability failures.
    #[arg(long)]
    pub extend: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Language file with witness; the built-in 2-SAT language when absent.
    #[arg(long)]
    pub language: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub vars: usize,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub constraints: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.001,0.01")]
    pub eps: Vec<f64>,
    #[arg(long = "level", value_delimiter = ',', default_value = "2,3")]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "randomized")]
    pub mode: ModeArg,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long)]
    pub timing: bool,
    /// Per-run CSV; the aggregate goes next to it as `<stem>.summary.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Robust(a) => cmd_robust(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        if matches!(e, Error::MissingWitness) {
            eprintln!("hint: add \"f1\" (ternary) and \"f2\" (4-ary) operation tables to the language file");
        }
        2
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Witness ops, after checking they preserve every instance relation.
fn witness_ops(instance: &Instance, language: &ConstraintLanguage) -> Result<Vec<OperationTable>> {
    let w = require_witness(language)?;
    for (index, c) in instance.constraints().iter().enumerate() {
        for f in [&w.f1, &w.f2] {
            if !is_compatible(f, &c.relation)? {
                return Err(Error::InvalidConstraint {
                    index,
                    reason: "relation is not preserved by the language witness".into(),
                });
            }
        }
    }
    Ok(vec![w.f1.clone(), w.f2.clone()])
}

/// The language with every singleton relation, after checking the witness survives.
fn expanded(language: &ConstraintLanguage) -> Result<ConstraintLanguage> {
    let out = singleton_expand(language);
    let w = require_witness(&out)?;
    if !verify_bw_witness(&w.f1, &w.f2, &out)? {
        return Err(Error::InvalidWitness(
            "witness is not idempotent, so singleton expansion breaks it; reduce the language to its core first".into(),
        ));
    }
    Ok(out)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let instance = parse_instance(&read_to_string(&args.instance)?)?;
    let language = expanded(&parse_language(&read_to_string(&args.language)?)?)?;
    witness_ops(&instance, &language)?;
    match solve_bounded_width(&instance, &language)? {
        Some(a) => {
            let v = value(&instance, &a)?;
            emit(
                args.out.as_deref(),
                &pretty(&json!({
                    "status": "satisfiable",
                    "assignment": a.values(),
                    "value": v.as_f64(),
                    "satisfied": v.numerator,
                    "num_constraints": v.denominator,
                })),
            )?;
            Ok(0)
        }
        None => {
            emit(args.out.as_deref(), &pretty(&json!({"status": "unsatisfiable"})))?;
            Ok(1)
        }
    }
}

#[derive(Serialize)]
struct SdpSummary {
    source: &'static str,
    objective: f64,
    upper_bound: Option<f64>,
    iterations: usize,
    converged: bool,
    delta: f64,
    feasibility: crate::sdp::FeasibilityReport,
}

pub fn cmd_robust(args: &RobustArgs) -> Result<i32> {
    let original = parse_instance(&read_to_string(&args.instance)?)?;
    let language = expanded(&parse_language(&read_to_string(&args.language)?)?)?;
    if original.is_degenerate() {
        return Err(Error::DegenerateInstance);
    }
    witness_ops(&original, &language)?;
    let (instance, language, lift) = if original.max_arity() > 2 {
        if !args.binarize {
            return Err(Error::Config(format!(
                "instance has arity {} > 2; rerun with --binarize",
                original.max_arity()
            )));
        }
        let (i, l, map) = binarize(&original, &language)?;
        (i, l, Some(map))
    } else {
        (original.clone(), language, None)
    };
    let ops = witness_ops(&instance, &language)?;
    if let Some(l) = args.level {
        RoundingParams::check_level(l as usize, instance.domain().size())?;
        check_tolerance_contract(l as usize, args.eta)?;
    }
    let config = json!({
        "instance": args.instance,
        "language": args.language,
        "level": args.level,
        "mode": args.mode,
        "seed": args.seed,
        "delta": args.delta,
        "eta": args.eta,
        "binarize": args.binarize,
        "skip_exact": args.skip_exact,
        "vectors": args.vectors,
        "pool_size": args.pool_size,
    });
    let clock = Instant::now();

    if !args.skip_exact {
        if let Some(a) = search(&instance)? {
            let a = match &lift {
                Some(map) => lift_assignment(&a, map)?,
                None => a,
            };
            let v = value(&original, &a)?;
            let mut report = json!({
                "command": "robust",
                "config": config,
                "path": "exact",
                "assignment": a.values(),
                "value": v.as_f64(),
                "satisfied": v.numerator,
                "num_constraints": v.denominator,
            });
            if args.timing {
                report["timing_ms"] = json!(clock.elapsed().as_secs_f64() * 1e3);
            }
            emit(args.out.as_deref(), &pretty(&report))?;
            return Ok(0);
        }
    }

    let delta = args.delta.unwrap_or(1.0 / instance.num_constraints() as f64);
    let (vectors, source) = match &args.vectors {
        Some(p) => (parse_vectors(&read_to_string(p)?)?, "file"),
        None => (
            solve_sdp_with(&build_sdp(&instance)?, delta, &solver_config(args.eta))?,
            "solver",
        ),
    };
    let feasibility = check_sdp_feasibility(&vectors, args.eta);
    if !feasibility.pass {
        return Err(Error::Pipeline(format!(
            "vectors are infeasible at eta = {:e} (max residual {:e})",
            args.eta,
            feasibility.max_residual()
        )));
    }
    let objective = crate::sdp::sdp_objective(&instance, &vectors);
    let d = instance.domain().size();
    let choice = choose_level(objective.clamp(0.0, 1.0), instance.num_constraints(), d)?;
    let n = args.level.map_or(choice.n, |l| l as usize);
    check_tolerance_contract(n, args.eta)?;
    let options = RoundingOptions {
        pool_size: args.pool_size,
        timing: args.timing,
    };
    let (assignment, rounding): (_, RoundingReport) = match args.mode {
        ModeArg::Randomized => robust_round_with(&instance, &vectors, n, args.seed, &ops, &options)?,
        ModeArg::Derandomized => derandomized_round_with(&instance, &vectors, n, &ops, args.seed, &options)?,
    };
    let assignment = match &lift {
        Some(map) => lift_assignment(&assignment, map)?,
        None => assignment,
    };
    let v = value(&original, &assignment)?;
    let sdp = SdpSummary {
        source,
        objective,
        upper_bound: vectors.upper_bound,
        iterations: vectors.iterations,
        converged: vectors.converged,
        delta,
        feasibility,
    };
    let mut report = json!({
        "command": "robust",
        "config": config,
        "path": "rounding",
        "assignment": assignment.values(),
        "value": v.as_f64(),
        "satisfied": v.numerator,
        "num_constraints": v.denominator,
        "level_choice": choice,
        "level": n,
        "sdp": sdp,
        "rounding": rounding,
    });
    if args.timing {
        report["timing_ms"] = json!(clock.elapsed().as_secs_f64() * 1e3);
    }
    emit(args.out.as_deref(), &pretty(&report))?;
    Ok(0)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    if args.prague.is_none() && args.vectors.is_none() {
        return Err(Error::Config("verify needs --prague or --vectors".into()));
    }
    let mut report = serde_json::Map::new();
    let mut ok = true;
    if let Some(p) = &args.prague {
        let prague = parse_prague(&read_to_string(p)?)?;
        let verdict = verify_weak_prague(&prague)?;
        ok &= verdict.passed();
        report.insert("prague".into(), serde_json::to_value(&verdict)?);
        if args.extend {
            let failures = check_23_extendability(&prague);
            report.insert("extend".into(), serde_json::to_value(&failures)?);
        }
    }
    if let Some(p) = &args.vectors {
        let vectors: SdpVectors = parse_vectors(&read_to_string(p)?)?;
        let feasibility = check_sdp_feasibility(&vectors, args.eta);
        ok &= feasibility.pass;
        report.insert("feasibility".into(), serde_json::to_value(&feasibility)?);
        let prague = sdp_to_prague(&vectors, args.tau)?;
        let verdict = verify_weak_prague(&prague)?;
        ok &= verdict.passed();
        report.insert("tau".into(), json!(args.tau));
        report.insert("vector_prague".into(), serde_json::to_value(&verdict)?);
        if args.extend {
            let failures = check_23_extendability(&prague);
            report.insert("extend".into(), serde_json::to_value(&failures)?);
        }
    }
    report.insert("status".into(), json!(if ok { "pass" } else { "fail" }));
    emit(args.out.as_deref(), &pretty(&Value::Object(report)))?;
    Ok(if ok { 0 } else { 1 })
}

/// One bench run.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub schema: u32,
    pub vars: usize,
    pub constraints: usize,
    pub eps: f64,
    pub level: usize,
    pub seed: u64,
    pub mode: ModeArg,
    pub corrupted_fraction: f64,
    pub sdp_objective: f64,
    pub r: usize,
    pub s: f64,
    pub removed_step2: usize,
    pub removed_step3: usize,
    pub removed_step5: usize,
    pub removed_step7: usize,
    pub removed_step8: usize,
    pub removed_fraction: f64,
    pub value: f64,
    pub satisfies_retained: bool,
    pub j_pass: bool,
    pub time_ms: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchSummary {
    pub schema: u32,
    pub constraints: usize,
    pub eps: f64,
    pub level: usize,
    pub mode: ModeArg,
    pub runs: usize,
    pub mean_removed_fraction: f64,
    pub std_removed_fraction: f64,
    pub mean_value: f64,
    pub std_value: f64,
    pub min_value: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs the grid; rows are ordered by (m, ε, seed, level).
pub fn bench_rows(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    let language = match &args.language {
        Some(p) => expanded(&parse_language(&read_to_string(p)?)?)?,
        None => two_sat(),
    };
    let w = require_witness(&language)?;
    let ops = [w.f1.clone(), w.f2.clone()];
    for &n in &args.levels {
        check_tolerance_contract(n, args.eta)?;
    }
    let options = RoundingOptions {
        pool_size: args.pool_size,
        timing: false,
    };
    let mut rows = Vec::new();
    for &m in &args.constraints {
        for &eps in &args.eps {
            for k in 0..args.seeds {
                let seed = args.seed + k;
                let planted = plant_and_corrupt(&language, args.vars, m, eps, seed)?;
                let delta = args.delta.unwrap_or(1.0 / m as f64);
                let vectors = solve_sdp_with(&build_sdp(&planted.instance)?, delta, &solver_config(args.eta))?;
                let objective = crate::sdp::sdp_objective(&planted.instance, &vectors);
                for &n in &args.levels {
                    let clock = Instant::now();
                    let (_, rep) = match args.mode {
                        ModeArg::Randomized => robust_round_with(&planted.instance, &vectors, n, seed, &ops, &options)?,
                        ModeArg::Derandomized => {
                            derandomized_round_with(&planted.instance, &vectors, n, &ops, seed, &options)?
                        }
                    };
                    rows.push(BenchRow {
                        schema: BENCH_SCHEMA,
                        vars: args.vars,
                        constraints: m,
                        eps,
                        level: n,
                        seed,
                        mode: args.mode,
                        corrupted_fraction: planted.corrupted_fraction(),
                        sdp_objective: objective,
                        r: rep.r,
                        s: rep.s,
                        removed_step2: rep.removed.step2,
                        removed_step3: rep.removed.step3,
                        removed_step5: rep.removed.step5,
                        removed_step7: rep.removed.step7,
                        removed_step8: rep.removed.step8,
                        removed_fraction: rep.removed_fraction,
                        value: rep.value,
                        satisfies_retained: rep.satisfies_retained,
                        j_pass: rep.j_verdict.passed(),
                        time_ms: args.timing.then(|| clock.elapsed().as_secs_f64() * 1e3),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Aggregates per (m, ε, n, mode), in first-appearance order.
pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut keys: Vec<(usize, u64, usize, ModeArg)> = Vec::new();
    for r in rows {
        let key = (r.constraints, r.eps.to_bits(), r.level, r.mode);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(m, eps, level, mode)| {
            let group: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| (r.constraints, r.eps.to_bits(), r.level, r.mode) == (m, eps, level, mode))
                .collect();
            let removed: Vec<f64> = group.iter().map(|r| r.removed_fraction).collect();
            let values: Vec<f64> = group.iter().map(|r| r.value).collect();
            let (mr, sr) = mean_std(&removed);
            let (mv, sv) = mean_std(&values);
            BenchSummary {
                schema: BENCH_SCHEMA,
                constraints: m,
                eps: f64::from_bits(eps),
                level,
                mode,
                runs: group.len(),
                mean_removed_fraction: mr,
                std_removed_fraction: sr,
                mean_value: mv,
                std_value: sv,
                min_value: values.iter().copied().fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("bench");
    out.with_file_name(format!("{stem}.summary.csv"))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let rows = bench_rows(args)?;
    let summary = summarize(&rows);
    write_csv(args.out.as_deref(), &rows)?;
    match &args.out {
        Some(p) => write_csv(Some(&summary_path(p)), &summary)?,
        None => {
            println!();
            write_csv(None, &summary)?;
        }
    }
    Ok(0)
}

fn solver_config(eta: f64) -> SolverConfig {
    SolverConfig {
        eta,
        ..SolverConfig::default()
    }
}
