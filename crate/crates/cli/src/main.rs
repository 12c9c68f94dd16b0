//! `horncfa` command line: solve, transform, bench, oracle and fuzz.
//!
//! The first stdout line of `solve` and `oracle` is the verdict (`sat`,
//! `unsat` or `unknown`). Exit codes: 0 for sat/unsat, 2 for unknown and
//! 1 for errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use horncfa::bench;
use horncfa::cegar::{CegarConfig, Domain, PredSplit, Refinement, Search};
use horncfa::chc::{parse_script, ChcSystem};
use horncfa::fuzz::{reproducer, run_fuzz, FuzzOptions};
use horncfa::oracle::{bounded_refute, BoundedResult};
use horncfa::pipeline::{solve_with, Answer, SolveOptions, Status};
use horncfa::smt::{SolverConfig, SolverSession, SOLVER_ENV};
use horncfa::transform::{backward_transform_mutated, forward_transform, Direction, Mutation};

#[derive(Parser)]
#[command(name = "horncfa", version, about = "Linear CHC solving by CFA transformation and CEGAR")]
struct Cli {
    /// Solver command line, e.g. `z3 -in`.
    #[arg(long, global = true, env = SOLVER_ENV)]
    solver: Option<String>,
    /// Per-query solver timeout in seconds.
    #[arg(long, global = true, default_value_t = 10.0)]
    query_timeout: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide satisfiability of a linear CHC system.
    Solve(SolveArgs),
    /// Write the CFA of a system as DOT together with its clause/edge map.
    Transform(TransformArgs),
    /// Run a configuration matrix over a hash-pinned corpus.
    Bench(BenchArgs),
    /// Look for a refutation of bounded length.
    Oracle(OracleArgs),
    /// Compare both directions and the bounded oracle on generated systems.
    Fuzz(FuzzArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Fw,
    Bw,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Fw => Direction::Forward,
            Dir::Bw => Direction::Backward,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    DropFactGuard,
}

impl From<MutationArg> for Mutation {
    fn from(m: MutationArg) -> Self {
        match m {
            MutationArg::None => Mutation::None,
            MutationArg::DropFactGuard => Mutation::DropFactGuard,
        }
    }
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value = "pred-cart")]
    domain: Domain,
    #[arg(long, default_value = "wp")]
    refinement: Refinement,
    #[arg(long, default_value = "whole")]
    pred_split: PredSplit,
    #[arg(long, default_value = "bfs")]
    search: Search,
    #[arg(long, default_value_t = CegarConfig::default().max_refinements)]
    max_refinements: usize,
    /// Re-check covering, abstract posts and refinement progress while running.
    #[arg(long)]
    self_check: bool,
}

impl EngineArgs {
    fn config(&self) -> CegarConfig {
        CegarConfig {
            domain: self.domain,
            refinement: self.refinement,
            pred_split: self.pred_split,
            search: self.search,
            max_refinements: self.max_refinements,
            self_check: self.self_check,
            ..CegarConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "fw")]
    direction: Dir,
    #[command(flatten)]
    engine: EngineArgs,
    /// Wall-clock budget in seconds for the whole task.
    #[arg(long)]
    timeout: Option<f64>,
    /// Print the model after `sat`, or write it to FILE.
    #[arg(long, value_name = "FILE", num_args = 0..=1)]
    emit_model: Option<Option<PathBuf>>,
    /// Print the refutation after `unsat`, or write its structured form to FILE.
    #[arg(long, value_name = "FILE", num_args = 0..=1)]
    emit_refutation: Option<Option<PathBuf>>,
    /// Write the final abstract reachability graph as DOT.
    #[arg(long, value_name = "FILE")]
    arg_dot: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none", hide = true)]
    mutation: MutationArg,
}

#[derive(Args)]
struct TransformArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "fw")]
    direction: Dir,
    /// DOT output; stdout when absent.
    #[arg(long, value_name = "FILE")]
    dot: Option<PathBuf>,
    /// Clause/edge map output; appended to stdout as DOT comments when absent.
    #[arg(long, value_name = "FILE")]
    edge_map: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory holding the tasks and their MANIFEST.sha256.
    corpus: PathBuf,
    /// Configuration `dir:domain:refinement:split`, `*` for both directions. Repeatable.
    #[arg(long = "config", value_name = "CONFIG")]
    configs: Vec<String>,
    /// Per-task timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
    /// Solved-count versus cumulative time per configuration.
    #[arg(long, default_value = "bench-quantiles.csv")]
    quantiles: PathBuf,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(short = 'j', long)]
    jobs: Option<usize>,
    /// Rewrite the manifest from the directory contents and exit.
    #[arg(long)]
    update_manifest: bool,
}

#[derive(Args)]
struct OracleArgs {
    file: PathBuf,
    /// Maximal number of clause applications.
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[command(flatten)]
    engine: EngineArgs,
    /// Per-system, per-direction timeout in seconds.
    #[arg(long, default_value_t = 20.0)]
    timeout: f64,
    #[arg(short = 'j', long)]
    jobs: Option<usize>,
    /// Directory for reproducers of failing seeds; stderr when absent.
    #[arg(long, value_name = "DIR")]
    repro_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none", hide = true)]
    mutation: MutationArg,
}

#[derive(Debug)]
struct CliError(String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

type CliResult = Result<ExitCode, CliError>;

fn secs(s: f64) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(s).map_err(|e| CliError(format!("bad duration {s}: {e}")))
}

fn read_system(path: &Path) -> Result<ChcSystem, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    parse_script(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn jobs(j: Option<usize>) -> usize {
    j.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1)
}

fn status_code(s: Status) -> ExitCode {
    match s {
        Status::Sat | Status::Unsat => ExitCode::SUCCESS,
        Status::Unknown => ExitCode::from(2),
    }
}

fn solve(args: SolveArgs, solver: SolverConfig) -> CliResult {
    let system = read_system(&args.file)?;
    let mut session = SolverSession::new(solver);
    session.probe()?;
    let options = SolveOptions {
        direction: args.direction.into(),
        cegar: args.engine.config(),
        timeout: args.timeout.map(secs).transpose()?,
        mutation: args.mutation.into(),
    };
    let out = solve_with(&system, &options, &mut session);
    let status = out.status();
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{status}")?;
    if let Some(reason) = out.reason() {
        eprintln!("unknown: {reason}");
    }
    match (&out.answer, status) {
        (Answer::Sat(model), Status::Sat) => match &args.emit_model {
            Some(Some(path)) => write_file(path, &model.to_smtlib())?,
            Some(None) => write!(stdout, "{}", model.to_smtlib())?,
            None => {}
        },
        (Answer::Unsat(r), Status::Unsat) => match &args.emit_refutation {
            Some(Some(path)) => write_file(path, &r.to_sexp(&system))?,
            Some(None) => write!(stdout, "{}", r.display(&system))?,
            None => {}
        },
        _ => {}
    }
    if let (Some(path), Some(arg)) = (&args.arg_dot, &out.arg) {
        write_file(path, &arg.to_dot(&out.transform.cfa))?;
    }
    log::info!(
        "{} iterations, {} refinements, {} solver queries, {:.2}s",
        out.cegar.iterations,
        out.cegar.refinements,
        out.solver.queries,
        out.elapsed.as_secs_f64()
    );
    Ok(status_code(status))
}

fn transform(args: TransformArgs) -> CliResult {
    let system = read_system(&args.file)?;
    let tr = match Direction::from(args.direction) {
        Direction::Forward => forward_transform(&system),
        Direction::Backward => backward_transform_mutated(&system, Mutation::None),
    };
    let dot = tr.cfa.to_dot();
    let listing = tr.edge_map_listing();
    let mut stdout = io::stdout().lock();
    match &args.dot {
        Some(path) => write_file(path, &dot)?,
        None => write!(stdout, "{dot}")?,
    }
    match &args.edge_map {
        Some(path) => write_file(path, &listing)?,
        None => {
            for line in listing.lines() {
                writeln!(stdout, "// {line}")?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: BenchArgs, solver: SolverConfig) -> CliResult {
    if args.update_manifest {
        let n = bench::write_manifest(&args.corpus)?;
        println!("{n} tasks in {}", args.corpus.join(bench::MANIFEST).display());
        return Ok(ExitCode::SUCCESS);
    }
    let tasks = bench::load_manifest(&args.corpus)?;
    let configs = if args.configs.is_empty() { bench::default_matrix() } else { bench::parse_matrix(&args.configs)? };
    SolverSession::new(solver.clone()).probe()?;
    let records = bench::run_matrix(&tasks, &configs, secs(args.timeout)?, &solver, jobs(args.jobs));
    let csv = fs::File::create(&args.out).map_err(|e| CliError(format!("{}: {e}", args.out.display())))?;
    bench::write_csv(&records, csv)?;
    let q = fs::File::create(&args.quantiles).map_err(|e| CliError(format!("{}: {e}", args.quantiles.display())))?;
    bench::write_quantiles(&records, q)?;
    print!("{}", bench::summary_table(&bench::summarize(&records), tasks.len()));
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: OracleArgs, solver: SolverConfig) -> CliResult {
    if args.depth == 0 {
        return Err(CliError("depth must be at least 1".into()));
    }
    let system = read_system(&args.file)?;
    let mut session = SolverSession::new(solver);
    session.probe()?;
    if let Some(t) = args.timeout {
        session.set_deadline(Some(std::time::Instant::now() + secs(t)?));
    }
    match bounded_refute(&system, args.depth, &mut session) {
        BoundedResult::Refuted(r) => {
            println!("unsat");
            print!("{}", r.display(&system));
            Ok(ExitCode::SUCCESS)
        }
        BoundedResult::NoneWithinBound => {
            println!("unknown");
            eprintln!("no refutation within {} steps", args.depth);
            Ok(ExitCode::from(2))
        }
        BoundedResult::Inconclusive(m) => {
            println!("unknown");
            eprintln!("inconclusive: {m}");
            Ok(ExitCode::from(2))
        }
    }
}

fn fuzz(args: FuzzArgs, solver: SolverConfig) -> CliResult {
    let options = FuzzOptions {
        count: args.count,
        seed_base: args.seed,
        depth: args.depth,
        cegar: args.engine.config(),
        timeout: secs(args.timeout)?,
        workers: jobs(args.jobs),
        mutation: args.mutation.into(),
        ..FuzzOptions::default()
    };
    if options.count > 0 {
        SolverSession::new(solver.clone()).probe()?;
    }
    let report = run_fuzz(&options, &solver);
    let mut failed = false;
    for case in report.failures() {
        failed = true;
        let text = reproducer(case, options.size);
        match &args.repro_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join(format!("seed-{}.smt2", case.seed));
                write_file(&path, &text)?;
                eprintln!("seed {}: {} ({})", case.seed, case.problems.join("; "), path.display());
            }
            None => eprint!("{text}"),
        }
    }
    println!("{}", report.summary());
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut solver = match &cli.solver {
        Some(s) => {
            let mut c = SolverConfig::from_command_line(s);
            c.log_path = SolverConfig::from_env().log_path;
            c
        }
        None => SolverConfig::from_env(),
    };
    match secs(cli.query_timeout) {
        Ok(t) => solver.query_timeout = t,
        Err(e) => {
            eprintln!("error: {}", e.0);
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Solve(a) => solve(a, solver),
        Command::Transform(a) => transform(a),
        Command::Bench(a) => run_bench(a, solver),
        Command::Oracle(a) => oracle(a, solver),
        Command::Fuzz(a) => fuzz(a, solver),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.0);
            ExitCode::FAILURE
        }
    }
}
