//! `prfteam`: compile expressions into teams of finite automata, run them
//! on the half-line, and check whole corpora against the direct evaluator.

mod corpus;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use prfteam_core::halfline::{export_trace_jsonl, run, RunOptions, RunStatus};
use prfteam_core::machine::ENUMERATION_CAP;
use prfteam_core::prf::{eval_oracle, parse_prf, parse_program, PrfExpr};
use prfteam_core::synthesis::{compile, SynthPlan};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "prfteam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Plan,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a named expression and run it on the given arguments.
    Run {
        /// Program file with named definitions.
        file: PathBuf,
        /// Name to run (a binding from the file, or a literal expression).
        name: String,
        /// Natural-number arguments, one per function argument.
        args: Vec<u64>,
        /// Write the run's trace as line-delimited records.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Record every Nth round of the trace.
        #[arg(long, default_value_t = 1)]
        trace_every: u64,
        /// Round budget; defaults to 10^6, or 10^8 for recursive expressions.
        #[arg(long)]
        max_rounds: Option<u64>,
        /// Also print the evaluator's value.
        #[arg(long)]
        oracle: bool,
    },
    /// Run every grid point of a corpus file and compare with the evaluator.
    Corpus {
        file: PathBuf,
        /// Grid points to run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Machine-readable report destination.
        #[arg(long, default_value = "corpus-report.jsonl")]
        report: PathBuf,
    },
    /// Show a compiled team: roster, groups, synchronizers, programs.
    Inspect { file: PathBuf, name: String },
    /// Compile a named expression and emit an artifact.
    Compile {
        file: PathBuf,
        name: String,
        #[arg(long, value_enum)]
        emit: Emit,
    },
}

fn load_expr(file: &PathBuf, name: &str) -> Result<PrfExpr> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let program = parse_program(&text).with_context(|| format!("parsing {}", file.display()))?;
    if let Some(expr) = program.get(name) {
        return Ok(expr.clone());
    }
    // Not a binding: accept a literal expression such as `zero` or
    // `proj(2,1)`.
    parse_prf(name).with_context(|| format!("`{name}` is not bound in {}", file.display()))
}

fn default_max_rounds(expr: &PrfExpr) -> u64 {
    if expr.contains_primrec() {
        100_000_000
    } else {
        1_000_000
    }
}

fn compile_checked(expr: &PrfExpr) -> Result<SynthPlan> {
    compile(expr).context("compiling the expression")
}

fn cmd_run(
    file: PathBuf,
    name: String,
    args: Vec<u64>,
    trace: Option<PathBuf>,
    trace_every: u64,
    max_rounds: Option<u64>,
    oracle: bool,
) -> Result<()> {
    let expr = load_expr(&file, &name)?;
    if args.len() != expr.arity() as usize {
        bail!(
            "`{name}` takes {} arguments, {} given",
            expr.arity(),
            args.len()
        );
    }
    let plan = compile_checked(&expr)?;
    let mut options = RunOptions::new(max_rounds.unwrap_or_else(|| default_max_rounds(&expr)));
    options.record_trace = trace.is_some();
    options.trace_every = trace_every.max(1);
    let result = run(&plan.team, &args, &options)?;
    if let Some(path) = &trace {
        let out = fs::File::create(path)
            .with_context(|| format!("creating trace file {}", path.display()))?;
        export_trace_jsonl(&plan.team, &result, std::io::BufWriter::new(out))?;
    }
    if oracle {
        let nat_args: Vec<BigUint> = args.iter().map(|&v| BigUint::from(v)).collect();
        match eval_oracle(&expr, &nat_args) {
            Ok(value) => println!("oracle={value}"),
            Err(err) => println!("oracle-error={err}"),
        }
    }
    match result.status {
        RunStatus::Completed => {
            println!(
                "value={} rounds={} sync_round={}",
                result.value.unwrap(),
                result.rounds,
                result
                    .sync_round
                    .map(|r| r.to_string())
                    .unwrap_or_else(|| "none".into()),
            );
            Ok(())
        }
        RunStatus::RoundBudgetExceeded => bail!("round budget exceeded after {} rounds", result.rounds),
        RunStatus::Fault(fault) => bail!("simulation fault: {fault}"),
    }
}

fn cmd_inspect(file: PathBuf, name: String) -> Result<()> {
    let expr = load_expr(&file, &name)?;
    let plan = compile_checked(&expr)?;
    println!("expression: {}", plan.expr);
    println!(
        "agents: {}  groups: {}  arity: {}",
        plan.team.len(),
        plan.team.groups().len(),
        plan.team.arity()
    );
    for (n, group) in plan.team.groups().iter().enumerate() {
        println!("group {} ({} agents):", n + 1, group.len());
        for id in group {
            let agent = plan.team.agent(id).unwrap();
            let states = agent
                .enumerate_states(ENUMERATION_CAP)
                .map(|s| s.len())
                .unwrap_or(0);
            let role = plan
                .provenance
                .get(id)
                .map(|p| p.to_string())
                .unwrap_or_default();
            println!("  {id}: {role} [{states} states]");
        }
    }
    println!(
        "synchronizers: {}",
        plan.team
            .synchronizers()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("programs:");
    for agent in plan.team.agents() {
        println!("  {}:", agent.id());
        if let Some(program) = plan.program(agent.id()) {
            for line in program.listing() {
                println!("    {line}");
            }
        }
    }
    Ok(())
}

fn cmd_compile(file: PathBuf, name: String, emit: Emit) -> Result<()> {
    let expr = load_expr(&file, &name)?;
    let plan = compile_checked(&expr)?;
    match emit {
        Emit::Plan => {
            let doc = plan.to_json().context("enumerating controller states")?;
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            file,
            name,
            args,
            trace,
            trace_every,
            max_rounds,
            oracle,
        } => cmd_run(file, name, args, trace, trace_every, max_rounds, oracle),
        Command::Corpus { file, jobs, report } => {
            return match corpus::cmd_corpus(&file, jobs, &report) {
                Ok(all_passed) => {
                    if all_passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(err) => {
                    eprintln!("error: {err:#}");
                    ExitCode::FAILURE
                }
            };
        }
        Command::Inspect { file, name } => cmd_inspect(file, name),
        Command::Compile { file, name, emit } => cmd_compile(file, name, emit),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
