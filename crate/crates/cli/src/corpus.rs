//! Corpus files: named expressions with argument grids, run point by
//! point (optionally in parallel) against the evaluator, with a
//! line-delimited report and a summary table.

use anyhow::{bail, Context, Result};
use num_bigint::BigUint;
use prfteam_core::halfline::{export_trace_jsonl, run, RunOptions, RunStatus};
use prfteam_core::prf::{eval_oracle, parse_prf, PrfExpr};
use prfteam_core::synthesis::compile;
use serde::Deserialize;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::SystemTime;

#[derive(Debug, Deserialize)]
struct CorpusFile {
    #[serde(rename = "entry")]
    entries: Vec<EntrySpec>,
}

#[derive(Debug, Deserialize)]
struct EntrySpec {
    name: String,
    text: String,
    /// Inclusive [lo, hi] per argument.
    grid: Vec<[u64; 2]>,
    max_rounds: Option<u64>,
}

struct Entry {
    name: String,
    expr: PrfExpr,
    points: Vec<Vec<u64>>,
    max_rounds: u64,
}

fn load(path: &Path) -> Result<Vec<Entry>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: CorpusFile = toml::from_str(&text).context("corpus file layout")?;
    let mut entries = Vec::new();
    for spec in file.entries {
        let expr = parse_prf(&spec.text).with_context(|| format!("entry `{}`", spec.name))?;
        if expr.arity() as usize != spec.grid.len() {
            bail!(
                "entry `{}`: expression takes {} arguments but the grid has {} dimensions",
                spec.name,
                expr.arity(),
                spec.grid.len()
            );
        }
        for (n, [lo, hi]) in spec.grid.iter().enumerate() {
            if lo > hi {
                bail!("entry `{}`: grid dimension {n} is empty ({lo} > {hi})", spec.name);
            }
        }
        let mut points = vec![vec![]];
        for [lo, hi] in &spec.grid {
            let mut next = Vec::new();
            for p in &points {
                for v in *lo..=*hi {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
            points = next;
        }
        let max_rounds = spec.max_rounds.unwrap_or(if expr.contains_primrec() {
            100_000_000
        } else {
            1_000_000
        });
        entries.push(Entry {
            name: spec.name,
            expr,
            points,
            max_rounds,
        });
    }
    Ok(entries)
}

struct PointOutcome {
    entry: usize,
    args: Vec<u64>,
    oracle: Option<BigUint>,
    value: Option<u64>,
    status: String,
    rounds: u64,
    sync_round: Option<u64>,
    pass: bool,
}

/// Runs every grid point of every entry; returns whether all passed.
pub fn cmd_corpus(path: &Path, jobs: usize, report_path: &Path) -> Result<bool> {
    let entries = load(path)?;
    let mut plans = Vec::with_capacity(entries.len());
    for entry in &entries {
        plans.push(
            compile(&entry.expr).with_context(|| format!("compiling entry `{}`", entry.name))?,
        );
    }

    // Flat work list over (entry, point).
    let work: Vec<(usize, usize)> = entries
        .iter()
        .enumerate()
        .flat_map(|(e, entry)| (0..entry.points.len()).map(move |p| (e, p)))
        .collect();

    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<Option<PointOutcome>>> =
        Mutex::new((0..work.len()).map(|_| None).collect());
    let jobs = jobs.max(1).min(work.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let n = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(e, p)) = work.get(n) else { break };
                let entry = &entries[e];
                let args = entry.points[p].clone();
                let outcome = run_point(e, entry, &plans[e], args);
                outcomes.lock().unwrap()[n] = Some(outcome);
            });
        }
    });
    let outcomes: Vec<PointOutcome> = outcomes
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("all work items processed"))
        .collect();

    // Report: one record per point in deterministic order, then a summary.
    let mut out = std::io::BufWriter::new(
        fs::File::create(report_path)
            .with_context(|| format!("creating report {}", report_path.display()))?,
    );
    let mut passed = 0usize;
    for o in &outcomes {
        if o.pass {
            passed += 1;
        }
        let record = serde_json::json!({
            "entry": entries[o.entry].name,
            "args": o.args,
            "oracle": o.oracle.as_ref().map(|v| v.to_string()),
            "value": o.value,
            "status": o.status,
            "rounds": o.rounds,
            "sync_round": o.sync_round,
            "pass": o.pass,
        });
        writeln!(out, "{record}")?;
    }
    let timestamp = SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let summary = serde_json::json!({
        "summary": true,
        "total": outcomes.len(),
        "passed": passed,
        "failed": outcomes.len() - passed,
        "timestamp": timestamp,
    });
    writeln!(out, "{summary}")?;
    out.flush()?;

    // Failure artifacts: a downsampled trace next to the report.
    for o in outcomes.iter().filter(|o| !o.pass) {
        let entry = &entries[o.entry];
        let args_tag = o
            .args
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("_");
        let trace_path = report_path.with_extension(format!("{}.{args_tag}.trace.jsonl", entry.name));
        let mut options = RunOptions::new(entry.max_rounds);
        options.record_trace = true;
        options.trace_every = 8;
        if let Ok(result) = run(&plans[o.entry].team, &o.args, &options) {
            if let Ok(file) = fs::File::create(&trace_path) {
                let _ = export_trace_jsonl(&plans[o.entry].team, &result, std::io::BufWriter::new(file));
                eprintln!(
                    "failed point {}{:?}: trace at {}",
                    entry.name,
                    o.args,
                    trace_path.display()
                );
            }
        }
    }

    // Summary table.
    println!("{:<16} {:>8} {:>8} {:>8}", "entry", "points", "passed", "failed");
    for (e, entry) in entries.iter().enumerate() {
        let (mut total, mut ok) = (0, 0);
        for o in outcomes.iter().filter(|o| o.entry == e) {
            total += 1;
            if o.pass {
                ok += 1;
            }
        }
        println!("{:<16} {:>8} {:>8} {:>8}", entry.name, total, ok, total - ok);
    }
    println!(
        "total: {} points, {} passed, {} failed (report: {})",
        outcomes.len(),
        passed,
        outcomes.len() - passed,
        report_path.display()
    );
    Ok(passed == outcomes.len())
}

fn run_point(
    index: usize,
    entry: &Entry,
    plan: &prfteam_core::synthesis::SynthPlan,
    args: Vec<u64>,
) -> PointOutcome {
    let nat_args: Vec<BigUint> = args.iter().map(|&v| BigUint::from(v)).collect();
    let oracle = eval_oracle(&entry.expr, &nat_args).ok();
    let options = RunOptions::new(entry.max_rounds);
    let result = run(&plan.team, &args, &options).expect("arity checked at load");
    let status = match &result.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::RoundBudgetExceeded => "round-budget-exceeded".to_string(),
        RunStatus::Fault(f) => format!("fault: {f}"),
    };
    let pass = result.status == RunStatus::Completed
        && result.sync_round.is_some()
        && match (&oracle, result.value) {
            (Some(expected), Some(value)) => &BigUint::from(value) == expected,
            _ => false,
        };
    PointOutcome {
        entry: index,
        args,
        oracle,
        value: result.value,
        status,
        rounds: result.rounds,
        sync_round: result.sync_round,
        pass,
    }
}
