use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gfgt_core::geometry::net_cap_from_env;
use gfgt_core::gridpath::Strategy;
use gfgt_core::hardchain::Components;
use gfgt_core::harness::{
    run_chain_bench, run_grid_bench, run_solve, verify_all, Baseline, Builtin, ChainBenchConfig, GridBenchConfig,
    SolveConfig,
};
use gfgt_core::{Error, Mode, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gfgt", version, about = "Low-adaptivity stationary-point search and lower-bound experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run grid-flow trapping on a builtin objective and check the output's gradient.
    Solve(SolveArgs),
    /// Track progress of batched baselines on the hidden-partition chain function.
    ChainBench(ChainBenchArgs),
    /// Measure failure rates of round-limited local search on monotone grid paths.
    GridBench(GridBenchArgs),
    /// Run every property suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// quadratic, cosine or chain
    #[arg(long, default_value = "quadratic")]
    func: Builtin,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Gradient Lipschitz constant (the chain function uses its own)
    #[arg(long, default_value_t = 1.0)]
    lipschitz: f64,
    /// cube or unconstrained
    #[arg(long, default_value = "cube")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Boundary points sampled per iteration for the trap check (0 disables it)
    #[arg(long, default_value_t = 1000)]
    trap_samples: usize,
    /// Part size of the chain function
    #[arg(long, default_value_t = 1)]
    d0: usize,
    /// Output directory for solve.csv, trace_<trial>.csv and summary.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChainBenchArgs {
    #[arg(long, default_value_t = 4096)]
    d: usize,
    #[arg(long, default_value_t = 256)]
    d0: usize,
    #[arg(long, default_value_t = 20)]
    rounds: usize,
    #[arg(long, default_value_t = 1000)]
    queries_per_round: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// parallel-random-search or batched-fd-gradient-descent; repeat for several (default: both)
    #[arg(long)]
    baseline: Vec<Baseline>,
    /// Gradient-descent step size
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Output directory for chain_bench.csv and summary.json (CSV to stdout otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridBenchArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Round budgets, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    k: Vec<usize>,
    /// Queries per round, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,3,10,100")]
    q: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// exhaustive, frontier, lookahead or layer-guess
    #[arg(long, default_value = "lookahead")]
    strategy: Strategy,
    /// Output directory for grid_bench.csv and summary.json (CSV to stdout otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace Ψ by a corrupted copy, to see the component suite catch it
    #[arg(long, hide = true)]
    tamper_psi: bool,
    /// Output directory for summary.json
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `summary` with the elapsed wall time added; timings stay out of the CSVs.
fn write_summary<T: Serialize>(dir: &Path, summary: &T, started: Instant) -> Result<()> {
    let mut v = serde_json::to_value(summary)?;
    if let Some(m) = v.as_object_mut() {
        m.insert("wall_time_s".into(), started.elapsed().as_secs_f64().into());
    }
    let mut f = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut f, &v)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let cfg = SolveConfig {
        func: a.func,
        d: a.d,
        k: a.k,
        eps: a.eps,
        lipschitz: a.lipschitz,
        mode: a.mode,
        seed: a.seed,
        trials: a.trials,
        trap_samples: a.trap_samples,
        net_cap: net_cap_from_env(),
        d0: a.d0,
    };
    let (summary, traces) = run_solve(&cfg)?;
    for r in &summary.records {
        println!(
            "trial {} seed {}: rounds {} (+1 initial), queries {}, |grad| {:.3e} {} eps, invariant violations {}",
            r.trial,
            r.seed,
            r.rounds,
            r.total_queries,
            r.grad_norm,
            if r.success { "<=" } else { ">" },
            r.invariant_violations
        );
    }
    if let Some(dir) = &a.out {
        let mut f = create(dir, "solve.csv")?;
        summary.write_csv(&mut f)?;
        f.flush()?;
        for (i, t) in traces.iter().enumerate() {
            let mut f = create(dir, &format!("trace_{i}.csv"))?;
            t.write_csv(&mut f)?;
            f.flush()?;
        }
        write_summary(dir, &summary, started)?;
    }
    if !summary.all_succeeded() {
        return Err(Error::Verification(format!(
            "{} of {} outputs have gradient norm above eps",
            summary.records.len() - summary.successes,
            summary.records.len()
        )));
    }
    if summary.invariant_violations > 0 {
        return Err(Error::ContractViolation(format!(
            "{} runtime invariant violations",
            summary.invariant_violations
        )));
    }
    Ok(ExitCode::SUCCESS)
}

fn chain_bench(a: ChainBenchArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let cfg = ChainBenchConfig {
        d: a.d,
        d0: a.d0,
        rounds: a.rounds,
        queries_per_round: a.queries_per_round,
        trials: a.trials,
        seed: a.seed,
        baselines: if a.baseline.is_empty() { Baseline::ALL.to_vec() } else { a.baseline },
        step: a.step,
        ..ChainBenchConfig::default()
    };
    let res = run_chain_bench(&cfg)?;
    match &a.out {
        Some(dir) => {
            let mut f = create(dir, "chain_bench.csv")?;
            res.write_csv(&mut f)?;
            f.flush()?;
            write_summary(dir, &res.summary, started)?;
        }
        None => res.write_csv(io::stdout().lock())?,
    }
    let mut violations = 0;
    for b in &res.summary.baselines {
        eprintln!(
            "{}: {}/{} trials with progress <= 2t after every round, max index {}, gradient-floor violations {}/{}",
            b.baseline, b.trials_within_2t, b.trials, b.max_progress, b.floor_violations, b.floor_checked
        );
        violations += b.floor_violations;
    }
    if violations > 0 {
        return Err(Error::Verification(format!("{violations} queried points below the gradient floor")));
    }
    Ok(ExitCode::SUCCESS)
}

fn grid_bench(a: GridBenchArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let cfg = GridBenchConfig {
        n: a.n,
        d: a.d,
        ks: a.k,
        qs: a.q,
        trials: a.trials,
        seed: a.seed,
        strategy: a.strategy,
    };
    let res = run_grid_bench(&cfg)?;
    match &a.out {
        Some(dir) => {
            let mut f = create(dir, "grid_bench.csv")?;
            res.write_csv(&mut f)?;
            f.flush()?;
            write_summary(dir, &res.summary, started)?;
        }
        None => res.write_csv(io::stdout().lock())?,
    }
    for c in &res.summary.cells {
        eprintln!(
            "k={} q={}: failure rate {:.3} [{:.3}, {:.3}]",
            c.k, c.q, c.failure_rate, c.ci_low, c.ci_high
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn tampered_psi(x: f64) -> f64 {
    if x <= 0.5 {
        0.0
    } else {
        (1.1 - 1.0 / (2.0 * x - 1.0).powi(2)).exp()
    }
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let mut components = Components::default();
    if a.tamper_psi {
        components.psi = tampered_psi;
    }
    let reports = verify_all(&components, a.seed)?;
    let mut failed = Vec::new();
    for r in &reports {
        println!("suite {:<14} {}", r.name, if r.passed() { "PASS" } else { "FAIL" });
        for c in &r.checks {
            println!(
                "    {} {} ({} points, {} violations)",
                if c.passed() { "ok  " } else { "FAIL" },
                c.name,
                c.points,
                c.violations
            );
        }
        if !r.passed() {
            failed.push(r.name.clone());
        }
    }
    if let Some(dir) = &a.out {
        write_summary(dir, &reports, started)?;
    }
    if !failed.is_empty() {
        return Err(Error::Verification(format!("failed suites: {}", failed.join(", "))));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::ChainBench(a) => chain_bench(a),
        Command::GridBench(a) => grid_bench(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
