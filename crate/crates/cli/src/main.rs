//! `otq` command-line harness.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime or solver error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use otq_core::agent::AgentMode;
use otq_core::experiment::{self, ExperimentConfig, ExperimentResults};
use otq_core::ot::{
    build_cost_matrix, solve_ot, verify_plan, wasserstein_distance, OtMethod, OtSolverConfig,
    ProbabilityVector, EXACT_MARGINAL_TOL,
};
use otq_core::Error;

#[derive(Parser)]
#[command(
    name = "otq",
    version,
    about = "Optimal-transport-assisted Q-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single mode (agent.mode from the config unless --mode is given).
    Run {
        #[command(flatten)]
        common: RunArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Train baseline and OT-assisted agents on every seed.
    Compare {
        #[command(flatten)]
        common: RunArgs,
    },
    /// Solve one transport problem from JSON files and report the plan.
    OtCheck(OtCheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). Defaults apply to anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seeds, overriding train.seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Episode count, overriding train.episodes.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    OtAssisted,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Sinkhorn,
}

#[derive(Args)]
struct OtCheckArgs {
    /// JSON array of source masses.
    #[arg(long)]
    source: PathBuf,
    /// JSON array of target masses.
    #[arg(long)]
    target: PathBuf,
    /// JSON array of [x, y] integer coordinates, one per mass entry.
    #[arg(long)]
    coords: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, default_value_t = OtSolverConfig::default().sinkhorn_reg)]
    reg: f64,
    #[arg(long, default_value_t = OtSolverConfig::default().sinkhorn_tol)]
    tol: f64,
    #[arg(long, default_value_t = OtSolverConfig::default().sinkhorn_max_iter)]
    max_iter: usize,
    /// Wasserstein exponent.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run { common, mode } => run(&common, mode),
        Command::Compare { common } => compare(&common),
        Command::OtCheck(args) => ot_check(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seeds) = &args.seeds {
        config.train.seeds = seeds.clone();
    }
    if let Some(episodes) = args.episodes {
        config.train.episodes = episodes;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &RunArgs, mode: Option<ModeArg>) -> Result<u8, Error> {
    let mut config = load_config(args)?;
    if let Some(mode) = mode {
        config.agent.mode = match mode {
            ModeArg::Baseline => AgentMode::Baseline,
            ModeArg::OtAssisted => AgentMode::OtAssisted,
        };
    }
    let results = experiment::run_modes(&config, &[config.agent.mode])?;
    finish(&results, &args.out)
}

fn compare(args: &RunArgs) -> Result<u8, Error> {
    let config = load_config(args)?;
    let results = experiment::run_comparison(&config)?;
    finish(&results, &args.out)
}

fn finish(results: &ExperimentResults, out: &Path) -> Result<u8, Error> {
    for failure in &results.failures {
        eprintln!("run failed: {}", failure.message);
    }
    if results.records.is_empty() {
        return Ok(2);
    }
    let written = experiment::export(results, out)?;
    let summary = experiment::build_summary(results, out);
    let mut stdout = std::io::stdout().lock();
    for (mode, s) in &summary.modes {
        let converged: Vec<String> = s
            .convergence_episode
            .iter()
            .map(|(seed, ep)| format!("{seed}:{}", ep.map_or("-".to_string(), |e| e.to_string())))
            .collect();
        let _ = writeln!(
            stdout,
            "{mode:<12} collisions {:>7}  final W {:>10}  convergence [{}]",
            s.total_collisions,
            experiment::format_sig(s.final_wasserstein_mean, 6),
            converged.join(" ")
        );
    }
    for path in written {
        let _ = writeln!(stdout, "wrote {}", path.display());
    }
    Ok(if results.failures.is_empty() { 0 } else { 2 })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn ot_check(args: &OtCheckArgs) -> Result<u8, Error> {
    let source = ProbabilityVector::new(read_json(&args.source)?)?;
    let target = ProbabilityVector::new(read_json(&args.target)?)?;
    let coords: Vec<[i64; 2]> = read_json(&args.coords)?;
    let coords: Vec<(i64, i64)> = coords.into_iter().map(|[x, y]| (x, y)).collect();
    let cost = build_cost_matrix(&coords)?;
    let config = OtSolverConfig {
        method: match args.method {
            MethodArg::Exact => OtMethod::Exact,
            MethodArg::Sinkhorn => OtMethod::Sinkhorn,
        },
        sinkhorn_reg: args.reg,
        sinkhorn_tol: args.tol,
        sinkhorn_max_iter: args.max_iter,
    };
    let plan = solve_ot(&source, &target, &cost, &config)?;
    let distance = wasserstein_distance(&plan, &cost, args.p)?;
    let (row, col) = plan.marginal_residuals();
    let tol = match config.method {
        OtMethod::Exact => EXACT_MARGINAL_TOL,
        OtMethod::Sinkhorn => config.sinkhorn_tol.max(EXACT_MARGINAL_TOL),
    };
    let ok = verify_plan(&plan, tol);

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "objective: {}", plan.objective(&cost));
    let _ = writeln!(out, "wasserstein_p{}: {distance}", args.p);
    let _ = writeln!(out, "row_residual: {row:.3e}");
    let _ = writeln!(out, "col_residual: {col:.3e}");
    let _ = writeln!(out, "plan (nonzero entries):");
    let n = plan.len();
    for i in 0..n {
        for j in 0..n {
            let f = plan.get(i, j);
            if f > 0.0 {
                let _ = writeln!(out, "  {i} -> {j}: {f}");
            }
        }
    }
    let _ = writeln!(out, "verified: {ok}");
    Ok(if ok { 0 } else { 2 })
}
