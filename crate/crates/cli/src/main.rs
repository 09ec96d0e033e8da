//! `ris-wssr` command-line simulator.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when a
//! solver fails, 1 for anything else (typically I/O).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ris_wssr::driver::{
    iteration_trace_csv, run_algorithm, run_coherence_schedule, run_sweep, schedule_csv, sweep_csv, trace_csv,
    write_result_json, Algorithm, AoOutcome, RunConfig, SweepParam,
};
use ris_wssr::par::ExecMode;
use ris_wssr::scenario::synthesize_channels;
use ris_wssr::Error;

#[derive(Debug, Parser)]
#[command(
    name = "ris-wssr",
    version,
    about = "Secrecy-rate optimization for RIS-aided cell-free networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize beamformers and phases (or also the assignment with `--algorithm assign`).
    Optimize(RunArgs),
    /// Optimize beamformers, phases and the RIS-to-user assignment.
    Assign(CommonArgs),
    /// Fix the assignment on a large block, then re-optimize on small blocks.
    Schedule(ScheduleArgs),
    /// Run the configured algorithm over a grid of parameter values and seeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration; the built-in baseline when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured channel seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Phase resolution in bits; 0 for continuous phases.
    #[arg(long)]
    phase_bits: Option<u32>,
    /// Maximum number of RISs serving one user.
    #[arg(long)]
    r_assign: Option<usize>,
    /// Record wall-clock times (outputs are then no longer reproducible).
    #[arg(long)]
    timings: bool,
    /// Run independent work items on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of small coherence blocks.
    #[arg(long, default_value_t = 3)]
    blocks: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    /// One of power_dbm, ris_elements, user_line_x, num_users, r_assign, phase_bits.
    #[arg(long)]
    sweep_param: String,
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    sweep_values: Vec<f64>,
    /// Channel seeds; defaults to the single configured seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Ao,
    Assign,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Ao => Algorithm::Ao,
            AlgorithmArg::Assign => Algorithm::Assign,
        }
    }
}

fn load(common: &CommonArgs, algorithm: Option<Algorithm>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::baseline(),
    };
    let s = &mut cfg.scenario;
    if let Some(seed) = common.seed {
        s.rng_seed = seed;
    }
    if let Some(bits) = common.phase_bits {
        s.phase_bits = bits;
    }
    if let Some(r) = common.r_assign {
        s.r_assign = r;
    }
    s.validate()?;
    if let Some(a) = algorithm {
        cfg.solver.algorithm = a;
    }
    cfg.solver.record_timings = common.timings;
    cfg.solver.mode = if common.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn report(label: &str, out: &AoOutcome) {
    let f = out.trace.final_wssr();
    println!(
        "{label}: WSSR {f:.6} nats ({:.6} bits/s/Hz) after {} iterations{}",
        f / std::f64::consts::LN_2,
        out.iterations(),
        if out.trace.converged { "" } else { " (iteration cap)" }
    );
}

/// Writes the partial trace of an aborted run before passing the error on.
fn salvage(err: Error, dir: &Path, num_users: usize) -> anyhow::Error {
    if let Error::Aborted { partial, .. } = &err {
        let path = dir.join("trace.csv");
        if let Err(e) = write(path.clone(), iteration_trace_csv(partial, num_users)) {
            eprintln!("warning: {e:#}");
        } else {
            eprintln!("partial trace written to {}", path.display());
        }
    }
    err.into()
}

fn run_once(cfg: &RunConfig, dir: &Path) -> Result<()> {
    prepare_out(dir)?;
    let channels = synthesize_channels(&cfg.scenario)?;
    let out =
        run_algorithm(&cfg.scenario, &channels, &cfg.solver).map_err(|e| salvage(e, dir, cfg.scenario.num_users()))?;
    write(dir.join("trace.csv"), trace_csv(&out))?;
    write_result_json(&dir.join("result.json"), &out)?;
    report("final", &out);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize(args) => {
            let cfg = load(&args.common, args.algorithm.map(Into::into))?;
            run_once(&cfg, &args.common.out)
        }
        Command::Assign(common) => {
            let cfg = load(&common, Some(Algorithm::Assign))?;
            run_once(&cfg, &common.out)
        }
        Command::Schedule(args) => {
            let cfg = load(&args.common, Some(Algorithm::Assign))?;
            let dir = &args.common.out;
            prepare_out(dir)?;
            let out = run_coherence_schedule(&cfg.scenario, &cfg.solver, args.blocks)
                .map_err(|e| salvage(e, dir, cfg.scenario.num_users()))?;
            let large = out.large.as_ref().expect("schedule runs the large block");
            write(dir.join("trace.csv"), trace_csv(large))?;
            write(dir.join("schedule.csv"), schedule_csv(&out))?;
            write_result_json(&dir.join("result.json"), large)?;
            report("large block", large);
            println!(
                "small blocks: mean WSSR {:.6} nats over {} blocks",
                out.mean_block_wssr(),
                out.blocks.len()
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let cfg = load(&args.common, args.algorithm.map(Into::into))?;
            let param: SweepParam = args.sweep_param.parse()?;
            let seeds = if args.seeds.is_empty() {
                vec![cfg.scenario.rng_seed]
            } else {
                args.seeds
            };
            let dir = &args.common.out;
            prepare_out(dir)?;
            let rows = run_sweep(&cfg, param, &args.sweep_values, &seeds)?;
            write(dir.join("sweep.csv"), sweep_csv(&rows))?;
            println!("{} cells written to {}", rows.len(), dir.join("sweep.csv").display());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_solver_failure() => 3,
        Some(Error::Config(_) | Error::InvalidScenario(_) | Error::Domain(_) | Error::Dimension(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
