//! Command-line front end: loads a JSON experiment config, runs the
//! requested task on a fixed-size worker pool, and writes results.csv,
//! report.txt and manifest.json into the output directory.
//!
//! Exit codes: 0 when every gated check passes, 2 when any fails, 1 on
//! usage, config or runtime errors (including an exceeded enumeration
//! budget, which is also named in report.txt).

mod config;
mod output;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rle_core::{Error, Result};

use config::{resolve, ExperimentConfig, Overrides, ResolvedRun, TaskKind};
use output::OutputBuilder;

/// Environment override for the exact-enumeration state budget.
const ENUM_BUDGET_VAR: &str = "RLE_ENUM_BUDGET";

#[derive(Parser)]
#[command(
    name = "rle-lab",
    version,
    about = "Verification lab for Bayes-optimal random linear estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact-identity battery at one parameter point.
    Verify(RunArgs),
    /// Run the point battery over a delta/t/h grid with shared disorder.
    Sweep(RunArgs),
    /// Run size-decay checks over a grid of section counts.
    Scaling(RunArgs),
    /// Integrate the interpolation path and reconstruct the endpoints.
    Path(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config's cap.
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed; overrides the config's plan.base_seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage errors exit 1 by contract; --help and --version exit 0.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let (task, args) = match cli.command {
        Command::Verify(args) => (TaskKind::Verify, args),
        Command::Sweep(args) => (TaskKind::Sweep, args),
        Command::Scaling(args) => (TaskKind::Scaling, args),
        Command::Path(args) => (TaskKind::Path, args),
    };
    match execute(task, args) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn execute(task: TaskKind, args: RunArgs) -> Result<bool> {
    let enum_budget = read_enum_budget()?;
    let config = ExperimentConfig::load(&args.config)?;
    let overrides = Overrides { out: args.out, workers: args.workers, seed: args.seed };
    let run = resolve(config, task, overrides, enum_budget)?;

    std::fs::create_dir_all(&run.out_dir).map_err(|e| {
        Error::InvalidArgument(format!("cannot create {}: {e}", run.out_dir.display()))
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;

    let digest = pool.install(|| tasks::stream_digest(&run))?;
    write_file(&run, "manifest.json", &render_manifest(&run, digest)?)?;

    let mut out = OutputBuilder::new(run.config.task.name(), run.fault_offset);
    match pool.install(|| tasks::run_task(&run, &mut out)) {
        Ok(()) => {
            write_file(&run, "results.csv", &out.render_csv())?;
            write_file(&run, "report.txt", &out.render_report(&preamble(&run)))?;
            Ok(out.all_pass())
        }
        Err(err) => {
            // Leave a report naming the failure next to the manifest.
            let mut lines = preamble(&run);
            lines.push(String::new());
            lines.push(format!("error: {err}"));
            write_file(&run, "report.txt", &(lines.join("\n") + "\n"))?;
            Err(err)
        }
    }
}

fn read_enum_budget() -> Result<Option<u64>> {
    match std::env::var(ENUM_BUDGET_VAR) {
        Ok(value) => value.trim().parse::<u64>().map(Some).map_err(|_| {
            Error::InvalidArgument(format!(
                "{ENUM_BUDGET_VAR} must be an unsigned integer, got '{value}'"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(Error::InvalidArgument(format!("{ENUM_BUDGET_VAR}: {err}"))),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    enum_budget: u64,
    /// Fingerprint of every instance stream the task consumes.
    instance_digest: String,
    config: &'a ExperimentConfig,
}

fn render_manifest(run: &ResolvedRun, digest: u64) -> Result<String> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        enum_budget: run.params.enum_budget,
        instance_digest: format!("{digest:016x}"),
        config: &run.config,
    };
    serde_json::to_string_pretty(&manifest)
        .map(|text| text + "\n")
        .map_err(|e| Error::InvalidArgument(format!("manifest serialization: {e}")))
}

fn preamble(run: &ResolvedRun) -> Vec<String> {
    let params = &run.params;
    let mut lines = vec![
        format!("rle-lab {}", env!("CARGO_PKG_VERSION")),
        format!("task: {}", run.config.task.name()),
        format!("prior: {} atoms of dimension {}", run.prior.k(), run.prior.b()),
        format!(
            "model: L={} B={} M={} delta={} t={} h={} sub_rows={} alpha={}",
            params.l,
            params.b,
            params.m,
            params.delta,
            params.t,
            params.h,
            params.sub_rows(),
            params.alpha(),
        ),
        format!(
            "plan: n_samples={} base_seed={} tag={} workers={}",
            run.plan.n_samples, run.plan.base_seed, run.plan.crn_tag, run.workers
        ),
    ];
    if run.fault_offset != 0.0 {
        lines.push(format!(
            "fault injection: every relation's left side shifted by {:e}",
            run.fault_offset
        ));
    }
    lines
}

fn write_file(run: &ResolvedRun, name: &str, contents: &str) -> Result<()> {
    let path = run.out_dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}
