//! Command-line driver for the cma-explain pipeline. Each subcommand runs
//! one stage against an experiment spec; `all` chains every stage. Exit
//! codes follow the library error taxonomy: 2 for spec problems, 3 for
//! missing inputs, 4 for numerical failures, 1 otherwise.

use clap::{Parser, Subcommand};
use cma_explain::attribution::ShapMode;
use cma_explain::pipeline::{
    cmd_all, cmd_benchmark, cmd_explain, cmd_features, cmd_report, cmd_train, desk_spec,
    full_spec, ExperimentSpec,
};
use cma_explain::problems;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cma-explain", about = "Landscape-aware performance explanation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Parser, Debug)]
struct SpecArgs {
    /// Spec file; takes precedence over --profile.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Built-in profile used when no spec file is given.
    #[arg(long, default_value = "desk", value_parser = ["full", "desk"])]
    profile: String,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Top-k sizes override, comma separated.
    #[arg(long)]
    topk: Option<String>,
    /// Aggregation mode used when ranking features.
    #[arg(long, value_parser = ["signed", "abs"])]
    shap_mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// List the benchmark functions.
    Problems,
    /// Run the fixed-budget benchmark (stage 1).
    Benchmark(SpecArgs),
    /// Extract landscape features (stage 2).
    Features(SpecArgs),
    /// Grid-search and persist the fold models (stage 3).
    Train(SpecArgs),
    /// Compute attributions and representations (stage 4).
    Explain(SpecArgs),
    /// Produce frequency tables, classification scores, and heatmaps (stage 5).
    Report(SpecArgs),
    /// Run every stage in order.
    All(SpecArgs),
}

fn resolve_spec(args: &SpecArgs) -> Result<ExperimentSpec, cma_explain::error::Error> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|_| {
                cma_explain::error::Error::MissingInput(format!(
                    "spec file `{}` is absent",
                    path.display()
                ))
            })?;
            ExperimentSpec::parse(&text)?
        }
        None if args.profile == "full" => full_spec(),
        None => desk_spec(),
    };
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(out) = &args.out {
        spec.out_dir = out.clone();
    }
    if let Some(topk) = &args.topk {
        spec.topk = topk
            .split(',')
            .map(|t| {
                t.trim().parse().map_err(|_| {
                    cma_explain::error::Error::Spec(format!("bad topk value `{t}`"))
                })
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(mode) = &args.shap_mode {
        spec.shap_mode = mode.parse::<ShapMode>()?;
    }
    spec.validate()?;
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| cma_explain::error::Error::Contract(e.to_string()))?;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), cma_explain::error::Error> {
    match cli.command {
        Command::Problems => {
            println!("id,name,category,multimodal");
            for info in problems::registry() {
                println!(
                    "{},{},{},{}",
                    info.id,
                    info.name,
                    info.category.label(),
                    info.multimodal
                );
            }
            Ok(())
        }
        Command::Benchmark(args) => {
            let path = cmd_benchmark(&resolve_spec(&args)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Features(args) => {
            let path = cmd_features(&resolve_spec(&args)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Train(args) => {
            let path = cmd_train(&resolve_spec(&args)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Explain(args) => {
            let path = cmd_explain(&resolve_spec(&args)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Report(args) => {
            let spec = resolve_spec(&args)?;
            cmd_report(&spec)?;
            println!("wrote reports under {}", spec.out_dir.display());
            Ok(())
        }
        Command::All(args) => {
            let spec = resolve_spec(&args)?;
            cmd_all(&spec)?;
            println!("pipeline complete under {}", spec.out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
