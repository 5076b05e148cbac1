use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fgts::config::{load_config, with_param, Overrides};
use fgts::harness::{report, run_and_write, AggregateResult, ExperimentConfig, WrittenFiles};

#[derive(Parser)]
#[command(
    name = "fgts",
    version,
    about = "Contextual bandit benchmarks with MCMC Thompson sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seed list, replaces the file's seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Policy preset name, e.g. FGMALATS-L2B1.
    #[arg(long)]
    policy: Option<String>,
    /// Environment preset name, e.g. linear-20d.
    #[arg(long)]
    env: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seeds: self.seeds.clone(),
            out_dir: self.out.clone(),
            policy: self.policy.clone(),
            env: self.env.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment over its seeds and write trace, summary and curve files.
    Run(RunArgs),
    /// Run the same experiment once per value of a single numeric parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter name (bare like `lambda_fg` or dotted like `sampler.step.factor`).
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Print a summary table of every result in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn run_one(cfg: &ExperimentConfig) -> Result<()> {
    log::info!(
        "running {} on {} for {} rounds, {} seeds",
        cfg.policy.name,
        cfg.env.name(),
        cfg.horizon,
        cfg.seeds.len()
    );
    let (agg, files) = run_and_write(cfg)
        .with_context(|| format!("experiment {} on {}", cfg.policy.name, cfg.env.name()))?;
    print_result(cfg, &agg, &files);
    Ok(())
}

fn print_result(cfg: &ExperimentConfig, agg: &AggregateResult, files: &WrittenFiles) {
    let simple = match (agg.mean_simple, agg.std_simple) {
        (Some(m), Some(s)) => format!("  simple {m:.1} ± {s:.1}"),
        _ => String::new(),
    };
    println!(
        "{:<24} {:<16} final {:.1} ± {:.1}{}",
        cfg.policy.name,
        cfg.env.name(),
        agg.mean_final,
        agg.std_final,
        simple
    );
    println!("  summary: {}", files.summary.display());
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args.config, &args.overrides())?;
            run_one(&cfg)
        }
        Command::Sweep { run, param, values } => {
            let base = load_config(&run.config, &run.overrides())?;
            for v in values {
                let cfg = with_param(&base, &param, v)?;
                run_one(&cfg)?;
            }
            Ok(())
        }
        Command::Report { dir } => {
            print!("{}", report(&dir)?);
            Ok(())
        }
    }
}
