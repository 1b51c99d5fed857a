//! Command-line driver: run the full pipeline, individual stages, emit
//! synthetic datasets, or validate a configuration.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use badbeta_core::config::RunConfig;
use badbeta_core::error::Error;
use badbeta_core::pipeline::{Pipeline, STAGES};

#[derive(Parser)]
#[command(
    name = "badbeta",
    about = "Betting-against-(bad)-beta factor construction and backtesting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap (0 = auto); BADBETA_THREADS is the env equivalent.
    #[arg(long)]
    threads: Option<usize>,
    /// Which factors to build: bab, babb or both.
    #[arg(long)]
    scheme: Option<String>,
    /// Compute transaction costs and net returns (default from config).
    #[arg(long, conflicts_with = "gross")]
    net: bool,
    /// Skip transaction costs; report gross returns only.
    #[arg(long)]
    gross: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the full pipeline and write the report bundle.
    Run(CommonArgs),
    /// Execute one stage (upstream stages are computed on demand).
    Stage {
        /// One of: news, betas, costs, factor, eval.
        stage: String,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Generate the configured synthetic dataset as input CSV files.
    Synth {
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Parse the configuration and check input schemas without running.
    Validate {
        #[command(flatten)]
        args: CommonArgs,
    },
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_file(&args.config)?;
    let costs = if args.gross {
        Some(false)
    } else if args.net {
        Some(true)
    } else {
        None
    };
    cfg.apply_overrides(args.seed, args.out.clone(), args.scheme.as_deref(), costs)?;
    Ok(cfg)
}

fn init_threads(args: &CommonArgs, cfg: &RunConfig) {
    let n = args
        .threads
        .or_else(|| {
            std::env::var("BADBETA_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(cfg.threads);
    if n > 0 {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn execute(command: &Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let cfg = load_config(args)?;
            init_threads(args, &cfg);
            let pipeline = Pipeline::new(cfg)?;
            let report = pipeline.run()?;
            println!(
                "run complete: {} factor(s), report at {}",
                report.factors.len(),
                pipeline.out_dir().join("report.json").display()
            );
            for (name, fr) in &report.factors {
                println!(
                    "  {name}: {} months, gross sharpe {:.3}, mean {:.2}%/yr",
                    fr.months,
                    fr.gross.sharpe_ann,
                    100.0 * fr.gross.mean_ann
                );
            }
            Ok(())
        }
        Command::Stage { stage, args } => {
            if !STAGES.contains(&stage.as_str()) {
                return Err(Error::Config(format!(
                    "unknown stage {stage:?}; expected one of {STAGES:?}"
                )));
            }
            let cfg = load_config(args)?;
            init_threads(args, &cfg);
            let pipeline = Pipeline::new(cfg)?;
            pipeline.run_stage(stage)?;
            println!("stage {stage} complete in {}", pipeline.out_dir().display());
            Ok(())
        }
        Command::Synth { args } => {
            let cfg = load_config(args)?;
            init_threads(args, &cfg);
            let dir = cfg.out_dir.join("dataset");
            let pipeline = Pipeline::new(cfg)?;
            let files = pipeline.write_dataset(&dir)?;
            println!("wrote {} dataset files to {}", files.len(), dir.display());
            Ok(())
        }
        Command::Validate { args } => {
            let cfg = load_config(args)?;
            // Files mode: loading exercises every schema check.
            Pipeline::new(cfg)?;
            println!("configuration OK");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
