use std::path::PathBuf;
use std::process::ExitCode;

use bsts_cli::{cmd_compare, cmd_fit, cmd_forecast, cmd_ingest, cmd_run, CliError, RunConfig};
use bsts_core::{DateStamp, TrendSpec};
use clap::{Args, Parser, Subcommand};

/// Market-vs-poll election forecasting with Bayesian structural time series.
#[derive(Parser)]
#[command(name = "bsts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Load market and poll files and write the aligned panels.
    Ingest,
    /// Regress the national market on the state markets.
    Fit,
    /// Rolling forecasts to election day for both sources.
    Forecast,
    /// Decision calls, divergence dates, event reactivity, overlays.
    Compare,
    /// ingest, fit, forecast and compare in sequence.
    Run,
}

#[derive(Args)]
struct Opts {
    /// Dataset manifest (TOML); required by ingest and run.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true, env = "BSTS_OUT", default_value = "bsts-out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// MCMC iterations per fit.
    #[arg(long, global = true, default_value_t = 2000)]
    iters: usize,
    /// Leading iterations discarded per fit.
    #[arg(long, global = true, default_value_t = 500)]
    burnin: usize,
    /// local-level, local-linear or semilocal.
    #[arg(long, global = true, default_value = "local-level")]
    trend: String,
    /// Comma-separated forecast cutoffs (YYYY-MM-DD).
    #[arg(long, global = true, value_delimiter = ',')]
    cutoffs: Option<Vec<String>>,
    /// Comma-separated jurisdictions (`national` or two-letter codes).
    #[arg(long, global = true, value_delimiter = ',')]
    jurisdictions: Option<Vec<String>>,
    /// Skip SVG figures.
    #[arg(long, global = true)]
    no_svg: bool,
}

fn config(o: Opts) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::new(o.out);
    cfg.manifest = o.manifest;
    cfg.seed = o.seed;
    cfg.iterations = o.iters;
    cfg.burn_in = o.burnin;
    cfg.trend = TrendSpec::from_label(&o.trend)?;
    if let Some(c) = o.cutoffs {
        cfg.cutoffs = c.iter().map(|s| DateStamp::parse(s.trim())).collect::<Result<_, _>>()?;
    }
    cfg.jurisdictions = o.jurisdictions.map(|v| v.into_iter().map(|s| s.trim().to_string()).collect());
    cfg.svg = !o.no_svg;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = config(cli.opts).and_then(|cfg| match cli.command {
        Command::Ingest => cmd_ingest(&cfg).map(drop),
        Command::Fit => cmd_fit(&cfg).map(drop),
        Command::Forecast => cmd_forecast(&cfg).map(drop),
        Command::Compare => cmd_compare(&cfg).map(drop),
        Command::Run => cmd_run(&cfg).map(drop),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
