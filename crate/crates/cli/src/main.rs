use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rddce::estimators::Method;
use rddce::ProfileName;
use rddce_cli::commands::{cmd_compare_metrics, cmd_profiles, cmd_run, cmd_scatter, cmd_sweep, GridArgs};
use rddce_cli::config::{parse_flat, FlatConfig};
use rddce_cli::output::{emit, render, Format};
use rddce_cli::CliError;

/// Decision-directed OFDM channel tracking simulator.
///
/// Exit status: 0 success, 1 configuration error, 2 runtime abort.
#[derive(Parser)]
#[command(name = "rddce", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Configuration overrides, applied after the file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-frame accuracy and channel MSE over one configuration.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated; defaults to the configured method.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
    },
    /// Aggregate accuracy over a channel x method x lambda x SNR grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        snr: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',')]
        channels: Vec<ProfileName>,
    },
    /// Group impulse-response markers before and after noise compensation.
    Scatter {
        #[command(flatten)]
        common: Common,
        /// Noisy levels; the noiseless level is always added.
        #[arg(long, value_delimiter = ',')]
        snr: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        groups: usize,
    },
    /// RDDCE accuracy against SNR under both selection metrics.
    CompareMetrics {
        #[command(flatten)]
        common: Common,
        /// Defaults to 0,2,...,20.
        #[arg(long, value_delimiter = ',')]
        snr: Vec<f64>,
    },
    /// Channel profiles and their tap placement.
    Profiles {
        #[command(flatten)]
        common: Common,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (common, run): (Common, Box<dyn FnOnce(&rddce::SimConfig) -> Result<_, CliError>>) = match command {
        Command::Run { common, methods } => (common, Box::new(move |c| cmd_run(c, &methods))),
        Command::Sweep {
            common,
            snr,
            lambda,
            methods,
            channels,
        } => (
            common,
            Box::new(move |c| {
                cmd_sweep(
                    c,
                    &GridArgs {
                        snr_db: snr,
                        lambda,
                        methods,
                        channels,
                    },
                )
            }),
        ),
        Command::Scatter { common, snr, groups } => (common, Box::new(move |c| cmd_scatter(c, &snr, groups))),
        Command::CompareMetrics { common, snr } => (common, Box::new(move |c| cmd_compare_metrics(c, &snr))),
        Command::Profiles { common } => (common, Box::new(cmd_profiles)),
    };
    let flat = parse_flat(common.config.as_deref(), &common.overrides)?;
    let cfg = flat.to_sim()?;
    let report = run(&cfg)?;
    emit(&render(&report, &FlatConfig::from(&cfg), common.format)?, common.output.as_deref())?;
    if report.failed_cells > 0 {
        return Err(CliError::Runtime(format!("{} grid cell(s) failed; see output", report.failed_cells)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rddce: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
