use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hcf_cli::commands::{cmd_check, cmd_probe, cmd_resume, cmd_run};
use hcf_cli::{CheckKind, Outcome, Result, RunConfig};

/// Hermitian curvature flow on flat complex tori.
#[derive(Parser)]
#[command(name = "hcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Identities,
    Evolution,
    Conditions,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow and write the time series, checkpoints and summary.
    Run {
        config: PathBuf,
        /// Override a config value, e.g. `--set grid.resolution=32`.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides HCF_OUTPUT_ROOT and output.dir).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a verification suite on the configured preset.
    Check {
        #[arg(value_enum)]
        which: Which,
        config: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Continue a run from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        /// Use this config instead of the one stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// New end time.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        /// Continue even if the config hash differs from the checkpoint's.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid-convergence study of the derivative kernels.
    Probe {
        /// zero, sin_cos or band_limited.
        #[arg(long, default_value = "sin_cos")]
        field: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [16, 32, 64])]
        resolutions: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run { config, set, output } => {
            let cfg = RunConfig::load(&config, &set)?;
            cmd_run(&cfg, &cfg.output_dir(output.as_deref()))
        }
        Command::Check {
            which,
            config,
            set,
            output,
        } => {
            let cfg = RunConfig::load(&config, &set)?;
            let which = match which {
                Which::Identities => CheckKind::Identities,
                Which::Evolution => CheckKind::Evolution,
                Which::Conditions => CheckKind::Conditions,
            };
            cmd_check(&cfg, which, &cfg.output_dir(output.as_deref()))
        }
        Command::Resume {
            checkpoint,
            config,
            t_end,
            set,
            force,
            output,
        } => {
            let text = match &config {
                Some(p) => Some(
                    std::fs::read_to_string(p)
                        .map_err(|e| hcf_cli::CliError::Io(format!("cannot read config {}: {e}", p.display())))?,
                ),
                None => None,
            };
            cmd_resume(&checkpoint, text.as_deref(), &set, t_end, force, output.as_deref())
        }
        Command::Probe {
            field,
            n,
            resolutions,
            seed,
            output,
        } => {
            let out = output.unwrap_or_else(|| RunConfig::default().output_dir(None));
            cmd_probe(&field, n, &resolutions, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
