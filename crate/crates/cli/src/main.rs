use std::path::PathBuf;
use std::process::ExitCode;

use biphoton_cli::{error::CliError, parse_workers, run, Command, Overrides};
use clap::{Parser, Subcommand};

/// Pulsed-pump SPDC in a two-crystal cascade: overlap curves, spectra,
/// tomography, interference patterns, and walk-off timing.
#[derive(Parser)]
#[command(name = "biphoton", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep |v(T)| over the configured delay range and fit its width.
    Vcurve(Args),
    /// Signal and idler marginal spectra.
    Spectrum(Args),
    /// Simulate counts and reconstruct the polarization state.
    Tomo(Args),
    /// Coincidence pattern versus half-wave-plate angle.
    Pattern(Args),
    /// Walk-off ledger, compensator, and residual delay.
    Timing(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<String>,
    /// Treat grid-resolution warnings as errors.
    #[arg(long)]
    strict: bool,
    /// Random seed; overrides the tomography and pattern seeds.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_workers() -> Result<(), CliError> {
    if let Ok(value) = std::env::var("BIPHOTON_WORKERS") {
        let n = parse_workers(&value)?;
        // The sequential build has no pool; the value is still validated.
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("BIPHOTON_WORKERS: {e}")))?;
        #[cfg(not(feature = "parallel"))]
        let _ = n;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Vcurve(a) => (Command::VCurve, a),
        Cmd::Spectrum(a) => (Command::Spectrum, a),
        Cmd::Tomo(a) => (Command::Tomo, a),
        Cmd::Pattern(a) => (Command::Pattern, a),
        Cmd::Timing(a) => (Command::Timing, a),
    };
    let overrides = Overrides { out: args.out, seed: args.seed, strict: args.strict };
    let result = configure_workers().and_then(|()| run(command, &args.config, &overrides));
    match result {
        Ok(files) => {
            for (name, sum) in files {
                println!("{sum}  {name}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("biphoton {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
