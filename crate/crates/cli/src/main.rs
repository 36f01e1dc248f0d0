use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use obss::nonuniq::Mode;
use obss_cli::config::RunConfig;
use obss_cli::run::{default_out, exit_code, run, Subcommand};

#[derive(Parser)]
#[command(name = "obss", version, about = "Self-similar blow-up and non-uniqueness experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `spectra.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(clap::Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the exponent inequalities.
    CheckExponents,
    /// Leading eigenpair of the velocity generator, plus the amplitude sweep.
    Spectrum,
    /// Smoothing exponents and large-τ growth of the semigroups.
    SemigroupProbe,
    /// Picard fixed point for every configured coefficient.
    Construct,
    /// Construct, then check residuals, separation and vanishing data.
    Demo,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Computed,
    Synthetic,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cmd = match cli.cmd {
        Cmd::CheckExponents => Subcommand::CheckExponents,
        Cmd::Spectrum => Subcommand::Spectrum,
        Cmd::SemigroupProbe => Subcommand::SemigroupProbe,
        Cmd::Construct => Subcommand::Construct,
        Cmd::Demo => Subcommand::Demo,
    };
    let mode = cli.mode.map(|m| match m {
        ModeArg::Computed => Mode::Computed,
        ModeArg::Synthetic => Mode::Synthetic,
    });
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let out = cli.out.unwrap_or_else(|| default_out(cmd));
    let result = RunConfig::load(&path).and_then(|cfg| run(cmd, &cfg.with_overrides(cli.seed, mode), &out));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
