//! `pnprr`: deformable registration with plug-and-play denoising priors.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
//! 3 denoiser plugin failure.

mod cases;
mod cmds;
mod config;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use pnprr::Result;

#[derive(Parser)]
#[command(
    name = "pnprr",
    version,
    about = "Diffeomorphic image registration with plug-and-play denoising priors",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic benchmark cases
    Synth(cmds::synth::SynthArgs),
    /// Register a source image to a target image
    Register(cmds::register::RegisterArgs),
    /// Alternate registration with a denoising prior (PnP)
    Pnp(cmds::pnp::PnpArgs),
    /// Denoise a single field (usable as a plugin adapter)
    Denoise(cmds::denoise::DenoiseArgs),
    /// Score a deformation against ground-truth masks
    Eval(cmds::eval::EvalArgs),
    /// Factorial robustness study over cases and prior weights
    Sweep(cmds::sweep::SweepArgs),
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => cmds::synth::run(args),
        Command::Register(args) => cmds::register::run(args),
        Command::Pnp(args) => cmds::pnp::run(args),
        Command::Denoise(args) => cmds::denoise::run(args),
        Command::Eval(args) => cmds::eval::run(args),
        Command::Sweep(args) => cmds::sweep::run(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; everything else is a usage
            // error (exit class 1, not clap's default 2).
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_class());
    }
}
