//! `pnprr denoise`: run one denoiser over a single field.
//!
//! Speaks the plugin wire format itself — strength as the first positional
//! argument, scalar field on stdin, result on stdout — so the binary can be
//! used directly as a plugin denoiser (`--denoiser "plugin:pnprr denoise"`)
//! or to smoke-test third-party adapters against a known implementation.

use std::io::{Read, Write};

use clap::Args;
use pnprr::denoise::make_denoiser;
use pnprr::io::{read_field_from, write_field_to, Field};
use pnprr::{Error, Result};

/// Denoise a scalar field (stdin to stdout by default).
#[derive(Args, Debug)]
pub struct DenoiseArgs {
    /// Denoising strength tau (>= 0)
    #[arg(value_name = "TAU")]
    pub tau: f64,

    /// Denoiser: tv | nlm | gauss | identity | plugin:<program> [args...]
    #[arg(long, default_value = "tv", value_name = "NAME")]
    pub denoiser: String,

    /// Read the input field from a file instead of stdin
    #[arg(long, value_name = "FILE")]
    pub input: Option<String>,

    /// Write the result to a file instead of stdout
    #[arg(long, value_name = "FILE")]
    pub output: Option<String>,
}

pub fn run(args: &DenoiseArgs) -> Result<()> {
    let denoiser = make_denoiser(&args.denoiser)?;

    let field = match &args.input {
        Some(path) => pnprr::io::load_field(path)?,
        None => {
            let mut raw = Vec::new();
            std::io::stdin().lock().read_to_end(&mut raw)?;
            read_field_from(&mut &raw[..])?
        }
    };
    let Field::Scalar(z) = field else {
        return Err(Error::InvalidParameter(
            "denoise expects a scalar field".into(),
        ));
    };

    let cleaned = denoiser.denoise(&z, args.tau)?;
    let out = Field::Scalar(cleaned);
    match &args.output {
        Some(path) => pnprr::io::save_field(path, &out)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_field_to(&mut lock, &out)?;
            lock.flush()?;
        }
    }
    Ok(())
}
