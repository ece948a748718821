//! `pnprr register`: single geodesic-shooting registration.

use std::fmt::Write as _;

use clap::Args;
use pnprr::io::{self, fmt_g9};
use pnprr::registration::{register, RegistrationResult};
use pnprr::{grid, Result};

use crate::cmds::common::{band_label, ensure_parent_dir, resolve_reg, RegFlags};
use crate::config::{resolve_required, ConfigFile};

/// Register a source image to a target image (no denoising).
#[derive(Args, Debug)]
pub struct RegisterArgs {
    /// Source (moving) image field file
    #[arg(long, value_name = "FILE")]
    pub source: Option<String>,

    /// Target (fixed) image field file
    #[arg(long, value_name = "FILE")]
    pub target: Option<String>,

    #[command(flatten)]
    pub reg: RegFlags,

    /// Prefix for output files (v0.fld, phi_inv.fld, warped.fld, energy.csv)
    #[arg(long = "out-prefix", value_name = "PREFIX")]
    pub out_prefix: Option<String>,

    /// key=value config file mirroring these flags; flags win
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
}

/// Writes the standard registration artefacts under `prefix` and returns the
/// warped source. Shared with the `pnp` command.
pub fn write_registration_outputs(
    prefix: &str,
    source: &pnprr::ScalarField,
    v0: &pnprr::VectorField,
    phi_inv: &pnprr::DeformationField,
) -> Result<pnprr::ScalarField> {
    ensure_parent_dir(prefix)?;
    io::save_vector(format!("{prefix}v0.fld"), v0)?;
    io::save_vector(format!("{prefix}phi_inv.fld"), phi_inv.displacement())?;
    let warped = grid::warp(source, phi_inv)?;
    io::save_scalar(format!("{prefix}warped.fld"), &warped)?;
    Ok(warped)
}

fn energy_trace_csv(params: &pnprr::registration::RegistrationParams, trace: &[f64]) -> String {
    let mut text = format!(
        "# alpha={} c={} sigma={} n-steps={} band={}\niteration,energy\n",
        fmt_g9(params.alpha),
        fmt_g9(params.c),
        fmt_g9(params.sigma),
        params.n_steps,
        band_label(params.band),
    );
    for (i, e) in trace.iter().enumerate() {
        let _ = writeln!(text, "{i},{}", fmt_g9(*e));
    }
    text
}

pub fn run(args: &RegisterArgs) -> Result<()> {
    let mut cfg = ConfigFile::load_optional(args.config.as_ref())?;
    let source_path = resolve_required(args.source.clone(), cfg.take_raw("source"), "source")?;
    let target_path = resolve_required(args.target.clone(), cfg.take_raw("target"), "target")?;
    let out_prefix = resolve_required(
        args.out_prefix.clone(),
        cfg.take_raw("out-prefix"),
        "out-prefix",
    )?;
    let params = resolve_reg(&args.reg, &mut cfg)?;
    cfg.reject_unknown()?;

    let source = io::load_scalar(&source_path)?;
    let target = io::load_scalar(&target_path)?;
    let res: RegistrationResult = register(&source, &target, &params)?;

    write_registration_outputs(&out_prefix, &source, &res.v0, &res.phi_inv)?;
    std::fs::write(
        format!("{out_prefix}energy.csv"),
        energy_trace_csv(&params, &res.energy_trace),
    )?;

    let final_energy = *res.energy_trace.last().expect("trace is never empty");
    println!("final_energy={}", fmt_g9(final_energy));
    println!("iterations={}", res.iterations);
    println!("converged={}", res.converged);
    Ok(())
}
