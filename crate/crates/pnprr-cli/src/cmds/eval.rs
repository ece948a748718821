//! `pnprr eval`: score a deformation against ground-truth masks.

use clap::Args;
use pnprr::io::{self, fmt_g9};
use pnprr::metrics::{dice, jacobian_det_stats, propagate_mask, BinaryMask};
use pnprr::{DeformationField, Result};

use crate::cmds::common::ensure_parent_dir;
use crate::config::{resolve_required, ConfigFile};

/// Propagate a source mask through a deformation and report Dice and
/// Jacobian statistics.
#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Deformation file: displacement of the inverse map (phi_inv.fld as
    /// written by `register`/`pnp`)
    #[arg(long, value_name = "FILE")]
    pub phi: Option<String>,

    /// Source mask field file (0/1 scalar)
    #[arg(long = "source-mask", value_name = "FILE")]
    pub source_mask: Option<String>,

    /// Target mask field file (0/1 scalar)
    #[arg(long = "target-mask", value_name = "FILE")]
    pub target_mask: Option<String>,

    /// Output CSV path
    #[arg(long = "out-csv", value_name = "FILE")]
    pub out_csv: Option<String>,

    /// key=value config file mirroring these flags; flags win
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let mut cfg = ConfigFile::load_optional(args.config.as_ref())?;
    let phi_path = resolve_required(args.phi.clone(), cfg.take_raw("phi"), "phi")?;
    let source_mask_path = resolve_required(
        args.source_mask.clone(),
        cfg.take_raw("source-mask"),
        "source-mask",
    )?;
    let target_mask_path = resolve_required(
        args.target_mask.clone(),
        cfg.take_raw("target-mask"),
        "target-mask",
    )?;
    let out_csv = resolve_required(args.out_csv.clone(), cfg.take_raw("out-csv"), "out-csv")?;
    cfg.reject_unknown()?;

    let phi = DeformationField::from_displacement(io::load_vector(&phi_path)?);
    let load_mask = |path: &str| -> Result<BinaryMask> {
        Ok(BinaryMask::from_threshold(&io::load_scalar(path)?, 0.5))
    };
    let source_mask = load_mask(&source_mask_path)?;
    let target_mask = load_mask(&target_mask_path)?;

    let propagated = propagate_mask(&source_mask, &phi)?;
    let score = dice(&propagated, &target_mask)?;
    let jac = jacobian_det_stats(&phi)?;

    ensure_parent_dir(&out_csv)?;
    std::fs::write(
        &out_csv,
        format!(
            "dice,min_jac_det,max_jac_det,fraction_nonpositive\n{},{},{},{}\n",
            fmt_g9(score),
            fmt_g9(jac.min_det),
            fmt_g9(jac.max_det),
            fmt_g9(jac.fraction_non_positive),
        ),
    )?;

    println!("dice={}", fmt_g9(score));
    println!("min_jac_det={}", fmt_g9(jac.min_det));
    println!("max_jac_det={}", fmt_g9(jac.max_det));
    println!("fraction_nonpositive={}", fmt_g9(jac.fraction_non_positive));
    Ok(())
}
