//! Flags and helpers shared by the registration-driven subcommands.

use clap::Args;
use pnprr::registration::RegistrationParams;
use pnprr::Result;

use crate::config::{resolve, ConfigFile};

/// Geodesic-shooting registration knobs, shared by `register`, `pnp`, and
/// `sweep`. Defaults follow the 2-D study settings.
#[derive(Args, Debug, Clone)]
pub struct RegFlags {
    /// Metric smoothness weight alpha [default: 1.5]
    #[arg(long, value_name = "A")]
    pub alpha: Option<f64>,

    /// Metric smoothness exponent c [default: 3]
    #[arg(long, value_name = "C")]
    pub c: Option<f64>,

    /// Image-mismatch noise scale sigma (data term weight 1/sigma^2)
    /// [default: 0.015]
    #[arg(long, value_name = "S")]
    pub sigma: Option<f64>,

    /// Time steps for geodesic shooting [default: 10]
    #[arg(long = "n-steps", value_name = "N")]
    pub n_steps: Option<usize>,

    /// Frequency band limit for velocities; 0 disables the limit
    /// [default: 16]
    #[arg(long, value_name = "B")]
    pub band: Option<usize>,

    /// Gradient-descent iteration cap [default: 60]
    #[arg(long = "max-iters", value_name = "N")]
    pub max_iters: Option<usize>,

    /// Displacement scale (voxels) of the first line-search trial
    /// [default: 1]
    #[arg(long = "step-init", value_name = "X")]
    pub step_init: Option<f64>,

    /// Stop when the gradient max-norm drops below this [default: 0.001]
    #[arg(long = "grad-tol", value_name = "T")]
    pub grad_tol: Option<f64>,

    /// Stop when the relative energy decrease drops below this
    /// [default: 1e-6]
    #[arg(long = "energy-tol", value_name = "T")]
    pub energy_tol: Option<f64>,
}

/// Merges CLI flags, config keys, and built-in defaults into solver
/// parameters. Consumes the matching config keys.
pub fn resolve_reg(flags: &RegFlags, cfg: &mut ConfigFile) -> Result<RegistrationParams> {
    let d = RegistrationParams::default();
    let band = resolve(
        flags.band,
        cfg.take::<usize>("band")?,
        d.band.unwrap_or(0),
    );
    Ok(RegistrationParams {
        sigma: resolve(flags.sigma, cfg.take("sigma")?, d.sigma),
        alpha: resolve(flags.alpha, cfg.take("alpha")?, d.alpha),
        c: resolve(flags.c, cfg.take("c")?, d.c),
        n_steps: resolve(flags.n_steps, cfg.take("n-steps")?, d.n_steps),
        band: if band == 0 { None } else { Some(band) },
        max_iters: resolve(flags.max_iters, cfg.take("max-iters")?, d.max_iters),
        step_init: resolve(flags.step_init, cfg.take("step-init")?, d.step_init),
        grad_tol: resolve(flags.grad_tol, cfg.take("grad-tol")?, d.grad_tol),
        energy_tol: resolve(flags.energy_tol, cfg.take("energy-tol")?, d.energy_tol),
    })
}

/// Renders the band limit for trace headers: a number, or `none`.
pub fn band_label(band: Option<usize>) -> String {
    match band {
        Some(b) => b.to_string(),
        None => "none".to_string(),
    }
}

/// Creates the parent directory of an output prefix/path if needed.
pub fn ensure_parent_dir(path: &str) -> Result<()> {
    let p = std::path::Path::new(path);
    if let Some(parent) = p.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}
