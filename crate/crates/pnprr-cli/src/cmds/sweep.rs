//! `pnprr sweep`: factorial robustness study over cases, methods, and prior
//! weights, emitting one CSV row per run plus a per-method summary block.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use pnprr::denoise::{make_denoiser, Denoiser};
use pnprr::io::{fmt_g9, format_result_row, ResultRecord, RESULTS_HEADER};
use pnprr::metrics::{dice, jacobian_det_stats, propagate_mask, psnr};
use pnprr::pnp::{pnp_rr, two_step_baseline, PnpParams};
use pnprr::registration::register;
use pnprr::{grid, Error, Result};

use crate::cases::{self, LoadedCase};
use crate::cmds::common::{ensure_parent_dir, RegFlags};
use crate::config::{parse_list, resolve, resolve_required, ConfigFile};

pub const DEFAULT_METHODS: &str = "baseline,two-step,pnp";
pub const DEFAULT_DENOISERS: &str = "tv";
/// Log-spaced (factor 3) grids centred on the 2-D TV setting (0.045, 0.067).
pub const DEFAULT_LAMBDA1_GRID: &str = "0.015,0.045,0.135";
pub const DEFAULT_LAMBDA2_GRID: &str = "0.0223,0.067,0.201";

/// Run the full factorial study over stored cases and parameter grids.
#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Directory holding manifest.txt and case files (see `synth`)
    #[arg(long = "cases-dir", value_name = "DIR")]
    pub cases_dir: Option<String>,

    /// Comma-separated methods: baseline, two-step, pnp
    /// [default: baseline,two-step,pnp]
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,

    /// Comma-separated denoiser specs for two-step/pnp [default: tv]
    #[arg(long, value_name = "LIST")]
    pub denoisers: Option<String>,

    /// Comma-separated lambda1 grid [default: 0.015,0.045,0.135]
    #[arg(long = "lambda1-grid", value_name = "LIST")]
    pub lambda1_grid: Option<String>,

    /// Comma-separated lambda2 grid [default: 0.0223,0.067,0.201]
    #[arg(long = "lambda2-grid", value_name = "LIST")]
    pub lambda2_grid: Option<String>,

    /// Outer iteration cap for the pnp method [default: 50]
    #[arg(long = "max-outer", value_name = "N")]
    pub max_outer: Option<usize>,

    /// Relative fixed-point residual threshold for pnp [default: 0.001]
    #[arg(long = "fixed-point-tol", value_name = "T")]
    pub fixed_point_tol: Option<f64>,

    #[command(flatten)]
    pub reg: RegFlags,

    /// Output CSV path
    #[arg(long = "out-csv", value_name = "FILE")]
    pub out_csv: Option<String>,

    /// key=value config file mirroring these flags; flags win
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Method {
    Baseline,
    TwoStep,
    Pnp,
}

impl Method {
    fn parse(s: &str) -> Result<Method> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "two-step" => Ok(Method::TwoStep),
            "pnp" => Ok(Method::Pnp),
            other => Err(Error::InvalidParameter(format!(
                "methods: unknown method `{other}` (expected baseline, two-step, or pnp)"
            ))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::TwoStep => "two-step",
            Method::Pnp => "pnp",
        }
    }
}

/// One planned run; `denoiser` indexes into the denoiser list.
struct RunSpec {
    seed: u64,
    method: Method,
    denoiser: Option<usize>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
}

/// Outcome of one run: a finished record or a failure note.
enum RunOutcome {
    Done(Box<ResultRecord>),
    Failed(String),
}

fn sanitize_status(e: &Error) -> String {
    format!("error: {}", e.to_string().replace(',', ";").replace('\n', " "))
}

fn execute(
    spec: &RunSpec,
    case: &LoadedCase,
    denoisers: &[Box<dyn Denoiser>],
    base_pnp: &PnpParams,
) -> Result<ResultRecord> {
    let source = &case.source;
    let noisy = &case.target_noisy;
    let mut params = base_pnp.clone();
    if let (Some(l1), Some(l2)) = (spec.lambda1, spec.lambda2) {
        params.lambda1 = l1;
        params.lambda2 = l2;
    }

    let (phi_inv, denoised, outer_iters) = match spec.method {
        Method::Baseline => {
            let reg = register(source, noisy, &params.reg)?;
            (reg.phi_inv, None, reg.iterations)
        }
        Method::TwoStep => {
            let den = denoisers[spec.denoiser.expect("two-step has a denoiser")].as_ref();
            let (reg, denoised) = two_step_baseline(source, noisy, den, &params)?;
            (reg.phi_inv, Some(denoised), reg.iterations)
        }
        Method::Pnp => {
            let den = denoisers[spec.denoiser.expect("pnp has a denoiser")].as_ref();
            let trace = pnp_rr(source, noisy, den, &params)?;
            (trace.phi_inv, Some(trace.denoised), trace.iterations.len())
        }
    };

    let propagated = propagate_mask(&case.source_mask, &phi_inv)?;
    let dice_score = dice(&propagated, &case.target_mask)?;
    let warped = grid::warp(source, &phi_inv)?;
    let ssd_final = grid::ssd(&warped, noisy)?;
    let psnr_denoised = match &denoised {
        Some(d) => Some(psnr(d, &case.target_clean)?),
        None => None,
    };
    let jac = jacobian_det_stats(&phi_inv)?;

    Ok(ResultRecord {
        seed: spec.seed,
        method: spec.method.label().to_string(),
        denoiser: spec
            .denoiser
            .map(|i| denoisers[i].name().to_string())
            .unwrap_or_default(),
        lambda1: spec.lambda1,
        lambda2: spec.lambda2,
        dice: dice_score,
        ssd_final,
        psnr_denoised,
        min_jac_det: jac.min_det,
        outer_iters,
        wall_seconds: 0.0, // filled in by the caller from the measured time
    })
}

fn failed_row(spec: &RunSpec, denoisers: &[Box<dyn Denoiser>], wall: f64, status: &str) -> String {
    let cells = [
        spec.seed.to_string(),
        spec.method.label().to_string(),
        spec.denoiser
            .map(|i| denoisers[i].name().to_string())
            .unwrap_or_default(),
        spec.lambda1.map(fmt_g9).unwrap_or_default(),
        spec.lambda2.map(fmt_g9).unwrap_or_default(),
        String::new(), // dice
        String::new(), // ssd_final
        String::new(), // psnr_denoised
        String::new(), // min_jac_det
        String::new(), // outer_iters
        fmt_g9(wall),
        status.to_string(),
    ];
    cells.join(",")
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let mut cfg = ConfigFile::load_optional(args.config.as_ref())?;
    let cases_dir = resolve_required(
        args.cases_dir.clone(),
        cfg.take_raw("cases-dir"),
        "cases-dir",
    )?;
    let out_csv = resolve_required(args.out_csv.clone(), cfg.take_raw("out-csv"), "out-csv")?;
    let methods_text = resolve(
        args.methods.clone(),
        cfg.take_raw("methods"),
        DEFAULT_METHODS.to_string(),
    );
    let denoisers_text = resolve(
        args.denoisers.clone(),
        cfg.take_raw("denoisers"),
        DEFAULT_DENOISERS.to_string(),
    );
    let lambda1_text = resolve(
        args.lambda1_grid.clone(),
        cfg.take_raw("lambda1-grid"),
        DEFAULT_LAMBDA1_GRID.to_string(),
    );
    let lambda2_text = resolve(
        args.lambda2_grid.clone(),
        cfg.take_raw("lambda2-grid"),
        DEFAULT_LAMBDA2_GRID.to_string(),
    );
    let max_outer = args.max_outer;
    let fixed_point_tol = args.fixed_point_tol;
    let base_pnp = super::pnp::resolve_pnp(
        None,
        None,
        max_outer,
        fixed_point_tol,
        &args.reg,
        &mut cfg,
    )?;
    cfg.reject_unknown()?;

    let methods = parse_list::<String>(&methods_text, "methods")?
        .iter()
        .map(|s| Method::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let denoiser_specs = parse_list::<String>(&denoisers_text, "denoisers")?;
    let denoisers = denoiser_specs
        .iter()
        .map(|s| make_denoiser(s))
        .collect::<Result<Vec<_>>>()?;
    let lambda1_grid: Vec<f64> = parse_list(&lambda1_text, "lambda1-grid")?;
    let lambda2_grid: Vec<f64> = parse_list(&lambda2_text, "lambda2-grid")?;

    let dir = PathBuf::from(&cases_dir);
    let seeds = cases::read_manifest(&dir)?;

    // Deterministic plan: cases in manifest order, then methods, denoisers,
    // and the lambda grid in the order given on the command line.
    let mut plan = Vec::new();
    for &seed in &seeds {
        for &method in &methods {
            match method {
                Method::Baseline => plan.push(RunSpec {
                    seed,
                    method,
                    denoiser: None,
                    lambda1: None,
                    lambda2: None,
                }),
                Method::TwoStep | Method::Pnp => {
                    for d in 0..denoisers.len() {
                        for &l1 in &lambda1_grid {
                            for &l2 in &lambda2_grid {
                                plan.push(RunSpec {
                                    seed,
                                    method,
                                    denoiser: Some(d),
                                    lambda1: Some(l1),
                                    lambda2: Some(l2),
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let total = plan.len();
    let mut rows: Vec<String> = Vec::with_capacity(total);
    let mut dice_by_method: Vec<(Method, Vec<f64>)> =
        methods.iter().map(|&m| (m, Vec::new())).collect();
    let mut loaded: Option<LoadedCase> = None;
    for (done, spec) in plan.iter().enumerate() {
        if loaded.as_ref().map(|c| c.seed) != Some(spec.seed) {
            loaded = Some(cases::load_case(&dir, spec.seed)?);
        }
        let case = loaded.as_ref().expect("case just loaded");
        let start = Instant::now();
        let outcome = match execute(spec, case, &denoisers, &base_pnp) {
            Ok(rec) => RunOutcome::Done(Box::new(rec)),
            Err(e) => RunOutcome::Failed(sanitize_status(&e)),
        };
        let wall = start.elapsed().as_secs_f64();
        let row = match outcome {
            RunOutcome::Done(mut rec) => {
                rec.wall_seconds = wall;
                for (m, v) in dice_by_method.iter_mut() {
                    if *m == spec.method {
                        v.push(rec.dice);
                        break;
                    }
                }
                format!("{},ok", format_result_row(&rec))
            }
            RunOutcome::Failed(status) => failed_row(spec, &denoisers, wall, &status),
        };
        eprintln!(
            "[{}/{}] seed={} method={} {}",
            done + 1,
            total,
            spec.seed,
            spec.method.label(),
            row.rsplit(',').next().unwrap_or("?"),
        );
        rows.push(row);
    }

    let mut text = format!("{RESULTS_HEADER},status\n");
    for row in &rows {
        text.push_str(row);
        text.push('\n');
    }
    if !rows.is_empty() {
        for (method, scores) in &dice_by_method {
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let var = scores.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
            let _ = writeln!(
                text,
                "# summary method={} runs={} mean_dice={} std_dice={}",
                method.label(),
                scores.len(),
                fmt_g9(mean),
                fmt_g9(var.sqrt()),
            );
        }
    }
    ensure_parent_dir(&out_csv)?;
    std::fs::write(&out_csv, text)?;
    println!("wrote {total} runs to {out_csv}");
    Ok(())
}
