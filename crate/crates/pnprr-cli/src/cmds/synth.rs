//! `pnprr synth`: generate the seeded 2-D benchmark cases.

use std::path::Path;

use clap::Args;
use pnprr::synthdata::generate_case;
use pnprr::{Error, Result};

use crate::cases;
use crate::config::{parse_list, resolve, resolve_required, ConfigFile};

pub const DEFAULT_SEEDS: &str = "1,2,3,4,5,6,7,8,9,10";

/// Generate seeded synthetic source/target pairs with ground-truth masks.
#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Comma-separated seed list [default: 1,2,3,4,5,6,7,8,9,10]
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,

    /// Grid resolution per axis [default: 100]
    #[arg(long, value_name = "N")]
    pub resolution: Option<usize>,

    /// Standard deviation of the Gaussian noise added to targets
    /// [default: 0.3]
    #[arg(long = "noise-sigma", value_name = "S")]
    pub noise_sigma: Option<f64>,

    /// Directory receiving the case files and manifest.txt
    #[arg(long = "out-dir", value_name = "DIR")]
    pub out_dir: Option<String>,

    /// key=value config file mirroring these flags; flags win
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let mut cfg = ConfigFile::load_optional(args.config.as_ref())?;
    let seeds_text = resolve(
        args.seeds.clone(),
        cfg.take_raw("seeds"),
        DEFAULT_SEEDS.to_string(),
    );
    let resolution = resolve(args.resolution, cfg.take("resolution")?, 100);
    let noise_sigma = resolve(args.noise_sigma, cfg.take("noise-sigma")?, 0.3);
    let out_dir = resolve_required(args.out_dir.clone(), cfg.take_raw("out-dir"), "out-dir")?;
    cfg.reject_unknown()?;

    let seeds: Vec<u64> = parse_list(&seeds_text, "seeds")?;
    if seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "seeds: need at least one seed".into(),
        ));
    }
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != seeds.len() {
        return Err(Error::InvalidParameter(
            "seeds: duplicate seeds would overwrite each other's files".into(),
        ));
    }

    let dir = Path::new(&out_dir);
    std::fs::create_dir_all(dir)?;
    for &seed in &seeds {
        let case = generate_case(seed, resolution, noise_sigma)?;
        cases::save_case(dir, &case)?;
    }
    cases::write_manifest(dir, &seeds)?;
    println!("wrote {} cases to {}", seeds.len(), out_dir);
    Ok(())
}
