//! On-disk layout for synthetic benchmark cases.
//!
//! A case directory holds `manifest.txt` (one seed per line, in generation
//! order) plus five field files per seed:
//! `case<seed>_{source,target_clean,target_noisy,source_mask,target_mask}.fld`.
//! Masks are stored as 0/1 scalar fields, which the f32 payload represents
//! exactly.

use std::path::{Path, PathBuf};

use pnprr::io;
use pnprr::metrics::BinaryMask;
use pnprr::synthdata::SyntheticCase;
use pnprr::{Error, Result, ScalarField};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// A case reloaded from disk (no noise metadata; it is baked into the fields).
pub struct LoadedCase {
    pub seed: u64,
    pub source: ScalarField,
    pub target_clean: ScalarField,
    pub target_noisy: ScalarField,
    pub source_mask: BinaryMask,
    pub target_mask: BinaryMask,
}

fn case_path(dir: &Path, seed: u64, part: &str) -> PathBuf {
    dir.join(format!("case{seed}_{part}.fld"))
}

/// Writes the five field files for one case.
pub fn save_case(dir: &Path, case: &SyntheticCase) -> Result<()> {
    io::save_scalar(case_path(dir, case.seed, "source"), &case.source)?;
    io::save_scalar(case_path(dir, case.seed, "target_clean"), &case.target_clean)?;
    io::save_scalar(case_path(dir, case.seed, "target_noisy"), &case.target_noisy)?;
    io::save_scalar(
        case_path(dir, case.seed, "source_mask"),
        &case.source_mask.to_scalar(),
    )?;
    io::save_scalar(
        case_path(dir, case.seed, "target_mask"),
        &case.target_mask.to_scalar(),
    )?;
    Ok(())
}

/// Reads the five field files for one seed back.
pub fn load_case(dir: &Path, seed: u64) -> Result<LoadedCase> {
    let load_mask = |part: &str| -> Result<BinaryMask> {
        let f = io::load_scalar(case_path(dir, seed, part))?;
        Ok(BinaryMask::from_threshold(&f, 0.5))
    };
    Ok(LoadedCase {
        seed,
        source: io::load_scalar(case_path(dir, seed, "source"))?,
        target_clean: io::load_scalar(case_path(dir, seed, "target_clean"))?,
        target_noisy: io::load_scalar(case_path(dir, seed, "target_noisy"))?,
        source_mask: load_mask("source_mask")?,
        target_mask: load_mask("target_mask")?,
    })
}

/// Writes `manifest.txt`: one seed per line, LF endings.
pub fn write_manifest(dir: &Path, seeds: &[u64]) -> Result<()> {
    let mut text = String::new();
    for s in seeds {
        text.push_str(&s.to_string());
        text.push('\n');
    }
    std::fs::write(dir.join(MANIFEST_NAME), text)?;
    Ok(())
}

/// Reads `manifest.txt` back into a seed list.
pub fn read_manifest(dir: &Path) -> Result<Vec<u64>> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path)?;
    let mut seeds = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        seeds.push(line.parse::<u64>().map_err(|e| Error::Parse {
            line: idx + 1,
            detail: format!("manifest seed `{line}`: {e}"),
        })?);
    }
    Ok(seeds)
}
