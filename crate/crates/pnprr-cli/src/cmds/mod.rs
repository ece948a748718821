//! Subcommand implementations.

pub mod common;
pub mod denoise;
pub mod eval;
pub mod pnp;
pub mod register;
pub mod sweep;
pub mod synth;
