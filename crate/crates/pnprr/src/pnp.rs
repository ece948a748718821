//! The alternating registration / denoising loop and its two-step baseline.
//!
//! Registration against a noisy target commits to the noise; denoising first
//! commits to whatever the denoiser damages.  The loop here avoids both by
//! maintaining a running clean-target estimate `t_k`:
//!
//! 1. register the source onto `t_{k-1}` (warm-started from the previous
//!    velocity),
//! 2. blend the warped source with the observed noisy target,
//!    `z_k = (lambda2 t + (1/sigma^2) s_warped) / (lambda2 + 1/sigma^2)`,
//! 3. denoise `z_k` with strength `tau = lambda1 / (2 (lambda2 + 1/sigma^2))`
//!    to get `t_k`.
//!
//! The loop stops when the relative change `||t_k - t_{k-1}|| / ||t_0||`
//! falls below `fixed_point_tol`, or after `max_outer_iters` rounds.  With
//! identical inputs the iteration history is a deterministic prefix: rerunning
//! with a larger cap reproduces the earlier iterations bit for bit.

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::grid::{self, DeformationField, ScalarField, VectorField};
use crate::registration::{self, RegistrationParams, RegistrationResult};
use crate::spectral::SpectralOperator;

#[derive(Clone, Debug)]
pub struct PnpParams {
    /// Denoiser strength weight in the joint objective.
    pub lambda1: f64,
    /// Coupling weight between the clean-target estimate and the observation.
    pub lambda2: f64,
    /// Outer iteration cap.
    pub max_outer_iters: usize,
    /// Relative fixed-point residual threshold.
    pub fixed_point_tol: f64,
    /// Inner registration settings (`reg.sigma` is the data noise scale).
    pub reg: RegistrationParams,
}

impl Default for PnpParams {
    fn default() -> Self {
        PnpParams {
            lambda1: 0.045,
            lambda2: 0.067,
            max_outer_iters: 50,
            fixed_point_tol: 1e-3,
            reg: RegistrationParams::default(),
        }
    }
}

impl PnpParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "pnp {name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter(
                "pnp max_outer_iters must be >= 1".into(),
            ));
        }
        if !(self.fixed_point_tol.is_finite() && self.fixed_point_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pnp fixed_point_tol must be positive and finite, got {}",
                self.fixed_point_tol
            )));
        }
        self.reg.validate()
    }
}

/// Denoiser strength implied by the joint objective:
/// `tau = lambda1 / (2 (lambda2 + 1 / sigma^2))`.
pub fn compute_tau(params: &PnpParams) -> Result<f64> {
    params.validate()?;
    let sigma = params.reg.sigma;
    Ok(params.lambda1 / (2.0 * (params.lambda2 + 1.0 / (sigma * sigma))))
}

/// Blend of the observed target and the warped source:
/// `z = (lambda2 t + (1/sigma^2) warped) / (lambda2 + 1/sigma^2)`.
/// With `lambda2 = 0` this is exactly the warped source.
pub fn compute_z(
    target: &ScalarField,
    warped: &ScalarField,
    params: &PnpParams,
) -> Result<ScalarField> {
    params.validate()?;
    if target.dims() != warped.dims() {
        return Err(Error::DimensionMismatch(format!(
            "compute_z: target {} vs warped {}",
            target.dims(),
            warped.dims()
        )));
    }
    if params.lambda2 == 0.0 {
        return Ok(warped.clone());
    }
    let w_obs = params.lambda2;
    let w_data = 1.0 / (params.reg.sigma * params.reg.sigma);
    let denom = w_obs + w_data;
    let data: Vec<f64> = target
        .data()
        .iter()
        .zip(warped.data())
        .map(|(&t, &w)| (w_obs * t + w_data * w) / denom)
        .collect();
    ScalarField::new(target.dims(), data)
}

/// Per-outer-iteration diagnostics.
#[derive(Clone, Debug)]
pub struct PnpIteration {
    /// 1-based outer iteration index.
    pub index: usize,
    /// Final registration energy of this round.
    pub registration_energy: f64,
    /// Accepted descent steps the inner registration took.
    pub registration_iterations: usize,
    /// `||t_k - t_{k-1}|| / ||t_0||`.
    pub fixed_point_residual: f64,
    /// `ssd(warped source, t_k)` after this round's denoise.
    pub data_mismatch: f64,
}

/// Outcome of the alternating loop.
pub struct PnpTrace {
    pub iterations: Vec<PnpIteration>,
    /// Final registration velocity.
    pub v0: VectorField,
    /// Final clean-target estimate.
    pub denoised: ScalarField,
    /// Inverse deformation of the final registration.
    pub phi_inv: DeformationField,
    pub converged: bool,
}

/// Runs the alternating loop of registration and denoising.
pub fn pnp_rr(
    source: &ScalarField,
    target: &ScalarField,
    denoiser: &dyn Denoiser,
    params: &PnpParams,
) -> Result<PnpTrace> {
    params.validate()?;
    if source.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!(
            "pnp: source {} vs target {}",
            source.dims(),
            target.dims()
        )));
    }
    let op = SpectralOperator::new(target.dims(), params.reg.alpha, params.reg.c)?;
    let tau = compute_tau(params)?;
    let norm0 = target.norm_l2().max(f64::MIN_POSITIVE);
    let mut estimate = target.clone();
    let mut v0: Option<VectorField> = None;
    let mut phi_inv = DeformationField::identity(target.dims());
    let mut iterations = Vec::new();
    let mut converged = false;
    for index in 1..=params.max_outer_iters {
        let wrap = |e: Error| Error::AtIteration {
            iteration: index,
            source: Box::new(e),
        };
        let reg: RegistrationResult =
            registration::register_with(&op, source, &estimate, &params.reg, v0.as_ref())
                .map_err(wrap)?;
        let warped = grid::warp(source, &reg.phi_inv).map_err(wrap)?;
        let z = compute_z(target, &warped, params).map_err(wrap)?;
        let next = denoiser.denoise(&z, tau).map_err(wrap)?;
        if next.dims() != target.dims() {
            return Err(wrap(Error::DimensionMismatch(format!(
                "denoiser returned {} for a {} field",
                next.dims(),
                target.dims()
            ))));
        }
        let residual = grid::ssd(&next, &estimate).map_err(wrap)?.sqrt() / norm0;
        let data_mismatch = grid::ssd(&warped, &next).map_err(wrap)?;
        iterations.push(PnpIteration {
            index,
            registration_energy: *reg.energy_trace.last().expect("trace is never empty"),
            registration_iterations: reg.iterations,
            fixed_point_residual: residual,
            data_mismatch,
        });
        v0 = Some(reg.v0);
        phi_inv = reg.phi_inv;
        estimate = next;
        if residual < params.fixed_point_tol {
            converged = true;
            break;
        }
    }
    Ok(PnpTrace {
        iterations,
        v0: v0.expect("at least one outer iteration ran"),
        denoised: estimate,
        phi_inv,
        converged,
    })
}

/// Baseline that denoises the target once (with the same `tau` the loop
/// would use) and then registers against the result.
pub fn two_step_baseline(
    source: &ScalarField,
    target: &ScalarField,
    denoiser: &dyn Denoiser,
    params: &PnpParams,
) -> Result<(RegistrationResult, ScalarField)> {
    params.validate()?;
    if source.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!(
            "two_step: source {} vs target {}",
            source.dims(),
            target.dims()
        )));
    }
    let tau = compute_tau(params)?;
    let denoised = denoiser.denoise(target, tau)?;
    if denoised.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!(
            "denoiser returned {} for a {} field",
            denoised.dims(),
            target.dims()
        )));
    }
    let reg = registration::register(source, &denoised, &params.reg)?;
    Ok((reg, denoised))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{IdentityDenoiser, TvDenoiser};
    use crate::grid::Dims;

    fn blob(dims: Dims, cx: f64, cy: f64, r: f64) -> ScalarField {
        ScalarField::from_fn(dims, |c| {
            let dx = c[0] as f64 - cx;
            let dy = c[1] as f64 - cy;
            (-(dx * dx + dy * dy) / (2.0 * r * r)).exp()
        })
    }

    fn small_pnp_params() -> PnpParams {
        PnpParams {
            lambda1: 0.045,
            lambda2: 0.067,
            max_outer_iters: 6,
            fixed_point_tol: 1e-3,
            reg: RegistrationParams {
                sigma: 0.1,
                n_steps: 3,
                band: Some(4),
                max_iters: 20,
                ..RegistrationParams::default()
            },
        }
    }

    #[test]
    fn tau_frozen_value() {
        // lambda1 = 0.045, lambda2 = 0.067, sigma = 0.015:
        // tau = 0.045 / (2 * (0.067 + 1 / 0.015^2)).
        let params = PnpParams::default();
        let tau = compute_tau(&params).unwrap();
        assert!((tau - 5.0624236839629645e-6).abs() < 1e-18, "{tau:e}");
    }

    #[test]
    fn tau_validation() {
        let mut p = PnpParams::default();
        p.lambda1 = -1.0;
        assert!(compute_tau(&p).is_err());
        let mut p = PnpParams::default();
        p.lambda2 = f64::NAN;
        assert!(compute_tau(&p).is_err());
        let mut p = PnpParams::default();
        p.reg.sigma = 0.0;
        assert!(compute_tau(&p).is_err());
        // lambda2 = 0 with finite sigma is fine.
        let mut p = PnpParams::default();
        p.lambda2 = 0.0;
        let tau = compute_tau(&p).unwrap();
        assert!((tau - 0.045 * 0.015 * 0.015 / 2.0).abs() < 1e-18);
    }

    #[test]
    fn z_blend_hand_values() {
        let dims = Dims::d2(1, 2);
        let t = ScalarField::new(dims, vec![1.0, 0.0]).unwrap();
        let w = ScalarField::new(dims, vec![0.0, 1.0]).unwrap();
        let mut p = PnpParams::default();
        p.reg.sigma = 1.0; // data weight 1
        p.lambda2 = 1.0;
        let z = compute_z(&t, &w, &p).unwrap();
        assert_eq!(z.data(), &[0.5, 0.5]);
        // lambda2 = 0 returns the warped image bit-exactly.
        p.lambda2 = 0.0;
        let z = compute_z(&t, &w, &p).unwrap();
        assert_eq!(z.data(), w.data());
        // Identical inputs are a fixed point of the blend.
        p.lambda2 = 0.3;
        let z = compute_z(&t, &t, &p).unwrap();
        for (a, b) in z.data().iter().zip(t.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_images_converge_in_one_outer_iteration() {
        let dims = Dims::d2(16, 16);
        let s = blob(dims, 8.0, 8.0, 3.0);
        let params = small_pnp_params();
        let trace = pnp_rr(&s, &s, &IdentityDenoiser, &params).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations.len(), 1);
        // The blend of two identical images differs from them only by
        // floating-point rounding, so the residual is at roundoff level.
        assert!(trace.iterations[0].fixed_point_residual < 1e-12);
        for (a, b) in trace.denoised.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(trace.phi_inv.displacement().is_zero());
    }

    #[test]
    fn identity_denoiser_with_zero_lambda2_fixes_the_warped_source() {
        // With lambda2 = 0 the blend collapses to the warped source, and the
        // identity denoiser passes it through, so the reconstruction at every
        // outer iteration is exactly S composed with phi-inverse.
        let dims = Dims::d2(16, 16);
        let s = blob(dims, 7.0, 7.0, 2.5);
        let t = blob(dims, 8.5, 8.0, 2.5);
        let mut params = small_pnp_params();
        params.lambda2 = 0.0;
        let trace = pnp_rr(&s, &t, &IdentityDenoiser, &params).unwrap();
        let warped = grid::warp(&s, &trace.phi_inv).unwrap();
        for (a, b) in trace.denoised.data().iter().zip(warped.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn iteration_history_is_a_deterministic_prefix() {
        let dims = Dims::d2(16, 16);
        let s = blob(dims, 7.0, 7.0, 2.5);
        let t = blob(dims, 8.5, 8.0, 2.5);
        let tv = TvDenoiser::default();
        let mut short = small_pnp_params();
        short.max_outer_iters = 2;
        short.fixed_point_tol = 1e-12; // force the cap to bind
        let mut long = short.clone();
        long.max_outer_iters = 4;
        let a = pnp_rr(&s, &t, &tv, &short).unwrap();
        let b = pnp_rr(&s, &t, &tv, &long).unwrap();
        assert_eq!(a.iterations.len(), 2);
        assert_eq!(b.iterations.len(), 4);
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            assert_eq!(x.registration_energy.to_bits(), y.registration_energy.to_bits());
            assert_eq!(x.fixed_point_residual.to_bits(), y.fixed_point_residual.to_bits());
            assert_eq!(x.data_mismatch.to_bits(), y.data_mismatch.to_bits());
            assert_eq!(x.registration_iterations, y.registration_iterations);
        }
    }

    #[test]
    fn two_step_with_identity_matches_plain_registration() {
        let dims = Dims::d2(16, 16);
        let s = blob(dims, 7.0, 7.0, 2.5);
        let t = blob(dims, 8.0, 8.5, 2.5);
        let params = small_pnp_params();
        let (two, denoised) = two_step_baseline(&s, &t, &IdentityDenoiser, &params).unwrap();
        assert_eq!(denoised.data(), t.data());
        let plain = registration::register(&s, &t, &params.reg).unwrap();
        assert_eq!(two.energy_trace, plain.energy_trace);
        assert_eq!(two.iterations, plain.iterations);
    }

    #[test]
    fn failures_carry_the_outer_iteration() {
        struct Broken;
        impl Denoiser for Broken {
            fn name(&self) -> &str {
                "broken"
            }
            fn denoise(&self, _z: &ScalarField, _tau: f64) -> Result<ScalarField> {
                Err(Error::Plugin("synthetic failure".into()))
            }
        }
        let dims = Dims::d2(16, 16);
        let s = blob(dims, 7.0, 7.0, 2.5);
        let t = blob(dims, 8.0, 8.0, 2.5);
        match pnp_rr(&s, &t, &Broken, &small_pnp_params()) {
            Err(e @ Error::AtIteration { iteration: 1, .. }) => {
                assert_eq!(e.exit_class(), 3);
            }
            other => panic!("expected wrapped failure, got {:?}", other.map(|_| "ok")),
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = small_pnp_params();
        p.max_outer_iters = 0;
        assert!(pnp_rr(
            &ScalarField::zeros(Dims::d2(8, 8)),
            &ScalarField::zeros(Dims::d2(8, 8)),
            &IdentityDenoiser,
            &p
        )
        .is_err());
        let mut p = small_pnp_params();
        p.fixed_point_tol = 0.0;
        assert!(p.validate().is_err());
    }
}
