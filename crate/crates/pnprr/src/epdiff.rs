//! Geodesic shooting: EPDiff time stepping and transport of the inverse map.
//!
//! The momentum `m = L v` evolves by the EPDiff equation
//!
//! ```text
//! dv/dt = -K [ (Dv)^T m  +  Dm v  +  m div v ]
//! ```
//!
//! integrated here with classical RK4 (or explicit Euler for comparison) over
//! `n_steps` steps of unit total time.  When a band is set, the right-hand
//! side is projected onto the bandlimited space inside every stage (the
//! projection commutes with `K`, so it is folded into the `K` symbol); with a
//! bandlimited `v0` all intermediate states then stay in band and the scheme
//! keeps its full order on the subspace.
//!
//! Alongside the velocity, the inverse deformation `phi_inv(x) = x + psi(x)`
//! is advected semi-Lagrangianly: one step of length `dt` updates
//! `psi'(x) = psi(x - dt v(x)) - dt v(x)`, using the velocity valid at the
//! start of the step.

use crate::error::{Error, Result};
use crate::grid::{
    self, DeformationField, Dims, VectorField,
};
use crate::spectral::SpectralOperator;

/// Explicit time integrator for the EPDiff equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeScheme {
    Rk4,
    Euler,
}

/// Controls for [`shoot`].
#[derive(Clone, Copy, Debug)]
pub struct ShootParams {
    /// Number of time steps over unit total time; at least 1.
    pub n_steps: usize,
    /// Velocity band, or `None` for the full space.
    pub band: Option<usize>,
    pub scheme: TimeScheme,
}

impl Default for ShootParams {
    fn default() -> Self {
        ShootParams {
            n_steps: 10,
            band: None,
            scheme: TimeScheme::Rk4,
        }
    }
}

/// Result of shooting: velocities at every time node plus the inverse map.
pub struct GeodesicPath {
    /// `n_steps + 1` velocity fields, `velocities[0]` being the input.
    pub velocities: Vec<VectorField>,
    /// Inverse deformation accumulated over the whole unit interval.
    pub phi_inv: DeformationField,
    /// Step length `1 / n_steps`.
    pub dt: f64,
}

/// Spectral context with the band folded into the `K` symbol.
pub(crate) struct BandedOps<'a> {
    pub op: &'a SpectralOperator,
    symbol_k: Vec<f64>,
    mask: Option<Vec<f64>>,
}

impl<'a> BandedOps<'a> {
    pub fn new(op: &'a SpectralOperator, band: Option<usize>) -> Result<Self> {
        Ok(BandedOps {
            op,
            symbol_k: op.banded_symbol_k(band)?,
            mask: op.banded_mask(band)?,
        })
    }

    /// `K` restricted to the band (identity outside lowpass when unbanded).
    pub fn apply_k(&self, v: &VectorField) -> VectorField {
        self.op.apply_symbol(v, &self.symbol_k)
    }

    pub fn apply_l(&self, v: &VectorField) -> VectorField {
        self.op.apply_symbol(v, self.op.symbol_l())
    }

    /// Band projection; clones when no band is active.
    pub fn project(&self, v: &VectorField) -> VectorField {
        match &self.mask {
            Some(m) => self.op.apply_symbol(v, m),
            None => v.clone(),
        }
    }
}

/// EPDiff right-hand side `f(v) = -K[(Dv)^T m + Dm v + m div v]` with
/// `m = L v`.  The caller supplies `m` when it is already known.
pub(crate) fn rhs_with_momentum(
    ops: &BandedOps,
    v: &VectorField,
    m: &VectorField,
) -> Result<VectorField> {
    let dims = v.dims();
    let rank = dims.rank();
    let dv = grid::jacobian(v)?;
    let dm = grid::jacobian(m)?;
    let n = dims.len();
    let mut w = VectorField::zeros(dims);
    // div v = trace of Dv.
    let mut divv = vec![0.0; n];
    for a in 0..rank {
        for (d, &x) in divv.iter_mut().zip(dv.entry(a, a)) {
            *d += x;
        }
    }
    for i in 0..rank {
        let wi = w.comp_mut(i);
        for j in 0..rank {
            let dv_ji = dv.entry(j, i); // d v_j / d x_i
            let dm_ij = dm.entry(i, j); // d m_i / d x_j
            let mj = m.comp(j);
            let vj = v.comp(j);
            for x in 0..n {
                wi[x] += dv_ji[x] * mj[x] + dm_ij[x] * vj[x];
            }
        }
        let mi = m.comp(i);
        for x in 0..n {
            wi[x] += mi[x] * divv[x];
        }
    }
    let mut out = ops.apply_k(&w);
    out.scale(-1.0);
    Ok(out)
}

/// EPDiff right-hand side on the full space (no band restriction).
pub fn epdiff_rhs(op: &SpectralOperator, v: &VectorField) -> Result<VectorField> {
    if v.dims() != op.dims() {
        return Err(Error::DimensionMismatch(format!(
            "epdiff_rhs: field is {} but operator is {}",
            v.dims(),
            op.dims()
        )));
    }
    let ops = BandedOps::new(op, None)?;
    let m = ops.apply_l(v);
    rhs_with_momentum(&ops, v, &m)
}

/// One semi-Lagrangian step: `psi'(x) = psi(x - dt v(x)) - dt v(x)`.
pub fn semi_lagrangian_step(
    psi: &VectorField,
    v: &VectorField,
    dt: f64,
) -> Result<VectorField> {
    if psi.dims() != v.dims() {
        return Err(Error::DimensionMismatch(format!(
            "semi_lagrangian_step: {} vs {}",
            psi.dims(),
            v.dims()
        )));
    }
    if !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "semi_lagrangian_step: dt must be finite, got {dt}"
        )));
    }
    let dims = psi.dims();
    let rank = dims.rank();
    let n = dims.len();
    let mut out = VectorField::zeros(dims);
    let mut coords = [0usize; 3];
    let mut point = [0f64; 3];
    for i in 0..n {
        for a in 0..rank {
            point[a] = coords[a] as f64 - dt * v.comp(a)[i];
        }
        let st = grid::stencil(dims, &point[..rank]);
        for a in 0..rank {
            let pa = psi.comp(a);
            let mut s = 0.0;
            for k in 0..st.count {
                s += st.w[k] * pa[st.idx[k]];
            }
            out.comp_mut(a)[i] = s - dt * v.comp(a)[i];
        }
        for a in (0..rank).rev() {
            coords[a] += 1;
            if coords[a] < dims.size(a) {
                break;
            }
            coords[a] = 0;
        }
    }
    Ok(out)
}

/// RK4 stage states and momenta retained for the adjoint pass.
pub(crate) struct StepStages {
    pub u2: VectorField,
    pub u3: VectorField,
    pub u4: VectorField,
    pub m1: VectorField,
    pub m2: VectorField,
    pub m3: VectorField,
    pub m4: VectorField,
}

/// One RK4 step of EPDiff; optionally records stage data.
pub(crate) fn rk4_step(
    ops: &BandedOps,
    v: &VectorField,
    dt: f64,
    record: bool,
) -> Result<(VectorField, Option<StepStages>)> {
    let m1 = ops.apply_l(v);
    let k1 = rhs_with_momentum(ops, v, &m1)?;
    let mut u2 = v.clone();
    u2.axpy(0.5 * dt, &k1);
    let m2 = ops.apply_l(&u2);
    let k2 = rhs_with_momentum(ops, &u2, &m2)?;
    let mut u3 = v.clone();
    u3.axpy(0.5 * dt, &k2);
    let m3 = ops.apply_l(&u3);
    let k3 = rhs_with_momentum(ops, &u3, &m3)?;
    let mut u4 = v.clone();
    u4.axpy(dt, &k3);
    let m4 = ops.apply_l(&u4);
    let k4 = rhs_with_momentum(ops, &u4, &m4)?;
    let mut next = v.clone();
    next.axpy(dt / 6.0, &k1);
    next.axpy(dt / 3.0, &k2);
    next.axpy(dt / 3.0, &k3);
    next.axpy(dt / 6.0, &k4);
    let stages = record.then(|| StepStages {
        u2,
        u3,
        u4,
        m1,
        m2,
        m3,
        m4,
    });
    Ok((next, stages))
}

fn euler_step(ops: &BandedOps, v: &VectorField, dt: f64) -> Result<VectorField> {
    let m = ops.apply_l(v);
    let k = rhs_with_momentum(ops, v, &m)?;
    let mut next = v.clone();
    next.axpy(dt, &k);
    Ok(next)
}

/// Integrates the geodesic from `v0` over unit time and accumulates the
/// inverse deformation.
pub fn shoot(op: &SpectralOperator, v0: &VectorField, params: &ShootParams) -> Result<GeodesicPath> {
    if v0.dims() != op.dims() {
        return Err(Error::DimensionMismatch(format!(
            "shoot: field is {} but operator is {}",
            v0.dims(),
            op.dims()
        )));
    }
    if params.n_steps == 0 {
        return Err(Error::InvalidParameter("shoot: n_steps must be >= 1".into()));
    }
    check_grid_for_shooting(op.dims())?;
    let ops = BandedOps::new(op, params.band)?;
    let dt = 1.0 / params.n_steps as f64;
    let mut velocities = Vec::with_capacity(params.n_steps + 1);
    let mut v = v0.clone();
    let mut psi = VectorField::zeros(op.dims());
    velocities.push(v.clone());
    for step in 0..params.n_steps {
        if !v.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: "velocity became non-finite".into(),
            });
        }
        psi = semi_lagrangian_step(&psi, &v, dt)?;
        v = match params.scheme {
            TimeScheme::Rk4 => rk4_step(&ops, &v, dt, false)?.0,
            TimeScheme::Euler => euler_step(&ops, &v, dt)?,
        };
        velocities.push(v.clone());
    }
    if !v.is_finite() {
        return Err(Error::Divergence {
            step: params.n_steps,
            detail: "velocity became non-finite".into(),
        });
    }
    Ok(GeodesicPath {
        velocities,
        phi_inv: DeformationField::from_displacement(psi),
        dt,
    })
}

/// Shooting needs central differences, so every axis must have size >= 3.
pub(crate) fn check_grid_for_shooting(dims: Dims) -> Result<()> {
    for a in 0..dims.rank() {
        if dims.size(a) < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid {dims} is too small for shooting (needs size >= 3 per axis)"
            )));
        }
    }
    Ok(())
}
