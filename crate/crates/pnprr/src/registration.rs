//! Geodesic-shooting registration: energy, exact gradient, optimiser.
//!
//! The objective over the initial velocity is
//!
//! ```text
//! E(v0) = (1 / sigma^2) * ssd(S o phi_inv, T)  +  (L v0, v0)
//! ```
//!
//! where `phi_inv` is produced by shooting `v0` through EPDiff (RK4) while
//! transporting the inverse map semi-Lagrangianly.  The gradient is the exact
//! adjoint of that discrete forward computation: every stage of every RK4
//! step, every semi-Lagrangian interpolation, and the final warp are
//! differentiated in reverse, so a finite-difference check of the directional
//! derivative agrees to roundoff-level tolerances rather than
//! discretisation-level ones.
//!
//! Optimisation is gradient descent with a backtracking Armijo line search.
//! The first trial step is scaled so the largest voxel displacement of the
//! update is `step_init`; afterwards the accepted step carries over, grown
//! slightly on success.  A trial whose shooting diverges counts as a rejected
//! step.  Thirty rejected halvings in one iteration abort with
//! [`Error::Stall`].

use crate::epdiff::{self, BandedOps, StepStages};
use crate::error::{Error, Result};
use crate::grid::{self, DeformationField, ScalarField, VectorField};
use crate::spectral::SpectralOperator;

/// Armijo sufficient-decrease constant.
const ARMIJO_C1: f64 = 1e-4;
/// Step growth factor after an accepted iteration.
const STEP_GROWTH: f64 = 1.2;
/// Line-search halvings allowed per iteration before declaring a stall.
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug)]
pub struct RegistrationParams {
    /// Data-term noise scale; the data weight is `1 / sigma^2`.
    pub sigma: f64,
    /// Metric parameters of `L = -(alpha * lap + id)^c`.
    pub alpha: f64,
    pub c: f64,
    /// EPDiff time steps over unit time.
    pub n_steps: usize,
    /// Velocity band, or `None` for the full space.
    pub band: Option<usize>,
    /// Maximum accepted descent iterations.
    pub max_iters: usize,
    /// Largest voxel displacement of the first trial update.
    pub step_init: f64,
    /// Stop when the max-norm of the preconditioned gradient (the descent
    /// direction) falls below this.
    pub grad_tol: f64,
    /// Stop when the relative energy decrease of a step falls below this.
    pub energy_tol: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        RegistrationParams {
            sigma: 0.015,
            alpha: 1.5,
            c: 3.0,
            n_steps: 10,
            band: Some(16),
            max_iters: 60,
            step_init: 1.0,
            grad_tol: 1e-3,
            energy_tol: 1e-6,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("c", self.c),
            ("step_init", self.step_init),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "registration {name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter(
                "registration n_steps must be >= 1".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "registration max_iters must be >= 1".into(),
            ));
        }
        for (name, v) in [("grad_tol", self.grad_tol), ("energy_tol", self.energy_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "registration {name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn data_weight(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }
}

#[derive(Clone, Debug)]
pub struct RegistrationResult {
    /// Optimised initial velocity (in band when a band is set).
    pub v0: VectorField,
    /// Inverse deformation of the optimum.
    pub phi_inv: DeformationField,
    /// Energy at the start plus after every accepted step; non-increasing.
    pub energy_trace: Vec<f64>,
    /// True when a tolerance fired before `max_iters`.
    pub converged: bool,
    /// Accepted descent steps taken.
    pub iterations: usize,
}

/// Everything retained from one forward evaluation.
struct Forward {
    energy: f64,
    warped: ScalarField,
    /// Velocities `v_0 .. v_n`; only `v_0` when not recording.
    vs: Vec<VectorField>,
    /// Inverse-map displacements `psi_0 .. psi_n`; only the final one when
    /// not recording.
    psis: Vec<VectorField>,
    stages: Vec<StepStages>,
}

impl Forward {
    fn final_psi(&self) -> &VectorField {
        self.psis.last().expect("forward keeps at least one psi")
    }
}

fn forward(
    ops: &BandedOps,
    v0: &VectorField,
    source: &ScalarField,
    target: &ScalarField,
    params: &RegistrationParams,
    record: bool,
) -> Result<Forward> {
    let dims = v0.dims();
    let n_steps = params.n_steps;
    let dt = 1.0 / n_steps as f64;
    let mut vs = Vec::with_capacity(if record { n_steps + 1 } else { 1 });
    let mut psis = Vec::with_capacity(if record { n_steps + 1 } else { 1 });
    let mut stages = Vec::with_capacity(if record { n_steps } else { 0 });
    let mut v = v0.clone();
    let mut psi = VectorField::zeros(dims);
    if record {
        vs.push(v.clone());
        psis.push(psi.clone());
    }
    for step in 0..n_steps {
        if !v.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: "velocity became non-finite".into(),
            });
        }
        psi = epdiff::semi_lagrangian_step(&psi, &v, dt)?;
        let (next, st) = epdiff::rk4_step(ops, &v, dt, record)?;
        v = next;
        if record {
            vs.push(v.clone());
            psis.push(psi.clone());
            stages.push(st.expect("recording produces stages"));
        }
    }
    if !record {
        vs.push(v0.clone());
        psis.push(psi.clone());
    }
    let warped = grid::warp_displaced(source, &psi);
    let data = params.data_weight() * grid::ssd(&warped, target)?;
    let metric = ops.apply_l(v0).dot(v0);
    let energy = data + metric;
    if !energy.is_finite() {
        return Err(Error::NonFinite("registration energy".into()));
    }
    Ok(Forward {
        energy,
        warped,
        vs,
        psis,
        stages,
    })
}

/// Vector-Jacobian product of the EPDiff right-hand side at state `u` with
/// momentum `m = L u`, applied to cotangent `cot`.
fn rhs_vjp(ops: &BandedOps, u: &VectorField, m: &VectorField, cot: &VectorField) -> Result<VectorField> {
    let dims = u.dims();
    let rank = dims.rank();
    let n = dims.len();
    let mut q = ops.apply_k(cot);
    q.scale(-1.0);
    let dv = grid::jacobian(u)?;
    let dm = grid::jacobian(m)?;
    let mut divv = vec![0.0; n];
    for a in 0..rank {
        for (d, &x) in divv.iter_mut().zip(dv.entry(a, a)) {
            *d += x;
        }
    }
    let mut vbar = VectorField::zeros(dims);
    let mut mbar = VectorField::zeros(dims);
    let mut prod = vec![0.0; n];
    let mut diff = vec![0.0; n];
    // Transport term (Dv)^T m: velocity path -d_i(q_i m_j), momentum path
    // q_i d_i v_j.
    for j in 0..rank {
        for i in 0..rank {
            let qi = q.comp(i);
            let mj = m.comp(j);
            for x in 0..n {
                prod[x] = qi[x] * mj[x];
            }
            grid::central_diff_into(&prod, dims, i, &mut diff);
            let vj = vbar.comp_mut(j);
            for x in 0..n {
                vj[x] -= diff[x];
            }
        }
        let mj = mbar.comp_mut(j);
        for i in 0..rank {
            let qi = q.comp(i);
            let dv_ji = dv.entry(j, i);
            for x in 0..n {
                mj[x] += qi[x] * dv_ji[x];
            }
        }
    }
    // Convection term Dm v: velocity path q_i d_j m_i, momentum path
    // -d_j(q_i u_j).
    for j in 0..rank {
        let vj = vbar.comp_mut(j);
        for i in 0..rank {
            let qi = q.comp(i);
            let dm_ij = dm.entry(i, j);
            for x in 0..n {
                vj[x] += qi[x] * dm_ij[x];
            }
        }
    }
    for i in 0..rank {
        for j in 0..rank {
            let qi = q.comp(i);
            let uj = u.comp(j);
            for x in 0..n {
                prod[x] = qi[x] * uj[x];
            }
            grid::central_diff_into(&prod, dims, j, &mut diff);
            let mi = mbar.comp_mut(i);
            for x in 0..n {
                mi[x] -= diff[x];
            }
        }
    }
    // Compression term m div v: velocity path -d_j(sum_i q_i m_i), momentum
    // path q_i div u.
    for x in 0..n {
        prod[x] = 0.0;
    }
    for i in 0..rank {
        let qi = q.comp(i);
        let mi = m.comp(i);
        for x in 0..n {
            prod[x] += qi[x] * mi[x];
        }
    }
    for j in 0..rank {
        grid::central_diff_into(&prod, dims, j, &mut diff);
        let vj = vbar.comp_mut(j);
        for x in 0..n {
            vj[x] -= diff[x];
        }
    }
    for i in 0..rank {
        let mi = mbar.comp_mut(i);
        let qi = q.comp(i);
        for x in 0..n {
            mi[x] += qi[x] * divv[x];
        }
    }
    // Close the m = L u dependency.
    vbar.axpy(1.0, &ops.apply_l(&mbar));
    Ok(vbar)
}

/// Adjoint of one RK4 step: accumulates into `acc` the pullback of `cot`
/// (the cotangent at `v_{t+1}`) onto `v_t`.
fn rk4_vjp(
    ops: &BandedOps,
    v_t: &VectorField,
    st: &StepStages,
    dt: f64,
    cot: &VectorField,
    acc: &mut VectorField,
) -> Result<()> {
    acc.axpy(1.0, cot);
    let mut k4bar = cot.clone();
    k4bar.scale(dt / 6.0);
    let u4bar = rhs_vjp(ops, &st.u4, &st.m4, &k4bar)?;
    acc.axpy(1.0, &u4bar);
    let mut k3bar = cot.clone();
    k3bar.scale(dt / 3.0);
    k3bar.axpy(dt, &u4bar);
    let u3bar = rhs_vjp(ops, &st.u3, &st.m3, &k3bar)?;
    acc.axpy(1.0, &u3bar);
    let mut k2bar = cot.clone();
    k2bar.scale(dt / 3.0);
    k2bar.axpy(dt / 2.0, &u3bar);
    let u2bar = rhs_vjp(ops, &st.u2, &st.m2, &k2bar)?;
    acc.axpy(1.0, &u2bar);
    let mut k1bar = cot.clone();
    k1bar.scale(dt / 6.0);
    k1bar.axpy(dt / 2.0, &u2bar);
    let u1bar = rhs_vjp(ops, v_t, &st.m1, &k1bar)?;
    acc.axpy(1.0, &u1bar);
    Ok(())
}

/// Adjoint of one semi-Lagrangian step.  Returns the cotangent on the
/// previous `psi` and adds the contribution on `v_t` into `vbar`.
fn sl_vjp(
    psi_t: &VectorField,
    v_t: &VectorField,
    nbar: &VectorField,
    dt: f64,
    vbar: &mut VectorField,
) -> VectorField {
    let dims = psi_t.dims();
    let rank = dims.rank();
    let n = dims.len();
    let mut psibar = VectorField::zeros(dims);
    let mut coords = [0usize; 3];
    let mut point = [0f64; 3];
    for i in 0..n {
        for a in 0..rank {
            point[a] = coords[a] as f64 - dt * v_t.comp(a)[i];
        }
        let st = grid::stencil(dims, &point[..rank]);
        let mut pbar = [0.0f64; 3];
        for c in 0..rank {
            let nb = nbar.comp(c)[i];
            let pc = psi_t.comp(c);
            let out = psibar.comp_mut(c);
            for k in 0..st.count {
                out[st.idx[k]] += st.w[k] * nb;
                let val = pc[st.idx[k]];
                for a in 0..rank {
                    pbar[a] += nb * st.dw[a][k] * val;
                }
            }
        }
        for a in 0..rank {
            vbar.comp_mut(a)[i] += -dt * pbar[a] - dt * nbar.comp(a)[i];
        }
        for a in (0..rank).rev() {
            coords[a] += 1;
            if coords[a] < dims.size(a) {
                break;
            }
            coords[a] = 0;
        }
    }
    psibar
}

/// Exact gradient from a recorded forward pass.
fn gradient_from_forward(
    ops: &BandedOps,
    fwd: &Forward,
    source: &ScalarField,
    target: &ScalarField,
    params: &RegistrationParams,
) -> Result<VectorField> {
    let dims = source.dims();
    let rank = dims.rank();
    let n = dims.len();
    let n_steps = params.n_steps;
    let dt = 1.0 / n_steps as f64;
    let w_data = params.data_weight();
    debug_assert_eq!(fwd.vs.len(), n_steps + 1);

    // Seed: pull the data-term residual back through the final warp.
    let psi_n = fwd.final_psi();
    let mut psibar = VectorField::zeros(dims);
    {
        let mut coords = [0usize; 3];
        let mut point = [0f64; 3];
        for i in 0..n {
            for a in 0..rank {
                point[a] = coords[a] as f64 + psi_n.comp(a)[i];
            }
            let r = 2.0 * w_data * (fwd.warped.data()[i] - target.data()[i]);
            if r != 0.0 {
                let (_, g) = grid::interpolate_with_grad(source, &point[..rank]);
                for a in 0..rank {
                    psibar.comp_mut(a)[i] = r * g[a];
                }
            }
            for a in (0..rank).rev() {
                coords[a] += 1;
                if coords[a] < dims.size(a) {
                    break;
                }
                coords[a] = 0;
            }
        }
    }

    // Walk the time steps backwards.
    let mut vbar_next = VectorField::zeros(dims);
    for step in (0..n_steps).rev() {
        let mut vbar_t = VectorField::zeros(dims);
        if !vbar_next.is_zero() {
            rk4_vjp(ops, &fwd.vs[step], &fwd.stages[step], dt, &vbar_next, &mut vbar_t)?;
        }
        psibar = sl_vjp(&fwd.psis[step], &fwd.vs[step], &psibar, dt, &mut vbar_t);
        vbar_next = vbar_t;
    }

    // Metric term and band restriction.
    let mut g = vbar_next;
    g.axpy(2.0, &ops.apply_l(&fwd.vs[0]));
    Ok(ops.project(&g))
}

fn check_inputs(
    op: &SpectralOperator,
    source: &ScalarField,
    target: &ScalarField,
) -> Result<()> {
    if source.dims() != op.dims() || target.dims() != op.dims() {
        return Err(Error::DimensionMismatch(format!(
            "registration: source {} / target {} vs operator {}",
            source.dims(),
            target.dims(),
            op.dims()
        )));
    }
    epdiff::check_grid_for_shooting(op.dims())
}

/// Registration energy at `v0` (no implicit band projection of `v0`).
pub fn energy(
    op: &SpectralOperator,
    v0: &VectorField,
    source: &ScalarField,
    target: &ScalarField,
    params: &RegistrationParams,
) -> Result<f64> {
    params.validate()?;
    check_inputs(op, source, target)?;
    if v0.dims() != op.dims() {
        return Err(Error::DimensionMismatch(format!(
            "registration: v0 {} vs operator {}",
            v0.dims(),
            op.dims()
        )));
    }
    let ops = BandedOps::new(op, params.band)?;
    Ok(forward(&ops, v0, source, target, params, false)?.energy)
}

/// Energy and its gradient restricted to the bandlimited space.
pub fn energy_and_gradient(
    op: &SpectralOperator,
    v0: &VectorField,
    source: &ScalarField,
    target: &ScalarField,
    params: &RegistrationParams,
) -> Result<(f64, VectorField)> {
    params.validate()?;
    check_inputs(op, source, target)?;
    if v0.dims() != op.dims() {
        return Err(Error::DimensionMismatch(format!(
            "registration: v0 {} vs operator {}",
            v0.dims(),
            op.dims()
        )));
    }
    let ops = BandedOps::new(op, params.band)?;
    let fwd = forward(&ops, v0, source, target, params, true)?;
    let g = gradient_from_forward(&ops, &fwd, source, target, params)?;
    Ok((fwd.energy, g))
}

/// Gradient of the registration energy at `v0`.
pub fn gradient(
    op: &SpectralOperator,
    v0: &VectorField,
    source: &ScalarField,
    target: &ScalarField,
    params: &RegistrationParams,
) -> Result<VectorField> {
    Ok(energy_and_gradient(op, v0, source, target, params)?.1)
}

/// Registers `source` onto `target`, building the metric operator from
/// `params`.
pub fn register(
    source: &ScalarField,
    target: &ScalarField,
    params: &RegistrationParams,
) -> Result<RegistrationResult> {
    let op = SpectralOperator::new(source.dims(), params.alpha, params.c)?;
    register_with(&op, source, target, params, None)
}

/// Registration with a caller-supplied operator (reused across calls) and an
/// optional warm-start velocity.  The operator's metric takes precedence
/// over `params.alpha` / `params.c`.
pub fn register_with(
    op: &SpectralOperator,
    source: &ScalarField,
    target: &ScalarField,
    params: &RegistrationParams,
    warm_start: Option<&VectorField>,
) -> Result<RegistrationResult> {
    params.validate()?;
    check_inputs(op, source, target)?;
    let ops = BandedOps::new(op, params.band)?;
    let mut v = match warm_start {
        Some(w) => {
            if w.dims() != op.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "registration: warm start {} vs operator {}",
                    w.dims(),
                    op.dims()
                )));
            }
            ops.project(w)
        }
        None => VectorField::zeros(op.dims()),
    };
    let mut fwd = forward(&ops, &v, source, target, params, true)?;
    let mut trace = vec![fwd.energy];
    let mut alpha = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..params.max_iters {
        let g = gradient_from_forward(&ops, &fwd, source, target, params)?;
        // Descend along the K-preconditioned (Sobolev) gradient: the plain
        // L2 gradient is stiff by a factor of L's symbol on high-frequency
        // modes, which cripples a single global step size. K is SPD, so the
        // directional derivative <g, d> = <g, Kg> stays strictly positive
        // away from stationary points and Armijo descent applies unchanged.
        let d = ops.apply_k(&g);
        let dmax = d.max_abs();
        if dmax <= params.grad_tol {
            converged = true;
            break;
        }
        if alpha.is_nan() {
            alpha = params.step_init / dmax;
        }
        let gd = g.dot(&d);
        let mut accepted = None;
        let mut halvings = 0;
        while halvings <= MAX_HALVINGS {
            let mut trial = v.clone();
            trial.axpy(-alpha, &d);
            match forward(&ops, &trial, source, target, params, true) {
                Ok(f) if f.energy <= fwd.energy - ARMIJO_C1 * alpha * gd => {
                    accepted = Some((trial, f));
                    break;
                }
                Ok(_) => {}
                Err(Error::Divergence { .. }) | Err(Error::NonFinite(_)) => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
            halvings += 1;
        }
        let Some((trial, f)) = accepted else {
            return Err(Error::Stall {
                iteration: it,
                halvings,
                energy_trace: trace,
            });
        };
        let e_prev = fwd.energy;
        v = trial;
        fwd = f;
        iterations = it + 1;
        trace.push(fwd.energy);
        alpha *= STEP_GROWTH;
        let rel = (e_prev - fwd.energy) / e_prev.abs().max(f64::MIN_POSITIVE);
        if rel <= params.energy_tol {
            converged = true;
            break;
        }
    }
    let phi_inv = DeformationField::from_displacement(fwd.psis.pop().expect("psi retained"));
    Ok(RegistrationResult {
        v0: v,
        phi_inv,
        energy_trace: trace,
        converged,
        iterations,
    })
}
