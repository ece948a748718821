//! Dense fields on regular 2-D/3-D grids.
//!
//! Grids are row-major with the last axis fastest.  Coordinates are in voxel
//! units: the voxel with index `(i0, i1)` sits at position `(i0, i1)`.
//! Interpolation is multilinear with coordinates clamped to the valid range
//! `[0, n-1]` per axis, so samples never read out of bounds and warps of
//! bounded images stay bounded.  Finite differences (`central_diff`,
//! `gradient_central`, `jacobian`, `divergence`) use periodic wrap-around,
//! matching the spectral operators in [`crate::spectral`].

use crate::error::{Error, Result};

/// Grid shape: rank 2 or 3 plus per-axis sizes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Dims {
    sizes: [usize; 3],
    rank: usize,
}

impl Dims {
    pub fn d2(n0: usize, n1: usize) -> Self {
        Dims {
            sizes: [n0, n1, 1],
            rank: 2,
        }
    }

    pub fn d3(n0: usize, n1: usize, n2: usize) -> Self {
        Dims {
            sizes: [n0, n1, n2],
            rank: 3,
        }
    }

    /// Builds from a slice of per-axis sizes (length 2 or 3, all nonzero).
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.len() != 2 && sizes.len() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "grid rank must be 2 or 3, got {}",
                sizes.len()
            )));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter(format!(
                "grid sizes must be nonzero, got {sizes:?}"
            )));
        }
        let mut s = [1usize; 3];
        s[..sizes.len()].copy_from_slice(sizes);
        Ok(Dims {
            sizes: s,
            rank: sizes.len(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Per-axis sizes, length [`Dims::rank`].
    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.rank]
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.sizes[..self.rank].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides, length [`Dims::rank`].
    pub fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        let mut acc = 1;
        for a in (0..self.rank).rev() {
            s[a] = acc;
            acc *= self.sizes[a];
        }
        s
    }

    /// Splits the index space around `axis` into (outer, length, inner) so
    /// that linear index = (outer * length + position) * inner + inner_index.
    pub(crate) fn split_axis(&self, axis: usize) -> (usize, usize, usize) {
        let outer: usize = self.sizes[..axis].iter().product();
        let inner: usize = self.sizes[axis + 1..self.rank].iter().product();
        (outer, self.sizes[axis], inner)
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = self.sizes();
        write!(f, "{}", s[0])?;
        for n in &s[1..] {
            write!(f, "x{n}")?;
        }
        Ok(())
    }
}

fn check_same_dims(a: Dims, b: Dims, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Scalar-valued field, one `f64` per voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    dims: Dims,
    data: Vec<f64>,
}

impl ScalarField {
    /// Wraps raw data; the length must match `dims.len()` and every value
    /// must be finite.
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "scalar field: {} values for a {} grid",
                data.len(),
                dims
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("scalar field construction".into()));
        }
        Ok(ScalarField { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        ScalarField {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn constant(dims: Dims, value: f64) -> Self {
        ScalarField {
            dims,
            data: vec![value; dims.len()],
        }
    }

    /// Fills from a function of the integer coordinate (length = rank).
    pub fn from_fn(dims: Dims, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        let mut coords = [0usize; 3];
        let rank = dims.rank();
        for _ in 0..dims.len() {
            data.push(f(&coords[..rank]));
            for a in (0..rank).rev() {
                coords[a] += 1;
                if coords[a] < dims.size(a) {
                    break;
                }
                coords[a] = 0;
            }
        }
        ScalarField { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, coords: &[usize]) -> f64 {
        let strides = self.dims.strides();
        let mut idx = 0;
        for (a, &c) in coords.iter().enumerate() {
            debug_assert!(c < self.dims.size(a));
            idx += c * strides[a];
        }
        self.data[idx]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the value vector.
    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Vector-valued field with `rank` components, each stored as a full grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    dims: Dims,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(dims: Dims, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != dims.rank() {
            return Err(Error::DimensionMismatch(format!(
                "vector field: {} components for rank {}",
                comps.len(),
                dims.rank()
            )));
        }
        for (a, c) in comps.iter().enumerate() {
            if c.len() != dims.len() {
                return Err(Error::DimensionMismatch(format!(
                    "vector field component {a}: {} values for a {} grid",
                    c.len(),
                    dims
                )));
            }
            if !c.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("vector field component {a}")));
            }
        }
        Ok(VectorField { dims, comps })
    }

    pub fn zeros(dims: Dims) -> Self {
        VectorField {
            dims,
            comps: vec![vec![0.0; dims.len()]; dims.rank()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.rank()
    }

    pub fn comp(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn comp_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.comps[axis]
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Componentwise `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &VectorField) {
        debug_assert_eq!(self.dims, x.dims);
        for (c, xc) in self.comps.iter_mut().zip(&x.comps) {
            for (v, &w) in c.iter_mut().zip(xc) {
                *v += a * w;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            for v in c.iter_mut() {
                *v *= a;
            }
        }
    }

    /// Sum over components and voxels of `self * other`.
    pub fn dot(&self, other: &VectorField) -> f64 {
        debug_assert_eq!(self.dims, other.dims);
        let mut acc = 0.0;
        for (c, oc) in self.comps.iter().zip(&other.comps) {
            for (&v, &w) in c.iter().zip(oc) {
                acc += v * w;
            }
        }
        acc
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for c in &self.comps {
            for &v in c {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }
}

/// Deformation map `phi(x) = x + u(x)` stored by its displacement `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    displacement: VectorField,
}

impl DeformationField {
    pub fn identity(dims: Dims) -> Self {
        DeformationField {
            displacement: VectorField::zeros(dims),
        }
    }

    pub fn from_displacement(displacement: VectorField) -> Self {
        DeformationField { displacement }
    }

    pub fn dims(&self) -> Dims {
        self.displacement.dims()
    }

    pub fn displacement(&self) -> &VectorField {
        &self.displacement
    }

    pub fn into_displacement(self) -> VectorField {
        self.displacement
    }
}

/// All first partials of a vector field: `entry(i, j) = d v_i / d x_j`.
#[derive(Clone, Debug)]
pub struct JacobianField {
    dims: Dims,
    entries: Vec<Vec<f64>>,
}

impl JacobianField {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.dims.rank() + j]
    }
}

/// Interpolation stencil at one sample point: corner indices, weights, and
/// clamp-masked weight derivatives per axis.  `count` corners are valid.
#[derive(Clone, Copy)]
pub(crate) struct Stencil {
    pub idx: [usize; 8],
    pub w: [f64; 8],
    pub dw: [[f64; 8]; 3],
    pub count: usize,
}

#[inline]
fn clamp_axis(x: f64, n: usize) -> (usize, f64, f64) {
    // (base, frac, dmask): base in [0, n-2] (0 if n == 1), frac in [0, 1],
    // dmask = 1 when the raw coordinate lies in [0, n-1] so the sample moves
    // with the point, 0 in the clamped flat region outside.
    if n == 1 {
        return (0, 0.0, 0.0);
    }
    let max = (n - 1) as f64;
    let dmask = if (0.0..=max).contains(&x) { 1.0 } else { 0.0 };
    let xc = x.clamp(0.0, max);
    let mut b = xc as usize;
    if b > n - 2 {
        b = n - 2;
    }
    (b, xc - b as f64, dmask)
}

pub(crate) fn stencil(dims: Dims, point: &[f64]) -> Stencil {
    let rank = dims.rank();
    debug_assert_eq!(point.len(), rank);
    let strides = dims.strides();
    let mut base = [0usize; 3];
    let mut frac = [0f64; 3];
    let mut dmask = [0f64; 3];
    let mut step = [0usize; 3];
    let mut origin = 0usize;
    for a in 0..rank {
        let n = dims.size(a);
        let (b, f, m) = clamp_axis(point[a], n);
        base[a] = b;
        frac[a] = f;
        dmask[a] = m;
        step[a] = if n == 1 { 0 } else { strides[a] };
        origin += b * strides[a];
    }
    let count = 1usize << rank;
    let mut st = Stencil {
        idx: [0; 8],
        w: [0.0; 8],
        dw: [[0.0; 8]; 3],
        count,
    };
    for k in 0..count {
        let mut idx = origin;
        let mut w = 1.0;
        for a in 0..rank {
            let hi = (k >> a) & 1 == 1;
            if hi {
                idx += step[a];
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        st.idx[k] = idx;
        st.w[k] = w;
        for a in 0..rank {
            let mut d = dmask[a];
            for b in 0..rank {
                let hi = (k >> b) & 1 == 1;
                if b == a {
                    if !hi {
                        d = -d;
                    }
                } else if hi {
                    d *= frac[b];
                } else {
                    d *= 1.0 - frac[b];
                }
            }
            st.dw[a][k] = d;
        }
    }
    st
}

/// Multilinear sample of `field` at a fractional `point` (length = rank),
/// with coordinates clamped to the grid.
pub fn interpolate(field: &ScalarField, point: &[f64]) -> f64 {
    let st = stencil(field.dims(), point);
    let d = field.data();
    let mut v = 0.0;
    for k in 0..st.count {
        v += st.w[k] * d[st.idx[k]];
    }
    v
}

/// Sample plus the derivative with respect to the raw point coordinates.
/// The derivative is zero along axes where the point is clamped.
pub(crate) fn interpolate_with_grad(field: &ScalarField, point: &[f64]) -> (f64, [f64; 3]) {
    let st = stencil(field.dims(), point);
    let d = field.data();
    let mut v = 0.0;
    let mut g = [0.0f64; 3];
    for k in 0..st.count {
        let c = d[st.idx[k]];
        v += st.w[k] * c;
        for a in 0..field.dims().rank() {
            g[a] += st.dw[a][k] * c;
        }
    }
    (v, g)
}

/// Pulls `field` back through `phi`: `out(x) = field(x + u(x))`.
pub fn warp(field: &ScalarField, phi: &DeformationField) -> Result<ScalarField> {
    check_same_dims(field.dims(), phi.dims(), "warp")?;
    Ok(warp_displaced(field, phi.displacement()))
}

/// Warp kernel on a raw displacement; dims already checked by callers.
pub(crate) fn warp_displaced(field: &ScalarField, u: &VectorField) -> ScalarField {
    let dims = field.dims();
    let rank = dims.rank();
    let mut out = Vec::with_capacity(dims.len());
    let mut coords = [0usize; 3];
    let mut point = [0f64; 3];
    let d = field.data();
    for i in 0..dims.len() {
        for a in 0..rank {
            point[a] = coords[a] as f64 + u.comp(a)[i];
        }
        let st = stencil(dims, &point[..rank]);
        let mut v = 0.0;
        for k in 0..st.count {
            v += st.w[k] * d[st.idx[k]];
        }
        out.push(v);
        for a in (0..rank).rev() {
            coords[a] += 1;
            if coords[a] < dims.size(a) {
                break;
            }
            coords[a] = 0;
        }
    }
    ScalarField { dims, data: out }
}

/// Sum of squared differences, accumulated in index order.
pub fn ssd(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    check_same_dims(a.dims(), b.dims(), "ssd")?;
    let mut acc = 0.0;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc)
}

/// Periodic central difference along `axis`; needs size >= 3 there.
pub fn central_diff(field: &ScalarField, axis: usize) -> Result<ScalarField> {
    let dims = field.dims();
    if axis >= dims.rank() {
        return Err(Error::InvalidParameter(format!(
            "central_diff axis {axis} out of range for rank {}",
            dims.rank()
        )));
    }
    if dims.size(axis) < 3 {
        return Err(Error::InvalidParameter(format!(
            "central_diff along axis {axis} needs size >= 3, got {}",
            dims.size(axis)
        )));
    }
    let mut out = vec![0.0; dims.len()];
    central_diff_into(field.data(), dims, axis, &mut out);
    Ok(ScalarField { dims, data: out })
}

/// Core central-difference kernel writing into a caller buffer.
pub(crate) fn central_diff_into(data: &[f64], dims: Dims, axis: usize, out: &mut [f64]) {
    let (outer, l, inner) = dims.split_axis(axis);
    for o in 0..outer {
        let base = o * l * inner;
        for i in 0..l {
            let prev = if i == 0 { l - 1 } else { i - 1 };
            let next = if i + 1 == l { 0 } else { i + 1 };
            let row = base + i * inner;
            let rp = base + prev * inner;
            let rn = base + next * inner;
            for j in 0..inner {
                out[row + j] = 0.5 * (data[rn + j] - data[rp + j]);
            }
        }
    }
}

/// Periodic central-difference gradient; every axis needs size >= 3.
pub fn gradient_central(field: &ScalarField) -> Result<VectorField> {
    let dims = field.dims();
    let mut comps = Vec::with_capacity(dims.rank());
    for a in 0..dims.rank() {
        comps.push(central_diff(field, a)?.data);
    }
    Ok(VectorField { dims, comps })
}

/// Jacobian of a vector field via periodic central differences.
pub fn jacobian(v: &VectorField) -> Result<JacobianField> {
    let dims = v.dims();
    let rank = dims.rank();
    for a in 0..rank {
        if dims.size(a) < 3 {
            return Err(Error::InvalidParameter(format!(
                "jacobian needs size >= 3 on every axis, got {dims}"
            )));
        }
    }
    let mut entries = Vec::with_capacity(rank * rank);
    for i in 0..rank {
        for j in 0..rank {
            let mut out = vec![0.0; dims.len()];
            central_diff_into(v.comp(i), dims, j, &mut out);
            entries.push(out);
        }
    }
    Ok(JacobianField { dims, entries })
}

/// Divergence of a vector field via periodic central differences.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let dims = v.dims();
    let rank = dims.rank();
    for a in 0..rank {
        if dims.size(a) < 3 {
            return Err(Error::InvalidParameter(format!(
                "divergence needs size >= 3 on every axis, got {dims}"
            )));
        }
    }
    let mut out = vec![0.0; dims.len()];
    let mut tmp = vec![0.0; dims.len()];
    for a in 0..rank {
        central_diff_into(v.comp(a), dims, a, &mut tmp);
        for (o, &t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }
    Ok(ScalarField { dims, data: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_4x4() -> ScalarField {
        // Fixed pseudo-random values, row-major.
        let data = vec![
            0.12, 0.81, 0.43, 0.97, 0.55, 0.23, 0.66, 0.08, 0.31, 0.74, 0.29, 0.62, 0.90, 0.17,
            0.48, 0.35,
        ];
        ScalarField::new(Dims::d2(4, 4), data).unwrap()
    }

    #[test]
    fn dims_strides_and_len() {
        let d = Dims::d3(2, 3, 4);
        assert_eq!(d.len(), 24);
        assert_eq!(d.strides()[..3], [12, 4, 1]);
        let d2 = Dims::d2(5, 7);
        assert_eq!(d2.strides()[..2], [7, 1]);
        assert_eq!(format!("{d2}"), "5x7");
    }

    #[test]
    fn dims_from_sizes_rejects_bad_shapes() {
        assert!(Dims::from_sizes(&[4]).is_err());
        assert!(Dims::from_sizes(&[4, 4, 4, 4]).is_err());
        assert!(Dims::from_sizes(&[4, 0]).is_err());
        assert_eq!(Dims::from_sizes(&[4, 5]).unwrap(), Dims::d2(4, 5));
    }

    #[test]
    fn scalar_field_rejects_non_finite_and_bad_len() {
        let d = Dims::d2(2, 2);
        assert!(ScalarField::new(d, vec![0.0; 3]).is_err());
        assert!(ScalarField::new(d, vec![0.0, 1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn interpolate_matches_hand_bilinear() {
        // Bilinear at (0.25, 0.75) touches the four upper-left cells.
        let f = field_4x4();
        let d = f.data();
        let (fx, fy) = (0.25, 0.75);
        let expect = (1.0 - fx) * (1.0 - fy) * d[0]
            + (1.0 - fx) * fy * d[1]
            + fx * (1.0 - fy) * d[4]
            + fx * fy * d[5];
        let got = interpolate(&f, &[0.25, 0.75]);
        assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
    }

    #[test]
    fn interpolate_exact_on_lattice() {
        let f = field_4x4();
        for i in 0..4 {
            for j in 0..4 {
                let v = interpolate(&f, &[i as f64, j as f64]);
                assert_eq!(v, f.get(&[i, j]));
            }
        }
    }

    #[test]
    fn interpolate_clamps_out_of_range_points() {
        let f = field_4x4();
        assert_eq!(interpolate(&f, &[-3.7, 0.5]), interpolate(&f, &[0.0, 0.5]));
        assert_eq!(interpolate(&f, &[1e9, 3.0]), f.get(&[3, 3]));
        assert_eq!(
            interpolate(&f, &[-1.0, 1e9]),
            f.get(&[0, 3])
        );
    }

    #[test]
    fn trilinear_center_is_corner_mean() {
        let data: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let mean = data.iter().sum::<f64>() / 8.0;
        let f = ScalarField::new(Dims::d3(2, 2, 2), data).unwrap();
        let got = interpolate(&f, &[0.5, 0.5, 0.5]);
        assert!((got - mean).abs() < 1e-14);
    }

    #[test]
    fn interpolate_grad_matches_finite_differences() {
        let f = field_4x4();
        let p = [1.3, 2.6];
        let (_, g) = interpolate_with_grad(&f, &p);
        let eps = 1e-6;
        for a in 0..2 {
            let mut hi = p;
            let mut lo = p;
            hi[a] += eps;
            lo[a] -= eps;
            let fd = (interpolate(&f, &hi) - interpolate(&f, &lo)) / (2.0 * eps);
            assert!((g[a] - fd).abs() < 1e-8, "axis {a}: {} vs {fd}", g[a]);
        }
    }

    #[test]
    fn interpolate_grad_is_zero_in_clamped_region() {
        let f = field_4x4();
        let (_, g) = interpolate_with_grad(&f, &[-2.0, 1.5]);
        assert_eq!(g[0], 0.0);
        assert!(g[1] != 0.0);
    }

    #[test]
    fn warp_identity_is_exact_copy() {
        let f = field_4x4();
        let id = DeformationField::identity(f.dims());
        let w = warp(&f, &id).unwrap();
        assert_eq!(w.data(), f.data());
    }

    #[test]
    fn warp_unit_shift_matches_index_shift() {
        // u = +1 along axis 1 everywhere: out(i, j) = f(i, min(j+1, 3)).
        let f = field_4x4();
        let dims = f.dims();
        let mut u = VectorField::zeros(dims);
        u.comp_mut(1).iter_mut().for_each(|v| *v = 1.0);
        let w = warp(&f, &DeformationField::from_displacement(u)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = f.get(&[i, (j + 1).min(3)]);
                assert_eq!(w.get(&[i, j]), expect, "at ({i}, {j})");
            }
        }
    }

    #[test]
    fn warp_requires_matching_dims() {
        let f = field_4x4();
        let id = DeformationField::identity(Dims::d2(4, 5));
        assert!(matches!(warp(&f, &id), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn ssd_hand_values() {
        let d = Dims::d2(100, 100);
        let a = ScalarField::constant(d, 2.0);
        let b = ScalarField::constant(d, 1.0);
        assert_eq!(ssd(&a, &b).unwrap(), 10000.0);

        let d = Dims::d2(1, 2);
        let a = ScalarField::new(d, vec![1.0, 2.0]).unwrap();
        let b = ScalarField::new(d, vec![2.0, 4.0]).unwrap();
        assert_eq!(ssd(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn central_diff_exact_on_single_mode() {
        // For f(i) = sin(2*pi*i/n), the periodic central difference equals
        // cos(2*pi*i/n) * sin(2*pi/n) exactly (trig identity, no truncation).
        let n = 16;
        let dims = Dims::d2(n, 3);
        let f = ScalarField::from_fn(dims, |c| (2.0 * std::f64::consts::PI * c[0] as f64 / n as f64).sin());
        let g = central_diff(&f, 0).unwrap();
        let k = (2.0 * std::f64::consts::PI / n as f64).sin();
        for i in 0..n {
            for j in 0..3 {
                let expect = (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos() * k;
                assert!((g.get(&[i, j]) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn central_diff_wraps_periodically() {
        let dims = Dims::d2(3, 3);
        let f = ScalarField::from_fn(dims, |c| (c[0] * 3 + c[1]) as f64);
        let g = central_diff(&f, 0).unwrap();
        // Row 0: (row1 - row2) / 2 = (3 - 6) / 2.
        assert_eq!(g.get(&[0, 0]), -1.5);
        // Row 1 is interior: (row2 - row0) / 2 = 3.
        assert_eq!(g.get(&[1, 1]), 3.0);
    }

    #[test]
    fn central_diff_needs_size_three() {
        let f = ScalarField::zeros(Dims::d2(2, 5));
        assert!(central_diff(&f, 0).is_err());
        assert!(central_diff(&f, 1).is_ok());
        assert!(central_diff(&f, 2).is_err());
    }

    #[test]
    fn divergence_ignores_cross_terms() {
        // v0 depends only on x1, v1 = 0: divergence is identically zero.
        let n = 8;
        let dims = Dims::d2(n, n);
        let mut v = VectorField::zeros(dims);
        let s = ScalarField::from_fn(dims, |c| (2.0 * std::f64::consts::PI * c[1] as f64 / n as f64).sin());
        v.comp_mut(0).copy_from_slice(s.data());
        let div = divergence(&v).unwrap();
        for &x in div.data() {
            assert_eq!(x, 0.0);
        }
        // The corresponding Jacobian entry (0, 1) carries the derivative.
        let jac = jacobian(&v).unwrap();
        let k = (2.0 * std::f64::consts::PI / n as f64).sin();
        let expect = (2.0 * std::f64::consts::PI / n as f64).cos() * k;
        let idx = 1; // voxel (0, 1)
        assert!((jac.entry(0, 1)[idx] - expect).abs() < 1e-14);
    }

    #[test]
    fn vector_field_axpy_dot_norms() {
        let dims = Dims::d2(2, 2);
        let mut a = VectorField::zeros(dims);
        a.comp_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let mut b = VectorField::zeros(dims);
        b.comp_mut(0).copy_from_slice(&[1.0, 1.0, 1.0, 1.0]);
        b.comp_mut(1).copy_from_slice(&[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(a.dot(&b), 10.0);
        a.axpy(2.0, &b);
        assert_eq!(a.comp(0), &[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.comp(1), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(a.max_abs(), 6.0);
        let mut c = VectorField::zeros(dims);
        c.comp_mut(1).copy_from_slice(&[3.0, 0.0, 0.0, 4.0]);
        assert_eq!(c.norm_l2(), 5.0);
    }
}
