//! Evaluation metrics: Dice overlap, mask propagation, Jacobian determinant
//! statistics, and PSNR.

use crate::error::{Error, Result};
use crate::grid::{self, DeformationField, Dims, ScalarField};

/// Binary mask on a grid, one byte (0 or 1) per voxel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    dims: Dims,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(dims: Dims, data: Vec<u8>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask: {} values for a {} grid",
                data.len(),
                dims
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter(
                "mask values must be 0 or 1".into(),
            ));
        }
        Ok(BinaryMask { dims, data })
    }

    /// Thresholds a field: voxels with `value >= threshold` become 1.
    pub fn from_threshold(field: &ScalarField, threshold: f64) -> Self {
        BinaryMask {
            dims: field.dims(),
            data: field
                .data()
                .iter()
                .map(|&v| u8::from(v >= threshold))
                .collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// 0.0/1.0 copy, for interpolation.
    pub fn to_scalar(&self) -> ScalarField {
        ScalarField::new(self.dims, self.data.iter().map(|&v| v as f64).collect())
            .expect("mask values are finite")
    }

    /// Foreground voxels with at least one face neighbour that is background
    /// (voxels beyond the grid edge count as background).
    pub fn boundary(&self) -> BinaryMask {
        let rank = self.dims.rank();
        let strides = self.dims.strides();
        let mut out = vec![0u8; self.data.len()];
        let mut coords = [0usize; 3];
        for i in 0..self.data.len() {
            if self.data[i] == 1 {
                let mut edge = false;
                'axes: for a in 0..rank {
                    for dir in [-1i64, 1] {
                        let c = coords[a] as i64 + dir;
                        if c < 0 || c >= self.dims.size(a) as i64 {
                            edge = true;
                            break 'axes;
                        }
                        let j = (i as i64 + dir * strides[a] as i64) as usize;
                        if self.data[j] == 0 {
                            edge = true;
                            break 'axes;
                        }
                    }
                }
                out[i] = u8::from(edge);
            }
            for a in (0..rank).rev() {
                coords[a] += 1;
                if coords[a] < self.dims.size(a) {
                    break;
                }
                coords[a] = 0;
            }
        }
        BinaryMask {
            dims: self.dims,
            data: out,
        }
    }
}

/// Dice overlap `2 |A and B| / (|A| + |B|)`; both masks empty is an error.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "dice: {} vs {}",
            a.dims(),
            b.dims()
        )));
    }
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += (x & y) as usize;
        total += (x + y) as usize;
    }
    if total == 0 {
        return Err(Error::EmptyMasks);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Warps a mask through `phi` (interpolating its indicator) and rethresholds
/// at 0.5.
pub fn propagate_mask(mask: &BinaryMask, phi: &DeformationField) -> Result<BinaryMask> {
    let warped = grid::warp(&mask.to_scalar(), phi)?;
    Ok(BinaryMask::from_threshold(&warped, 0.5))
}

/// Jacobian determinant summary of a deformation `phi(x) = x + u(x)`.
#[derive(Clone, Copy, Debug)]
pub struct JacobianStats {
    pub min_det: f64,
    pub max_det: f64,
    /// Fraction of voxels with `det <= 0` (folding).
    pub fraction_non_positive: f64,
}

/// Computes `det(I + Du)` per voxel with periodic central differences.
pub fn jacobian_det_stats(phi: &DeformationField) -> Result<JacobianStats> {
    let u = phi.displacement();
    let dims = u.dims();
    let rank = dims.rank();
    let jac = grid::jacobian(u)?;
    let n = dims.len();
    let mut min_det = f64::INFINITY;
    let mut max_det = f64::NEG_INFINITY;
    let mut bad = 0usize;
    for x in 0..n {
        let det = match rank {
            2 => {
                let a = 1.0 + jac.entry(0, 0)[x];
                let b = jac.entry(0, 1)[x];
                let c = jac.entry(1, 0)[x];
                let d = 1.0 + jac.entry(1, 1)[x];
                a * d - b * c
            }
            _ => {
                let m = |i: usize, j: usize| {
                    jac.entry(i, j)[x] + if i == j { 1.0 } else { 0.0 }
                };
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                    - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
        };
        min_det = min_det.min(det);
        max_det = max_det.max(det);
        if det <= 0.0 {
            bad += 1;
        }
    }
    Ok(JacobianStats {
        min_det,
        max_det,
        fraction_non_positive: bad as f64 / n as f64,
    })
}

/// Peak signal-to-noise ratio of `x` against `reference`, using the
/// reference's value range as the peak.  Capped at 99 dB (also the value
/// reported for an exact match); a constant reference is an error.
pub fn psnr(x: &ScalarField, reference: &ScalarField) -> Result<f64> {
    if x.dims() != reference.dims() {
        return Err(Error::DimensionMismatch(format!(
            "psnr: {} vs {}",
            x.dims(),
            reference.dims()
        )));
    }
    let (lo, hi) = reference.min_max();
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::InvalidParameter(
            "psnr: reference field is constant".into(),
        ));
    }
    let mse = grid::ssd(x, reference)? / x.dims().len() as f64;
    if mse == 0.0 {
        return Ok(99.0);
    }
    Ok((10.0 * (range * range / mse).log10()).min(99.0))
}
