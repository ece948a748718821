//! Multidimensional FFT on top of per-axis `rustfft` plans.
//!
//! Plans are built once per grid shape and reused; transforms are unscaled
//! forward and 1/N-scaled inverse, so `inverse(forward(x)) == x` up to
//! roundoff.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Dims;

pub(crate) struct FftPlan {
    dims: Dims,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl FftPlan {
    pub fn new(dims: Dims) -> Self {
        let mut planner = FftPlanner::new();
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        for a in 0..dims.rank() {
            fwd.push(planner.plan_fft_forward(dims.size(a)));
            inv.push(planner.plan_fft_inverse(dims.size(a)));
        }
        FftPlan { dims, fwd, inv }
    }

    fn transform_axis(&self, buf: &mut [Complex64], axis: usize, forward: bool) {
        let plan = if forward {
            &self.fwd[axis]
        } else {
            &self.inv[axis]
        };
        let (outer, l, inner) = self.dims.split_axis(axis);
        let mut scratch = vec![Complex64::ZERO; plan.get_inplace_scratch_len()];
        if inner == 1 {
            // Lines along the last axis are contiguous.
            for o in 0..outer {
                plan.process_with_scratch(&mut buf[o * l..(o + 1) * l], &mut scratch);
            }
        } else {
            let mut line = vec![Complex64::ZERO; l];
            for o in 0..outer {
                let base = o * l * inner;
                for j in 0..inner {
                    for k in 0..l {
                        line[k] = buf[base + k * inner + j];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for k in 0..l {
                        buf[base + k * inner + j] = line[k];
                    }
                }
            }
        }
    }

    /// Forward DFT of a real field (unscaled).
    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(data.len(), self.dims.len());
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for a in 0..self.dims.rank() {
            self.transform_axis(&mut buf, a, true);
        }
        buf
    }

    /// Inverse DFT with 1/N scaling, applied in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.dims.len());
        for a in 0..self.dims.rank() {
            self.transform_axis(buf, a, false);
        }
        let scale = 1.0 / self.dims.len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Inverse DFT returning the real part and the largest imaginary
    /// magnitude (the symmetry residue for spectra of real fields).
    pub fn inverse_real(&self, mut buf: Vec<Complex64>) -> (Vec<f64>, f64) {
        self.inverse(&mut buf);
        let mut residue: f64 = 0.0;
        let out: Vec<f64> = buf
            .iter()
            .map(|c| {
                residue = residue.max(c.im.abs());
                c.re
            })
            .collect();
        (out, residue)
    }
}
