//! Fourier-domain differential operators and the bandlimited velocity space.
//!
//! The smoothness metric on velocities is `L = -(alpha * lap + id)^c`, a
//! negative power of the shifted Laplacian.  On the discrete periodic grid
//! the Laplacian eigenvalue at frequency `k` is
//! `ell(k) = sum_a 2 * (1 - cos(2 pi k_a / n_a))`, so `L` acts by pointwise
//! multiplication with the symbol `A(k) = (alpha * ell(k) + 1)^c` and its
//! inverse `K` by `1 / A(k)`.  Both symbols are real, even, and bounded away
//! from zero, which makes `L` and `K` self-adjoint positive operators and
//! exact inverses of one another.
//!
//! Velocities are optionally restricted to a centred low-frequency band: band
//! `b` keeps signed frequencies `|s_a| <= b - 1` on every axis, a cube of
//! `(2b - 1)^rank` coefficients per component.  [`BandlimitedVelocity`]
//! stores exactly those coefficients (normalised so a coefficient is the
//! complex amplitude of its mode); [`SpectralOperator::pad`] returns to the
//! dense grid and [`SpectralOperator::truncate`] projects onto the band.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::grid::{Dims, VectorField};

/// Default band used by the registration pipeline on grids of 32 and up.
pub const DEFAULT_BAND: usize = 16;

/// Signed frequency of DFT index `k` on an axis of size `n`, in
/// `[-(n-1)/2, n/2]`.
fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Spectral metric operator pair `(L, K)` for one grid shape.
pub struct SpectralOperator {
    dims: Dims,
    alpha: f64,
    c: f64,
    symbol_l: Vec<f64>,
    symbol_k: Vec<f64>,
    fft: FftPlan,
}

impl SpectralOperator {
    pub fn new(dims: Dims, alpha: f64, c: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral operator alpha must be positive and finite, got {alpha}"
            )));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral operator exponent c must be positive and finite, got {c}"
            )));
        }
        let rank = dims.rank();
        let n = dims.len();
        let mut symbol_l = Vec::with_capacity(n);
        let mut coords = [0usize; 3];
        for _ in 0..n {
            let mut ell = 0.0;
            for a in 0..rank {
                let th = 2.0 * std::f64::consts::PI * coords[a] as f64 / dims.size(a) as f64;
                ell += 2.0 * (1.0 - th.cos());
            }
            symbol_l.push((alpha * ell + 1.0).powf(c));
            for a in (0..rank).rev() {
                coords[a] += 1;
                if coords[a] < dims.size(a) {
                    break;
                }
                coords[a] = 0;
            }
        }
        let symbol_k: Vec<f64> = symbol_l.iter().map(|&a| 1.0 / a).collect();
        Ok(SpectralOperator {
            dims,
            alpha,
            c,
            symbol_l,
            symbol_k,
            fft: FftPlan::new(dims),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Symbol of `L` over the full grid (row-major frequency order).
    pub fn symbol_l(&self) -> &[f64] {
        &self.symbol_l
    }

    /// Symbol of `K = L^{-1}`.
    pub fn symbol_k(&self) -> &[f64] {
        &self.symbol_k
    }

    fn check_dims(&self, v: &VectorField, what: &str) -> Result<()> {
        if v.dims() != self.dims {
            return Err(Error::DimensionMismatch(format!(
                "{what}: field is {} but operator is {}",
                v.dims(),
                self.dims
            )));
        }
        Ok(())
    }

    /// Applies a real symbol componentwise via FFT.
    pub(crate) fn apply_symbol(&self, v: &VectorField, symbol: &[f64]) -> VectorField {
        let mut out = VectorField::zeros(self.dims);
        for a in 0..v.rank() {
            let mut spec = self.fft.forward_real(v.comp(a));
            for (s, &m) in spec.iter_mut().zip(symbol) {
                *s *= m;
            }
            let (real, _residue) = self.fft.inverse_real(spec);
            out.comp_mut(a).copy_from_slice(&real);
        }
        out
    }

    /// `L v`, the momentum of a velocity.
    pub fn apply_l(&self, v: &VectorField) -> Result<VectorField> {
        self.check_dims(v, "apply_l")?;
        Ok(self.apply_symbol(v, &self.symbol_l))
    }

    /// `K m = L^{-1} m`, velocity from momentum.
    pub fn apply_k(&self, m: &VectorField) -> Result<VectorField> {
        self.check_dims(m, "apply_k")?;
        Ok(self.apply_symbol(m, &self.symbol_k))
    }

    /// Metric inner product `(L v, w)`; symmetric and positive definite.
    pub fn metric_pairing(&self, v: &VectorField, w: &VectorField) -> Result<f64> {
        self.check_dims(v, "metric_pairing")?;
        self.check_dims(w, "metric_pairing")?;
        let lv = self.apply_symbol(v, &self.symbol_l);
        Ok(lv.dot(w))
    }

    fn check_band(&self, band: usize) -> Result<()> {
        if band == 0 {
            return Err(Error::InvalidParameter("band must be at least 1".into()));
        }
        for a in 0..self.dims.rank() {
            if band > self.dims.size(a) / 2 {
                return Err(Error::InvalidParameter(format!(
                    "band {band} exceeds the Nyquist limit {} of axis {a} (size {})",
                    self.dims.size(a) / 2,
                    self.dims.size(a)
                )));
            }
        }
        Ok(())
    }

    /// 1/0 mask over full-grid frequencies for band `b`.
    fn band_mask(&self, band: usize) -> Vec<f64> {
        let rank = self.dims.rank();
        let limit = band as i64 - 1;
        let mut mask = Vec::with_capacity(self.dims.len());
        let mut coords = [0usize; 3];
        for _ in 0..self.dims.len() {
            let mut keep = true;
            for a in 0..rank {
                if signed_freq(coords[a], self.dims.size(a)).abs() > limit {
                    keep = false;
                    break;
                }
            }
            mask.push(if keep { 1.0 } else { 0.0 });
            for a in (0..rank).rev() {
                coords[a] += 1;
                if coords[a] < self.dims.size(a) {
                    break;
                }
                coords[a] = 0;
            }
        }
        mask
    }

    /// Removes all frequencies outside band `b` (orthogonal projection).
    pub fn project_band(&self, v: &VectorField, band: usize) -> Result<VectorField> {
        self.check_dims(v, "project_band")?;
        self.check_band(band)?;
        let mask = self.band_mask(band);
        Ok(self.apply_symbol(v, &mask))
    }

    /// Extracts the bandlimited coefficients of `v`.
    pub fn truncate(&self, v: &VectorField, band: usize) -> Result<BandlimitedVelocity> {
        self.check_dims(v, "truncate")?;
        self.check_band(band)?;
        let rank = self.dims.rank();
        let side = 2 * band - 1;
        let clen = side.pow(rank as u32);
        let scale = 1.0 / self.dims.len() as f64;
        let strides = self.dims.strides();
        let mut comps = Vec::with_capacity(rank);
        for a in 0..rank {
            let spec = self.fft.forward_real(v.comp(a));
            let mut coeffs = Vec::with_capacity(clen);
            let mut t = [0usize; 3];
            for _ in 0..clen {
                let mut full = 0usize;
                for b in 0..rank {
                    let s = t[b] as i64 - (band as i64 - 1);
                    let n = self.dims.size(b) as i64;
                    let k = if s < 0 { s + n } else { s } as usize;
                    full += k * strides[b];
                }
                coeffs.push(spec[full] * scale);
                for b in (0..rank).rev() {
                    t[b] += 1;
                    if t[b] < side {
                        break;
                    }
                    t[b] = 0;
                }
            }
            comps.push(coeffs);
        }
        Ok(BandlimitedVelocity {
            dims: self.dims,
            band,
            comps,
        })
    }

    /// Expands bandlimited coefficients back to a dense velocity field.
    pub fn pad(&self, w: &BandlimitedVelocity) -> Result<VectorField> {
        if w.dims != self.dims {
            return Err(Error::DimensionMismatch(format!(
                "pad: coefficients are for {} but operator is {}",
                w.dims, self.dims
            )));
        }
        self.check_band(w.band)?;
        let rank = self.dims.rank();
        let side = 2 * w.band - 1;
        let clen = side.pow(rank as u32);
        let scale = self.dims.len() as f64;
        let strides = self.dims.strides();
        let mut out = VectorField::zeros(self.dims);
        for a in 0..rank {
            let mut spec = vec![Complex64::ZERO; self.dims.len()];
            let mut t = [0usize; 3];
            for c in 0..clen {
                let mut full = 0usize;
                for b in 0..rank {
                    let s = t[b] as i64 - (w.band as i64 - 1);
                    let n = self.dims.size(b) as i64;
                    let k = if s < 0 { s + n } else { s } as usize;
                    full += k * strides[b];
                }
                spec[full] = w.comps[a][c] * scale;
                for b in (0..rank).rev() {
                    t[b] += 1;
                    if t[b] < side {
                        break;
                    }
                    t[b] = 0;
                }
            }
            let (real, residue) = self.fft.inverse_real(spec);
            if residue > 1e-10 {
                return Err(Error::NonFinite(format!(
                    "pad: imaginary residue {residue:.3e} (coefficients are not conjugate-symmetric)"
                )));
            }
            out.comp_mut(a).copy_from_slice(&real);
        }
        Ok(out)
    }

    /// Masked `K` symbol (band projection folded in) for the shooting loop.
    pub(crate) fn banded_symbol_k(&self, band: Option<usize>) -> Result<Vec<f64>> {
        match band {
            None => Ok(self.symbol_k.clone()),
            Some(b) => {
                self.check_band(b)?;
                let mask = self.band_mask(b);
                Ok(self
                    .symbol_k
                    .iter()
                    .zip(&mask)
                    .map(|(&k, &m)| k * m)
                    .collect())
            }
        }
    }

    /// Band mask as a symbol, or `None` for the unrestricted space.
    pub(crate) fn banded_mask(&self, band: Option<usize>) -> Result<Option<Vec<f64>>> {
        match band {
            None => Ok(None),
            Some(b) => {
                self.check_band(b)?;
                Ok(Some(self.band_mask(b)))
            }
        }
    }
}

/// Fourier coefficients of a bandlimited velocity: per component, the
/// `(2b - 1)^rank` amplitudes of signed frequencies `|s_a| <= b - 1`,
/// row-major over the shifted index `t_a = s_a + b - 1`.
#[derive(Clone, Debug)]
pub struct BandlimitedVelocity {
    dims: Dims,
    band: usize,
    comps: Vec<Vec<Complex64>>,
}

impl BandlimitedVelocity {
    /// Validates lengths and conjugate symmetry (real-field spectra satisfy
    /// `coef(-s) == conj(coef(s))`).
    pub fn from_coefficients(
        dims: Dims,
        band: usize,
        comps: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if band == 0 {
            return Err(Error::InvalidParameter("band must be at least 1".into()));
        }
        let rank = dims.rank();
        let side = 2 * band - 1;
        let clen = side.pow(rank as u32);
        if comps.len() != rank {
            return Err(Error::DimensionMismatch(format!(
                "bandlimited velocity: {} components for rank {rank}",
                comps.len()
            )));
        }
        for (a, c) in comps.iter().enumerate() {
            if c.len() != clen {
                return Err(Error::DimensionMismatch(format!(
                    "bandlimited velocity component {a}: {} coefficients, expected {clen}",
                    c.len()
                )));
            }
            if !c.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "bandlimited velocity component {a}"
                )));
            }
            for (i, &z) in c.iter().enumerate() {
                let mirror = mirror_index(i, side, rank);
                let diff = (c[mirror].conj() - z).norm();
                if diff > 1e-9 * (1.0 + z.norm()) {
                    return Err(Error::InvalidParameter(format!(
                        "bandlimited velocity component {a} breaks conjugate symmetry at index {i}"
                    )));
                }
            }
        }
        Ok(BandlimitedVelocity { dims, band, comps })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn rank(&self) -> usize {
        self.dims.rank()
    }

    /// Coefficient cube of one component.
    pub fn coefficients(&self, comp: usize) -> &[Complex64] {
        &self.comps[comp]
    }

    /// Coefficients kept per component.
    pub fn coeffs_per_comp(&self) -> usize {
        (2 * self.band - 1).pow(self.rank() as u32)
    }
}

/// Index of `-s` in the shifted cube layout.
fn mirror_index(i: usize, side: usize, rank: usize) -> usize {
    let mut rem = i;
    let mut digits = [0usize; 3];
    for a in (0..rank).rev() {
        digits[a] = rem % side;
        rem /= side;
    }
    let mut out = 0;
    for a in 0..rank {
        out = out * side + (side - 1 - digits[a]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;

    fn test_vector(dims: Dims, salt: u64) -> VectorField {
        let mut v = VectorField::zeros(dims);
        for a in 0..dims.rank() {
            for (i, x) in v.comp_mut(a).iter_mut().enumerate() {
                let h = (i as u64)
                    .wrapping_mul(0x9E3779B97F4A7C15)
                    .wrapping_add(salt + a as u64)
                    .wrapping_mul(0xBF58476D1CE4E5B9);
                *x = ((h >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            }
        }
        v
    }

    #[test]
    fn symbol_frozen_value() {
        // alpha = 1.5, c = 3 on an 8x8 grid at frequency (1, 0):
        // ell = 2 * (1 - cos(pi / 4)), A = (1.5 * ell + 1)^3.
        let op = SpectralOperator::new(Dims::d2(8, 8), 1.5, 3.0).unwrap();
        let a = op.symbol_l()[8];
        assert!((a - 6.630681963118765).abs() < 1e-12, "{a}");
        assert_eq!(op.symbol_l()[0], 1.0);
        assert_eq!(op.symbol_k()[0], 1.0);
    }

    #[test]
    fn symbols_are_reciprocal() {
        let op = SpectralOperator::new(Dims::d2(10, 6), 2.0, 2.5).unwrap();
        for (l, k) in op.symbol_l().iter().zip(op.symbol_k()) {
            assert!((l * k - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralOperator::new(Dims::d2(8, 8), 0.0, 3.0).is_err());
        assert!(SpectralOperator::new(Dims::d2(8, 8), -1.0, 3.0).is_err());
        assert!(SpectralOperator::new(Dims::d2(8, 8), 1.5, 0.0).is_err());
        assert!(SpectralOperator::new(Dims::d2(8, 8), f64::NAN, 3.0).is_err());
    }

    #[test]
    fn k_inverts_l() {
        let dims = Dims::d2(8, 6);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let v = test_vector(dims, 7);
        let back = op.apply_k(&op.apply_l(&v).unwrap()).unwrap();
        for a in 0..2 {
            for (x, y) in back.comp(a).iter().zip(v.comp(a)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l_is_self_adjoint_and_positive() {
        let dims = Dims::d2(6, 10);
        let op = SpectralOperator::new(dims, 1.2, 2.0).unwrap();
        let v = test_vector(dims, 1);
        let w = test_vector(dims, 2);
        let lv_w = op.apply_l(&v).unwrap().dot(&w);
        let v_lw = op.apply_l(&w).unwrap().dot(&v);
        assert!((lv_w - v_lw).abs() < 1e-9 * lv_w.abs().max(1.0));
        let pairing = op.metric_pairing(&v, &v).unwrap();
        assert!(pairing > 0.0);
        assert!((op.metric_pairing(&v, &w).unwrap() - lv_w).abs() < 1e-9 * lv_w.abs().max(1.0));
    }

    #[test]
    fn metric_pairing_of_dc_mode_is_plain_dot() {
        // A constant field has only the k = 0 mode, where A = 1.
        let dims = Dims::d2(8, 8);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let mut v = VectorField::zeros(dims);
        v.comp_mut(0).iter_mut().for_each(|x| *x = 2.0);
        let p = op.metric_pairing(&v, &v).unwrap();
        assert!((p - 4.0 * dims.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn pad_of_single_mode_is_cosine() {
        let dims = Dims::d2(8, 8);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let band = 2;
        let side = 2 * band - 1;
        let clen = side * side;
        // Coefficient 0.5 at s = (1, 0) and its mirror: pad = cos(2 pi x0 / 8).
        let mut c0 = vec![Complex64::ZERO; clen];
        let at = |s0: i64, s1: i64| ((s0 + 1) * side as i64 + (s1 + 1)) as usize;
        c0[at(1, 0)] = Complex64::new(0.5, 0.0);
        c0[at(-1, 0)] = Complex64::new(0.5, 0.0);
        let w = BandlimitedVelocity::from_coefficients(
            dims,
            band,
            vec![c0, vec![Complex64::ZERO; clen]],
        )
        .unwrap();
        let v = op.pad(&w).unwrap();
        let f = ScalarField::from_fn(dims, |c| {
            (2.0 * std::f64::consts::PI * c[0] as f64 / 8.0).cos()
        });
        for (a, b) in v.comp(0).iter().zip(f.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(v.comp(1).iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn truncate_pad_round_trip() {
        let dims = Dims::d2(16, 16);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let v = test_vector(dims, 33);
        let w = op.truncate(&v, 3).unwrap();
        assert_eq!(w.coeffs_per_comp(), 25);
        let w2 = op.truncate(&op.pad(&w).unwrap(), 3).unwrap();
        for a in 0..2 {
            for (x, y) in w2.coefficients(a).iter().zip(w.coefficients(a)) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_l_scales_a_pure_mode_by_its_symbol() {
        // cos(2*pi*x0/8) is an eigenfunction of L with eigenvalue A(1, 0).
        let dims = Dims::d2(8, 8);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let mut v = VectorField::zeros(dims);
        for (i, x) in v.comp_mut(0).iter_mut().enumerate() {
            let row = i / 8;
            *x = (2.0 * std::f64::consts::PI * row as f64 / 8.0).cos();
        }
        let a = op.symbol_l()[8];
        let lv = op.apply_l(&v).unwrap();
        for (got, want) in lv.comp(0).iter().zip(v.comp(0)) {
            assert!((got - a * want).abs() < 1e-10, "{got} vs {}", a * want);
        }
        assert!(lv.comp(1).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn fourier_side_parseval_oracle() {
        // A naive DFT recomputes both the metric pairing
        // (1/N) * sum_k A(k) |v_hat(k)|^2 and the plain in-band energy of a
        // band-4 truncation, independently of the transform code under test.
        let dims = Dims::d2(16, 16);
        let (n0, n1) = (16usize, 16usize);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let v = test_vector(dims, 11);

        let dft = |comp: &[f64], k0: usize, k1: usize| -> (f64, f64) {
            let mut re = 0.0;
            let mut im = 0.0;
            for i0 in 0..n0 {
                for i1 in 0..n1 {
                    let ph = -2.0 * std::f64::consts::PI
                        * ((k0 * i0) as f64 / n0 as f64 + (k1 * i1) as f64 / n1 as f64);
                    let x = comp[i0 * n1 + i1];
                    re += x * ph.cos();
                    im += x * ph.sin();
                }
            }
            (re, im)
        };

        let band = 4usize;
        let mut pairing_oracle = 0.0;
        let mut band_energy = 0.0;
        for k0 in 0..n0 {
            for k1 in 0..n1 {
                let mut power = 0.0;
                for a in 0..2 {
                    let (re, im) = dft(v.comp(a), k0, k1);
                    power += re * re + im * im;
                }
                pairing_oracle += op.symbol_l()[k0 * n1 + k1] * power;
                let s0 = if k0 <= n0 / 2 { k0 as i64 } else { k0 as i64 - n0 as i64 };
                let s1 = if k1 <= n1 / 2 { k1 as i64 } else { k1 as i64 - n1 as i64 };
                if s0.unsigned_abs() < band as u64 && s1.unsigned_abs() < band as u64 {
                    band_energy += power;
                }
            }
        }
        let n_total = (n0 * n1) as f64;
        pairing_oracle /= n_total;
        band_energy /= n_total;

        let pairing = op.metric_pairing(&v, &v).unwrap();
        assert!(
            (pairing - pairing_oracle).abs() < 1e-8 * pairing_oracle,
            "{pairing} vs oracle {pairing_oracle}"
        );

        let proj = op.pad(&op.truncate(&v, band).unwrap()).unwrap();
        let e = proj.dot(&proj);
        assert!(
            (e - band_energy).abs() < 1e-8 * band_energy,
            "{e} vs oracle {band_energy}"
        );
    }

    #[test]
    fn pad_truncate_equals_projection() {
        let dims = Dims::d2(12, 16);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let v = test_vector(dims, 5);
        let band = 4;
        let via_coeffs = op.pad(&op.truncate(&v, band).unwrap()).unwrap();
        let direct = op.project_band(&v, band).unwrap();
        for a in 0..2 {
            for (x, y) in via_coeffs.comp(a).iter().zip(direct.comp(a)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        // Projection is idempotent.
        let twice = op.project_band(&direct, band).unwrap();
        for a in 0..2 {
            for (x, y) in twice.comp(a).iter().zip(direct.comp(a)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_never_raises_energy() {
        let dims = Dims::d2(12, 12);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let v = test_vector(dims, 9);
        let full = op.metric_pairing(&v, &v).unwrap();
        for band in 1..=6 {
            let p = op.project_band(&v, band).unwrap();
            let e = op.metric_pairing(&p, &p).unwrap();
            assert!(e <= full * (1.0 + 1e-12), "band {band}: {e} vs {full}");
        }
    }

    #[test]
    fn band_validation() {
        let dims = Dims::d2(16, 8);
        let op = SpectralOperator::new(dims, 1.5, 3.0).unwrap();
        let v = test_vector(dims, 0);
        assert!(op.truncate(&v, 0).is_err());
        // Axis 1 has size 8, so the Nyquist limit is band 4.
        assert!(op.truncate(&v, 4).is_ok());
        assert!(op.truncate(&v, 5).is_err());
    }

    #[test]
    fn asymmetric_coefficients_rejected() {
        let dims = Dims::d2(8, 8);
        let clen = 9;
        let mut c0 = vec![Complex64::ZERO; clen];
        c0[0] = Complex64::new(0.0, 1.0); // mirror must be -i, but is 0
        let r = BandlimitedVelocity::from_coefficients(dims, 2, vec![c0, vec![Complex64::ZERO; clen]]);
        assert!(r.is_err());
    }

    #[test]
    fn mirror_index_round_trip() {
        let side = 5;
        for i in 0..side * side {
            let m = mirror_index(i, side, 2);
            assert_eq!(mirror_index(m, side, 2), i);
        }
        assert_eq!(mirror_index(12, 5, 2), 12); // centre (s = 0) is its own mirror
    }
}
