//! The TV proximal operator against an exact 1-D oracle.
//!
//! A 1-D signal embedded as an n x 1 grid reduces the isotropic TV prox to
//! the classic 1-D total-variation problem, whose unique solution is the
//! taut-string solution. The oracle here solves the dual box-constrained
//! quadratic program by exact cyclic coordinate descent and then certifies
//! the primal answer with the KKT subgradient conditions, so a wrong oracle
//! fails loudly rather than silently agreeing.

use pnprr::denoise::{Denoiser, TvDenoiser};
use pnprr::synthdata::SplitMix64;
use pnprr::{Dims, ScalarField};

/// Exact solution of min_x 1/2 ||x - z||^2 + tau * sum |x_{i+1} - x_i|.
fn tv1d_exact(z: &[f64], tau: f64) -> Vec<f64> {
    let n = z.len();
    if n <= 1 || tau == 0.0 {
        return z.to_vec();
    }
    let m = n - 1; // dual variables, one per forward difference
    let dz: Vec<f64> = (0..m).map(|i| z[i + 1] - z[i]).collect();
    let mut p = vec![0.0f64; m];
    // Cyclic exact coordinate minimisation of 1/2 ||D^T p||^2 - p . Dz over
    // the box |p_i| <= tau; diagonal of D D^T is 2.
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for i in 0..m {
            // (D D^T p)_i = 2 p_i - p_{i-1} - p_{i+1}
            let left = if i > 0 { p[i - 1] } else { 0.0 };
            let right = if i + 1 < m { p[i + 1] } else { 0.0 };
            let grad = 2.0 * p[i] - left - right - dz[i];
            let next = (p[i] - grad / 2.0).clamp(-tau, tau);
            change = change.max((next - p[i]).abs());
            p[i] = next;
        }
        if change < 1e-15 {
            break;
        }
    }
    // Primal recovery: x = z - D^T p, (D^T p)_i = p_{i-1} - p_i (p outside = 0).
    let mut x = vec![0.0f64; n];
    for i in 0..n {
        let left = if i > 0 { p[i - 1] } else { 0.0 };
        let right = if i < m { p[i] } else { 0.0 };
        x[i] = z[i] - (left - right);
    }
    // KKT certificate: wherever the solution jumps, the dual must sit on the
    // matching face of the box.
    for i in 0..m {
        let v = x[i + 1] - x[i];
        assert!(p[i].abs() <= tau + 1e-12, "dual out of box: {}", p[i]);
        if v.abs() > 1e-9 {
            assert!(
                (p[i] - tau * v.signum()).abs() <= 1e-9,
                "KKT violated at {i}: jump {v}, dual {} vs tau {tau}",
                p[i]
            );
        }
    }
    x
}

#[test]
fn oracle_matches_hand_checkable_instances() {
    // Constant signal: untouched.
    let x = tv1d_exact(&[0.7, 0.7, 0.7], 0.2);
    for v in &x {
        assert!((v - 0.7).abs() < 1e-12);
    }
    // Two samples: shrink the single jump by 2*tau (or flatten to the mean).
    let x = tv1d_exact(&[0.0, 1.0], 0.2);
    assert!((x[0] - 0.2).abs() < 1e-12 && (x[1] - 0.8).abs() < 1e-12);
    let x = tv1d_exact(&[0.0, 1.0], 0.8);
    assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    // Symmetric impulse of height 1 on five samples, tau = 0.3: the centre
    // drops to 1 - 2*tau and — the prox preserves the mean — the flanks all
    // rise to tau/2 (stationarity of the merged plateau of four samples).
    let x = tv1d_exact(&[0.0, 0.0, 1.0, 0.0, 0.0], 0.3);
    assert!((x[2] - 0.4).abs() < 1e-10, "centre {}", x[2]);
    for i in [0usize, 1, 3, 4] {
        assert!((x[i] - 0.15).abs() < 1e-10, "flank {i}: {}", x[i]);
    }
    let mean: f64 = x.iter().sum::<f64>() / 5.0;
    assert!((mean - 0.2).abs() < 1e-12);
}

#[test]
fn tv_prox_matches_exact_1d_solution_on_50_instances() {
    let mut rng = SplitMix64::new(0x7455_1d00);
    let denoiser = TvDenoiser::default();
    for case in 0..50 {
        let n = 4 + (rng.next_u64() % 13) as usize; // 4..=16
        let tau = 0.01 + 0.49 * rng.next_uniform();
        let z: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_uniform() - 1.0).collect();
        let expect = tv1d_exact(&z, tau);

        let field = ScalarField::new(Dims::d2(n, 1), z.clone()).unwrap();
        let got = denoiser.denoise(&field, tau).unwrap();
        for i in 0..n {
            let err = (got.data()[i] - expect[i]).abs();
            assert!(
                err < 1e-5,
                "case {case} (n={n}, tau={tau:.4}): sample {i} off by {err:.2e}"
            );
        }
    }
}
