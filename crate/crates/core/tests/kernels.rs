use std::f64::consts::PI;

use otfs_core::kernels::{phi, phi_prime, spread_f, GridDims};
use otfs_core::C64;
use proptest::prelude::*;

fn series(q: i64, kappa: f64, n: usize) -> C64 {
    (0..n).map(|i| C64::from_polar(1.0, 2.0 * PI * i as f64 * (q as f64 + kappa) / n as f64)).sum::<C64>() / n as f64
}

proptest! {
    #[test]
    fn closed_form_matches_series(q in -40i64..40, kappa in -0.5f64..=0.5, n in 2usize..64) {
        let f = spread_f(q, kappa, n).unwrap();
        prop_assert!((f - series(q, kappa, n)).norm() < 1e-10);
        prop_assert!(f.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn spreading_sums_to_one_over_a_period(kappa in -0.5f64..=0.5, n in 2usize..64, shift in -20i64..20) {
        let s: C64 = (0..n as i64).map(|q| spread_f(q + shift, kappa, n).unwrap()).sum();
        prop_assert!((s - 1.0).norm() < 1e-10);
    }

    #[test]
    fn spreading_is_periodic_in_q(q in -20i64..20, kappa in -0.5f64..=0.5, n in 2usize..40) {
        let a = spread_f(q, kappa, n).unwrap();
        let b = spread_f(q + n as i64, kappa, n).unwrap();
        prop_assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn derivative_matches_central_difference(
        q in -3i64..=3, kappa in -0.45f64..0.45, t in 0usize..12, d in -4i64..=4,
    ) {
        let dims = GridDims::new(64, 16).unwrap();
        let h = 1e-6;
        let fd = (phi(q, kappa + h, t, d, dims).unwrap() - phi(q, kappa - h, t, d, dims).unwrap()) / (2.0 * h);
        let an = phi_prime(q, kappa, t, d, dims).unwrap();
        prop_assert!((fd - an).norm() <= 1e-5 * an.norm().max(1.0));
    }
}

#[test]
fn kernel_is_spreading_times_phase() {
    let dims = GridDims::new(32, 16).unwrap();
    for (q, kappa, t, d) in [(0, 0.2, 3, 1), (-2, -0.4, 7, -2), (1, 0.5, 0, 0)] {
        let want = spread_f(q, kappa, 16).unwrap()
            * C64::from_polar(1.0, -2.0 * PI * t as f64 * (d as f64 + kappa) / dims.mn() as f64);
        assert!((phi(q, kappa, t, d, dims).unwrap() - want).norm() < 1e-12);
    }
}

#[test]
fn integer_doppler_is_a_kronecker_delta() {
    for q in -5..5 {
        let f = spread_f(q, 0.0, 8).unwrap();
        let want = if q.rem_euclid(8) == 0 { 1.0 } else { 0.0 };
        assert!((f - want).norm() < 1e-12);
    }
}
