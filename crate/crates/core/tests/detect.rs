use nalgebra::{DMatrix, DVector};
use otfs_core::detect::{lmmse_detect, lmmse_equalize, qpsk_bit_errors, qpsk_slice, DataDetector};
use otfs_core::sparse::SparseMatrix;
use otfs_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<C64> {
    DMatrix::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

#[test]
fn equaliser_matches_explicit_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = random(&mut rng, 12, 8);
    let y = random(&mut rng, 12, 1);
    let snr = 7.5;
    let got = lmmse_equalize(y.as_slice(), &h, snr).unwrap();
    let a = h.adjoint() * &h + DMatrix::<C64>::identity(8, 8) * C64::new(1.0 / snr, 0.0);
    let want = a.try_inverse().unwrap() * h.adjoint() * DVector::from_column_slice(y.as_slice());
    for (g, w) in got.iter().zip(want.iter()) {
        assert!((g - w).norm() < 1e-10);
    }
    assert!(lmmse_equalize(&y.as_slice()[..5], &h, snr).is_err());
    assert!(lmmse_equalize(y.as_slice(), &h, 0.0).is_err());
}

#[test]
fn sparse_detector_matches_dense_on_a_column_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dim = 10;
    let mut trip = Vec::new();
    for r in 0..dim {
        for c in 0..dim {
            if rng.random::<f64>() < 0.4 || r == c {
                trip.push((r, c, C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
            }
        }
    }
    let sm = SparseMatrix::from_triplets(dim, trip);
    let dense = sm.to_dense().unwrap();
    let cols = [1usize, 4, 5, 8];
    let sub = DMatrix::from_fn(dim, cols.len(), |r, c| dense[(r, cols[c])]);
    let y = random(&mut rng, dim, 1);
    let det = DataDetector::new(&sm, &cols);
    for snr in [0.5f64, 3.0, 40.0] {
        let scale = snr.sqrt();
        assert_eq!(det.detect(y.as_slice(), snr, scale).unwrap(), lmmse_detect(y.as_slice(), &sub, snr, scale).unwrap());
    }
}

#[test]
fn bit_errors_count_signs() {
    let a = [C64::new(1.0, 1.0), C64::new(-1.0, 1.0), C64::new(1.0, -1.0)];
    let b = [C64::new(1.0, -1.0), C64::new(1.0, -1.0), C64::new(1.0, -1.0)];
    assert_eq!(qpsk_bit_errors(&a, &b), 3);
    assert_eq!(qpsk_slice(C64::new(-0.1, 2.0)).re.signum(), -1.0);
    assert!((qpsk_slice(C64::new(3.0, 3.0)).norm() - 1.0).abs() < 1e-15);
}
