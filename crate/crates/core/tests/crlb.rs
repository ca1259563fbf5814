use otfs_core::channel::{ChannelPath, DDChannel};
use otfs_core::crlb::{crlb_bounds, fisher_matrix, normalized_bounds, observation_jacobian};
use otfs_core::frame::{qpsk_symbols, FrameConfig};
use otfs_core::kernels::GridDims;
use otfs_core::{Waveform, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(kappa: [f64; 3]) -> (DDChannel, FrameConfig, Vec<C64>) {
    let dims = GridDims::new(32, 16).unwrap();
    let paths = vec![
        ChannelPath { h: C64::new(0.7, 0.2), l: 0, k: 0, kappa: kappa[0] },
        ChannelPath { h: C64::new(-0.2, 0.5), l: 2, k: 1, kappa: kappa[1] },
        ChannelPath { h: C64::new(0.1, -0.4), l: 3, k: -2, kappa: kappa[2] },
    ];
    let ch = DDChannel::new(paths, 1, dims).unwrap();
    let fc = FrameConfig::standard(dims, 3, 4, 2, 1).with_powers(100.0, 1.0);
    let pilots = qpsk_symbols(&mut ChaCha8Rng::seed_from_u64(1), 3);
    (ch, fc, pilots)
}

#[test]
fn jacobian_matches_finite_differences() {
    let (ch, fc, pilots) = setup([0.31, -0.12, 0.44]);
    for wf in [Waveform::Bi, Waveform::Rect] {
        let (_, jac) = observation_jacobian(&ch, &fc, &pilots, wf).unwrap();
        let p = ch.paths.len();
        let step = 1e-6;
        for i in 0..p {
            let bump = |d: f64, gain: bool| {
                let mut c = ch.clone();
                if gain {
                    c.paths[i].h += d;
                } else {
                    c.paths[i].kappa += d;
                }
                observation_jacobian(&c, &fc, &pilots, wf).unwrap().0
            };
            for (col, gain) in [(i, true), (p + i, false)] {
                let (up, dn) = (bump(step, gain), bump(-step, gain));
                for z in 0..up.len() {
                    let fd = (up[z] - dn[z]) / (2.0 * step);
                    assert!((fd - jac[(z, col)]).norm() < 1e-6, "{wf:?} col {col} row {z}");
                }
            }
        }
    }
}

#[test]
fn fisher_is_symmetric_psd_and_linear_in_precision() {
    let (ch, fc, pilots) = setup([0.31, -0.12, 0.44]);
    for wf in [Waveform::Bi, Waveform::Rect] {
        let a = fisher_matrix(&ch, &fc, &pilots, 1.0, wf).unwrap();
        let b = fisher_matrix(&ch, &fc, &pilots, 4.0, wf).unwrap();
        assert!((&a - a.transpose()).abs().max() < 1e-9 * a.abs().max());
        assert!((&b - &a * 4.0).abs().max() < 1e-9 * b.abs().max());
        let eig = a.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e >= -1e-9 * eig.max()));
        let (ba, bb) = (crlb_bounds(&a).unwrap(), crlb_bounds(&b).unwrap());
        for (x, y) in ba.diag.iter().zip(&bb.diag) {
            assert!(*x > 0.0 && (x / y - 4.0).abs() < 1e-6);
        }
    }
}

#[test]
fn bounds_fall_with_pilot_power() {
    let (ch, fc, pilots) = setup([0.31, -0.12, 0.44]);
    let at = |pp: f64| {
        let fim = fisher_matrix(&ch, &fc.with_powers(pp, 1.0), &pilots, 1.0, Waveform::Bi).unwrap();
        normalized_bounds(&crlb_bounds(&fim).unwrap(), &ch).unwrap()
    };
    let (lo, hi) = (at(1e3), at(1e4));
    assert!((lo.0 / hi.0 - 10.0).abs() < 1e-6);
    assert!((lo.1 / hi.1 - 10.0).abs() < 1e-6);
}

#[test]
fn integer_doppler_bounds_are_finite() {
    let (ch, fc, pilots) = setup([0.0, 0.0, 0.0]);
    let fim = fisher_matrix(&ch, &fc, &pilots, 1.0, Waveform::Bi).unwrap();
    let b = crlb_bounds(&fim).unwrap();
    assert!(b.diag.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(fisher_matrix(&ch, &fc, &pilots, 0.0, Waveform::Bi).is_err());
}
