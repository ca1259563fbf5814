use otfs_sim::config::{BerConfig, SimConfig};
use otfs_sim::harness::run_ber;

/// Perfect-channel BER at `snr` dB, log-linear between grid points.
fn interp(snrs: &[f64], ber: &[f64], snr: f64) -> f64 {
    let i = snrs.windows(2).position(|w| w[0] <= snr && snr <= w[1]).unwrap();
    let t = (snr - snrs[i]) / (snrs[i + 1] - snrs[i]);
    (ber[i].ln() * (1.0 - t) + ber[i + 1].ln() * t).exp()
}

#[test]
fn estimated_channel_costs_less_than_a_decibel() {
    let snrd = vec![0.0, 4.0, 8.0, 12.0, 16.0];
    let cfg = SimConfig {
        ber: BerConfig { snrd_db: snrd.clone(), min_symbols: 40_000, ..BerConfig::default() },
        ..SimConfig::default()
    };
    let rows = run_ber(&cfg).unwrap();
    let perfect: Vec<f64> = rows.iter().map(|r| r.ber_perfect.unwrap()).collect();
    assert!(perfect.windows(2).all(|w| w[1] < w[0]), "{perfect:?}");
    for (r, &s) in rows.iter().zip(&snrd).skip(1) {
        let budget = interp(&snrd, &perfect, s - 1.0);
        assert!(r.ber_proposed.unwrap() <= budget, "{s} dB: {} vs {budget}", r.ber_proposed.unwrap());
    }
}
