//! CSV rows, plot scripts and configuration snapshots.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::SimConfig;
use crate::SimError;

/// One line of campaign output. Columns that do not apply to a sweep are
/// left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub sweep: String,
    pub waveform: String,
    pub m: usize,
    pub n: usize,
    pub paths: Option<usize>,
    pub pilots: Option<usize>,
    pub snrp_db: Option<f64>,
    pub snrd_db: Option<f64>,
    pub trials: usize,
    pub nmse_h_db: Option<f64>,
    pub nmse_kappa_db: Option<f64>,
    pub nmse_hmat_db: Option<f64>,
    pub median_nmse_hmat_db: Option<f64>,
    pub baseline_nmse_hmat_db: Option<f64>,
    pub integer_nmse_hmat_db: Option<f64>,
    pub crlb_h_db: Option<f64>,
    pub crlb_kappa_db: Option<f64>,
    pub papr_db: Option<f64>,
    pub ber_perfect: Option<f64>,
    pub ber_proposed: Option<f64>,
    pub ber_threshold: Option<f64>,
    pub ber_integer: Option<f64>,
    pub config_hash: String,
}

impl MetricRow {
    pub fn new(sweep: &str, cfg: &SimConfig) -> Self {
        let waveform = serde_json::to_value(cfg.waveform).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        Self {
            sweep: sweep.into(),
            waveform,
            m: cfg.m,
            n: cfg.n,
            paths: None,
            pilots: None,
            snrp_db: None,
            snrd_db: None,
            trials: 0,
            nmse_h_db: None,
            nmse_kappa_db: None,
            nmse_hmat_db: None,
            median_nmse_hmat_db: None,
            baseline_nmse_hmat_db: None,
            integer_nmse_hmat_db: None,
            crlb_h_db: None,
            crlb_kappa_db: None,
            papr_db: None,
            ber_perfect: None,
            ber_proposed: None,
            ber_threshold: None,
            ber_integer: None,
            config_hash: cfg.hash(),
        }
    }

    /// Short human-readable digest of the populated metrics.
    pub fn summary(&self) -> String {
        let mut s = format!("{} {}", self.sweep, self.waveform);
        let mut push = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                s.push_str(&format!(" {name}={v:.4}"));
            }
        };
        push("P", self.paths.map(|v| v as f64));
        push("pilots", self.pilots.map(|v| v as f64));
        push("snrp", self.snrp_db);
        push("snrd", self.snrd_db);
        push("nmse_h", self.nmse_h_db);
        push("nmse_kappa", self.nmse_kappa_db);
        push("nmse_H", self.nmse_hmat_db);
        push("median_H", self.median_nmse_hmat_db);
        push("baseline_H", self.baseline_nmse_hmat_db);
        push("integer_H", self.integer_nmse_hmat_db);
        push("crlb_h", self.crlb_h_db);
        push("crlb_kappa", self.crlb_kappa_db);
        push("papr", self.papr_db);
        push("ber_perfect", self.ber_perfect);
        push("ber_proposed", self.ber_proposed);
        push("ber_threshold", self.ber_threshold);
        push("ber_integer", self.ber_integer);
        s
    }
}

pub fn write_csv(path: &Path, rows: &[MetricRow]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>, SimError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.records().collect::<Result<_, _>>()?)
}

/// Gnuplot script that plots `csv` for the given sweep kind.
pub fn plot_script(sweep: &str, csv: &str) -> String {
    let (xlabel, ylabel, x, series): (&str, &str, usize, &[(usize, &str)]) = match sweep {
        "nmse" => ("SNRp (dB)", "NMSE (dB)", 7, &[(10, "h"), (11, "kappa"), (12, "H"), (14, "threshold H"), (15, "integer H"), (16, "CRLB h"), (17, "CRLB kappa")]),
        "crlb" => ("SNRp (dB)", "bound (dB)", 7, &[(16, "CRLB h"), (17, "CRLB kappa")]),
        "papr" => ("SNRp (dB)", "PAPR (dB)", 7, &[(18, "PAPR")]),
        "ber" => ("SNRd (dB)", "BER", 8, &[(19, "perfect"), (20, "proposed"), (21, "threshold"), (22, "integer Doppler")]),
        _ => ("", "", 7, &[]),
    };
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset grid\n"));
    if sweep == "ber" {
        s.push_str("set logscale y\n");
    }
    let plots: Vec<String> = series
        .iter()
        .map(|(col, title)| format!("'{csv}' using {x}:{col} with linespoints title '{title}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// Write `<sweep>.csv`, its plot script and the resolved configuration.
pub fn write_outputs(dir: &Path, sweep: &str, cfg: &SimConfig, rows: &[MetricRow]) -> Result<PathBuf, SimError> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{sweep}.csv"));
    write_csv(&csv, rows)?;
    fs::write(dir.join(format!("{sweep}.gp")), plot_script(sweep, &format!("{sweep}.csv")))?;
    write_snapshot(dir, sweep, cfg)?;
    Ok(csv)
}

pub fn write_snapshot(dir: &Path, sweep: &str, cfg: &SimConfig) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(cfg)?;
    fs::write(dir.join(format!("{sweep}.config.json")), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns_are_stable() {
        let cfg = SimConfig::default();
        let row = MetricRow { snrp_db: Some(40.0), papr_db: Some(12.5), ..MetricRow::new("papr", &cfg) };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &[row.clone(), row]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("sweep,waveform,m,n,paths,pilots,snrp_db,snrd_db,trials"));
        assert!(header.ends_with("config_hash"));
        let recs = read_csv(&p).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(&recs[0][6], "40.0");
        assert_eq!(&recs[0][4], "");
        assert_eq!(&recs[0][17], "12.5");
    }

    #[test]
    fn plot_columns_point_at_metrics() {
        let s = plot_script("ber", "ber.csv");
        assert!(s.contains("using 8:19"));
        assert!(s.contains("logscale"));
    }
}
