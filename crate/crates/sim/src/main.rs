use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use otfs_core::Waveform;
use otfs_sim::config::SimConfig;
use otfs_sim::harness::{estimate_once, model_check, run_ber, run_crlb_sweep, run_nmse_sweep, run_papr_table};
use otfs_sim::output::{write_csv, write_outputs, write_snapshot, MetricRow};
use otfs_sim::SimError;

/// Delay-Doppler channel estimation campaigns.
#[derive(Debug, Parser)]
#[command(name = "otfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file, JSON or `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed of the trial streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Trials per cell (frames for papr-table).
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true, value_enum)]
    waveform: Option<WaveformArg>,
    /// Pilot count.
    #[arg(long, global = true)]
    pilots: Option<usize>,
    /// Pilot SNRs in dB, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    snrp: Option<Vec<f64>>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// NMSE of gains, fractional Doppler and channel matrix against pilot SNR.
    NmseSweep,
    /// Mean time-domain PAPR per pilot SNR and pilot count.
    PaprTable,
    /// Bit error rate of LMMSE detection with perfect and estimated channels.
    Ber,
    /// Normalised Cramer-Rao bounds against pilot SNR.
    Crlb,
    /// One seeded trial with channel and estimate dumped as JSON.
    EstimateOnce,
    /// Model, dictionary and kernel consistency suites.
    ModelCheck {
        /// Random instances per suite.
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WaveformArg {
    Bi,
    Rect,
}

fn resolve(cli: &Cli) -> Result<SimConfig, SimError> {
    let mut cfg = match &cli.config {
        Some(p) => SimConfig::from_path(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        match cli.command {
            Command::PaprTable => cfg.papr.frames = t,
            _ => cfg.trials = t,
        }
    }
    if let Some(w) = cli.waveform {
        cfg.waveform = match w {
            WaveformArg::Bi => Waveform::Bi,
            WaveformArg::Rect => Waveform::Rect,
        };
    }
    if let Some(p) = cli.pilots {
        match cli.command {
            Command::PaprTable => cfg.papr.pilots = vec![p],
            Command::Ber => cfg.ber.pilots = p,
            _ => cfg.pilots = vec![p],
        }
    }
    if let Some(s) = &cli.snrp {
        match cli.command {
            Command::PaprTable => cfg.papr.snrp_db = s.clone(),
            Command::Ber => cfg.ber.snrp_db = s.first().copied().unwrap_or(cfg.ber.snrp_db),
            _ => cfg.snrp_db = s.clone(),
        }
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &Path, sweep: &str, cfg: &SimConfig, rows: &[MetricRow]) -> Result<(), SimError> {
    for r in rows {
        println!("{}", r.summary());
    }
    let path = write_outputs(out, sweep, cfg, rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, SimError> {
    let cfg = resolve(cli)?;
    let out = &cli.out;
    match cli.command {
        Command::NmseSweep => emit(out, "nmse", &cfg, &run_nmse_sweep(&cfg)?)?,
        Command::PaprTable => emit(out, "papr", &cfg, &run_papr_table(&cfg)?)?,
        Command::Ber => emit(out, "ber", &cfg, &run_ber(&cfg)?)?,
        Command::Crlb => emit(out, "crlb", &cfg, &run_crlb_sweep(&cfg)?)?,
        Command::EstimateOnce => {
            let run = estimate_once(&cfg)?;
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("channel.json"), serde_json::to_string_pretty(&run.channel)? + "\n")?;
            std::fs::write(out.join("estimate.json"), serde_json::to_string_pretty(&run.estimate)? + "\n")?;
            write_csv(&out.join("estimate.csv"), std::slice::from_ref(&run.row))?;
            write_snapshot(out, "estimate", &cfg)?;
            println!("{}", run.row.summary());
        }
        Command::ModelCheck { cases } => {
            let results = model_check(&cfg, cases)?;
            write_snapshot(out, "model-check", &cfg)?;
            let mut ok = true;
            for r in &results {
                let verdict = if r.passed() { "ok" } else { "FAILED" };
                println!("{:<32} cases={:<6} worst={:.3e} tol={:.0e} {verdict}", r.name, r.cases, r.worst, r.tol);
                ok &= r.passed();
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("otfs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
