//! `fiberid`: pigtail-identification experiment harness.
//!
//! Exit codes: 0 success/accept, 2 usage or config error, 3 verification
//! reject, 1 internal error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use fiberid::experiments::{
    reliability_curve, reliability_curve_csv, sidecar_metadata, snr_curve, snr_curve_csv,
    ReliabilitySpec, SnrCurveSpec,
};
use fiberid::identify::{verify, wwi_vs_snr, Registry};
use fiberid::physics::FiberPigtail;
use fiberid::seed::{derive_seed, Stream};
use fiberid::sigproc::{measure_signature_at_snr, Signature};
use fiberid::trxctl::{plan_identification, TrxState};

#[derive(Parser)]
#[command(name = "fiberid", version, about = "Fiber-pigtail identification simulator")]
struct Cli {
    /// Run-configuration file (flat key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the primary output here instead of stdout. Tables also get a
    /// `.meta.json` sidecar next to this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SNR-vs-measure-time table (CSV).
    Snr,
    /// Reliability (WWI) vs SNR and sweep span (CSV).
    Reliability,
    /// Measure the configured pigtail noiselessly and add it to the registry.
    Enroll {
        /// Identity to register the signature under.
        label: String,
    },
    /// Measure the configured pigtail and check it against an enrolled identity.
    Verify {
        /// Enrolled identity to check against.
        label: String,
    },
    /// Invert a WWI target into required SNR, measure time, and sweep count.
    Plan,
    /// Run one identification session through the transceiver state machine.
    Session,
}

/// Error severity maps to the exit-code contract: everything wrong with the
/// user's input is Usage (2), everything else Internal (1).
enum CmdError {
    Usage(String),
    Reject,
    Internal(String),
}

impl CmdError {
    fn code(&self) -> u8 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Reject => 3,
            CmdError::Internal(_) => 1,
        }
    }
}

impl From<fiberid::Error> for CmdError {
    fn from(e: fiberid::Error) -> CmdError {
        match e {
            fiberid::Error::UnknownLabel(_) => CmdError::Usage(e.to_string()),
            _ => CmdError::Internal(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CmdError::Usage(msg) | CmdError::Internal(msg) => eprintln!("error: {msg}"),
                CmdError::Reject => eprintln!("verification rejected"),
            }
            ExitCode::from(err.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CmdError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CmdError::Usage(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text).map_err(CmdError::Usage)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Print to stdout, or write to `--out` plus a JSON sidecar describing the
/// run so tables stay attributable to their parameters.
fn emit_table<S: serde::Serialize>(
    cli: &Cli,
    csv: &str,
    spec: &S,
) -> Result<(), CmdError> {
    match &cli.out {
        None => {
            print!("{csv}");
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| CmdError::Internal(e.to_string()))?;
            let meta = sidecar_metadata(spec)?;
            std::fs::write(sidecar_path(path), meta)
                .map_err(|e| CmdError::Internal(e.to_string()))?;
            Ok(())
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn emit_json(cli: &Cli, value: &serde_json::Value) -> Result<(), CmdError> {
    let text = format!("{value:#}\n");
    match &cli.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text).map_err(|e| CmdError::Internal(e.to_string())),
    }
}

fn realize_pigtail(cfg: &RunConfig) -> Result<FiberPigtail, CmdError> {
    Ok(cfg.pigtail.realize(cfg.pigtail_seed)?)
}

/// The configured pigtail as seen through the configured sweep, at the
/// `verify.snr_db` in-band SNR (noiseless when unset).
fn measure_configured(cfg: &RunConfig, snr_db: Option<f64>) -> Result<Signature, CmdError> {
    let pigtail = realize_pigtail(cfg)?;
    let (snr, noise_seed) = match snr_db {
        Some(db) => (
            10f64.powf(db / 10.0),
            Some(derive_seed(cfg.seed, Stream::Noise, 0)),
        ),
        None => (f64::INFINITY, None),
    };
    Ok(measure_signature_at_snr(
        &pigtail,
        &cfg.sweep,
        cfg.link.distance_m,
        cfg.link.group_velocity_m_per_s,
        snr,
        noise_seed,
    )?)
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Snr => cmd_snr(cli, &cfg),
        Command::Reliability => cmd_reliability(cli, &cfg),
        Command::Enroll { label } => cmd_enroll(cli, &cfg, label),
        Command::Verify { label } => cmd_verify(cli, &cfg, label),
        Command::Plan => cmd_plan(cli, &cfg),
        Command::Session => cmd_session(cli, &cfg),
    }
}

fn cmd_snr(cli: &Cli, cfg: &RunConfig) -> Result<(), CmdError> {
    let spec = SnrCurveSpec {
        link: cfg.link,
        delta_f_hz: cfg.sweep.delta_f_hz,
        length_m: cfg.pigtail.length_m,
        measure_times_s: cfg.snr_times_s.clone(),
        powers_w: cfg.snr_powers_w.clone(),
        distances_m: cfg.snr_distances_m.clone(),
    };
    let rows = snr_curve(&spec)?;
    emit_table(cli, &snr_curve_csv(&rows), &spec)
}

fn cmd_reliability(cli: &Cli, cfg: &RunConfig) -> Result<(), CmdError> {
    let spec = ReliabilitySpec {
        snr_db_grid: cfg.reliability_snr_db.clone(),
        delta_f_hz_grid: cfg.reliability_delta_f_hz.clone(),
        pigtail: cfg.pigtail,
        t_sw_s: cfg.sweep.t_sw_s,
        group_velocity_m_per_s: cfg.link.group_velocity_m_per_s,
        r_weight: 0.5,
        trials: cfg.reliability_trials,
        master_seed: cfg.seed,
    };
    let rows = reliability_curve(&spec)?;
    emit_table(cli, &reliability_curve_csv(&rows), &spec)
}

fn cmd_enroll(cli: &Cli, cfg: &RunConfig, label: &str) -> Result<(), CmdError> {
    let signature = measure_configured(cfg, None)?;
    let mut registry = if cfg.registry_path.exists() {
        Registry::load(&cfg.registry_path)?
    } else {
        Registry::new()
    };
    registry
        .enroll(label, signature.clone())
        .map_err(|e| CmdError::Usage(e.to_string()))?;
    registry.save(&cfg.registry_path)?;
    eprintln!(
        "enrolled {label} ({} bits) into {}",
        signature.n_bits(),
        cfg.registry_path.display()
    );
    if let Some(path) = &cli.out {
        signature.with_label(label).save(path)?;
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, cfg: &RunConfig, label: &str) -> Result<(), CmdError> {
    let registry = Registry::load(&cfg.registry_path)
        .map_err(|e| CmdError::Usage(format!("{}: {e}", cfg.registry_path.display())))?;
    let measured = measure_configured(cfg, cfg.verify_snr_db)?;
    let snr = cfg
        .verify_snr_db
        .map(|db| 10f64.powf(db / 10.0))
        .unwrap_or(f64::INFINITY);
    let decision = wwi_vs_snr(
        snr,
        cfg.sweep.delta_f_hz,
        cfg.pigtail.length_m,
        cfg.link.group_velocity_m_per_s,
        0.5,
    )?;
    let report = verify(&registry, label, &measured, &decision)?;
    emit_json(cli, &serde_json::json!({ "label": label, "report": report }))?;
    if report.accepted {
        Ok(())
    } else {
        Err(CmdError::Reject)
    }
}

fn cmd_plan(cli: &Cli, cfg: &RunConfig) -> Result<(), CmdError> {
    let plan = plan_identification(
        &cfg.link,
        &cfg.sweep,
        cfg.pigtail.length_m,
        cfg.plan_target_log10_wwi,
    )?;
    emit_json(
        cli,
        &serde_json::json!({
            "target_log10_wwi": cfg.plan_target_log10_wwi,
            "plan": plan,
        }),
    )
}

fn cmd_session(cli: &Cli, cfg: &RunConfig) -> Result<(), CmdError> {
    let mut state = TrxState::new();
    state.enter_identification(cfg.sweep)?;
    let signature = measure_configured(cfg, cfg.verify_snr_db)?;
    let downtime_s = state.exit_identification()?;
    emit_json(
        cli,
        &serde_json::json!({
            "sweep": { "delta_f_hz": cfg.sweep.delta_f_hz, "t_sw_s": cfg.sweep.t_sw_s,
                       "n_sw": cfg.sweep.n_sw },
            "downtime_s": downtime_s,
            "n_bits": signature.n_bits(),
            "bits_hex": signature.bits_hex(),
        }),
    )
}
