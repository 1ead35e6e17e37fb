//! Flat key=value run configuration. SI base units only (Hz, s, m, W);
//! decibels appear only in keys suffixed `_db`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fiberid::experiments::PigtailSpec;
use fiberid::physics::{LinkBudget, SweepConfig};

/// Everything a subcommand may need, validated against the owning module's
/// preconditions at parse time.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub link: LinkBudget,
    pub sweep: SweepConfig,
    pub pigtail: PigtailSpec,
    pub pigtail_seed: u64,
    pub registry_path: PathBuf,
    /// In-band SNR for `verify` and `session` measurements; None is noiseless.
    pub verify_snr_db: Option<f64>,
    pub snr_times_s: Vec<f64>,
    pub snr_powers_w: Vec<f64>,
    pub snr_distances_m: Vec<f64>,
    pub reliability_snr_db: Vec<f64>,
    pub reliability_delta_f_hz: Vec<f64>,
    pub reliability_trials: u64,
    pub plan_target_log10_wwi: f64,
    pub seed: u64,
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Ok(vec![]);
    }
    trimmed
        .split(',')
        .map(|item| parse_scalar(key, item))
        .collect()
}

fn check_grid(key: &str, grid: &[f64]) -> Result<(), String> {
    if grid.is_empty() {
        return Err(format!("{key}: grid must be non-empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("{key}: grid must be strictly increasing"));
    }
    Ok(())
}

impl RunConfig {
    /// Parse a document of `key = value` lines; `#` starts a comment. The
    /// built-in defaults describe the reference link, so an empty document
    /// is a valid configuration.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim().to_string();
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("{key}: duplicate key"));
            }
        }
        RunConfig::from_map(map)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<RunConfig, String> {
        let mut take = |key: &str| map.remove(key);

        let mut power_w = 1e-3;
        let mut distance_m = 10e3;
        let mut alpha_db_per_m = 0.2e-3;
        let mut responsivity = 1.0;
        let mut nep = 1e-12;
        let mut link_r_rb = 8e-7;
        let mut v = 2e8;
        if let Some(x) = take("link.power_w") {
            power_w = parse_scalar("link.power_w", &x)?;
        }
        if let Some(x) = take("link.distance_m") {
            distance_m = parse_scalar("link.distance_m", &x)?;
        }
        if let Some(x) = take("link.alpha_db_per_m") {
            alpha_db_per_m = parse_scalar("link.alpha_db_per_m", &x)?;
        }
        if let Some(x) = take("link.responsivity_a_per_w") {
            responsivity = parse_scalar("link.responsivity_a_per_w", &x)?;
        }
        if let Some(x) = take("link.nep_w_per_sqrt_hz") {
            nep = parse_scalar("link.nep_w_per_sqrt_hz", &x)?;
        }
        if let Some(x) = take("link.r_rb") {
            link_r_rb = parse_scalar("link.r_rb", &x)?;
        }
        if let Some(x) = take("link.group_velocity_m_per_s") {
            v = parse_scalar("link.group_velocity_m_per_s", &x)?;
        }
        let link = LinkBudget::new(
            power_w,
            distance_m,
            alpha_db_per_m,
            responsivity,
            nep,
            link_r_rb,
            v,
        )
        .map_err(|e| format!("link: {e}"))?;

        let mut delta_f_hz = 25e9;
        let mut t_sw_s = 1e-5;
        let mut n_sw = 1u32;
        if let Some(x) = take("sweep.delta_f_hz") {
            delta_f_hz = parse_scalar("sweep.delta_f_hz", &x)?;
        }
        if let Some(x) = take("sweep.t_sw_s") {
            t_sw_s = parse_scalar("sweep.t_sw_s", &x)?;
        }
        if let Some(x) = take("sweep.n_sw") {
            n_sw = parse_scalar("sweep.n_sw", &x)?;
        }
        let sweep =
            SweepConfig::new(delta_f_hz, t_sw_s, n_sw).map_err(|e| format!("sweep: {e}"))?;

        let mut pigtail = PigtailSpec {
            length_m: 0.5,
            n_scatterers: 1000,
            r_rb: 8e-7,
        };
        let mut pigtail_seed = 1u64;
        if let Some(x) = take("pigtail.length_m") {
            pigtail.length_m = parse_scalar("pigtail.length_m", &x)?;
        }
        if let Some(x) = take("pigtail.n_scatterers") {
            pigtail.n_scatterers = parse_scalar("pigtail.n_scatterers", &x)?;
        }
        if let Some(x) = take("pigtail.r_rb") {
            pigtail.r_rb = parse_scalar("pigtail.r_rb", &x)?;
        }
        if let Some(x) = take("pigtail.seed") {
            pigtail_seed = parse_scalar("pigtail.seed", &x)?;
        }
        // Realizing once here surfaces bad pigtail parameters as config errors.
        pigtail
            .realize(pigtail_seed)
            .map_err(|e| format!("pigtail: {e}"))?;

        let registry_path = PathBuf::from(
            take("registry.path").unwrap_or_else(|| "registry.json".to_string()),
        );
        let verify_snr_db = match take("verify.snr_db") {
            Some(x) => Some(parse_scalar("verify.snr_db", &x)?),
            None => None,
        };

        let snr_times_s = match take("snr.times_s") {
            Some(x) => parse_list("snr.times_s", &x)?,
            None => vec![1e-5, 1e-4, 1e-3],
        };
        let snr_powers_w = match take("snr.powers_w") {
            Some(x) => parse_list("snr.powers_w", &x)?,
            None => vec![],
        };
        let snr_distances_m = match take("snr.distances_m") {
            Some(x) => parse_list("snr.distances_m", &x)?,
            None => vec![],
        };
        check_grid("snr.times_s", &snr_times_s)?;

        let reliability_snr_db = match take("reliability.snr_db") {
            Some(x) => parse_list("reliability.snr_db", &x)?,
            None => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        };
        let reliability_delta_f_hz = match take("reliability.delta_f_hz") {
            Some(x) => parse_list("reliability.delta_f_hz", &x)?,
            None => vec![10e9, 25e9, 50e9],
        };
        check_grid("reliability.snr_db", &reliability_snr_db)?;
        check_grid("reliability.delta_f_hz", &reliability_delta_f_hz)?;
        let reliability_trials = match take("reliability.trials") {
            Some(x) => parse_scalar("reliability.trials", &x)?,
            None => 50,
        };

        let plan_target_log10_wwi = match take("plan.target_log10_wwi") {
            Some(x) => parse_scalar("plan.target_log10_wwi", &x)?,
            None => -10.0,
        };
        let seed = match take("seed") {
            Some(x) => parse_scalar("seed", &x)?,
            None => 1,
        };

        if let Some(key) = map.keys().next() {
            return Err(format!("{key}: unknown key"));
        }

        Ok(RunConfig {
            link,
            sweep,
            pigtail,
            pigtail_seed,
            registry_path,
            verify_snr_db,
            snr_times_s,
            snr_powers_w,
            snr_distances_m,
            reliability_snr_db,
            reliability_delta_f_hz,
            reliability_trials,
            plan_target_log10_wwi,
            seed,
        })
    }
}
