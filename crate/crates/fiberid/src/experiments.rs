//! Monte-Carlo and semi-analytic experiment harness: SNR-vs-measure-time
//! curves, reliability-vs-SNR curves, and the empirical validation of the
//! flip-probability model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{hamming, wwi_vs_snr};
use crate::physics::{generate_pigtail, snr_estimate, LinkBudget, SweepConfig};
use crate::seed::{derive_seed, Stream};
use crate::sigproc::measure_signature_at_snr;

/// Pigtail drawing parameters; each Monte-Carlo trial realizes a fresh
/// pigtail from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PigtailSpec {
    pub length_m: f64,
    pub n_scatterers: usize,
    pub r_rb: f64,
}

impl PigtailSpec {
    pub fn realize(&self, seed: u64) -> Result<crate::physics::FiberPigtail> {
        generate_pigtail(seed, self.length_m, self.n_scatterers, self.r_rb)
    }
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "grid must be non-empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(name, "grid must be strictly increasing"));
    }
    Ok(())
}

/// Grid specification for the SNR-vs-measure-time curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCurveSpec {
    pub link: LinkBudget,
    pub delta_f_hz: f64,
    pub length_m: f64,
    pub measure_times_s: Vec<f64>,
    /// Launch powers to sweep; falls back to the link's power when empty.
    pub powers_w: Vec<f64>,
    /// Distances to sweep; falls back to the link's distance when empty.
    pub distances_m: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrPoint {
    pub power_w: f64,
    pub distance_m: f64,
    pub measure_time_s: f64,
    pub snr_db: f64,
}

/// Evaluate the SNR budget on a (power, distance, time) grid. The filter
/// bandwidth follows from the total measure time: B = 2 L dF / (v T).
pub fn snr_curve(spec: &SnrCurveSpec) -> Result<Vec<SnrPoint>> {
    spec.link.validate()?;
    check_grid("measure_times_s", &spec.measure_times_s)?;
    if !spec.powers_w.is_empty() {
        check_grid("powers_w", &spec.powers_w)?;
    }
    if !spec.distances_m.is_empty() {
        check_grid("distances_m", &spec.distances_m)?;
    }
    let powers = if spec.powers_w.is_empty() {
        vec![spec.link.power_w]
    } else {
        spec.powers_w.clone()
    };
    let distances = if spec.distances_m.is_empty() {
        vec![spec.link.distance_m]
    } else {
        spec.distances_m.clone()
    };
    let mut rows = Vec::new();
    for &power_w in &powers {
        for &distance_m in &distances {
            let mut link = spec.link;
            link.power_w = power_w;
            link.distance_m = distance_m;
            for &time_s in &spec.measure_times_s {
                let bandwidth =
                    2.0 * spec.length_m * spec.delta_f_hz / (link.group_velocity_m_per_s * time_s);
                let snr = snr_estimate(&link, bandwidth)?;
                rows.push(SnrPoint {
                    power_w,
                    distance_m,
                    measure_time_s: time_s,
                    snr_db: 10.0 * snr.log10(),
                });
            }
        }
    }
    Ok(rows)
}

/// Empirical flip fraction with a 95% pooled-binomial interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PFlipEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub flips: u64,
    pub total_bits: u64,
}

impl PFlipEstimate {
    pub fn pooled_sigma(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.total_bits as f64).sqrt()
    }
}

/// Measure the end-to-end bit-flip rate at a given in-band SNR: each trial
/// draws a fresh pigtail, measures it noisily, and compares against its own
/// noiseless signature, pooling all N * trials bit comparisons.
pub fn estimate_p_flip(
    pigtail: &PigtailSpec,
    sweep: &SweepConfig,
    link: &LinkBudget,
    snr_linear: f64,
    trials: u64,
    master_seed: u64,
) -> Result<PFlipEstimate> {
    if trials < 100 {
        return Err(Error::invalid("trials", "must be >= 100"));
    }
    link.validate()?;
    let v = link.group_velocity_m_per_s;
    let d = link.distance_m;
    let per_trial = |trial: u64| -> Result<(u64, u64)> {
        let fiber = pigtail.realize(derive_seed(master_seed, Stream::Pigtail, trial))?;
        let ideal = measure_signature_at_snr(&fiber, sweep, d, v, f64::INFINITY, None)?;
        let noisy = measure_signature_at_snr(
            &fiber,
            sweep,
            d,
            v,
            snr_linear,
            Some(derive_seed(master_seed, Stream::Noise, trial)),
        )?;
        Ok((hamming(&ideal, &noisy)? as u64, ideal.n_bits() as u64))
    };
    let (flips, total_bits) = (0..trials)
        .into_par_iter()
        .map(per_trial)
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let p_hat = flips as f64 / total_bits as f64;
    let half_width = 1.96 * (p_hat * (1.0 - p_hat) / total_bits as f64).sqrt();
    Ok(PFlipEstimate {
        p_hat,
        ci_low: (p_hat - half_width).max(0.0),
        ci_high: (p_hat + half_width).min(1.0),
        flips,
        total_bits,
    })
}

/// Grid specification for the reliability-vs-SNR curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySpec {
    pub snr_db_grid: Vec<f64>,
    pub delta_f_hz_grid: Vec<f64>,
    pub pigtail: PigtailSpec,
    pub t_sw_s: f64,
    pub group_velocity_m_per_s: f64,
    pub r_weight: f64,
    pub trials: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReliabilityPoint {
    pub snr_db: f64,
    pub delta_f_hz: f64,
    pub n_bits: usize,
    pub threshold: u32,
    pub log10_wwi: f64,
    /// Direct Monte-Carlo estimate; present only where the analytic WWI is
    /// within Monte-Carlo reach (> 10 / trials).
    pub mc_wwi: Option<f64>,
}

/// Semi-analytic WWI over an (SNR, sweep-span) grid, cross-checked by direct
/// Monte Carlo where the probability is large enough to count events.
pub fn reliability_curve(spec: &ReliabilitySpec) -> Result<Vec<ReliabilityPoint>> {
    check_grid("snr_db_grid", &spec.snr_db_grid)?;
    check_grid("delta_f_hz_grid", &spec.delta_f_hz_grid)?;
    if spec.trials < 1 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let mut rows = Vec::new();
    for &delta_f_hz in &spec.delta_f_hz_grid {
        for &snr_db in &spec.snr_db_grid {
            let snr = 10f64.powf(snr_db / 10.0);
            let model = wwi_vs_snr(
                snr,
                delta_f_hz,
                spec.pigtail.length_m,
                spec.group_velocity_m_per_s,
                spec.r_weight,
            )?;
            let mc_wwi = if model.wwi() > 10.0 / spec.trials as f64 {
                Some(monte_carlo_wwi(spec, delta_f_hz, snr, model.threshold)?)
            } else {
                None
            };
            rows.push(ReliabilityPoint {
                snr_db,
                delta_f_hz,
                n_bits: model.n_bits,
                threshold: model.threshold,
                log10_wwi: model.log10_wwi,
                mc_wwi,
            });
        }
    }
    Ok(rows)
}

fn monte_carlo_wwi(
    spec: &ReliabilitySpec,
    delta_f_hz: f64,
    snr_linear: f64,
    threshold: u32,
) -> Result<f64> {
    let sweep = SweepConfig::new(delta_f_hz, spec.t_sw_s, 1)?;
    let v = spec.group_velocity_m_per_s;
    // The SNR is imposed directly, so the interrogation distance only shifts
    // the band; measure at d = 0.
    let per_trial = |trial: u64| -> Result<(u64, u64)> {
        let genuine = spec
            .pigtail
            .realize(derive_seed(spec.master_seed, Stream::Pigtail, trial))?;
        let impostor = spec
            .pigtail
            .realize(derive_seed(spec.master_seed, Stream::Impostor, trial))?;
        let enrolled = measure_signature_at_snr(&genuine, &sweep, 0.0, v, f64::INFINITY, None)?;
        let noise_seed = derive_seed(spec.master_seed, Stream::Noise, trial);
        let genuine_read =
            measure_signature_at_snr(&genuine, &sweep, 0.0, v, snr_linear, Some(noise_seed))?;
        let impostor_read = measure_signature_at_snr(
            &impostor,
            &sweep,
            0.0,
            v,
            snr_linear,
            Some(noise_seed.wrapping_add(1)),
        )?;
        let false_neg = (hamming(&enrolled, &genuine_read)? > threshold) as u64;
        let false_pos = (hamming(&enrolled, &impostor_read)? <= threshold) as u64;
        Ok((false_pos, false_neg))
    };
    let (fp, fnr) = (0..spec.trials)
        .into_par_iter()
        .map(per_trial)
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let trials = spec.trials as f64;
    Ok(spec.r_weight * fp as f64 / trials + (1.0 - spec.r_weight) * fnr as f64 / trials)
}

/// Render floats with 17 significant digits so tables reproduce bit-exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn snr_curve_csv(rows: &[SnrPoint]) -> String {
    let mut out = String::from("power_w,distance_m,measure_time_s,snr_db\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(r.power_w),
            fmt_float(r.distance_m),
            fmt_float(r.measure_time_s),
            fmt_float(r.snr_db)
        ));
    }
    out
}

pub fn reliability_curve_csv(rows: &[ReliabilityPoint]) -> String {
    let mut out = String::from("snr_db,delta_f_hz,n_bits,threshold,log10_wwi,mc_wwi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_float(r.snr_db),
            fmt_float(r.delta_f_hz),
            r.n_bits,
            r.threshold,
            fmt_float(r.log10_wwi),
            r.mc_wwi.map(fmt_float).unwrap_or_default()
        ));
    }
    out
}

/// Sidecar metadata recorded next to every CSV: the full spec plus the tool
/// version.
pub fn sidecar_metadata<S: Serialize>(spec: &S) -> Result<String> {
    let doc = serde_json::json!({
        "tool": "fiberid",
        "version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}
