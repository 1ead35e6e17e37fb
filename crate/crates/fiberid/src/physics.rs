//! Fiber PUF generation, beat-signal synthesis and the Eq.-style SNR budget
//! of the coherent OFDR interrogation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

pub const VACUUM_LIGHT_SPEED_M_PER_S: f64 = 299_792_458.0;
pub const ELECTRON_CHARGE_C: f64 = 1.602_176_634e-19;

/// Group velocity in standard single-mode fiber (n_g = 1.468).
pub fn default_group_velocity() -> f64 {
    VACUUM_LIGHT_SPEED_M_PER_S / 1.468
}

/// Linear frequency-sweep parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepConfig {
    pub delta_f_hz: f64,
    pub t_sw_s: f64,
    pub n_sw: u32,
}

impl SweepConfig {
    pub fn new(delta_f_hz: f64, t_sw_s: f64, n_sw: u32) -> Result<Self> {
        if !(delta_f_hz > 0.0) {
            return Err(Error::invalid("delta_f_hz", "must be > 0"));
        }
        if !(t_sw_s > 0.0) {
            return Err(Error::invalid("t_sw_s", "must be > 0"));
        }
        if n_sw < 1 {
            return Err(Error::invalid("n_sw", "must be >= 1"));
        }
        Ok(SweepConfig {
            delta_f_hz,
            t_sw_s,
            n_sw,
        })
    }

    /// Sweep rate in Hz/s. Always derived, never stored.
    pub fn sweep_rate_hz_per_s(&self) -> f64 {
        self.delta_f_hz / self.t_sw_s
    }
}

/// Optical/electrical link parameters feeding the SNR budget.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkBudget {
    pub power_w: f64,
    pub distance_m: f64,
    pub alpha_db_per_m: f64,
    pub responsivity_a_per_w: f64,
    pub nep_w_per_sqrt_hz: f64,
    /// Total pigtail reflectivity, dimensionless, in (0, 1).
    pub r_rb: f64,
    pub electron_charge_c: f64,
    pub group_velocity_m_per_s: f64,
}

impl LinkBudget {
    pub fn new(
        power_w: f64,
        distance_m: f64,
        alpha_db_per_m: f64,
        responsivity_a_per_w: f64,
        nep_w_per_sqrt_hz: f64,
        r_rb: f64,
        group_velocity_m_per_s: f64,
    ) -> Result<Self> {
        let link = LinkBudget {
            power_w,
            distance_m,
            alpha_db_per_m,
            responsivity_a_per_w,
            nep_w_per_sqrt_hz,
            r_rb,
            electron_charge_c: ELECTRON_CHARGE_C,
            group_velocity_m_per_s,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_w > 0.0) {
            return Err(Error::invalid("power_w", "must be > 0"));
        }
        if !(self.distance_m >= 0.0) {
            return Err(Error::invalid("distance_m", "must be >= 0"));
        }
        if !(self.alpha_db_per_m > 0.0) {
            return Err(Error::invalid("alpha_db_per_m", "must be > 0"));
        }
        if !(self.responsivity_a_per_w > 0.0) {
            return Err(Error::invalid("responsivity_a_per_w", "must be > 0"));
        }
        if !(self.nep_w_per_sqrt_hz >= 0.0) {
            return Err(Error::invalid("nep_w_per_sqrt_hz", "must be >= 0"));
        }
        if !(self.r_rb > 0.0 && self.r_rb < 1.0) {
            return Err(Error::invalid("r_rb", "must lie in (0, 1)"));
        }
        if !(self.group_velocity_m_per_s > 0.0) {
            return Err(Error::invalid("group_velocity_m_per_s", "must be > 0"));
        }
        Ok(())
    }
}

/// One discrete Rayleigh reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position_m: f64,
    pub reflectivity: Complex64,
}

/// A fiber pigtail modeled as a seeded set of discrete scatterers; the PUF.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPigtail {
    pub length_m: f64,
    pub scatterers: Vec<Scatterer>,
    pub seed: u64,
    pub r_rb: f64,
}

impl FiberPigtail {
    pub fn total_reflectivity(&self) -> f64 {
        self.scatterers
            .iter()
            .map(|s| s.reflectivity.norm_sqr())
            .sum()
    }
}

/// Draw a pigtail: positions i.i.d. uniform on [0, L], reflectivities i.i.d.
/// circular complex Gaussian, rescaled so the squared magnitudes sum to
/// `r_rb`. Deterministic in `seed`.
pub fn generate_pigtail(
    seed: u64,
    length_m: f64,
    n_scatterers: usize,
    r_rb: f64,
) -> Result<FiberPigtail> {
    if !(length_m > 0.0) {
        return Err(Error::invalid("length_m", "must be > 0"));
    }
    if n_scatterers == 0 {
        return Err(Error::invalid("n_scatterers", "must be >= 1"));
    }
    if !(r_rb > 0.0 && r_rb < 1.0) {
        return Err(Error::invalid("r_rb", "must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scatterers: Vec<Scatterer> = (0..n_scatterers)
        .map(|_| {
            let position_m = rng.gen_range(0.0..=length_m);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Scatterer {
                position_m,
                reflectivity: Complex64::new(re, im),
            }
        })
        .collect();
    let total: f64 = scatterers.iter().map(|s| s.reflectivity.norm_sqr()).sum();
    let scale = (r_rb / total).sqrt();
    for s in &mut scatterers {
        s.reflectivity *= scale;
    }
    Ok(FiberPigtail {
        length_m,
        scatterers,
        seed,
        r_rb,
    })
}

/// Beat frequency of a reflector at pigtail position `position_m`, a distance
/// `distance_m` away: gamma * 2 (d + p) / v.
pub fn beat_frequency(gamma_hz_per_s: f64, distance_m: f64, position_m: f64, v_m_per_s: f64) -> f64 {
    gamma_hz_per_s * 2.0 * (distance_m + position_m) / v_m_per_s
}

/// Bandwidth spanned by the pigtail's backscatter: B = 2 L gamma / v.
pub fn rbp_bandwidth(gamma_hz_per_s: f64, length_m: f64, v_m_per_s: f64) -> f64 {
    2.0 * length_m * gamma_hz_per_s / v_m_per_s
}

/// Minimum usable signature length.
pub const MIN_SIGNATURE_BITS: usize = 8;

/// Number of signature samples: N = 4 dF L / v, rounded to nearest.
pub fn signature_length(delta_f_hz: f64, length_m: f64, v_m_per_s: f64) -> Result<usize> {
    let n = (4.0 * delta_f_hz * length_m / v_m_per_s).round();
    if !(n >= MIN_SIGNATURE_BITS as f64) {
        return Err(Error::TooFewSamples {
            n: n.max(0.0) as usize,
            min: MIN_SIGNATURE_BITS,
        });
    }
    Ok(n as usize)
}

/// Linear SNR of the detected backscatter within bandwidth `bandwidth_hz`:
/// (R P^2 exp(-2 a d) R_RB / 2) / (q P B + R NEP^2 B), with the dB/m
/// attenuation converted to nepers.
pub fn snr_estimate(link: &LinkBudget, bandwidth_hz: f64) -> Result<f64> {
    link.validate()?;
    if !(bandwidth_hz > 0.0) {
        return Err(Error::invalid("bandwidth_hz", "must be > 0"));
    }
    let alpha_np = link.alpha_db_per_m * std::f64::consts::LN_10 / 10.0;
    let numerator = link.responsivity_a_per_w
        * link.power_w
        * link.power_w
        * (-2.0 * alpha_np * link.distance_m).exp()
        * link.r_rb
        / 2.0;
    let denominator = link.electron_charge_c * link.power_w * bandwidth_hz
        + link.responsivity_a_per_w
            * link.nep_w_per_sqrt_hz
            * link.nep_w_per_sqrt_hz
            * bandwidth_hz;
    Ok(numerator / denominator)
}

/// Total interrogation time: N_sw sweeps of T_sw each.
pub fn effective_measure_time(sweep: &SweepConfig) -> f64 {
    sweep.n_sw as f64 * sweep.t_sw_s
}

/// A sampled photocurrent record covering one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub t_sw_s: f64,
    /// SNR at which noise was injected; infinity when noiseless.
    pub snr_linear: f64,
}

impl Trace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, t_sw_s: f64, snr_linear: f64) -> Result<Self> {
        let expected = (sample_rate_hz * t_sw_s).round() as usize;
        if samples.len() != expected {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "{} samples but rate*t_sw rounds to {}",
                    samples.len(),
                    expected
                ),
            });
        }
        Ok(Trace {
            samples,
            sample_rate_hz,
            t_sw_s,
            snr_linear,
        })
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_linear.is_infinite()
    }
}

/// Synthesize the noiseless dechirped beat photocurrent of a pigtail:
/// sum over scatterers of |r_k| cos(2 pi f_k t + arg r_k), normalized to unit
/// mean power.
pub fn synthesize_trace(
    pigtail: &FiberPigtail,
    sweep: &SweepConfig,
    distance_m: f64,
    v_m_per_s: f64,
    sample_rate_hz: f64,
) -> Result<Trace> {
    if !(distance_m >= 0.0) {
        return Err(Error::invalid("distance_m", "must be >= 0"));
    }
    if !(v_m_per_s > 0.0) {
        return Err(Error::invalid("v_m_per_s", "must be > 0"));
    }
    let delay_s = 2.0 * (distance_m + pigtail.length_m) / v_m_per_s;
    if delay_s > sweep.t_sw_s {
        return Err(Error::SweepTimeConstraint {
            delay_s,
            t_sw_s: sweep.t_sw_s,
        });
    }
    let gamma = sweep.sweep_rate_hz_per_s();
    let f_max = beat_frequency(gamma, distance_m, pigtail.length_m, v_m_per_s);
    if sample_rate_hz < 2.0 * f_max {
        return Err(Error::Aliasing {
            rate_hz: sample_rate_hz,
            required_hz: 2.0 * f_max,
        });
    }
    let n_samples = (sample_rate_hz * sweep.t_sw_s).round() as usize;
    let tones: Vec<(f64, f64, f64)> = pigtail
        .scatterers
        .iter()
        .map(|s| {
            let f = beat_frequency(gamma, distance_m, s.position_m, v_m_per_s);
            (
                s.reflectivity.norm(),
                2.0 * std::f64::consts::PI * f / sample_rate_hz,
                s.reflectivity.arg(),
            )
        })
        .collect();
    let mut samples = vec![0.0f64; n_samples];
    for (amp, omega, phi) in &tones {
        for (i, y) in samples.iter_mut().enumerate() {
            *y += amp * (omega * i as f64 + phi).cos();
        }
    }
    let power = samples.iter().map(|x| x * x).sum::<f64>() / n_samples.max(1) as f64;
    if power > 0.0 {
        let scale = power.sqrt().recip();
        for y in &mut samples {
            *y *= scale;
        }
    }
    Trace::new(samples, sample_rate_hz, sweep.t_sw_s, f64::INFINITY)
}

/// Add white Gaussian noise with variance (mean signal power) / snr_linear.
/// An infinite target is the noiseless sentinel and returns the input as is.
pub fn inject_noise(trace: &Trace, snr_linear: f64, rng_seed: u64) -> Result<Trace> {
    if snr_linear.is_infinite() {
        return Ok(trace.clone());
    }
    if !(snr_linear > 0.0) {
        return Err(Error::invalid("snr_linear", "must be > 0"));
    }
    let sigma = (trace.mean_power() / snr_linear).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("snr_linear", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let samples = trace
        .samples
        .iter()
        .map(|x| x + normal.sample(&mut rng))
        .collect();
    Trace::new(samples, trace.sample_rate_hz, trace.t_sw_s, snr_linear)
}

/// Element-wise mean of repeated sweeps; noise variance drops by the count.
pub fn average_traces(traces: &[Trace]) -> Result<Trace> {
    let first = traces.first().ok_or(Error::ShapeMismatch {
        reason: "empty trace list".into(),
    })?;
    for t in traces {
        if t.samples.len() != first.samples.len()
            || t.sample_rate_hz != first.sample_rate_hz
            || t.t_sw_s != first.t_sw_s
        {
            return Err(Error::ShapeMismatch {
                reason: "traces differ in length, rate or sweep time".into(),
            });
        }
    }
    let n = traces.len() as f64;
    let mut samples = vec![0.0f64; first.samples.len()];
    for t in traces {
        for (acc, x) in samples.iter_mut().zip(&t.samples) {
            *acc += x;
        }
    }
    for acc in &mut samples {
        *acc /= n;
    }
    let snr = if traces.iter().all(|t| t.snr_linear == first.snr_linear) {
        first.snr_linear * n
    } else {
        f64::NAN
    };
    Trace::new(samples, first.sample_rate_hz, first.t_sw_s, snr)
}
