//! Band extraction and 1-bit quantization: from a detected trace to the
//! N-bit signature.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::physics::{
    self, average_traces, beat_frequency, inject_noise, rbp_bandwidth, signature_length,
    synthesize_trace, FiberPigtail, LinkBudget, SweepConfig, Trace,
};
use crate::seed;

/// Descriptive fields carried alongside the raw bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMeta {
    pub delta_f_hz: f64,
    pub length_m: f64,
    pub distance_hint_m: Option<f64>,
    pub label: String,
}

/// The N-bit identity token. Bit i corresponds to the i-th retained sample;
/// bits are packed 8 per byte, first bit in the most significant position.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    bits: Vec<u8>,
    n_bits: usize,
    pub meta: SignatureMeta,
}

impl Signature {
    pub fn from_bools(bits: &[bool], meta: SignatureMeta) -> Result<Self> {
        if bits.len() < physics::MIN_SIGNATURE_BITS {
            return Err(Error::TooFewSamples {
                n: bits.len(),
                min: physics::MIN_SIGNATURE_BITS,
            });
        }
        let mut packed = vec![0u8; (bits.len() + 7) / 8];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                packed[i / 8] |= 0x80 >> (i % 8);
            }
        }
        Ok(Signature {
            bits: packed,
            n_bits: bits.len(),
            meta,
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.n_bits);
        self.bits[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn packed_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn complement(&self) -> Signature {
        let mut bits: Vec<u8> = self.bits.iter().map(|b| !b).collect();
        let rem = self.n_bits % 8;
        if rem != 0 {
            // Keep the padding bits of the final byte zero.
            *bits.last_mut().unwrap() &= 0xffu8 << (8 - rem);
        }
        Signature {
            bits,
            n_bits: self.n_bits,
            meta: self.meta.clone(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Signature {
        self.meta.label = label.into();
        self
    }

    pub fn bits_hex(&self) -> String {
        let mut s = String::with_capacity(self.bits.len() * 2);
        for b in &self.bits {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(
        hex: &str,
        n_bits: usize,
        meta: SignatureMeta,
    ) -> Result<Signature> {
        let hex = hex.trim();
        if hex.len() % 2 != 0 || hex.len() / 2 != (n_bits + 7) / 8 {
            return Err(Error::Format(format!(
                "hex payload of {} chars does not match n_bits={}",
                hex.len(),
                n_bits
            )));
        }
        let mut bits = Vec::with_capacity(hex.len() / 2);
        for i in (0..hex.len()).step_by(2) {
            let byte = u8::from_str_radix(&hex[i..i + 2], 16)
                .map_err(|e| Error::Format(format!("bad hex digit: {e}")))?;
            bits.push(byte);
        }
        let rem = n_bits % 8;
        if rem != 0 && bits.last().map_or(false, |b| b & (0xffu8 >> rem) != 0) {
            return Err(Error::Format("nonzero padding bits".into()));
        }
        Ok(Signature { bits, n_bits, meta })
    }

    /// Serialize in the v1 signature file format.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "FPRINT v1")?;
        writeln!(w, "n_bits={}", self.n_bits)?;
        writeln!(w, "delta_f_hz={}", self.meta.delta_f_hz)?;
        writeln!(w, "length_m={}", self.meta.length_m)?;
        writeln!(w, "label={}", self.meta.label)?;
        writeln!(w, "{}", self.bits_hex())?;
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("format is ASCII")
    }

    pub fn read_from(r: impl BufRead) -> Result<Signature> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {what} line")))?
                .map_err(Error::Io)
        };
        let magic = next("magic")?;
        if magic.trim() != "FPRINT v1" {
            return Err(Error::Format(format!("bad magic line: {magic:?}")));
        }
        let field = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| Error::Format(format!("expected {key}=..., got {line:?}")))
        };
        let n_bits: usize = field(next("n_bits")?, "n_bits")?
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad n_bits: {e}")))?;
        let delta_f_hz: f64 = field(next("delta_f_hz")?, "delta_f_hz")?
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad delta_f_hz: {e}")))?;
        let length_m: f64 = field(next("length_m")?, "length_m")?
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad length_m: {e}")))?;
        let label = field(next("label")?, "label")?;
        let hex = next("bits")?;
        Signature::from_hex(
            &hex,
            n_bits,
            SignatureMeta {
                delta_f_hz,
                length_m,
                distance_hint_m: None,
                label,
            },
        )
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Signature> {
        let f = std::fs::File::open(path)?;
        Signature::read_from(std::io::BufReader::new(f))
    }
}

/// Number of occupied band bins for a signature of n bits (output rate 2B).
fn band_bins(n_bits: usize) -> usize {
    n_bits / 2
}

/// Select the pigtail's beat band [gamma 2d/v, gamma 2(d+L)/v] with a
/// discrete brick-wall mask, shift it to baseband, and resample to N complex
/// samples at rate 2B.
pub fn extract_band(
    trace: &Trace,
    sweep: &SweepConfig,
    distance_m: f64,
    length_m: f64,
    v_m_per_s: f64,
) -> Result<Vec<Complex64>> {
    let gamma = sweep.sweep_rate_hz_per_s();
    let bandwidth = rbp_bandwidth(gamma, length_m, v_m_per_s);
    if bandwidth > sweep.delta_f_hz * (1.0 + 1e-12) {
        return Err(Error::BandwidthExceedsSpan {
            bandwidth_hz: bandwidth,
            delta_f_hz: sweep.delta_f_hz,
        });
    }
    let n_bits = signature_length(sweep.delta_f_hz, length_m, v_m_per_s)?;
    let k_bins = band_bins(n_bits);
    let f_lo = beat_frequency(gamma, distance_m, 0.0, v_m_per_s);
    let f_hi = beat_frequency(gamma, distance_m, length_m, v_m_per_s);
    let m = trace.samples.len();
    let m_lo = (f_lo * trace.t_sw_s).round() as usize;
    if m_lo + k_bins > m / 2 + 1 {
        return Err(Error::BandOutOfRange {
            f_lo_hz: f_lo,
            f_hi_hz: f_hi,
            nyquist_hz: trace.sample_rate_hz / 2.0,
        });
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut spectrum: Vec<Complex64> = trace
        .samples
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    fft.process(&mut spectrum);

    // Band bins become the low bins of an N-point spectrum: the shift to
    // baseband and the resampling to rate 2B in one step.
    let mut baseband = vec![Complex64::new(0.0, 0.0); n_bits];
    let scale = 2.0 / m as f64;
    for j in 0..k_bins {
        baseband[j] = spectrum[m_lo + j] * scale;
    }
    let ifft = planner.plan_fft_inverse(n_bits);
    ifft.process(&mut baseband);
    Ok(baseband)
}

/// 2-level quantization of the first `n_bits` real parts: bit = 1 iff >= 0.
pub fn quantize_to_signature(
    baseband: &[Complex64],
    n_bits: usize,
    meta: SignatureMeta,
) -> Result<Signature> {
    if baseband.len() < n_bits {
        return Err(Error::TooShortInput {
            got: baseband.len(),
            need: n_bits,
        });
    }
    let bits: Vec<bool> = baseband[..n_bits].iter().map(|z| z.re >= 0.0).collect();
    Signature::from_bools(&bits, meta)
}

/// End-to-end measurement at an explicit in-band SNR (the SNR the extracted
/// band sees after filtering). `rng_seed = None` gives the noiseless
/// enrollment signature. With `n_sw > 1` the target SNR applies per sweep and
/// averaging raises it by the sweep count.
pub fn measure_signature_at_snr(
    pigtail: &FiberPigtail,
    sweep: &SweepConfig,
    distance_m: f64,
    v_m_per_s: f64,
    snr_linear: f64,
    rng_seed: Option<u64>,
) -> Result<Signature> {
    let n_bits = signature_length(sweep.delta_f_hz, pigtail.length_m, v_m_per_s)?;
    let gamma = sweep.sweep_rate_hz_per_s();
    let f_hi = beat_frequency(gamma, distance_m, pigtail.length_m, v_m_per_s);
    // Smallest sample count that satisfies Nyquist and keeps the trace
    // invariant exact.
    let m = (2.0 * f_hi * sweep.t_sw_s).ceil().max(n_bits as f64) as usize;
    let sample_rate_hz = m as f64 / sweep.t_sw_s;
    let clean = synthesize_trace(pigtail, sweep, distance_m, v_m_per_s, sample_rate_hz)?;

    let detected = match rng_seed {
        Some(seed) if snr_linear.is_finite() => {
            // The injected noise is white over the full sampled band; only the
            // fraction falling inside the extraction band survives filtering.
            // Scale the injection level so the band comes out at the target.
            let k_bins = band_bins(n_bits);
            let snr_inject = snr_linear * 2.0 * k_bins as f64 / m as f64;
            let sweeps: Vec<Trace> = (0..sweep.n_sw)
                .map(|i| inject_noise(&clean, snr_inject, seed::derive_sub_seed(seed, i as u64)))
                .collect::<Result<_>>()?;
            average_traces(&sweeps)?
        }
        _ => clean,
    };

    let baseband = extract_band(&detected, sweep, distance_m, pigtail.length_m, v_m_per_s)?;
    quantize_to_signature(
        &baseband,
        n_bits,
        SignatureMeta {
            delta_f_hz: sweep.delta_f_hz,
            length_m: pigtail.length_m,
            distance_hint_m: Some(distance_m),
            label: String::new(),
        },
    )
}

/// End-to-end measurement with the SNR taken from the link budget.
pub fn measure_signature(
    pigtail: &FiberPigtail,
    sweep: &SweepConfig,
    link: &LinkBudget,
    rng_seed: Option<u64>,
) -> Result<Signature> {
    let gamma = sweep.sweep_rate_hz_per_s();
    let bandwidth = rbp_bandwidth(gamma, pigtail.length_m, link.group_velocity_m_per_s);
    let snr = physics::snr_estimate(link, bandwidth)?;
    measure_signature_at_snr(
        pigtail,
        sweep,
        link.distance_m,
        link.group_velocity_m_per_s,
        snr,
        rng_seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::hamming;
    use crate::physics::{generate_pigtail, Scatterer};
    use proptest::prelude::*;

    fn meta() -> SignatureMeta {
        SignatureMeta {
            delta_f_hz: 10e9,
            length_m: 0.5,
            distance_hint_m: None,
            label: "t".into(),
        }
    }

    fn tone_pigtail(position_m: f64, length_m: f64) -> FiberPigtail {
        FiberPigtail {
            length_m,
            scatterers: vec![Scatterer {
                position_m,
                reflectivity: Complex64::new(1e-4, 0.0),
            }],
            seed: 0,
            r_rb: 1e-8,
        }
    }

    #[test]
    fn extract_band_locates_single_tone() {
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let (d, v) = (20.0, 2e8);
        let pigtail = tone_pigtail(0.25, 0.5);
        let gamma = sweep.sweep_rate_hz_per_s();
        let f_hi = beat_frequency(gamma, d, 0.5, v);
        let fs = 2.5 * f_hi;
        let trace = synthesize_trace(&pigtail, &sweep, d, v, fs).unwrap();
        let bb = extract_band(&trace, &sweep, d, 0.5, v).unwrap();

        // Tone should sit at gamma*2*0.25/v above the band edge.
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(bb.len());
        let mut buf = bb.clone();
        fft.process(&mut buf);
        let peak = (0..buf.len())
            .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
            .unwrap();
        let bin_hz = 1.0 / trace.t_sw_s;
        let expected = beat_frequency(gamma, 0.0, 0.25, v);
        assert!(
            ((peak as f64 * bin_hz) - expected).abs() <= bin_hz,
            "peak bin {peak} ({} Hz) vs expected {expected} Hz",
            peak as f64 * bin_hz
        );
    }

    #[test]
    fn extract_band_rejects_out_of_band_reflector() {
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let (v, length) = (2e8, 0.5);
        let d = 20.0;
        let gamma = sweep.sweep_rate_hz_per_s();
        let fs = 2.5 * beat_frequency(gamma, d, length, v);

        let in_band = tone_pigtail(0.25, length);
        let trace_in = synthesize_trace(&in_band, &sweep, d, v, fs).unwrap();
        let bb_in = extract_band(&trace_in, &sweep, d, length, v).unwrap();

        // A reflector 10 m before the pigtail: synthesize it as a pigtail at
        // distance d-10 and extract the band belonging to [d, d+L].
        let outside = tone_pigtail(0.25, length);
        let trace_out = synthesize_trace(&outside, &sweep, d - 10.0, v, fs).unwrap();
        let trace_out = Trace::new(
            trace_out.samples,
            fs,
            sweep.t_sw_s,
            f64::INFINITY,
        )
        .unwrap();
        let bb_out = extract_band(&trace_out, &sweep, d, length, v).unwrap();

        let power = |bb: &[Complex64]| bb.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!(power(&bb_out) < 0.01 * power(&bb_in));
    }

    #[test]
    fn extract_band_zero_in_zero_out() {
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let trace = Trace::new(vec![0.0; 200], 2e7, 1e-5, f64::INFINITY).unwrap();
        let bb = extract_band(&trace, &sweep, 0.0, 0.5, 2e8).unwrap();
        assert!(bb.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn extract_band_errors() {
        // B > delta F, i.e. 2L/v > t_sw.
        let sweep = SweepConfig::new(10e9, 1e-9, 1).unwrap();
        let trace = Trace::new(vec![0.0; 100], 1e11, 1e-9, f64::INFINITY).unwrap();
        assert!(matches!(
            extract_band(&trace, &sweep, 0.0, 0.5, 2e8),
            Err(Error::BandwidthExceedsSpan { .. })
        ));
        // Band above Nyquist of the trace.
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let trace = Trace::new(vec![0.0; 100], 1e7, 1e-5, f64::INFINITY).unwrap();
        assert!(matches!(
            extract_band(&trace, &sweep, 1000.0, 0.5, 2e8),
            Err(Error::BandOutOfRange { .. })
        ));
    }

    #[test]
    fn quantize_sign_rule() {
        let vals: Vec<Complex64> = [0.3, -0.2, 0.0, -5.1, 1.0, 1.0, -1.0, 1.0]
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let sig = quantize_to_signature(&vals, 8, meta()).unwrap();
        let bits: Vec<bool> = (0..8).map(|i| sig.bit(i)).collect();
        assert_eq!(
            bits,
            vec![true, false, true, false, true, true, false, true]
        );
        // Sign antisymmetry away from the 0.0 tie (which maps to 1 either way).
        let nonzero: Vec<Complex64> = vals
            .iter()
            .map(|z| if z.re == 0.0 { Complex64::new(0.5, 0.0) } else { *z })
            .collect();
        let negated: Vec<Complex64> = nonzero.iter().map(|z| -z).collect();
        let sig_nz = quantize_to_signature(&nonzero, 8, meta()).unwrap();
        let sig_neg = quantize_to_signature(&negated, 8, meta()).unwrap();
        assert_eq!(sig_neg, sig_nz.complement());
        assert!(quantize_to_signature(&vals, 9, meta()).is_err());
    }

    #[test]
    fn noiseless_measurement_idempotent() {
        let pigtail = generate_pigtail(11, 0.5, 300, 8e-7).unwrap();
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let a = measure_signature_at_snr(&pigtail, &sweep, 0.0, 2e8, f64::INFINITY, None).unwrap();
        let b = measure_signature_at_snr(&pigtail, &sweep, 0.0, 2e8, f64::INFINITY, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(hamming(&a, &b).unwrap(), 0);
        assert_eq!(a.n_bits(), 100);
    }

    #[test]
    fn distinct_pigtails_disagree_about_half() {
        let sweep = SweepConfig::new(50e9, 1e-5, 1).unwrap();
        let a_pig = generate_pigtail(100, 0.5, 300, 8e-7).unwrap();
        let b_pig = generate_pigtail(200, 0.5, 300, 8e-7).unwrap();
        let a = measure_signature_at_snr(&a_pig, &sweep, 0.0, 2e8, f64::INFINITY, None).unwrap();
        let b = measure_signature_at_snr(&b_pig, &sweep, 0.0, 2e8, f64::INFINITY, None).unwrap();
        let d = hamming(&a, &b).unwrap();
        // 250 +/- 3 sqrt(500 * 0.25)
        assert!((216..=284).contains(&(d as usize)), "distance {d}");
    }

    #[test]
    fn noisy_measurement_close_to_enrollment_at_high_snr() {
        let pigtail = generate_pigtail(42, 0.5, 300, 8e-7).unwrap();
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let ideal =
            measure_signature_at_snr(&pigtail, &sweep, 0.0, 2e8, f64::INFINITY, None).unwrap();
        let mut far = 0;
        let trials = 200;
        for s in 0..trials {
            let noisy =
                measure_signature_at_snr(&pigtail, &sweep, 0.0, 2e8, 1000.0, Some(s)).unwrap();
            if hamming(&ideal, &noisy).unwrap() > 10 {
                far += 1;
            }
        }
        assert!(far <= trials / 100, "{far}/{trials} beyond distance 10");
    }

    #[test]
    fn intra_distance_shrinks_with_snr() {
        let pigtail = generate_pigtail(9, 0.5, 300, 8e-7).unwrap();
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let ideal =
            measure_signature_at_snr(&pigtail, &sweep, 0.0, 2e8, f64::INFINITY, None).unwrap();
        let mean_dist = |snr_db: f64| {
            let snr = 10f64.powf(snr_db / 10.0);
            let trials = 100;
            (0..trials)
                .map(|s| {
                    let noisy =
                        measure_signature_at_snr(&pigtail, &sweep, 0.0, 2e8, snr, Some(s)).unwrap();
                    hamming(&ideal, &noisy).unwrap() as f64
                })
                .sum::<f64>()
                / trials as f64
        };
        let d3 = mean_dist(3.0);
        let d10 = mean_dist(10.0);
        let d20 = mean_dist(20.0);
        let d30 = mean_dist(30.0);
        assert!(d3 > d10 && d10 > d20 && d20 > d30, "{d3} {d10} {d20} {d30}");
    }

    #[test]
    fn file_format_round_trip() {
        let pigtail = generate_pigtail(11, 0.5, 100, 8e-7).unwrap();
        let sweep = SweepConfig::new(10e9, 1e-5, 1).unwrap();
        let sig = measure_signature_at_snr(&pigtail, &sweep, 0.0, 2e8, f64::INFINITY, None)
            .unwrap()
            .with_label("bob-01");
        let text = sig.to_file_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "FPRINT v1");
        assert_eq!(lines[1], "n_bits=100");
        assert_eq!(lines[2], "delta_f_hz=10000000000");
        assert_eq!(lines[3], "length_m=0.5");
        assert_eq!(lines[4], "label=bob-01");
        assert!(lines[5].chars().all(|c| c.is_ascii_hexdigit() && !c.is_uppercase()));
        assert_eq!(lines[5].len(), 26);

        let parsed = Signature::read_from(text.as_bytes()).unwrap();
        assert_eq!(parsed.packed_bytes(), sig.packed_bytes());
        assert_eq!(parsed.n_bits(), sig.n_bits());
        assert_eq!(parsed.meta.label, "bob-01");
    }

    #[test]
    fn file_format_rejects_garbage() {
        assert!(Signature::read_from("nope".as_bytes()).is_err());
        let bad = "FPRINT v1\nn_bits=100\ndelta_f_hz=1e10\nlength_m=0.5\nlabel=x\nzz\n";
        assert!(Signature::read_from(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(bits in proptest::collection::vec(any::<bool>(), 8..200)) {
            let sig = Signature::from_bools(&bits, meta()).unwrap();
            let back: Vec<bool> = (0..sig.n_bits()).map(|i| sig.bit(i)).collect();
            prop_assert_eq!(back, bits);
            let hex = sig.bits_hex();
            let parsed = Signature::from_hex(&hex, sig.n_bits(), meta()).unwrap();
            prop_assert_eq!(parsed.packed_bytes(), sig.packed_bytes());
        }

        #[test]
        fn complement_is_involution(bits in proptest::collection::vec(any::<bool>(), 8..64)) {
            let sig = Signature::from_bools(&bits, meta()).unwrap();
            prop_assert_eq!(sig.complement().complement(), sig);
        }
    }
}
