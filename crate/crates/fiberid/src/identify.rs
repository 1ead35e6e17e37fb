//! Decision layer: Hamming comparison, the SNR-to-bit-flip bridge, log-domain
//! binomial tails, threshold calibration equalizing false positive and false
//! negative, and the enrollment registry.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::physics::signature_length;
use crate::sigproc::{Signature, SignatureMeta};

const LN_10: f64 = std::f64::consts::LN_10;

/// Count of differing bit positions.
pub fn hamming(a: &Signature, b: &Signature) -> Result<u32> {
    if a.n_bits() != b.n_bits() {
        return Err(Error::LengthMismatch {
            a: a.n_bits(),
            b: b.n_bits(),
        });
    }
    Ok(a.packed_bytes()
        .iter()
        .zip(b.packed_bytes())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

/// Probability that additive Gaussian noise of relative power 1/SNR flips the
/// sign of a zero-mean Gaussian signal sample:
/// p = 1/2 - arctan(sqrt(SNR)) / pi.
pub fn p_flip_from_snr(snr_linear: f64) -> Result<f64> {
    if !(snr_linear >= 0.0) {
        return Err(Error::invalid("snr_linear", "must be >= 0"));
    }
    if snr_linear.is_infinite() {
        return Ok(0.0);
    }
    Ok(0.5 - snr_linear.sqrt().atan() / std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    Lower,
    Upper,
}

/// log10 of P(X <= t) (Lower) or P(X > t) (Upper) for X ~ Binomial(n, p),
/// summed in the log domain. Returns -inf for an empty tail.
pub fn binomial_tail_log(n: u64, p: f64, t: u64, side: TailSide) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", "must lie in [0, 1]"));
    }
    if t > n {
        return Err(Error::invalid("t", format!("must be <= n = {n}")));
    }
    let range = match side {
        TailSide::Lower => 0..=t,
        TailSide::Upper => (t + 1)..=n,
    };
    if range.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    // Degenerate p: a single outcome carries all mass.
    if p == 0.0 {
        let hit = match side {
            TailSide::Lower => true, // k = 0 is always included
            TailSide::Upper => false,
        };
        return Ok(if hit { 0.0 } else { f64::NEG_INFINITY });
    }
    if p == 1.0 {
        let hit = match side {
            TailSide::Lower => t == n,
            TailSide::Upper => t < n,
        };
        return Ok(if hit { 0.0 } else { f64::NEG_INFINITY });
    }

    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let ln_terms: Vec<f64> = range
        .map(|k| {
            ln_n_fact - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
                + k as f64 * ln_p
                + (n - k) as f64 * ln_q
        })
        .collect();
    let max = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = ln_terms.iter().map(|&x| (x - max).exp()).sum();
    // Clamp the rounding of a complete tail: log10 of a probability is <= 0.
    Ok(((max + sum.ln()) / LN_10).min(0.0))
}

/// log10(10^a + 10^b).
fn log10_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (1.0 + 10f64.powf(lo - hi)).log10()
}

/// Calibrated operating point of the Hamming decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub n_bits: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub r_weight: f64,
    /// Accept iff distance <= threshold.
    pub threshold: u32,
    pub log10_wwi: f64,
    /// True when p_intra >= p_inter: the two populations are not separable
    /// and identification is impossible.
    pub degenerate: bool,
}

impl DecisionModel {
    pub fn wwi(&self) -> f64 {
        10f64.powf(self.log10_wwi)
    }

    /// log10 P(Binomial(n_bits, p_inter) <= t): an impostor lands at or
    /// under the threshold.
    pub fn log10_false_positive(&self, t: u32) -> Result<f64> {
        binomial_tail_log(self.n_bits as u64, self.p_inter, t as u64, TailSide::Lower)
    }

    /// log10 P(Binomial(n_bits, p_intra) > t): the true user overshoots it.
    pub fn log10_false_negative(&self, t: u32) -> Result<f64> {
        binomial_tail_log(self.n_bits as u64, self.p_intra, t as u64, TailSide::Upper)
    }
}

/// Pick the integer threshold minimizing |log10 FP - log10 FN|, ties toward
/// the smaller threshold, and record the r-weighted wrong identification.
pub fn calibrate_threshold(
    n_bits: usize,
    p_intra: f64,
    p_inter: f64,
    r_weight: f64,
) -> Result<DecisionModel> {
    if !(p_intra > 0.0 && p_intra <= 1.0) {
        return Err(Error::invalid("p_intra", "must lie in (0, 1]"));
    }
    if !(p_inter > 0.0 && p_inter <= 0.5) {
        return Err(Error::invalid("p_inter", "must lie in (0, 0.5]"));
    }
    if !(0.0..=1.0).contains(&r_weight) {
        return Err(Error::invalid("r_weight", "must lie in [0, 1]"));
    }
    let n = n_bits as u64;
    let mut best: Option<(f64, u32, f64, f64)> = None;
    for t in 0..=n {
        let fp = binomial_tail_log(n, p_inter, t, TailSide::Lower)?;
        let fnr = binomial_tail_log(n, p_intra, t, TailSide::Upper)?;
        let gap = (fp - fnr).abs();
        let better = match &best {
            None => true,
            Some((best_gap, ..)) => gap < *best_gap,
        };
        if better {
            best = Some((gap, t as u32, fp, fnr));
        }
    }
    let (_, threshold, fp, fnr) = best.expect("threshold range is never empty");
    let log10_wwi = log10_add(
        if r_weight > 0.0 {
            r_weight.log10() + fp
        } else {
            f64::NEG_INFINITY
        },
        if r_weight < 1.0 {
            (1.0 - r_weight).log10() + fnr
        } else {
            f64::NEG_INFINITY
        },
    );
    Ok(DecisionModel {
        n_bits,
        p_intra,
        p_inter,
        r_weight,
        threshold,
        log10_wwi,
        degenerate: p_intra >= p_inter,
    })
}

/// Operating point for a given SNR and sweep span: signature length from the
/// geometry, flip probability from the SNR, threshold from the calibration.
pub fn wwi_vs_snr(
    snr_linear: f64,
    delta_f_hz: f64,
    length_m: f64,
    v_m_per_s: f64,
    r_weight: f64,
) -> Result<DecisionModel> {
    let n_bits = signature_length(delta_f_hz, length_m, v_m_per_s)?;
    let p_intra = p_flip_from_snr(snr_linear)?;
    calibrate_threshold(n_bits, p_intra.max(f64::MIN_POSITIVE), 0.5, r_weight)
}

/// One enrolled identity.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentRecord {
    pub label: String,
    pub signature: Signature,
    pub created_at: DateTime<Utc>,
}

/// JSON shape of one registry entry: the signature-file fields inlined.
#[derive(Serialize, Deserialize)]
struct RecordDoc {
    n_bits: usize,
    delta_f_hz: f64,
    length_m: f64,
    bits_hex: String,
    created_at: String,
}

/// Label-keyed store of enrollment records, persisted as a single JSON
/// document with atomic replace-on-write.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Registry {
    records: BTreeMap<String, EnrollmentRecord>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    pub fn enroll(&mut self, label: impl Into<String>, signature: Signature) -> Result<()> {
        let label = label.into();
        if self.records.contains_key(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        let record = EnrollmentRecord {
            label: label.clone(),
            signature: signature.with_label(label.clone()),
            created_at: Utc::now(),
        };
        self.records.insert(label, record);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Result<&EnrollmentRecord> {
        self.records
            .get(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc: BTreeMap<&str, RecordDoc> = self
            .records
            .iter()
            .map(|(label, rec)| {
                (
                    label.as_str(),
                    RecordDoc {
                        n_bits: rec.signature.n_bits(),
                        delta_f_hz: rec.signature.meta.delta_f_hz,
                        length_m: rec.signature.meta.length_m,
                        bits_hex: rec.signature.bits_hex(),
                        created_at: rec
                            .created_at
                            .to_rfc3339_opts(SecondsFormat::Secs, true),
                    },
                )
            })
            .collect();
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Registry> {
        let doc: BTreeMap<String, RecordDoc> = serde_json::from_str(json)?;
        let mut records = BTreeMap::new();
        for (label, rec) in doc {
            let signature = Signature::from_hex(
                &rec.bits_hex,
                rec.n_bits,
                SignatureMeta {
                    delta_f_hz: rec.delta_f_hz,
                    length_m: rec.length_m,
                    distance_hint_m: None,
                    label: label.clone(),
                },
            )?;
            let created_at = DateTime::parse_from_rfc3339(&rec.created_at)
                .map_err(|e| Error::Format(format!("bad created_at: {e}")))?
                .with_timezone(&Utc);
            records.insert(
                label.clone(),
                EnrollmentRecord {
                    label,
                    signature,
                    created_at,
                },
            );
        }
        Ok(Registry { records })
    }

    /// Write the registry next to `path` and rename into place, so a reader
    /// never observes a partially written document.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Registry> {
        Registry::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Outcome of a verification attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    pub accepted: bool,
    pub distance: u32,
    pub threshold: u32,
    /// threshold - distance; negative when rejected.
    pub margin: i64,
    pub log10_wwi: f64,
}

/// Accept iff the measured signature lies within `decision.threshold` of the
/// enrolled one (boundary inclusive).
pub fn verify(
    registry: &Registry,
    label: &str,
    measured: &Signature,
    decision: &DecisionModel,
) -> Result<VerifyReport> {
    let record = registry.get(label)?;
    let distance = hamming(measured, &record.signature)?;
    Ok(VerifyReport {
        accepted: distance <= decision.threshold,
        distance,
        threshold: decision.threshold,
        margin: decision.threshold as i64 - distance as i64,
        log10_wwi: decision.log10_wwi,
    })
}
