//! Dual-mode transceiver control: transmission vs identification mode, the
//! switch-port routing invariant, downtime accounting, and measurement
//! planning.

use crate::error::{Error, Result};
use crate::identify::{wwi_vs_snr, DecisionModel};
use crate::physics::{snr_estimate, LinkBudget, SweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Transmission,
    Identification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortState {
    Open,
    Closed,
}

/// An open identification session: the sweep being run and when it started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OiSession {
    pub sweep: SweepConfig,
    pub started_at: std::time::Instant,
}

/// Transceiver state. Exactly one switch port is closed at all times:
/// port 1 in transmission mode, port 2 in identification mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrxState {
    mode: Mode,
    sw_port1: PortState,
    sw_port2: PortState,
    oi_session: Option<OiSession>,
}

impl Default for TrxState {
    fn default() -> Self {
        TrxState::new()
    }
}

impl TrxState {
    pub fn new() -> TrxState {
        TrxState {
            mode: Mode::Transmission,
            sw_port1: PortState::Closed,
            sw_port2: PortState::Open,
            oi_session: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn sw_port1(&self) -> PortState {
        self.sw_port1
    }

    pub fn sw_port2(&self) -> PortState {
        self.sw_port2
    }

    pub fn session(&self) -> Option<&OiSession> {
        self.oi_session.as_ref()
    }

    /// Check the routing invariant; used by the randomized transition tests.
    pub fn invariant_holds(&self) -> bool {
        match self.mode {
            Mode::Transmission => {
                self.sw_port1 == PortState::Closed
                    && self.sw_port2 == PortState::Open
                    && self.oi_session.is_none()
            }
            Mode::Identification => {
                self.sw_port1 == PortState::Open
                    && self.sw_port2 == PortState::Closed
                    && self.oi_session.is_some()
            }
        }
    }

    /// Suspend data transmission and flip the switch for interrogation.
    pub fn enter_identification(&mut self, sweep: SweepConfig) -> Result<()> {
        if self.mode == Mode::Identification {
            return Err(Error::InvalidTransition(
                "already in identification mode".into(),
            ));
        }
        self.mode = Mode::Identification;
        self.sw_port1 = PortState::Open;
        self.sw_port2 = PortState::Closed;
        self.oi_session = Some(OiSession {
            sweep,
            started_at: std::time::Instant::now(),
        });
        Ok(())
    }

    /// Return to transmission mode; reports the data-suspension downtime
    /// n_sw * t_sw of the session's sweep.
    pub fn exit_identification(&mut self) -> Result<f64> {
        let session = match self.oi_session.take() {
            Some(s) if self.mode == Mode::Identification => s,
            _ => {
                return Err(Error::InvalidTransition(
                    "not in identification mode".into(),
                ))
            }
        };
        self.mode = Mode::Transmission;
        self.sw_port1 = PortState::Closed;
        self.sw_port2 = PortState::Open;
        Ok(crate::physics::effective_measure_time(&session.sweep))
    }
}

/// Result of inverting the reliability target into measurement requirements.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Plan {
    pub feasible: bool,
    pub required_snr_db: Option<f64>,
    pub required_measure_time_s: Option<f64>,
    pub required_n_sw: Option<u32>,
    pub decision: Option<DecisionModel>,
}

const PLAN_SNR_DB_MIN: f64 = -30.0;
const PLAN_SNR_DB_MAX: f64 = 80.0;

/// Find the minimum SNR whose calibrated WWI meets `target_log10_wwi`, then
/// the minimum total measure time delivering that SNR over the given link.
/// Infeasibility (target out of reach, or the round trip not fitting in the
/// sweep time) is reported, not raised.
pub fn plan_identification(
    link: &LinkBudget,
    sweep: &SweepConfig,
    length_m: f64,
    target_log10_wwi: f64,
) -> Result<Plan> {
    link.validate()?;
    let v = link.group_velocity_m_per_s;
    let round_trip_s = 2.0 * (link.distance_m + length_m) / v;
    let infeasible = Plan {
        feasible: false,
        required_snr_db: None,
        required_measure_time_s: None,
        required_n_sw: None,
        decision: None,
    };
    if round_trip_s > sweep.t_sw_s {
        return Ok(infeasible);
    }

    let meets = |snr_db: f64| -> Result<Option<DecisionModel>> {
        let model = wwi_vs_snr(
            10f64.powf(snr_db / 10.0),
            sweep.delta_f_hz,
            length_m,
            v,
            0.5,
        )?;
        Ok((model.log10_wwi <= target_log10_wwi).then_some(model))
    };

    if meets(PLAN_SNR_DB_MAX)?.is_none() {
        return Ok(infeasible);
    }
    let (mut lo, mut hi) = (PLAN_SNR_DB_MIN, PLAN_SNR_DB_MAX);
    if meets(lo)?.is_none() {
        // WWI is monotone non-increasing in SNR; bisect for the crossing.
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if meets(mid)?.is_some() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = lo;
    }
    let required_snr_db = hi;
    let decision = meets(required_snr_db)?.expect("upper bracket satisfies the target");

    // SNR is proportional to total measure time: B = 2 L dF / (v T).
    let snr_per_second = snr_estimate(link, 2.0 * length_m * sweep.delta_f_hz / v)?;
    let required_time_s = 10f64.powf(required_snr_db / 10.0) / snr_per_second;
    let required_n_sw = (required_time_s / sweep.t_sw_s).ceil().max(1.0) as u32;

    Ok(Plan {
        feasible: true,
        required_snr_db: Some(required_snr_db),
        required_measure_time_s: Some(required_time_s),
        required_n_sw: Some(required_n_sw),
        decision: Some(decision),
    })
}
