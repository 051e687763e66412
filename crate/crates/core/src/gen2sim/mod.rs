//! Discrete-event scenario engine.
//!
//! A single tag is interrogated by a reader that transmits continuously and
//! issues an inventory query every `query_period`. The node harvests from the
//! same field, runs its task cycle when powered, and commits each sample to
//! the EPC bank of its tag memory. A query produces a read when the rectifier
//! is above the operating threshold of the power mode and the tag memory holds
//! a valid EPC; in boosted mode each committed EPC is read at most once.

mod engine;
pub mod queue;
mod sweeps;

use alloc::vec::Vec;

use thiserror::Error;

use crate::epc::{BankLayout, Epc96, EpcError};
use crate::harvester::{ChargePumpParams, HarvestError, Phase, RectifierModel, StorageCapacitor};
use crate::linkbudget::{AntennaGain, Eirp, Frequency, LinkError, LinkGeometry};
use crate::node::{NodeConfig, NodeError};

pub use crate::harvester::PowerMode as Mode;
pub use engine::{run_scenario, run_scenario_with, RunOptions};
pub use sweeps::{
    operating_range, range_point, range_sweep, temperature_trace, turn_on_point, turn_on_sweep,
    RangeRow, SensitivityRow, TraceRow, TurnOnSearch,
};

/// 3.2 W EIRP.
pub const REGULATORY_MAX_EIRP_DBM: f64 = 35.051_499_783_199_06;
pub const REGULATORY_BAND_MHZ: (f64, f64) = (865.0, 868.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Epc(#[from] EpcError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("EIRP {eirp_dbm:.2} dBm exceeds the 3.2 W regulatory cap")]
    EirpAboveCap { eirp_dbm: f64 },
    #[error("carrier {mhz:.3} MHz outside the 865-868 MHz band")]
    OutOfBand { mhz: f64 },
    #[error("empty trace")]
    EmptyTrace,
    #[error("trace times must be strictly increasing (row {0})")]
    TraceNotIncreasing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ReaderConfig {
    #[cfg_attr(feature = "serde", serde(rename = "eirp_dbm"))]
    pub eirp: Eirp,
    #[cfg_attr(feature = "serde", serde(rename = "frequency_hz"))]
    pub frequency: Frequency,
    pub query_period_s: f64,
    /// Length of one inventory round; a read is logged when it completes.
    pub read_duration_s: f64,
    pub regulatory_check: bool,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        Self {
            eirp: Eirp::dbm(35.05),
            frequency: Frequency::from_hz(866.5e6).expect("constant"),
            query_period_s: 0.05,
            read_duration_s: 0.002,
            regulatory_check: true,
        }
    }
}

impl ReaderConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.eirp.as_dbm().is_finite() {
            return Err(SimError::InvalidScenario("reader EIRP must be finite"));
        }
        if !(self.query_period_s > 0.0 && queue::to_micros(self.query_period_s) > 0) {
            return Err(SimError::InvalidScenario("query period must be >= 1 µs"));
        }
        if !(self.read_duration_s >= 0.0 && self.read_duration_s < self.query_period_s) {
            return Err(SimError::InvalidScenario(
                "read duration must lie in [0, query period)",
            ));
        }
        if self.regulatory_check {
            if self.eirp.as_dbm() > REGULATORY_MAX_EIRP_DBM {
                return Err(SimError::EirpAboveCap {
                    eirp_dbm: self.eirp.as_dbm(),
                });
            }
            let mhz = self.frequency.mhz();
            if mhz < REGULATORY_BAND_MHZ.0 || mhz > REGULATORY_BAND_MHZ.1 {
                return Err(SimError::OutOfBand { mhz });
            }
        }
        Ok(())
    }
}

/// Ambient temperature seen by the sensor over time.
#[derive(Debug, Clone, PartialEq)]
pub enum Ambient {
    Constant(f64),
    /// `(t_s, °C)` points, linearly interpolated and held at the ends.
    Trace(Vec<(f64, f64)>),
}

impl Default for Ambient {
    fn default() -> Self {
        Ambient::Constant(25.0)
    }
}

impl Ambient {
    pub fn trace(points: Vec<(f64, f64)>) -> Result<Self, SimError> {
        if points.is_empty() {
            return Err(SimError::EmptyTrace);
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(SimError::TraceNotIncreasing(i + 1));
            }
        }
        if points.iter().any(|(t, c)| !(t.is_finite() && c.is_finite())) {
            return Err(SimError::InvalidScenario("trace values must be finite"));
        }
        Ok(Ambient::Trace(points))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Ambient::Constant(c) => *c,
            Ambient::Trace(points) => {
                let idx = points.partition_point(|(pt, _)| *pt <= t);
                if idx == 0 {
                    return points[0].1;
                }
                if idx == points.len() {
                    return points[points.len() - 1].1;
                }
                let (t0, c0) = points[idx - 1];
                let (t1, c1) = points[idx];
                c0 + (c1 - c0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Everything needed to run one deterministic simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub reader: ReaderConfig,
    pub geometry: LinkGeometry,
    pub node_gain: AntennaGain,
    /// Extra path loss on top of free space, applied to both modes.
    pub environment_excess_loss_db: f64,
    /// Additional input power the unboosted node needs in situ.
    pub bypass_in_situ_margin_db: f64,
    pub rectifier: RectifierModel,
    pub pump: ChargePumpParams,
    pub capacitor: StorageCapacitor,
    pub node: NodeConfig,
    pub memory: BankLayout,
    pub mode: Mode,
    pub duration_s: f64,
    pub time_step_s: f64,
    /// Spacing of energy-trace samples.
    pub trace_interval_s: f64,
    pub ambient: Ambient,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            reader: ReaderConfig::default(),
            geometry: LinkGeometry {
                distance_m: 1.0,
                plf: 0.5,
            },
            node_gain: AntennaGain::dbi(1.8),
            environment_excess_loss_db: 3.0,
            bypass_in_situ_margin_db: 4.5,
            rectifier: RectifierModel::default(),
            pump: ChargePumpParams::default(),
            capacitor: StorageCapacitor::default(),
            node: NodeConfig::default(),
            memory: BankLayout::default(),
            mode: Mode::Boosted,
            duration_s: 60.0,
            time_step_s: 1e-3,
            trace_interval_s: 0.1,
            ambient: Ambient::default(),
            seed: 0,
        }
    }
}

impl Scenario {
    /// Free space, no in-situ margins.
    pub fn anechoic(mut self) -> Self {
        self.environment_excess_loss_db = 0.0;
        self.bypass_in_situ_margin_db = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.reader.validate()?;
        self.geometry.validate()?;
        if !self.node_gain.as_dbi().is_finite() {
            return Err(SimError::InvalidScenario("node gain must be finite"));
        }
        if !(self.environment_excess_loss_db.is_finite() && self.environment_excess_loss_db >= 0.0) {
            return Err(SimError::InvalidScenario("excess loss must be >= 0 dB"));
        }
        if !(self.bypass_in_situ_margin_db.is_finite() && self.bypass_in_situ_margin_db >= 0.0) {
            return Err(SimError::InvalidScenario("bypass margin must be >= 0 dB"));
        }
        self.rectifier.validate()?;
        self.pump.validate()?;
        self.capacitor.validate()?;
        self.node.validate()?;
        self.memory.validate()?;
        if self.memory.epc_bits < 128 {
            return Err(EpcError::Capacity {
                needed: 128,
                available: self.memory.epc_bits,
            }
            .into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(SimError::InvalidScenario("duration must be > 0"));
        }
        if !(self.time_step_s > 0.0 && queue::to_micros(self.time_step_s) > 0) {
            return Err(SimError::InvalidScenario("time step must be >= 1 µs"));
        }
        if !(self.trace_interval_s > 0.0 && queue::to_micros(self.trace_interval_s) > 0) {
            return Err(SimError::InvalidScenario("trace interval must be >= 1 µs"));
        }
        if self.mode == Mode::Boosted && !(self.node.task.standby_power_w > self.pump.max_output_w) {
            return Err(SimError::InvalidScenario(
                "standby power must exceed the pump output so supply bursts end",
            ));
        }
        if let Ambient::Trace(points) = &self.ambient {
            Ambient::trace(points.clone())?;
        }
        Ok(())
    }
}

/// One successful inventory of the sensor EPC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadRecord {
    pub timestamp_s: f64,
    pub epc: Epc96,
    pub seq: u16,
    pub decoded_c: f64,
}

/// One sample written to tag memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommitRecord {
    pub sampled_at_s: f64,
    pub committed_at_s: f64,
    pub seq: u16,
    pub code: u16,
    pub true_c: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTransition {
    pub t_s: f64,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub t_s: f64,
    pub phase: Phase,
    pub cap_voltage: f64,
    pub harvested_j: f64,
    pub stored_j: f64,
    pub delivered_j: f64,
}

/// Run-level energy bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTotals {
    /// `∫ p_dc dt` offered by the rectifier.
    pub harvested_j: f64,
    /// Pushed into the storage capacitor by the pump.
    pub stored_j: f64,
    /// Given to the regulator / MCU.
    pub delivered_j: f64,
    /// Portion of `delivered_j` consumed by task cycles.
    pub task_delivered_j: f64,
    /// Sum of `energy_used` over completed task cycles.
    pub task_energy_used_j: f64,
    pub cap_initial_j: f64,
    pub cap_final_j: f64,
    /// Largest single-step energy movement, the tolerance of step-resolved checks.
    pub max_step_j: f64,
}

impl EnergyTotals {
    pub fn cap_gain_j(&self) -> f64 {
        self.cap_final_j - self.cap_initial_j
    }

    /// `harvested − (delivered + cap gain)`; negative means energy was created.
    pub fn conservation_margin_j(&self) -> f64 {
        self.harvested_j - (self.delivered_j + self.cap_gain_j())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadLog {
    pub mode: Mode,
    pub duration_s: f64,
    pub received_dbm: f64,
    pub reads: Vec<ReadRecord>,
    pub commits: Vec<CommitRecord>,
    pub transitions: Vec<PhaseTransition>,
    pub energy_trace: Vec<EnergySample>,
    pub totals: EnergyTotals,
}

impl ReadLog {
    pub fn read_count(&self) -> usize {
        self.reads.len()
    }

    pub fn commit_for(&self, seq: u16) -> Option<&CommitRecord> {
        self.commits.iter().rev().find(|c| c.seq == seq)
    }
}

/// Reads per minute over `duration_s`.
pub fn read_rate(log: &ReadLog, duration_s: f64) -> f64 {
    if !(duration_s > 0.0) {
        return 0.0;
    }
    60.0 * log.reads.len() as f64 / duration_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn regulatory_guard() {
        let mut r = ReaderConfig::default();
        assert!(r.validate().is_ok());
        r.eirp = Eirp::dbm(36.0);
        assert!(matches!(r.validate(), Err(SimError::EirpAboveCap { .. })));
        r.regulatory_check = false;
        assert!(r.validate().is_ok());
        let r = ReaderConfig {
            frequency: Frequency::from_mhz(902.0).unwrap(),
            ..ReaderConfig::default()
        };
        assert!(matches!(r.validate(), Err(SimError::OutOfBand { .. })));
        assert!((Eirp::from_watts(3.2).as_dbm() - REGULATORY_MAX_EIRP_DBM).abs() < 1e-12);
    }

    #[test]
    fn ambient_interpolation() {
        let a = Ambient::trace(vec![(0.0, 20.0), (10.0, 30.0)]).unwrap();
        assert_eq!(a.at(-1.0), 20.0);
        assert_eq!(a.at(5.0), 25.0);
        assert_eq!(a.at(10.0), 30.0);
        assert_eq!(a.at(99.0), 30.0);
        assert_eq!(Ambient::trace(vec![]), Err(SimError::EmptyTrace));
        assert_eq!(
            Ambient::trace(vec![(0.0, 1.0), (0.0, 2.0)]),
            Err(SimError::TraceNotIncreasing(1))
        );
    }

    #[test]
    fn read_rate_definition() {
        let log = ReadLog {
            mode: Mode::Boosted,
            duration_s: 60.0,
            received_dbm: 0.0,
            reads: vec![],
            commits: vec![],
            transitions: vec![],
            energy_trace: vec![],
            totals: EnergyTotals::default(),
        };
        assert_eq!(read_rate(&log, 60.0), 0.0);
        let rec = ReadRecord {
            timestamp_s: 1.0,
            epc: Epc96::from_words([0; 6]),
            seq: 0,
            decoded_c: 0.0,
        };
        let full = ReadLog {
            reads: vec![rec; 25],
            ..log
        };
        assert_eq!(read_rate(&full, 60.0), 25.0);
    }

    #[test]
    fn default_scenario_is_valid() {
        Scenario::default().validate().unwrap();
        let bad = Scenario {
            duration_s: 0.0,
            ..Scenario::default()
        };
        assert!(bad.validate().is_err());
    }
}
