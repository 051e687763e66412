//! Duty-cycled sensor node: analog temperature sensor, ADC and the MCU task
//! cycle that turns one sample into a committed EPC.

use core::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::epc::{encode_epc, Epc96};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NodeError {
    #[error("invalid node parameter: {0}")]
    InvalidParams(&'static str),
    #[error("ADC code {code} outside [0, {max}]")]
    CodeOutOfRange { code: u16, max: u16 },
}

/// Raw ADC conversion result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AdcCode(u16);

impl AdcCode {
    pub const fn new(value: u16) -> Self {
        Self(value)
    }

    pub const fn value(self) -> u16 {
        self.0
    }
}

impl fmt::Display for AdcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Linear analog temperature sensor, `v(T) = v0 + slope·T`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TemperatureSensor {
    pub v0: f64,
    /// V/°C
    pub slope: f64,
    /// Systematic offset added to the true temperature, °C.
    pub accuracy_bias: f64,
    /// Standard deviation of additive Gaussian noise, °C.
    pub noise_sigma: f64,
}

impl Default for TemperatureSensor {
    fn default() -> Self {
        Self {
            v0: 1.300,
            slope: -0.0055,
            accuracy_bias: 0.0,
            noise_sigma: 0.0,
        }
    }
}

impl TemperatureSensor {
    pub fn validate(&self) -> Result<(), NodeError> {
        if !(self.slope.is_finite() && self.slope != 0.0) {
            return Err(NodeError::InvalidParams("sensor slope must be finite and non-zero"));
        }
        if !(self.v0.is_finite() && self.accuracy_bias.is_finite()) {
            return Err(NodeError::InvalidParams("sensor intercept and bias must be finite"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(NodeError::InvalidParams("noise_sigma must be >= 0"));
        }
        Ok(())
    }

    pub fn volts_at(&self, celsius: f64) -> f64 {
        self.v0 + self.slope * celsius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Adc {
    pub bits: u8,
    pub vref: f64,
}

impl Default for Adc {
    fn default() -> Self {
        Self { bits: 10, vref: 1.5 }
    }
}

impl Adc {
    pub fn validate(&self) -> Result<(), NodeError> {
        if !(1..=16).contains(&self.bits) {
            return Err(NodeError::InvalidParams("ADC bits must lie in 1..=16"));
        }
        if !(self.vref.is_finite() && self.vref > 0.0) {
            return Err(NodeError::InvalidParams("vref must be > 0"));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u16 {
        ((1u32 << self.bits) - 1) as u16
    }

    pub fn lsb_volts(&self) -> f64 {
        self.vref / self.max_code() as f64
    }

    /// Quantizes a voltage; the flag reports rail clamping.
    pub fn convert(&self, volts: f64) -> (AdcCode, bool) {
        let (v, clamped) = if volts < 0.0 || volts.is_nan() {
            (0.0, true)
        } else if volts > self.vref {
            (self.vref, true)
        } else {
            (volts, false)
        };
        let code = libm::round(v / self.vref * self.max_code() as f64) as u16;
        (AdcCode(code), clamped)
    }
}

/// Temperature resolution of one ADC step, °C.
pub fn lsb_celsius(sensor: &TemperatureSensor, adc: &Adc) -> f64 {
    adc.lsb_volts() / libm::fabs(sensor.slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reading {
    pub code: AdcCode,
    /// The analog value fell outside `[0, vref]`.
    pub clamped: bool,
}

pub fn sense<R: Rng + ?Sized>(
    sensor: &TemperatureSensor,
    adc: &Adc,
    t_ambient: f64,
    rng: &mut R,
) -> Reading {
    let noise = if sensor.noise_sigma > 0.0 {
        Normal::new(0.0, sensor.noise_sigma)
            .map(|n| n.sample(rng))
            .unwrap_or(0.0)
    } else {
        0.0
    };
    let volts = sensor.volts_at(t_ambient + sensor.accuracy_bias + noise);
    let (code, clamped) = adc.convert(volts);
    Reading { code, clamped }
}

/// Inverse transfer from an ADC code back to °C.
pub fn decode_temperature(
    code: AdcCode,
    sensor: &TemperatureSensor,
    adc: &Adc,
) -> Result<f64, NodeError> {
    let max = adc.max_code();
    if code.0 > max {
        return Err(NodeError::CodeOutOfRange { code: code.0, max });
    }
    let volts = code.0 as f64 / max as f64 * adc.vref;
    Ok((volts - sensor.v0) / sensor.slope)
}

/// Energy and timing of one sample-and-write cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TaskProfile {
    pub sample_energy_j: f64,
    pub i2c_write_energy_j: f64,
    pub task_duration_s: f64,
    /// Draw of the powered MCU between task cycles.
    pub standby_power_w: f64,
}

impl Default for TaskProfile {
    fn default() -> Self {
        Self {
            sample_energy_j: 3e-6,
            i2c_write_energy_j: 5e-6,
            task_duration_s: 10e-3,
            standby_power_w: 0.5e-3,
        }
    }
}

impl TaskProfile {
    pub fn validate(&self) -> Result<(), NodeError> {
        let all = [
            self.sample_energy_j,
            self.i2c_write_energy_j,
            self.task_duration_s,
            self.standby_power_w,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NodeError::InvalidParams("task energies, duration and standby power must be >= 0"));
        }
        if self.task_duration_s <= 0.0 {
            return Err(NodeError::InvalidParams("task_duration_s must be > 0"));
        }
        Ok(())
    }

    pub fn cycle_energy_j(&self) -> f64 {
        self.sample_energy_j + self.i2c_write_energy_j
    }

    /// Mean draw while a task cycle runs.
    pub fn task_power_w(&self) -> f64 {
        self.cycle_energy_j() / self.task_duration_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct NodeConfig {
    pub node_id: u8,
    pub sensor: TemperatureSensor,
    pub adc: Adc,
    pub task: TaskProfile,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            node_id: 1,
            sensor: TemperatureSensor::default(),
            adc: Adc::default(),
            task: TaskProfile::default(),
        }
    }
}

impl NodeConfig {
    pub fn validate(&self) -> Result<(), NodeError> {
        self.sensor.validate()?;
        self.adc.validate()?;
        self.task.validate()?;
        if self.adc.max_code() > 1023 {
            return Err(NodeError::InvalidParams("EPC sample field holds at most 10 bits"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskOutcome {
    /// `None` when the cycle was skipped for lack of energy.
    pub code: Option<AdcCode>,
    pub epc: Option<Epc96>,
    pub epc_written: bool,
    pub clamped: bool,
    pub energy_used: f64,
    pub timestamp: f64,
}

/// MCU firmware state: configuration, EPC sequence counter and noise source.
#[derive(Debug, Clone)]
pub struct SensorNode {
    config: NodeConfig,
    next_seq: u16,
    rng: ChaCha8Rng,
}

impl SensorNode {
    pub fn new(config: NodeConfig, seed: u64) -> Self {
        Self {
            config,
            next_seq: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn next_seq(&self) -> u16 {
        self.next_seq
    }

    /// Samples the sensor and builds the next EPC if `available_j` covers the
    /// whole cycle; otherwise nothing is consumed.
    pub fn execute_task_cycle(&mut self, available_j: f64, t_ambient: f64, now_s: f64) -> TaskOutcome {
        let cost = self.config.task.cycle_energy_j();
        if !(available_j >= cost) {
            return TaskOutcome {
                code: None,
                epc: None,
                epc_written: false,
                clamped: false,
                energy_used: 0.0,
                timestamp: now_s,
            };
        }
        let reading = sense(&self.config.sensor, &self.config.adc, t_ambient, &mut self.rng);
        let epc = encode_epc(self.config.node_id as u32, self.next_seq, reading.code)
            .expect("node id and code validated by NodeConfig");
        self.next_seq = self.next_seq.wrapping_add(1);
        TaskOutcome {
            code: Some(reading.code),
            epc: Some(epc),
            epc_written: true,
            clamped: reading.clamped,
            energy_used: cost,
            timestamp: now_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn sense_at_25c() {
        let s = TemperatureSensor::default();
        let adc = Adc::default();
        assert!((s.volts_at(25.0) - 1.1625).abs() < 1e-12);
        let r = sense(&s, &adc, 25.0, &mut rng());
        assert_eq!(r.code.value(), 793);
        assert!(!r.clamped);
    }

    #[test]
    fn rails() {
        let adc = Adc::default();
        assert_eq!(adc.convert(0.0), (AdcCode(0), false));
        assert_eq!(adc.convert(1.5), (AdcCode(1023), false));
        assert_eq!(adc.convert(-0.1), (AdcCode(0), true));
        assert_eq!(adc.convert(2.0), (AdcCode(1023), true));
        // far below the transfer range: v(300 °C) < 0
        let r = sense(&TemperatureSensor::default(), &adc, 300.0, &mut rng());
        assert!(r.clamped);
        assert_eq!(r.code.value(), 0);
    }

    #[test]
    fn biased_sensor_error_bound() {
        let s = TemperatureSensor {
            accuracy_bias: 1.3,
            ..TemperatureSensor::default()
        };
        let adc = Adc::default();
        let code = sense(&s, &adc, 25.0, &mut rng()).code;
        let decoded = decode_temperature(code, &TemperatureSensor::default(), &adc).unwrap();
        let half_lsb = lsb_celsius(&s, &adc) / 2.0;
        assert!((decoded - 25.0).abs() <= 1.3 + half_lsb);
    }

    #[test]
    fn decode_examples() {
        let s = TemperatureSensor::default();
        let adc = Adc::default();
        let t = decode_temperature(AdcCode(793), &s, &adc).unwrap();
        assert!((t - 24.953).abs() < 1e-3, "{t}");
        assert!((lsb_celsius(&s, &adc) / 2.0 - 0.1333).abs() < 1e-4);
        assert_eq!(
            decode_temperature(AdcCode(1024), &s, &adc),
            Err(NodeError::CodeOutOfRange { code: 1024, max: 1023 })
        );
    }

    #[test]
    fn midscale_round_trip_is_exact() {
        // v0 = vref/2 puts T = 0 °C exactly on a reconstruction level of a
        // mid-rail code when vref/2 is representable as code/max·vref.
        let adc = Adc { bits: 10, vref: 1.023 };
        let s = TemperatureSensor {
            v0: 0.512,
            ..TemperatureSensor::default()
        };
        let code = sense(&s, &adc, 0.0, &mut rng()).code;
        assert_eq!(code.value(), 512);
        let t = decode_temperature(code, &s, &adc).unwrap();
        assert!(t.abs() < 1e-12, "{t}");
    }

    #[test]
    fn requantizing_a_decoded_code_is_idempotent() {
        let s = TemperatureSensor::default();
        let adc = Adc::default();
        for c in [0u16, 1, 100, 511, 793, 1022, 1023] {
            let t = decode_temperature(AdcCode(c), &s, &adc).unwrap();
            assert_eq!(sense(&s, &adc, t, &mut rng()).code.value(), c);
        }
    }

    #[test]
    fn task_cycle_energy_gate() {
        let mut node = SensorNode::new(NodeConfig::default(), 0);
        let ok = node.execute_task_cycle(11.6875e-6, 25.0, 1.0);
        assert!(ok.epc_written);
        assert!((ok.energy_used - 8e-6).abs() < 1e-18);
        assert_eq!(ok.code, Some(AdcCode(793)));
        let starved = node.execute_task_cycle(0.0, 25.0, 2.0);
        assert!(!starved.epc_written);
        assert_eq!(starved.energy_used, 0.0);
        assert_eq!(node.next_seq(), 1);
    }

    #[test]
    fn consecutive_cycles_repeat_the_code() {
        let mut node = SensorNode::new(NodeConfig::default(), 9);
        let a = node.execute_task_cycle(1.0, 21.7, 0.0);
        let b = node.execute_task_cycle(1.0, 21.7, 1.0);
        assert_eq!(a.code, b.code);
        assert_ne!(a.epc, b.epc);
    }

    #[test]
    fn noise_is_seeded() {
        let s = TemperatureSensor {
            noise_sigma: 2.0,
            ..TemperatureSensor::default()
        };
        let adc = Adc::default();
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..16).map(|_| sense(&s, &adc, 20.0, &mut r).code).collect::<alloc::vec::Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
        assert_ne!(draw(4), draw(5));
    }

    #[test]
    fn validation() {
        assert!(NodeConfig::default().validate().is_ok());
        let bad = TemperatureSensor {
            slope: 0.0,
            ..TemperatureSensor::default()
        };
        assert!(bad.validate().is_err());
        let wide = NodeConfig {
            adc: Adc { bits: 12, vref: 1.5 },
            ..NodeConfig::default()
        };
        assert!(wide.validate().is_err());
    }
}
