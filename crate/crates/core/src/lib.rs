//! Simulation core for fully passive UHF RFID sensor nodes powered by RF
//! energy harvesting.
//!
//! The crate is `no_std` (with `alloc`) and purely computational:
//!
//! * [`linkbudget`]: unit-safe power arithmetic and the free-space link model,
//!   forward (received power / sensitivity) and inverted (maximum range).
//! * [`harvester`]: rectifier transfer curve and the charge-pump / storage
//!   capacitor state machine.
//! * [`node`]: temperature sensor, 10-bit ADC and the MCU task cycle.
//! * [`epc`]: Gen2 CRC-16, the sensor EPC layout and the tag memory image.
//! * [`gen2sim`]: the deterministic discrete-event engine and the sweeps built
//!   on top of it.
//!
//! File formats, configuration parsing and the command-line front end live in
//! the `rfid-harvest` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod epc;
pub mod gen2sim;
pub mod harvester;
pub mod linkbudget;
pub mod node;

pub use epc::{Crc16, Epc96, EpcError, SensorSample, TagMemory};
pub use gen2sim::{read_rate, run_scenario, ReadLog, ReaderConfig, Scenario, SimError};
pub use harvester::{
    ChargePumpParams, HarvesterState, Phase, PowerMode, RectifierModel, StorageCapacitor,
};
pub use linkbudget::{AntennaGain, Eirp, Frequency, LinkError, LinkGeometry, PowerLevel};
pub use node::{Adc, AdcCode, TaskOutcome, TaskProfile, TemperatureSensor};
