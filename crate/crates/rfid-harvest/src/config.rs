//! The scenario document: one TOML file mirroring [`Scenario`] plus the sweep
//! grids. Every key has a default, so an empty document is a valid config.
//!
//! ```toml
//! schema = "rfid-harvest/1"
//!
//! [reader]
//! eirp_dbm = 35.05
//! frequency_hz = 866500000.0
//!
//! [link]
//! distance_m = 1.0
//!
//! [simulation]
//! mode = "boosted"
//! ```

use std::fs;
use std::path::Path;

use rfid_harvest_core::epc::BankLayout;
use rfid_harvest_core::gen2sim::{Ambient, Mode, ReaderConfig, TurnOnSearch};
use rfid_harvest_core::node::NodeConfig;
use rfid_harvest_core::{
    AntennaGain, ChargePumpParams, Frequency, LinkGeometry, RectifierModel, Scenario,
    StorageCapacitor,
};
use serde::{Deserialize, Serialize};

use crate::Error;

pub const SCHEMA_ID: &str = "rfid-harvest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDocument {
    pub schema: String,
    pub reader: ReaderConfig,
    pub link: LinkSection,
    pub environment: EnvironmentSection,
    pub rectifier: RectifierModel,
    pub pump: ChargePumpParams,
    pub capacitor: StorageCapacitor,
    pub node: NodeConfig,
    pub memory: BankLayout,
    pub simulation: SimulationSection,
    pub sweep: SweepSection,
}

/// Reader-to-node geometry and the node antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub distance_m: f64,
    /// Polarization loss factor in (0, 1].
    pub plf: f64,
    pub node_gain_dbi: f64,
}

/// Flat office correction on top of free space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub excess_loss_db: f64,
    pub bypass_in_situ_margin_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub mode: Mode,
    pub duration_s: f64,
    pub time_step_s: f64,
    pub trace_interval_s: f64,
    /// Ambient temperature when no trace file is given.
    pub ambient_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub frequencies_mhz: Vec<f64>,
    pub distances_m: Vec<f64>,
    pub turn_on: TurnOnSearch,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        Self::from_scenario(&Scenario::default())
    }
}

impl Default for LinkSection {
    fn default() -> Self {
        ConfigDocument::default().link
    }
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        ConfigDocument::default().environment
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        ConfigDocument::default().simulation
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        let mut frequencies_mhz: Vec<f64> = (0..=12).map(|i| 840.0 + 5.0 * i as f64).collect();
        frequencies_mhz.push(866.5);
        frequencies_mhz.sort_by(f64::total_cmp);
        Self {
            frequencies_mhz,
            distances_m: (1..=24).map(|i| 0.25 * i as f64).collect(),
            turn_on: TurnOnSearch::default(),
        }
    }
}

impl ConfigDocument {
    pub fn from_scenario(s: &Scenario) -> Self {
        let ambient_c = match &s.ambient {
            Ambient::Constant(c) => *c,
            Ambient::Trace(points) => points.first().map_or(25.0, |p| p.1),
        };
        Self {
            schema: SCHEMA_ID.to_string(),
            reader: s.reader,
            link: LinkSection {
                distance_m: s.geometry.distance_m,
                plf: s.geometry.plf,
                node_gain_dbi: s.node_gain.as_dbi(),
            },
            environment: EnvironmentSection {
                excess_loss_db: s.environment_excess_loss_db,
                bypass_in_situ_margin_db: s.bypass_in_situ_margin_db,
            },
            rectifier: s.rectifier,
            pump: s.pump,
            capacitor: s.capacitor,
            node: s.node,
            memory: s.memory,
            simulation: SimulationSection {
                mode: s.mode,
                duration_s: s.duration_s,
                time_step_s: s.time_step_s,
                trace_interval_s: s.trace_interval_s,
                ambient_c,
            },
            sweep: SweepSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let doc: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if doc.schema != SCHEMA_ID {
            return Err(Error::Config(format!(
                "unsupported schema '{}', expected '{SCHEMA_ID}'",
                doc.schema
            )));
        }
        doc.scenario(0)?;
        doc.sweep_frequencies()?;
        Ok(doc)
    }

    /// `default` selects the built-in document; anything else is a path.
    pub fn load(spec: &str) -> Result<Self, Error> {
        if spec == "default" {
            return Ok(Self::default());
        }
        let path = Path::new(spec);
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config document is always representable")
    }

    /// Builds and validates the scenario; `seed` comes from the command line.
    pub fn scenario(&self, seed: u64) -> Result<Scenario, Error> {
        let s = Scenario {
            reader: self.reader,
            geometry: LinkGeometry {
                distance_m: self.link.distance_m,
                plf: self.link.plf,
            },
            node_gain: AntennaGain::dbi(self.link.node_gain_dbi),
            environment_excess_loss_db: self.environment.excess_loss_db,
            bypass_in_situ_margin_db: self.environment.bypass_in_situ_margin_db,
            rectifier: self.rectifier,
            pump: self.pump,
            capacitor: self.capacitor,
            node: self.node,
            memory: self.memory,
            mode: self.simulation.mode,
            duration_s: self.simulation.duration_s,
            time_step_s: self.simulation.time_step_s,
            trace_interval_s: self.simulation.trace_interval_s,
            ambient: Ambient::Constant(self.simulation.ambient_c),
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sweep_frequencies(&self) -> Result<Vec<Frequency>, Error> {
        self.sweep
            .frequencies_mhz
            .iter()
            .map(|&mhz| Frequency::from_mhz(mhz).map_err(Error::from))
            .collect()
    }
}
