//! Unit-safe RF power arithmetic and the free-space link model.
//!
//! Everything is computed in the dB domain:
//!
//! ```text
//! P_rx[dBm] = EIRP[dBm] + G_node[dBi] + 10·log10((λ / 4πd)²) + 10·log10(plf)
//! ```
//!
//! The reader-side antenna gain is part of the EIRP; the node-side gain is
//! the gain of the energy-harvesting antenna. Polarization loss is always an
//! explicit input.

use core::f64::consts::PI;
use core::fmt;
use core::ops::{Add, Sub};

use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinkError {
    #[error("distance must be strictly positive and finite, got {0} m")]
    InvalidDistance(f64),
    #[error("frequency must be strictly positive and finite, got {0} Hz")]
    InvalidFrequency(f64),
    #[error("polarization loss factor must lie in (0, 1], got {0}")]
    InvalidPlf(f64),
    #[error("non-finite {0} value")]
    NonFinite(&'static str),
    #[error("link cannot reach {sensitivity_dbm} dBm at any positive range (best case {best_dbm} dBm)")]
    NoRange { sensitivity_dbm: f64, best_dbm: f64 },
}

pub fn db_from_ratio(ratio: f64) -> f64 {
    10.0 * libm::log10(ratio)
}

pub fn ratio_from_db(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Absolute power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct PowerLevel(f64);

impl PowerLevel {
    pub const fn dbm(value: f64) -> Self {
        Self(value)
    }

    pub fn from_mw(mw: f64) -> Self {
        Self(dbm_from_mw(mw))
    }

    pub fn from_watts(w: f64) -> Self {
        Self::from_mw(w * 1e3)
    }

    pub const fn as_dbm(self) -> f64 {
        self.0
    }

    pub fn to_mw(self) -> f64 {
        mw_from_dbm(self)
    }

    pub fn to_watts(self) -> f64 {
        self.to_mw() * 1e-3
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for PowerLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} dBm", self.0)
    }
}

/// Gain or loss offsets in dB shift a power level.
impl Add<f64> for PowerLevel {
    type Output = PowerLevel;
    fn add(self, db: f64) -> PowerLevel {
        PowerLevel(self.0 + db)
    }
}

impl Sub<f64> for PowerLevel {
    type Output = PowerLevel;
    fn sub(self, db: f64) -> PowerLevel {
        PowerLevel(self.0 - db)
    }
}

/// Difference of two absolute levels, in dB.
impl Sub for PowerLevel {
    type Output = f64;
    fn sub(self, rhs: PowerLevel) -> f64 {
        self.0 - rhs.0
    }
}

/// `10^(p/10)`.
pub fn mw_from_dbm(p: PowerLevel) -> f64 {
    libm::pow(10.0, p.0 / 10.0)
}

/// `10·log10(mw)`; zero maps to `-inf`.
pub fn dbm_from_mw(mw: f64) -> f64 {
    10.0 * libm::log10(mw)
}

/// Carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "f64", into = "f64")
)]
pub struct Frequency(f64);

impl Frequency {
    pub fn from_hz(hertz: f64) -> Result<Self, LinkError> {
        if hertz.is_finite() && hertz > 0.0 {
            Ok(Self(hertz))
        } else {
            Err(LinkError::InvalidFrequency(hertz))
        }
    }

    pub fn from_mhz(mhz: f64) -> Result<Self, LinkError> {
        Self::from_hz(mhz * 1e6)
    }

    pub const fn hz(self) -> f64 {
        self.0
    }

    pub fn mhz(self) -> f64 {
        self.0 / 1e6
    }

    pub fn wavelength_m(self) -> f64 {
        SPEED_OF_LIGHT / self.0
    }
}

impl TryFrom<f64> for Frequency {
    type Error = LinkError;
    fn try_from(hz: f64) -> Result<Self, LinkError> {
        Self::from_hz(hz)
    }
}

impl From<Frequency> for f64 {
    fn from(f: Frequency) -> f64 {
        f.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} MHz", self.mhz())
    }
}

/// Antenna gain in dBi.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct AntennaGain(f64);

impl AntennaGain {
    pub const fn dbi(value: f64) -> Self {
        Self(value)
    }

    pub const fn as_dbi(self) -> f64 {
        self.0
    }
}

/// Equivalent isotropically radiated power, transmit power plus transmit
/// antenna gain, in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct Eirp(f64);

impl Eirp {
    pub const fn dbm(value: f64) -> Self {
        Self(value)
    }

    pub fn from_watts(w: f64) -> Self {
        Self(dbm_from_mw(w * 1e3))
    }

    /// `P_tx + G_tx`.
    pub fn from_transmitter(p_tx: PowerLevel, g_tx: AntennaGain) -> Self {
        Self(p_tx.as_dbm() + g_tx.as_dbi())
    }

    pub const fn as_dbm(self) -> f64 {
        self.0
    }

    pub fn to_watts(self) -> f64 {
        mw_from_dbm(PowerLevel(self.0)) * 1e-3
    }
}

/// Reader-to-node distance and polarization loss factor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LinkGeometry {
    pub distance_m: f64,
    pub plf: f64,
}

impl LinkGeometry {
    pub fn new(distance_m: f64, plf: f64) -> Result<Self, LinkError> {
        let geo = Self { distance_m, plf };
        geo.validate()?;
        Ok(geo)
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            return Err(LinkError::InvalidDistance(self.distance_m));
        }
        validate_plf(self.plf)
    }

    pub fn with_distance(self, distance_m: f64) -> Self {
        Self { distance_m, ..self }
    }
}

fn validate_plf(plf: f64) -> Result<(), LinkError> {
    if plf.is_finite() && plf > 0.0 && plf <= 1.0 {
        Ok(())
    } else {
        Err(LinkError::InvalidPlf(plf))
    }
}

/// Distance at which the free-space factor equals one, `λ / 4π`.
pub fn unity_distance(f: Frequency) -> f64 {
    f.wavelength_m() / (4.0 * PI)
}

/// Free-space factor `(λ / 4πd)²`.
pub fn friis_factor(f: Frequency, distance_m: f64) -> Result<f64, LinkError> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(LinkError::InvalidDistance(distance_m));
    }
    let r = unity_distance(f) / distance_m;
    Ok(r * r)
}

/// Free-space factor in dB, computed without forming the square first.
pub fn friis_factor_db(f: Frequency, distance_m: f64) -> Result<f64, LinkError> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(LinkError::InvalidDistance(distance_m));
    }
    Ok(20.0 * libm::log10(unity_distance(f) / distance_m))
}

/// Power available at the node antenna terminals.
pub fn received_power(
    eirp: Eirp,
    node_gain: AntennaGain,
    f: Frequency,
    geo: LinkGeometry,
) -> Result<PowerLevel, LinkError> {
    geo.validate()?;
    if !eirp.0.is_finite() {
        return Err(LinkError::NonFinite("eirp"));
    }
    if !node_gain.0.is_finite() {
        return Err(LinkError::NonFinite("gain"));
    }
    let path_db = friis_factor_db(f, geo.distance_m)?;
    Ok(PowerLevel(
        eirp.0 + node_gain.0 + path_db + db_from_ratio(geo.plf),
    ))
}

/// Sensitivity estimate from a measured turn-on EIRP: the power the node
/// received at the moment it first operated.
pub fn sensitivity_from_turn_on(
    eirp_on: Eirp,
    node_gain: AntennaGain,
    f: Frequency,
    geo: LinkGeometry,
) -> Result<PowerLevel, LinkError> {
    received_power(eirp_on, node_gain, f, geo)
}

/// Largest distance at which the received power still reaches `sensitivity`.
pub fn max_range(
    eirp: Eirp,
    sensitivity: PowerLevel,
    node_gain: AntennaGain,
    f: Frequency,
    plf: f64,
) -> Result<f64, LinkError> {
    validate_plf(plf)?;
    if !(eirp.0.is_finite() && sensitivity.0.is_finite() && node_gain.0.is_finite()) {
        return Err(LinkError::NonFinite("link budget"));
    }
    // Received power at d = λ/4π, where the free-space factor is unity.
    let at_unity = eirp.0 + node_gain.0 + db_from_ratio(plf);
    let margin_db = at_unity - sensitivity.0;
    if margin_db < 0.0 {
        return Err(LinkError::NoRange {
            sensitivity_dbm: sensitivity.0,
            best_dbm: at_unity,
        });
    }
    Ok(unity_distance(f) * libm::pow(10.0, margin_db / 20.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f_center() -> Frequency {
        Frequency::from_mhz(866.5).unwrap()
    }

    #[test]
    fn dbm_scale_points() {
        assert_eq!(mw_from_dbm(PowerLevel::dbm(0.0)), 1.0);
        assert!((mw_from_dbm(PowerLevel::dbm(-14.0)) - 0.039_810_717).abs() < 1e-9);
        let w = mw_from_dbm(PowerLevel::dbm(35.05));
        assert!((w - 3198.9).abs() < 0.05, "{w}");
        assert!((w - 3200.0).abs() / 3200.0 < 1e-3);
    }

    #[test]
    fn wavelength_is_computed() {
        assert!((f_center().wavelength_m() - 0.345_981).abs() < 1e-6);
    }

    #[test]
    fn friis_factor_points() {
        let f = f_center();
        let unity = unity_distance(f);
        assert!((friis_factor(f, unity).unwrap() - 1.0).abs() < 1e-12);
        let one = friis_factor(f, 1.0).unwrap();
        assert!((one - 7.581e-4).abs() < 1e-6, "{one}");
        assert!((db_from_ratio(one) + 31.20).abs() < 0.005);
        let two = friis_factor(f, 2.0).unwrap();
        assert!((two * 4.0 - one).abs() / one < 1e-12);
    }

    #[test]
    fn friis_factor_rejects_bad_distance() {
        let f = f_center();
        assert_eq!(friis_factor(f, 0.0), Err(LinkError::InvalidDistance(0.0)));
        assert!(friis_factor(f, -1.0).is_err());
        assert!(friis_factor(f, f64::NAN).is_err());
    }

    #[test]
    fn received_power_points() {
        let f = f_center();
        let geo = LinkGeometry::new(1.0, 0.5).unwrap();
        let p = received_power(Eirp::dbm(18.40), AntennaGain::dbi(1.8), f, geo).unwrap();
        assert!((p.as_dbm() + 14.0).abs() < 0.02, "{p}");

        let unity = LinkGeometry::new(unity_distance(f), 1.0).unwrap();
        let p = received_power(Eirp::dbm(12.3), AntennaGain::dbi(0.0), f, unity).unwrap();
        assert!((p.as_dbm() - 12.3).abs() < 1e-12);

        let geo = LinkGeometry::new(4.8, 0.5).unwrap();
        let p = received_power(Eirp::dbm(35.05), AntennaGain::dbi(1.8), f, geo).unwrap();
        assert!((p.as_dbm() + 10.988).abs() < 0.005, "{p}");
    }

    #[test]
    fn sensitivity_is_linear_in_eirp() {
        let f = f_center();
        let geo = LinkGeometry::new(1.0, 0.5).unwrap();
        let g = AntennaGain::dbi(1.8);
        let a = sensitivity_from_turn_on(Eirp::dbm(18.4), g, f, geo).unwrap();
        let b = sensitivity_from_turn_on(Eirp::dbm(23.4), g, f, geo).unwrap();
        assert!(((b - a) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn max_range_points() {
        let f = f_center();
        let g = AntennaGain::dbi(1.8);
        let eirp = Eirp::dbm(35.05);
        let boosted = max_range(eirp, PowerLevel::dbm(-14.0), g, f, 0.5).unwrap();
        let bypass = max_range(eirp, PowerLevel::dbm(-9.0), g, f, 0.5).unwrap();
        assert!((boosted - 6.79).abs() < 0.01, "{boosted}");
        assert!((bypass - 3.82).abs() < 0.01, "{bypass}");
        assert!((boosted / bypass - libm::pow(10.0, 0.25)).abs() < 1e-12);
    }

    #[test]
    fn max_range_boundary_and_error() {
        let f = f_center();
        let g = AntennaGain::dbi(2.0);
        let eirp = Eirp::dbm(10.0);
        let s = PowerLevel::dbm(10.0 + 2.0 + db_from_ratio(0.5));
        let d = max_range(eirp, s, g, f, 0.5).unwrap();
        assert!((d - unity_distance(f)).abs() < 1e-15);
        assert!(matches!(
            max_range(eirp, s + 0.1, g, f, 0.5),
            Err(LinkError::NoRange { .. })
        ));
    }

    #[test]
    fn geometry_validation() {
        assert!(LinkGeometry::new(1.0, 1.0).is_ok());
        assert_eq!(LinkGeometry::new(0.0, 0.5), Err(LinkError::InvalidDistance(0.0)));
        assert_eq!(LinkGeometry::new(1.0, 0.0), Err(LinkError::InvalidPlf(0.0)));
        assert_eq!(LinkGeometry::new(1.0, 1.2), Err(LinkError::InvalidPlf(1.2)));
        assert!(Frequency::from_hz(0.0).is_err());
    }
}
