//! The three experiments: turn-on sensitivity, read rate versus distance and
//! temperature fidelity. Every point is an independent scenario run, so
//! callers may evaluate points concurrently and merge them in input order.

use alloc::vec::Vec;

use super::engine::{run_scenario_with, RunOptions};
use super::{read_rate, Ambient, Mode, Scenario, SimError};
use crate::linkbudget::{sensitivity_from_turn_on, Eirp, Frequency, PowerLevel};

/// Parameters of the turn-on power search.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TurnOnSearch {
    pub min_eirp_dbm: f64,
    pub max_eirp_dbm: f64,
    pub step_db: f64,
    /// Reader-to-node distance of the measurement setup.
    pub distance_m: f64,
    /// A trial fails if no read arrives within this time.
    pub timeout_s: f64,
}

impl Default for TurnOnSearch {
    fn default() -> Self {
        Self {
            min_eirp_dbm: -10.0,
            max_eirp_dbm: 40.0,
            step_db: 0.1,
            distance_m: 1.0,
            timeout_s: 30.0,
        }
    }
}

impl TurnOnSearch {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.step_db > 0.0) {
            return Err(SimError::InvalidScenario("turn-on step must be > 0 dB"));
        }
        if !(self.min_eirp_dbm < self.max_eirp_dbm) {
            return Err(SimError::InvalidScenario("turn-on EIRP range is empty"));
        }
        if !(self.timeout_s > 0.0) {
            return Err(SimError::InvalidScenario("turn-on timeout must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRow {
    pub frequency: Frequency,
    pub mode: Mode,
    /// `None`: not energizable even at the top of the search range.
    pub eirp_on: Option<Eirp>,
    pub sensitivity: Option<PowerLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeRow {
    pub distance_m: f64,
    pub mode: Mode,
    pub reads_per_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Read completion time.
    pub t_s: f64,
    /// Ambient temperature when the reported sample was taken.
    pub true_c: f64,
    pub decoded_c: f64,
    pub err_c: f64,
}

fn turn_on_trial(
    template: &Scenario,
    f: Frequency,
    mode: Mode,
    search: &TurnOnSearch,
    eirp_dbm: f64,
) -> Result<bool, SimError> {
    let mut s = template.clone().anechoic();
    s.reader.frequency = f;
    s.reader.eirp = Eirp::dbm(eirp_dbm);
    s.reader.regulatory_check = false;
    s.geometry.distance_m = search.distance_m;
    s.mode = mode;
    s.duration_s = search.timeout_s;
    let log = run_scenario_with(
        &s,
        RunOptions {
            stop_after_reads: Some(1),
            record_energy_trace: false,
        },
    )?;
    Ok(!log.reads.is_empty())
}

/// Raises the EIRP (by bisection) until the node delivers a correct reading,
/// then converts the turn-on EIRP to a sensitivity.
pub fn turn_on_point(
    template: &Scenario,
    f: Frequency,
    mode: Mode,
    search: &TurnOnSearch,
) -> Result<SensitivityRow, SimError> {
    search.validate()?;
    let none = SensitivityRow {
        frequency: f,
        mode,
        eirp_on: None,
        sensitivity: None,
    };
    let mut lo = search.min_eirp_dbm;
    let mut hi = search.max_eirp_dbm;
    let eirp_on = if turn_on_trial(template, f, mode, search, lo)? {
        lo
    } else if !turn_on_trial(template, f, mode, search, hi)? {
        return Ok(none);
    } else {
        // Invariant: lo fails, hi succeeds.
        while hi - lo > search.step_db {
            let mid = 0.5 * (lo + hi);
            if turn_on_trial(template, f, mode, search, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let geometry = template.geometry.with_distance(search.distance_m);
    let s = sensitivity_from_turn_on(Eirp::dbm(eirp_on), template.node_gain, f, geometry)?;
    Ok(SensitivityRow {
        eirp_on: Some(Eirp::dbm(eirp_on)),
        sensitivity: Some(s),
        ..none
    })
}

/// Boosted and bypass sensitivity for every frequency, frequency-major.
pub fn turn_on_sweep(
    template: &Scenario,
    freqs: &[Frequency],
    search: &TurnOnSearch,
) -> Result<Vec<SensitivityRow>, SimError> {
    let mut rows = Vec::with_capacity(freqs.len() * 2);
    for &f in freqs {
        for mode in [Mode::Boosted, Mode::Bypass] {
            rows.push(turn_on_point(template, f, mode, search)?);
        }
    }
    Ok(rows)
}

pub fn range_point(template: &Scenario, distance_m: f64, mode: Mode) -> Result<RangeRow, SimError> {
    let mut s = template.clone();
    s.geometry.distance_m = distance_m;
    s.mode = mode;
    let log = run_scenario_with(
        &s,
        RunOptions {
            stop_after_reads: None,
            record_energy_trace: false,
        },
    )?;
    Ok(RangeRow {
        distance_m,
        mode,
        reads_per_min: read_rate(&log, s.duration_s),
    })
}

/// Read rate for both modes at every distance, distance-major.
pub fn range_sweep(template: &Scenario, distances: &[f64]) -> Result<Vec<RangeRow>, SimError> {
    let mut rows = Vec::with_capacity(distances.len() * 2);
    for &d in distances {
        for mode in [Mode::Boosted, Mode::Bypass] {
            rows.push(range_point(template, d, mode)?);
        }
    }
    Ok(rows)
}

/// Largest distance in `[near_m, far_m]` at which `mode` still logs reads,
/// found by bisection to within `tolerance_m`. `None` if even `near_m` fails.
pub fn operating_range(
    template: &Scenario,
    mode: Mode,
    near_m: f64,
    far_m: f64,
    tolerance_m: f64,
) -> Result<Option<f64>, SimError> {
    if !(near_m > 0.0 && far_m > near_m && tolerance_m > 0.0) {
        return Err(SimError::InvalidScenario("operating range bracket is invalid"));
    }
    let reads_at = |d: f64| -> Result<bool, SimError> {
        let mut s = template.clone();
        s.geometry.distance_m = d;
        s.mode = mode;
        let log = run_scenario_with(
            &s,
            RunOptions {
                stop_after_reads: Some(1),
                record_energy_trace: false,
            },
        )?;
        Ok(!log.reads.is_empty())
    };
    if !reads_at(near_m)? {
        return Ok(None);
    }
    if reads_at(far_m)? {
        return Ok(Some(far_m));
    }
    let (mut ok, mut fail) = (near_m, far_m);
    while fail - ok > tolerance_m {
        let mid = 0.5 * (ok + fail);
        if reads_at(mid)? {
            ok = mid;
        } else {
            fail = mid;
        }
    }
    Ok(Some(ok))
}

/// Drives the node with a temperature trace and compares every read with the
/// ambient value at its sampling instant. The run spans the trace, or the
/// scenario duration for a single-point trace.
pub fn temperature_trace(scenario: &Scenario, trace: &[(f64, f64)]) -> Result<Vec<TraceRow>, SimError> {
    let ambient = Ambient::trace(trace.to_vec())?;
    let span = trace[trace.len() - 1].0;
    let mut s = scenario.clone();
    s.ambient = ambient;
    if span > 0.0 {
        s.duration_s = span;
    }
    let log = run_scenario_with(
        &s,
        RunOptions {
            stop_after_reads: None,
            record_energy_trace: false,
        },
    )?;
    let rows = log
        .reads
        .iter()
        .map(|r| {
            let true_c = log
                .commits
                .iter()
                .rev()
                .find(|c| c.seq == r.seq && c.committed_at_s <= r.timestamp_s)
                .map(|c| c.true_c)
                .expect("every read follows its commit");
            TraceRow {
                t_s: r.timestamp_s,
                true_c,
                decoded_c: r.decoded_c,
                err_c: r.decoded_c - true_c,
            }
        })
        .collect();
    Ok(rows)
}
