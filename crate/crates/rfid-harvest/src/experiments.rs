//! Sweep drivers. Points are independent scenario runs; they are spread over
//! a worker pool and collected back in input order, so the output does not
//! depend on the worker count.

use rayon::prelude::*;
use rayon::ThreadPool;
use rfid_harvest_core::gen2sim::{
    range_point, temperature_trace, turn_on_point, Mode, RangeRow, SensitivityRow, TraceRow,
};
use rfid_harvest_core::harvester::{charge_time_for_inflow, energy_window, HarvestError};
use rfid_harvest_core::linkbudget::{received_power, sensitivity_from_turn_on};
use rfid_harvest_core::{AntennaGain, Eirp, Frequency, LinkGeometry, Scenario};

use crate::config::ConfigDocument;
use crate::tables::{DutyCycleRow, Measurements, RowError};
use crate::Error;

const MODES: [Mode; 2] = [Mode::Boosted, Mode::Bypass];

/// `None` uses one thread per core.
pub fn worker_pool(workers: Option<usize>) -> Result<ThreadPool, Error> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Usage("--workers must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

/// Turn-on sensitivity for every configured frequency, both modes.
pub fn sensitivity_sweep(
    doc: &ConfigDocument,
    seed: u64,
    pool: &ThreadPool,
) -> Result<Vec<SensitivityRow>, Error> {
    let template = doc.scenario(seed)?;
    let search = doc.sweep.turn_on;
    let points: Vec<(Frequency, Mode)> = doc
        .sweep_frequencies()?
        .into_iter()
        .flat_map(|f| MODES.map(|m| (f, m)))
        .collect();
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|&(f, m)| turn_on_point(&template, f, m, &search))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(rows)
}

/// Reads per minute at every configured distance, both modes.
pub fn range_sweep(doc: &ConfigDocument, seed: u64, pool: &ThreadPool) -> Result<Vec<RangeRow>, Error> {
    let template = doc.scenario(seed)?;
    if let Some(d) = doc.sweep.distances_m.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::Config(format!("sweep distance {d} must be > 0")));
    }
    let points: Vec<(f64, Mode)> = doc
        .sweep
        .distances_m
        .iter()
        .flat_map(|&d| MODES.map(|m| (d, m)))
        .collect();
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|&(d, m)| range_point(&template, d, m))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(rows)
}

pub fn trace(doc: &ConfigDocument, seed: u64, points: &[(f64, f64)]) -> Result<Vec<TraceRow>, Error> {
    Ok(temperature_trace(&doc.scenario(seed)?, points)?)
}

/// Inflow reaching the capacitor at the configured link, in watts.
pub fn scenario_inflow_w(s: &Scenario) -> Result<f64, Error> {
    let p = received_power(s.reader.eirp, s.node_gain, s.reader.frequency, s.geometry)?
        - s.environment_excess_loss_db;
    let dc = s.rectifier.rectified_dc(p, s.reader.frequency);
    if dc.v_dc < s.pump.v_start {
        return Ok(0.0);
    }
    Ok(s.pump.inflow_w(dc.p_dc_w))
}

/// Boosted duty cycle for a given capacitor inflow: refill the window, run one
/// task, then drain through standby to the cutoff.
pub fn duty_cycle(s: &Scenario, inflow_w: f64) -> Result<DutyCycleRow, Error> {
    let window = energy_window(&s.pump, &s.capacitor);
    let charge = charge_time_for_inflow(inflow_w, &s.pump, &s.capacitor)?;
    let task = s.node.task;
    let drain_w = task.standby_power_w - inflow_w;
    if !(drain_w > 0.0) {
        return Err(HarvestError::InvalidParams("standby draw must exceed the inflow").into());
    }
    let leftover = window - task.cycle_energy_j() + inflow_w * task.task_duration_s;
    let burst = task.task_duration_s + leftover.max(0.0) / drain_w;
    let cycle = charge + burst;
    Ok(DutyCycleRow {
        inflow_uw: inflow_w * 1e6,
        energy_window_uj: window * 1e6,
        charge_time_s: charge,
        burst_s: burst,
        cycle_s: cycle,
        reads_per_min: 60.0 / cycle,
    })
}

/// One sensitivity per good row, `(freq_mhz, dBm)`, plus every skipped row.
pub fn ingest(m: &Measurements) -> (Vec<(f64, f64)>, Vec<RowError>) {
    let mut skipped = m.skipped.clone();
    let mut out = Vec::with_capacity(m.rows.len());
    for &(line, r) in &m.rows {
        let result = Frequency::from_mhz(r.freq_mhz).and_then(|f| {
            let geo = LinkGeometry::new(r.distance_m, r.plf)?;
            sensitivity_from_turn_on(Eirp::dbm(r.eirp_on_dbm), AntennaGain::dbi(r.node_gain_dbi), f, geo)
        });
        match result {
            Ok(s) => out.push((r.freq_mhz, s.as_dbm())),
            Err(e) => skipped.push(RowError {
                line,
                reason: e.to_string(),
            }),
        }
    }
    skipped.sort_by_key(|e| e.line);
    (out, skipped)
}
