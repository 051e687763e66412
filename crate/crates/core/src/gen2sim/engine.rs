use alloc::vec::Vec;

use super::queue::{to_micros, to_seconds, EventQueue, Micros};
use super::{
    CommitRecord, EnergySample, EnergyTotals, Mode, PhaseTransition, ReadLog, ReadRecord,
    Scenario, SimError,
};
use crate::epc::{decode_epc, TagMemory};
use crate::harvester::{DcOutput, Harvester, HarvesterState, Phase};
use crate::linkbudget::received_power;
use crate::node::{decode_temperature, SensorNode, TaskOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// End the run as soon as this many reads have been logged.
    pub stop_after_reads: Option<usize>,
    pub record_energy_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            stop_after_reads: None,
            record_energy_trace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Query,
    Tick,
}

#[derive(Debug, Clone, Copy)]
enum Activity {
    Off,
    Task {
        outcome: TaskOutcome,
        sampled_at: f64,
        true_c: f64,
        remaining_j: f64,
        remaining_us: Micros,
    },
    Standby,
}

pub fn run_scenario(s: &Scenario) -> Result<ReadLog, SimError> {
    run_scenario_with(s, RunOptions::default())
}

pub fn run_scenario_with(s: &Scenario, opts: RunOptions) -> Result<ReadLog, SimError> {
    s.validate()?;
    Engine::new(s, opts)?.run()
}

struct Engine<'a> {
    s: &'a Scenario,
    opts: RunOptions,
    queue: EventQueue<Event>,
    harvester: Harvester,
    state: HarvesterState,
    dc: DcOutput,
    node: SensorNode,
    memory: TagMemory,
    activity: Activity,
    has_epc: bool,
    fresh_epc: bool,
    burst_task_started: bool,
    end_us: Micros,
    dt_us: Micros,
    trace_us: Micros,
    next_trace_us: Micros,
    log: ReadLog,
}

impl<'a> Engine<'a> {
    fn new(s: &'a Scenario, opts: RunOptions) -> Result<Self, SimError> {
        let p_rx = received_power(s.reader.eirp, s.node_gain, s.reader.frequency, s.geometry)?
            - s.environment_excess_loss_db;
        let dc = s.rectifier.rectified_dc(p_rx, s.reader.frequency);
        let harvester =
            Harvester::with_bypass_margin(s.pump, &s.rectifier, s.bypass_in_situ_margin_db);
        let cap = s.capacitor.normalized();
        let totals = EnergyTotals {
            cap_initial_j: cap.energy_j(),
            ..EnergyTotals::default()
        };
        Ok(Self {
            s,
            opts,
            queue: EventQueue::new(),
            harvester,
            state: HarvesterState::new(s.mode, cap),
            dc,
            node: SensorNode::new(s.node, s.seed),
            memory: TagMemory::new(s.memory)?,
            activity: Activity::Off,
            has_epc: false,
            fresh_epc: false,
            burst_task_started: false,
            end_us: to_micros(s.duration_s),
            dt_us: to_micros(s.time_step_s),
            trace_us: to_micros(s.trace_interval_s),
            next_trace_us: 0,
            log: ReadLog {
                mode: s.mode,
                duration_s: s.duration_s,
                received_dbm: p_rx.as_dbm(),
                reads: Vec::new(),
                commits: Vec::new(),
                transitions: Vec::new(),
                energy_trace: Vec::new(),
                totals,
            },
        })
    }

    /// Whether the rectified field is above the mode's operating threshold.
    fn powered(&self) -> bool {
        match self.s.mode {
            Mode::Boosted => self.dc.v_dc >= self.harvester.params.v_start,
            Mode::Bypass => self.dc.v_dc >= self.harvester.bypass_threshold_v,
        }
    }

    fn run(mut self) -> Result<ReadLog, SimError> {
        // Queries go in first so they precede node ticks at equal timestamps.
        let period_us = to_micros(self.s.reader.query_period_s);
        let mut q = period_us;
        while q <= self.end_us {
            self.queue.schedule(q, Event::Query);
            q += period_us;
        }
        if self.end_us > 0 {
            self.queue.schedule(0, Event::Tick);
        }

        let mut stopped_at = self.end_us;
        while let Some((t, event)) = self.queue.pop() {
            match event {
                Event::Query => self.on_query(t)?,
                Event::Tick => {
                    self.on_tick(t)?;
                    let next = t + self.dt_us;
                    if next < self.end_us {
                        self.queue.schedule(next, Event::Tick);
                    }
                }
            }
            if let Some(limit) = self.opts.stop_after_reads {
                if self.log.reads.len() >= limit || self.dead() {
                    stopped_at = t;
                    break;
                }
            }
        }

        if self.opts.record_energy_trace {
            self.sample_energy(stopped_at);
        }
        self.log.totals.cap_final_j = self.state.cap.energy_j();
        Ok(self.log)
    }

    /// Nothing can change any more: the static field never powers the node.
    fn dead(&self) -> bool {
        !self.powered() && matches!(self.state.phase, Phase::Idle)
    }

    fn on_query(&mut self, t: Micros) -> Result<(), SimError> {
        if !self.powered() || !self.has_epc {
            return Ok(());
        }
        if self.s.mode == Mode::Boosted && !self.fresh_epc {
            return Ok(());
        }
        let epc = self.memory.read_epc()?;
        let sample = decode_epc(&epc)?;
        let cfg = self.node.config();
        let decoded_c = decode_temperature(sample.code, &cfg.sensor, &cfg.adc)?;
        self.log.reads.push(ReadRecord {
            timestamp_s: to_seconds(t) + self.s.reader.read_duration_s,
            epc,
            seq: sample.seq,
            decoded_c,
        });
        self.fresh_epc = false;
        Ok(())
    }

    fn start_task(&mut self, t: Micros, available_j: f64) {
        let now = to_seconds(t);
        let true_c = self.s.ambient.at(now);
        let outcome = self.node.execute_task_cycle(available_j, true_c, now);
        self.activity = if outcome.epc_written {
            Activity::Task {
                outcome,
                sampled_at: now,
                true_c,
                remaining_j: outcome.energy_used,
                remaining_us: to_micros(self.s.node.task.task_duration_s),
            }
        } else {
            Activity::Standby
        };
    }

    fn load_w(&self) -> f64 {
        let dt = to_seconds(self.dt_us);
        match self.activity {
            Activity::Off => 0.0,
            Activity::Standby => match self.s.mode {
                Mode::Boosted => self.s.node.task.standby_power_w,
                Mode::Bypass => 0.0,
            },
            Activity::Task { remaining_j, .. } => {
                let task_w = self.s.node.task.task_power_w();
                let finishing_w = remaining_j / dt;
                if finishing_w < task_w {
                    finishing_w
                } else {
                    task_w
                }
            }
        }
    }

    fn on_tick(&mut self, t: Micros) -> Result<(), SimError> {
        if self.opts.record_energy_trace && t >= self.next_trace_us {
            self.sample_energy(t);
            self.next_trace_us = t + self.trace_us;
        }

        // The MCU wakes when the regulator output comes up.
        match self.s.mode {
            Mode::Boosted => {
                if self.state.phase == Phase::Supplying
                    && matches!(self.activity, Activity::Off)
                    && !self.burst_task_started
                {
                    self.burst_task_started = true;
                    let available = self.state.available_j(&self.harvester.params);
                    self.start_task(t, available);
                }
            }
            Mode::Bypass => {
                if self.powered() && matches!(self.activity, Activity::Off) {
                    self.start_task(t, f64::INFINITY);
                }
            }
        }

        let dt = to_seconds(self.dt_us);
        let load = self.load_w();
        let before = self.state.phase;
        let (next, energy) = self.harvester.step(self.state, self.dc, load, dt)?;
        self.state = next;

        let totals = &mut self.log.totals;
        totals.harvested_j += energy.harvested_j;
        totals.stored_j += energy.stored_j;
        totals.delivered_j += energy.delivered_j;
        let moved = energy.stored_j.max(energy.delivered_j).max(energy.harvested_j);
        if moved > totals.max_step_j {
            totals.max_step_j = moved;
        }

        let end_of_tick = t + self.dt_us;
        if before != next.phase {
            self.log.transitions.push(PhaseTransition {
                t_s: to_seconds(end_of_tick),
                from: before,
                to: next.phase,
            });
            if next.phase == Phase::Supplying {
                self.burst_task_started = false;
            }
        }

        let supplied = next.phase == Phase::Supplying;
        self.activity = match self.activity {
            Activity::Task {
                outcome,
                sampled_at,
                true_c,
                remaining_j,
                remaining_us,
            } => {
                self.log.totals.task_delivered_j += energy.delivered_j;
                let remaining_j = remaining_j - energy.delivered_j;
                let remaining_us = remaining_us.saturating_sub(self.dt_us);
                let done = remaining_j <= outcome.energy_used * 1e-9 && remaining_us == 0;
                if done {
                    self.commit(end_of_tick, &outcome, sampled_at, true_c, before)?;
                    match self.s.mode {
                        Mode::Boosted if supplied => Activity::Standby,
                        _ => Activity::Off,
                    }
                } else if !supplied {
                    // Brown-out before the I²C write completed.
                    Activity::Off
                } else {
                    Activity::Task {
                        outcome,
                        sampled_at,
                        true_c,
                        remaining_j,
                        remaining_us,
                    }
                }
            }
            Activity::Standby if !supplied => Activity::Off,
            other => other,
        };
        Ok(())
    }

    fn commit(
        &mut self,
        t: Micros,
        outcome: &TaskOutcome,
        sampled_at: f64,
        true_c: f64,
        phase: Phase,
    ) -> Result<(), SimError> {
        let epc = outcome.epc.expect("written task carries an EPC");
        self.memory.commit(&epc)?;
        let sample = decode_epc(&epc)?;
        self.log.totals.task_energy_used_j += outcome.energy_used;
        self.log.commits.push(CommitRecord {
            sampled_at_s: sampled_at,
            committed_at_s: to_seconds(t),
            seq: sample.seq,
            code: sample.code.value(),
            true_c,
            phase,
        });
        self.has_epc = true;
        self.fresh_epc = true;
        Ok(())
    }

    fn sample_energy(&mut self, t: Micros) {
        let totals = &self.log.totals;
        self.log.energy_trace.push(EnergySample {
            t_s: to_seconds(t),
            phase: self.state.phase,
            cap_voltage: self.state.cap.voltage(),
            harvested_j: totals.harvested_j,
            stored_j: totals.stored_j,
            delivered_j: totals.delivered_j,
        });
    }
}
