use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfid_harvest::experiments::{self, worker_pool};
use rfid_harvest::tables::{self, write_table};
use rfid_harvest::{ConfigDocument, Error};

/// Simulator for RF-harvesting passive UHF RFID temperature sensors.
#[derive(Debug, Parser)]
#[command(name = "rfid-harvest", version)]
struct Cli {
    /// Scenario TOML file, or `default` for the built-in office scenario.
    #[arg(long, global = true, default_value = "default")]
    config: String,
    /// Directory for output CSVs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn-on sensitivity versus frequency, boosted and bypass.
    SensitivitySweep,
    /// Read rate versus distance, boosted and bypass.
    RangeSweep,
    /// Replay a `time_s,temp_c` trace and compare decoded readings.
    Trace {
        #[arg(long)]
        input: PathBuf,
    },
    /// Charge time and burst period for a capacitor inflow.
    DutyCycle {
        /// Inflow into the capacitor in µW (default: from the configured link).
        #[arg(long)]
        inflow_uw: Option<f64>,
    },
    /// Convert measured turn-on EIRPs into sensitivities.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn run(cli: Cli) -> Result<String, Error> {
    let doc = ConfigDocument::load(&cli.config)?;
    match cli.command {
        Command::SensitivitySweep => {
            let pool = worker_pool(cli.workers)?;
            let rows = experiments::sensitivity_sweep(&doc, cli.seed, &pool)?;
            let path = write_table(&cli.out, "sensitivity.csv", &tables::sensitivity_csv(&rows))?;
            let best = |mode| {
                rows.iter()
                    .filter(|r| r.mode == mode)
                    .filter_map(|r| r.sensitivity.map(|s| (r.frequency.mhz(), s.as_dbm())))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
            };
            let fmt = |b: Option<(f64, f64)>| {
                b.map_or("NA".to_string(), |(f, s)| format!("{s:.2} dBm @ {f:.1} MHz"))
            };
            Ok(format!(
                "sensitivity-sweep: {} rows, best boosted {}, best bypass {} -> {}",
                rows.len(),
                fmt(best(rfid_harvest_core::PowerMode::Boosted)),
                fmt(best(rfid_harvest_core::PowerMode::Bypass)),
                path.display()
            ))
        }
        Command::RangeSweep => {
            let pool = worker_pool(cli.workers)?;
            let rows = experiments::range_sweep(&doc, cli.seed, &pool)?;
            let path = write_table(&cli.out, "range.csv", &tables::range_csv(&rows))?;
            let reach = |mode| {
                rows.iter()
                    .filter(|r| r.mode == mode && r.reads_per_min > 0.0)
                    .map(|r| r.distance_m)
                    .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
                    .map_or("none".to_string(), |d| format!("{d:.2} m"))
            };
            Ok(format!(
                "range-sweep: {} rows, farthest reading boosted {}, bypass {} -> {}",
                rows.len(),
                reach(rfid_harvest_core::PowerMode::Boosted),
                reach(rfid_harvest_core::PowerMode::Bypass),
                path.display()
            ))
        }
        Command::Trace { input } => {
            let points = tables::read_trace(&input)?;
            let rows = experiments::trace(&doc, cli.seed, &points)?;
            let path = write_table(&cli.out, "trace.csv", &tables::trace_csv(&rows))?;
            let max_err = rows.iter().map(|r| r.err_c.abs()).fold(0.0, f64::max);
            Ok(format!(
                "trace: {} reads, max |error| {max_err:.3} °C -> {}",
                rows.len(),
                path.display()
            ))
        }
        Command::DutyCycle { inflow_uw } => {
            let s = doc.scenario(cli.seed)?;
            let inflow_w = match inflow_uw {
                Some(uw) => uw * 1e-6,
                None => experiments::scenario_inflow_w(&s)?,
            };
            let row = experiments::duty_cycle(&s, inflow_w)?;
            let path = write_table(&cli.out, "duty_cycle.csv", &tables::duty_cycle_csv(&[row]))?;
            Ok(format!(
                "duty-cycle: inflow {:.3} µW, window {:.2} µJ, charge time {:.2} s, {:.1} reads/min -> {}",
                row.inflow_uw,
                row.energy_window_uj,
                row.charge_time_s,
                row.reads_per_min,
                path.display()
            ))
        }
        Command::Ingest { input } => {
            let m = tables::read_measurements(&input)?;
            let (rows, skipped) = experiments::ingest(&m);
            for e in &skipped {
                eprintln!("{}:{}: skipped: {}", input.display(), e.line, e.reason);
            }
            let path = write_table(&cli.out, "ingest.csv", &tables::ingest_csv(&rows))?;
            Ok(format!(
                "ingest: {} rows, {} skipped -> {}",
                rows.len(),
                skipped.len(),
                path.display()
            ))
        }
        Command::ShowConfig => Ok(doc.to_toml()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            // A closed pipe on stdout is not a failure of the run.
            let _ = writeln!(io::stdout(), "{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
