//! Experiment orchestration: configuration, seeded Monte Carlo runs, latency
//! accounting and CSV/manifest output.
//!
//! [`run_scenario`] is what the `sim` binary calls. It writes the primary
//! CSV to the given path, any secondary tables next to it, and a
//! `<stem>.manifest.json` echoing the config, seed and crate version.

pub mod config;
pub mod latency;
pub mod mux_sim;
pub mod ranging_sim;
pub mod report;
pub mod seed;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde_json::json;

pub use config::{Scenario, SimulationConfig, SweepAxis, SweepMode};
pub use latency::{latency_budget, latency_table, LatencyBudget};
pub use mux_sim::{histogram_table, mux_table, run_mux_sim, MuxSimResult};
pub use ranging_sim::{ranging_table, run_ranging, RangingTrial};
pub use report::{emit_csv, Table};
pub use seed::trial_seed;
pub use sweep::{run_sweep, sweep_table, SweepResult};

use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// CSV files, primary first.
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Short machine-readable digest, also stored in the manifest.
    pub summary: serde_json::Value,
}

/// Runs `scenario` and writes its outputs. `threads` only affects speed.
pub fn run_scenario(
    scenario: Scenario,
    cfg: &SimulationConfig,
    out: &Path,
    threads: Option<usize>,
) -> Result<RunOutcome> {
    cfg.validate_for(scenario)?;
    let mut cfg = cfg.clone();
    cfg.scenario = Some(scenario);
    let mut outputs = vec![out.to_path_buf()];
    let summary = match scenario {
        Scenario::BerSweep | Scenario::PerSweep => {
            let r = run_sweep(&cfg, threads)?;
            emit_csv(&sweep_table(&r), out)?;
            let target = cfg.sweep.target_per;
            json!({
                "points": r.points.len(),
                "total_bits": r.points.iter().map(|p| p.counts.bits).sum::<u64>(),
                "points_meeting_target_per": target.map(|t| r
                    .points
                    .iter()
                    .filter(|p| p.counts.packets > 0 && p.per() + p.per_ci95() < t)
                    .count()),
            })
        }
        Scenario::MuxSim => {
            let r = run_mux_sim(&cfg)?;
            emit_csv(&mux_table(&r), out)?;
            let hist = report::sibling_path(out, "latency");
            emit_csv(&histogram_table(&r), &hist)?;
            outputs.push(hist);
            json!({
                "modem_bytes": r.modem_bytes,
                "modem_loads": r.modem_loads,
                "simulated_time_s": r.end_time,
            })
        }
        Scenario::Ranging => {
            let trials = run_ranging(&cfg, threads)?;
            emit_csv(&ranging_table(&trials), out)?;
            serde_json::to_value(ranging_sim::summarize(&trials)).expect("plain struct")
        }
        Scenario::LatencyBudget => {
            let b = latency_budget(&cfg.baseband.link(), cfg.latency.coded_rate_bps, cfg.latency.distance)?;
            emit_csv(&latency_table(&b), out)?;
            let rp = cfg.profiles.requirement_profile()?;
            json!({
                "total_s": b.total,
                "requirement": cfg.profiles.requirement,
                "bound_s": rp.max_latency,
                "meets_bound": b.meets(&rp),
            })
        }
    };
    let manifest = report::write_manifest(out, scenario.name(), cfg.seed, &outputs, &summary, &cfg)?;
    Ok(RunOutcome {
        outputs,
        manifest,
        summary,
    })
}
