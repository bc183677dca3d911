//! Repeated echo-ranging trials.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Scenario, SimulationConfig};
use super::report::{Cell, Table};
use super::seed::trial_seed;
use super::sweep::run_trials;
use crate::ranging::{echo_range_with, generate_echo, probe_waveform, EchoScene};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangingTrial {
    pub trial: u64,
    pub true_range: f64,
    /// `None` when nothing crossed the detection threshold.
    pub est_range: Option<f64>,
    pub peak_quality: f64,
    pub velocity: Option<f64>,
}

impl RangingTrial {
    pub fn error(&self) -> Option<f64> {
        self.est_range.map(|r| r - self.true_range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangingSummary {
    pub trials: u64,
    pub detections: u64,
    pub rmse: f64,
    pub max_abs_error: f64,
}

pub fn run_ranging(cfg: &SimulationConfig, threads: Option<usize>) -> Result<Vec<RangingTrial>> {
    cfg.validate_for(Scenario::Ranging)?;
    let r = &cfg.ranging;
    run_trials(1, cfg.trials, threads, |_, t| {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, 0, t as u64));
        let true_range = match r.range_span {
            Some([lo, hi]) if hi > lo => rng.random_range(lo..hi),
            Some([lo, _]) => lo,
            None => r.scene.true_range,
        };
        let scene = EchoScene { true_range, ..r.scene };
        let tx = probe_waveform(r.waveform_len, scene.sample_rate, scene.bandwidth, rng.next_u64());
        let rx = generate_echo(&tx, &scene, rng.next_u64())?;
        Ok(match echo_range_with(&tx, &rx, scene.sample_rate, &r.detector) {
            Ok(est) => RangingTrial {
                trial: t as u64,
                true_range,
                est_range: Some(est.range),
                peak_quality: est.peak_quality,
                velocity: est.velocity,
            },
            Err(Error::NoTarget { quality, .. }) => RangingTrial {
                trial: t as u64,
                true_range,
                est_range: None,
                peak_quality: quality,
                velocity: None,
            },
            Err(e) => return Err(e),
        })
    })
}

pub fn summarize(trials: &[RangingTrial]) -> RangingSummary {
    let errors: Vec<f64> = trials.iter().filter_map(RangingTrial::error).collect();
    let rmse = if errors.is_empty() {
        0.0
    } else {
        (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
    };
    RangingSummary {
        trials: trials.len() as u64,
        detections: errors.len() as u64,
        rmse,
        max_abs_error: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
    }
}

pub const RANGING_COLUMNS: [&str; 6] = [
    "trial",
    "true_range_m",
    "est_range_m",
    "error_m",
    "peak_quality",
    "velocity_mps",
];

/// Missed detections and absent velocities are written as `nan`.
pub fn ranging_table(trials: &[RangingTrial]) -> Table {
    let mut t = Table::new(RANGING_COLUMNS.to_vec());
    for r in trials {
        t.push(vec![
            r.trial.into(),
            r.true_range.into(),
            Cell::Float(r.est_range.unwrap_or(f64::NAN)),
            Cell::Float(r.error().unwrap_or(f64::NAN)),
            r.peak_quality.into(),
            Cell::Float(r.velocity.unwrap_or(f64::NAN)),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SPEED_OF_LIGHT;

    #[test]
    fn noiseless_trials_within_one_sample() {
        let mut cfg = SimulationConfig::default();
        cfg.trials = 20;
        cfg.ranging.range_span = Some([0.5, 60.0]);
        let trials = run_ranging(&cfg, Some(3)).unwrap();
        let bound = SPEED_OF_LIGHT / (2.0 * cfg.ranging.scene.sample_rate);
        assert!(trials.iter().all(|t| t.error().unwrap().abs() <= bound));
        let s = summarize(&trials);
        assert_eq!(s.detections, 20);
        assert!(s.max_abs_error <= bound);
    }

    #[test]
    fn missed_detection_row() {
        let mut cfg = SimulationConfig::default();
        cfg.trials = 2;
        cfg.ranging.scene.snr_db = Some(-40.0);
        let trials = run_ranging(&cfg, None).unwrap();
        assert!(trials.iter().all(|t| t.est_range.is_none()));
        let csv = ranging_table(&trials).to_csv();
        assert!(csv.lines().nth(1).unwrap().contains(",nan,nan,"));
    }

    #[test]
    fn range_beyond_waveform_is_config_error() {
        let mut cfg = SimulationConfig::default();
        cfg.ranging.waveform_len = 8;
        assert!(matches!(run_ranging(&cfg, None), Err(Error::Config(_))));
    }
}
