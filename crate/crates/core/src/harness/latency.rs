//! End-to-end latency budget for one codeword.
//!
//! Stages, in order:
//! - `frame_assembly`: airtime of the preamble and the pilot block.
//! - `encoding`: encoder flush, the coded tail bits at the coded rate.
//! - `serialization`: coded bits at the coded rate.
//! - `cp_overhead`: airtime of cyclic prefixes, in-block pilots and padding.
//! - `propagation`: distance over the speed of light.
//! - `decoding`: equal to serialization, assuming a pipelined decoder that
//!   keeps pace with the air interface.
//!
//! Airtime of overhead samples uses the sample rate implied by the coded
//! rate: `coded_rate * sf / bits_per_symbol`.

use serde::Serialize;

use super::report::{Cell, Table};
use crate::baseband::frame::PREAMBLE_LEN;
use crate::baseband::LinkConfig;
use crate::profiles::RequirementProfile;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyBudget {
    /// `(name, seconds)` in pipeline order.
    pub stages: Vec<(String, f64)>,
    pub coded_rate_bps: f64,
    pub total: f64,
}

impl LatencyBudget {
    pub fn stage(&self, name: &str) -> Option<f64> {
        self.stages.iter().find(|(n, _)| n == name).map(|(_, d)| *d)
    }

    /// Strictly below the profile's latency bound.
    pub fn meets(&self, rp: &RequirementProfile) -> bool {
        self.total < rp.max_latency
    }
}

pub fn latency_budget(link: &LinkConfig, coded_rate_bps: f64, distance_m: f64) -> Result<LatencyBudget> {
    if !(coded_rate_bps > 0.0) || !coded_rate_bps.is_finite() {
        return Err(Error::invalid("coded_rate_bps must be positive"));
    }
    if !(distance_m >= 0.0) {
        return Err(Error::invalid("distance must be non-negative"));
    }
    link.validate()?;
    let g = &link.geometry;
    let coded_bits = link.codec.coded_bits() as f64;
    let sample_rate = coded_rate_bps * f64::from(link.spreading.sf) / link.modulation.bits_per_symbol() as f64;

    let header_samples = (PREAMBLE_LEN + g.block_len()) as f64;
    let payload_samples = (g.blocks * g.block_len()) as f64;
    let data_samples = link.data_symbols() as f64;
    let serialization = coded_bits / coded_rate_bps;
    let stages = vec![
        ("frame_assembly".to_string(), header_samples / sample_rate),
        (
            "encoding".to_string(),
            2.0 * link.codec.tail_bits() as f64 / coded_rate_bps,
        ),
        ("serialization".to_string(), serialization),
        (
            "cp_overhead".to_string(),
            (payload_samples - data_samples) / sample_rate,
        ),
        ("propagation".to_string(), distance_m / SPEED_OF_LIGHT),
        ("decoding".to_string(), serialization),
    ];
    let total = stages.iter().map(|(_, d)| d).sum();
    Ok(LatencyBudget {
        stages,
        coded_rate_bps,
        total,
    })
}

pub const LATENCY_COLUMNS: [&str; 3] = ["stage", "duration_s", "cumulative_s"];

/// Stage rows followed by a `total` row.
pub fn latency_table(b: &LatencyBudget) -> Table {
    let mut t = Table::new(LATENCY_COLUMNS.to_vec());
    let mut acc = 0.0;
    for (name, d) in &b.stages {
        acc += d;
        t.push(vec![Cell::Text(name.clone()), (*d).into(), acc.into()]);
    }
    t.push(vec!["total".into(), b.total.into(), b.total.into()]);
    t
}
