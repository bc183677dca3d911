//! Two modems with 10 % packet loss each: single-modem versus redundant
//! dispatch, plus distributive load splitting.
//!
//!     cargo run --release --example redundant_mux

use linksim::harness::config::{ChannelSpec, LinkModel, ProfileRef};
use linksim::harness::{run_mux_sim, SimulationConfig};
use linksim::mux::{FrameSource, Redundancy};

fn run(redundancy: Redundancy) -> linksim::Result<()> {
    let mut cfg = SimulationConfig::default();
    cfg.profiles.modem_capacity = Some(1000.0);
    cfg.mux.packets_per_channel = 100_000;
    cfg.mux.link = LinkModel::InducedLoss { loss: [0.1, 0.1] };
    cfg.mux.channels = vec![ChannelSpec {
        id: 1,
        service_profile: ProfileRef::Named("SP2".into()),
        deadline: 50e-6,
        redundancy,
        payload_bytes: 120,
        interval: 8e-6,
        offset: 0.0,
        source: FrameSource::Wtb,
    }];
    let r = run_mux_sim(&cfg)?;
    let c = &r.channels[0];
    println!(
        "{redundancy:<12?} PER {:.4} +/- {:.4}  duplicates {:>6}  mean latency {:.2} us  modem bytes {:?}",
        c.per(),
        c.per_ci95(),
        c.counters.duplicate_copies,
        c.mean_latency * 1e6,
        r.modem_bytes
    );
    Ok(())
}

fn main() -> linksim::Result<()> {
    for r in [Redundancy::Single, Redundancy::Redundant, Redundancy::Distributive] {
        run(r)?;
    }
    Ok(())
}
