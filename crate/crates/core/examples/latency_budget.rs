//! Latency budget of one codeword at several coded rates.
//!
//!     cargo run --example latency_budget

use linksim::baseband::LinkConfig;
use linksim::harness::latency_budget;
use linksim::profiles::{RequirementProfile, RequirementProfileId};

fn main() -> linksim::Result<()> {
    let link = LinkConfig::default().fitted();
    let rp1 = RequirementProfile::builtin(RequirementProfileId::Rp1);
    let b = latency_budget(&link, 500e6, 0.5)?;
    for (name, d) in &b.stages {
        println!("{name:<16} {:>10.4} us", d * 1e6);
    }
    println!("{:<16} {:>10.4} us", "total", b.total * 1e6);

    for rate in [50e6, 100e6, 250e6, 500e6, 1e9] {
        let b = latency_budget(&link, rate, 0.5)?;
        println!(
            "{:>6.0} Mbit/s: {:>8.2} us  {}",
            rate / 1e6,
            b.total * 1e6,
            if b.meets(&rp1) { "meets RP1" } else { "misses RP1" }
        );
    }
    Ok(())
}
