//! Uncoded BPSK over AWGN against the closed-form Q-function curve.
//!
//!     cargo run --release --example awgn_ber_sweep

use linksim::harness::{run_sweep, SimulationConfig};
use statrs::function::erf::erfc;

fn q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn main() -> linksim::Result<()> {
    let mut cfg = SimulationConfig::default();
    cfg.sweep.values = (0..=10).map(|v| Some(v as f64)).collect();
    cfg.trials = 50;
    cfg.sweep.bits_per_trial = 20_000;

    let result = run_sweep(&cfg, None)?;
    println!("{:>8} {:>12} {:>12} {:>10}", "Eb/N0", "measured", "theory", "sigmas");
    for p in &result.points {
        let ebn0 = p.axis_value.unwrap();
        let theory = q((2.0 * 10f64.powf(ebn0 / 10.0)).sqrt());
        let sigma = (theory * (1.0 - theory) / p.counts.bits as f64).sqrt();
        println!(
            "{ebn0:>8.1} {:>12.4e} {theory:>12.4e} {:>10.2}",
            p.ber(),
            (p.ber() - theory) / sigma
        );
    }
    Ok(())
}
