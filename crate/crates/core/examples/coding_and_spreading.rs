//! Coding gain of the K=7 rate-1/2 code and the SNR shift bought by
//! spreading, both measured with the Monte Carlo harness.
//!
//!     cargo run --release --example coding_and_spreading

use linksim::harness::{run_sweep, SimulationConfig, SweepAxis, SweepMode};

fn ber_at(mode: SweepMode, axis: SweepAxis, sf: u32, value: f64, trials: usize) -> linksim::Result<f64> {
    let mut cfg = SimulationConfig::default();
    cfg.sweep.mode = mode;
    cfg.sweep.axis = axis;
    cfg.sweep.values = vec![Some(value)];
    cfg.baseband.spreading.sf = sf;
    cfg.trials = trials;
    cfg.sweep.bits_per_trial = 20_000;
    Ok(run_sweep(&cfg, None)?.points[0].ber())
}

fn main() -> linksim::Result<()> {
    println!("coding gain (BPSK, AWGN):");
    for ebn0 in [3.0, 4.0, 5.0, 6.0, 6.8] {
        let unc = ber_at(SweepMode::Uncoded, SweepAxis::EbN0Db, 1, ebn0, 50)?;
        let cod = ber_at(SweepMode::Coded, SweepAxis::EbN0Db, 1, ebn0, 500)?;
        println!("  Eb/N0 {ebn0:>4.1} dB  uncoded {unc:.3e}  coded {cod:.3e}");
    }

    println!("spreading, per-chip SNR axis:");
    for snr in [-6.0, -4.0, -2.0, 0.0] {
        let sf1 = ber_at(SweepMode::Uncoded, SweepAxis::SnrDb, 1, snr + 10.0 * 8f64.log10(), 50)?;
        let sf8 = ber_at(SweepMode::Uncoded, SweepAxis::SnrDb, 8, snr, 50)?;
        println!("  chip SNR {snr:>5.1} dB  SF=8 {sf8:.3e}  SF=1 at +9.03 dB {sf1:.3e}");
    }
    Ok(())
}
