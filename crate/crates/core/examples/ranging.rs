//! Two-way ranging with a drifting responder clock, echo ranging under
//! strong self-interference, two closely spaced targets, and Doppler.
//!
//!     cargo run --release --example ranging

use linksim::ranging::{
    detect_echoes, echo_range, echo_range_with, generate_echo, probe_waveform, twr_range, DopplerConfig,
    EchoRangeConfig, EchoScene, TwrExchange,
};
use linksim::{Complex64, SPEED_OF_LIGHT};

fn main() -> linksim::Result<()> {
    for ppm in [0.0, 2.0, 20.0] {
        let x = TwrExchange::simulate(0.8, 0.0, 200e-6, 0.013, ppm);
        println!(
            "TWR 0.8 m, responder drift {ppm:>4} ppm -> {:.4} m (predicted bias {:.4} m)",
            twr_range(&x)?,
            x.drift_error()
        );
    }

    let fs = 1e9;
    let tx = probe_waveform(2048, fs, 500e6, 42);
    let scene = EchoScene {
        true_range: 3.2,
        residual_si_power: Some(20.0),
        snr_db: Some(5.0),
        ..EchoScene::default()
    };
    let rx = generate_echo(&tx, &scene, 7)?;
    let est = echo_range(&tx, &rx, fs)?;
    println!(
        "echo at 3.2 m with SI 20 dB above it -> {:.3} m, quality {:.2}",
        est.range, est.peak_quality
    );
    let raw = EchoRangeConfig {
        cancel_self_interference: false,
        threshold: 0.0,
        ..Default::default()
    };
    println!(
        "  same, without cancellation -> {:.3} m",
        echo_range_with(&tx, &rx, fs, &raw)?.range
    );

    // two reflectors one range-resolution cell apart
    let sep = SPEED_OF_LIGHT / (2.0 * 500e6);
    let (d1, d2) = (40, 42);
    let mut rx2 = vec![Complex64::default(); tx.len() + d2];
    for (i, x) in tx.iter().enumerate() {
        rx2[i + d1] += x * 0.1;
        rx2[i + d2] += x * Complex64::from_polar(0.07, 2.0);
    }
    let found = detect_echoes(&tx, &rx2, fs, 3, &EchoRangeConfig::default())?;
    let ranges: Vec<String> = found.iter().map(|e| format!("{:.3}", e.range)).collect();
    println!("two targets {sep:.3} m apart -> [{}] m", ranges.join(", "));

    let moving = EchoScene {
        true_range: 2.0,
        relative_velocity: 25.0,
        block_len: 256,
        ..EchoScene::default()
    };
    let rx3 = generate_echo(&tx, &moving, 0)?;
    let cfg = EchoRangeConfig {
        cancel_self_interference: false,
        doppler: Some(DopplerConfig {
            block_len: 256,
            carrier_wavelength: moving.carrier_wavelength,
        }),
        ..Default::default()
    };
    let est = echo_range_with(&tx, &rx3, fs, &cfg)?;
    println!(
        "target at 2.0 m closing at 25 m/s -> {:.3} m, {:.2} m/s",
        est.range,
        est.velocity.unwrap()
    );
    Ok(())
}
