//! Timing and carrier-frequency acquisition on the repeated-half preamble.
//!
//!     cargo run --release --example sync_acquisition

use linksim::baseband::frame::preamble;
use linksim::baseband::sync::acquire_sync;
use linksim::channel::add_awgn;
use linksim::Complex64;

fn main() -> linksim::Result<()> {
    let p = preamble();
    let true_cfo = 0.01;
    for snr_db in [0.0, 10.0, 20.0, 30.0] {
        let mut worst = 0.0f64;
        let mut timing_ok = 0;
        for seed in 0..200u64 {
            let mut rx = vec![Complex64::default(); 40];
            rx.extend_from_slice(&p);
            rx.extend(std::iter::repeat_n(Complex64::default(), 40));
            for (n, x) in rx.iter_mut().enumerate() {
                *x *= Complex64::from_polar(1.0, true_cfo * n as f64 + 0.3);
            }
            add_awgn(&mut rx, 10f64.powf(-snr_db / 10.0), seed);
            let s = acquire_sync(&rx, &p)?;
            timing_ok += usize::from(s.timing_offset == 40);
            worst = worst.max((s.cfo_estimate - true_cfo).abs());
        }
        println!("SNR {snr_db:>4.0} dB  timing correct {timing_ok}/200  worst CFO error {worst:.2e} rad/sample");
    }
    Ok(())
}
