//! One framed codeword through the harsh coupling channel, received with the
//! frequency-domain MMSE equalizer and with the LMS equalizer.
//!
//!     cargo run --release --example fde_multipath

use linksim::baseband::{papr, rx_chain, tx_chain, ChannelEstimation, EqualizerConfig, LinkConfig, ModulationScheme};
use linksim::channel::{apply_channel, estimate_frequency_response, preset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> linksim::Result<()> {
    let link = LinkConfig {
        modulation: ModulationScheme::Qpsk,
        ..Default::default()
    }
    .fitted();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let info: Vec<u8> = (0..link.codec.payload_bits()).map(|_| rng.random_range(0..2)).collect();

    let frame = tx_chain(&info, &link)?;
    let tx = frame.waveform();
    println!("frame: {} samples, PAPR {:.2} dB", tx.len(), papr(&tx)?);

    let model = preset("coupling-harsh")?.with_snr_db(18.0).with_seed(9);
    let rx = apply_channel(&tx, &model)?;
    let response = estimate_frequency_response(&model, link.geometry.fft_size)?;

    let receivers = [
        ("FD-MMSE, genie channel", EqualizerConfig::default()),
        (
            "FD-MMSE, pilot LS estimate",
            EqualizerConfig {
                channel_estimation: ChannelEstimation::PilotLeastSquares,
                ..Default::default()
            },
        ),
        (
            "LMS, 9 taps",
            EqualizerConfig {
                lms_taps: 9,
                lms_step: 0.02,
                ..EqualizerConfig::time_domain()
            },
        ),
    ];
    for (name, eq) in receivers {
        let out = rx_chain(&rx, &link, &eq, Some(&response), info.len())?;
        let errors = out.info_bits.iter().zip(&info).filter(|(a, b)| a != b).count();
        println!(
            "{name:<28} crc {}  bit errors {errors:>4}  channel BER before decoding {:.4}",
            if out.crc_ok { "ok  " } else { "FAIL" },
            out.metrics.pre_decoder_ber_estimate
        );
    }
    Ok(())
}
