//! End-to-end transmit and receive chains for one codeword per frame.

use serde::{Deserialize, Serialize};

use super::codec::{self, CodecConfig};
use super::equalizer::{ChannelEstimation, EqualizerConfig, EqualizerVariant, FdEqualizer, LmsEqualizer};
use super::frame::{
    self, add_cyclic_prefix, block_pilots, extract_data, map_blocks, BasebandFrame, FrameGeometry, PREAMBLE_LEN,
};
use super::modulation::{demodulate, hard_decisions, modulate, ModulationScheme};
use super::spreading::{despread, spread, SpreadingConfig};
use super::sync::{acquire_sync, estimate_and_track, remove_cfo, SyncState};
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub codec: CodecConfig,
    pub spreading: SpreadingConfig,
    pub modulation: ModulationScheme,
    pub geometry: FrameGeometry,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        if self.spreading.sf == 0 {
            return Err(Error::invalid("spreading factor must be at least 1"));
        }
        self.geometry.validate()
    }

    pub fn chips_per_codeword(&self) -> usize {
        self.codec.coded_bits() * self.spreading.sf as usize
    }

    pub fn data_symbols(&self) -> usize {
        self.chips_per_codeword().div_ceil(self.modulation.bits_per_symbol())
    }

    /// Same config with the block count shrunk or grown to fit one codeword.
    pub fn fitted(mut self) -> Self {
        self.geometry = self.geometry.with_capacity_for(self.data_symbols());
        self
    }
}

/// Per-frame sample accounting and decoder statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LinkMetrics {
    /// Channel bit error rate estimated by re-encoding the decoded codeword
    /// and comparing with hard decisions at the decoder input.
    pub pre_decoder_ber_estimate: f64,
    pub crc_ok: bool,
    pub coded_bits: usize,
    pub chips: usize,
    pub data_symbols: usize,
    pub preamble_samples: usize,
    pub pilot_samples: usize,
    pub payload_samples: usize,
    pub cp_samples: usize,
    pub frame_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RxOutput {
    pub info_bits: Vec<u8>,
    pub crc_ok: bool,
    pub sync: SyncState,
    pub metrics: LinkMetrics,
}

fn pad_symbol(scheme: ModulationScheme) -> Complex64 {
    modulate(&vec![0; scheme.bits_per_symbol()], scheme).expect("even bit count")[0]
}

/// Encodes, spreads, modulates and frames one codeword.
pub fn tx_chain(info_bits: &[u8], cfg: &LinkConfig) -> Result<BasebandFrame> {
    cfg.validate()?;
    let coded = codec::encode(info_bits, &cfg.codec)?;
    let mut chips = spread(&coded, &cfg.spreading)?;
    if chips.len() % cfg.modulation.bits_per_symbol() != 0 {
        chips.push(0);
    }
    let data = modulate(&chips, cfg.modulation)?;
    let g = &cfg.geometry;
    if data.len() > g.data_capacity() {
        return Err(Error::invalid(format!(
            "frame capacity exceeded: {} data symbols required, {} available ({} blocks x {})",
            data.len(),
            g.data_capacity(),
            g.blocks,
            g.data_per_block()
        )));
    }
    let blocks = map_blocks(&data, g, pad_symbol(cfg.modulation))?;
    let payload_blocks = blocks
        .iter()
        .map(|b| add_cyclic_prefix(b, g.fft_size, g.cp_len))
        .collect::<Result<Vec<_>>>()?;
    Ok(BasebandFrame {
        geometry: *g,
        preamble: frame::preamble(),
        pilot_block: add_cyclic_prefix(&frame::pilot_block(g.fft_size), g.fft_size, g.cp_len)?,
        payload_blocks,
    })
}

/// Synchronizes, equalizes, demodulates, despreads and decodes one frame.
///
/// `genie_response` is the channel's frequency response at `fft_size` bins;
/// it is required when the FD equalizer runs with genie channel knowledge.
/// `info_len` truncates the decoded payload (the transmitter zero-pads).
pub fn rx_chain(
    waveform: &[Complex64],
    cfg: &LinkConfig,
    eq: &EqualizerConfig,
    genie_response: Option<&[Complex64]>,
    info_len: usize,
) -> Result<RxOutput> {
    cfg.validate()?;
    eq.validate()?;
    if info_len > cfg.codec.payload_bits() {
        return Err(Error::invalid("info_len exceeds codeword payload"));
    }
    let g = &cfg.geometry;
    let sync = acquire_sync(waveform, &frame::preamble())?;
    let frame_end = sync.timing_offset + g.frame_len();
    if frame_end > waveform.len() {
        return Err(Error::invalid(format!(
            "waveform truncated: frame needs {} samples from offset {}, {} available",
            g.frame_len(),
            sync.timing_offset,
            waveform.len() - sync.timing_offset
        )));
    }
    let mut seg = waveform[sync.timing_offset..].to_vec();
    remove_cfo(&mut seg, sync.cfo_estimate, 0);

    let bl = g.block_len();
    let pilot_ext = &seg[PREAMBLE_LEN..PREAMBLE_LEN + bl];
    let payload_start = PREAMBLE_LEN + bl;
    let positions = g.pilot_positions();
    let pilots = block_pilots(g);

    let blocks: Vec<Vec<Complex64>> = match eq.variant {
        EqualizerVariant::FrequencyDomainMmse => {
            let fd = FdEqualizer::new(g.fft_size);
            let response = match eq.channel_estimation {
                ChannelEstimation::Genie => genie_response
                    .ok_or_else(|| Error::invalid("genie channel estimation needs a channel response"))?
                    .to_vec(),
                ChannelEstimation::PilotLeastSquares => {
                    fd.estimate_ls(&pilot_ext[g.cp_len..], &frame::pilot_block(g.fft_size))?
                }
            };
            (0..g.blocks)
                .map(|i| {
                    let start = payload_start + i * bl + g.cp_len;
                    fd.equalize(&seg[start..start + g.fft_size], &response, eq.noise_variance_hint)
                })
                .collect::<Result<_>>()?
        }
        EqualizerVariant::TimeDomainLms => {
            let training = add_cyclic_prefix(&frame::pilot_block(g.fft_size), g.fft_size, g.cp_len)?;
            if training.len() < 10 * eq.lms_taps {
                return Err(Error::invalid("pilot block too short to train the LMS equalizer"));
            }
            let stream = &seg[PREAMBLE_LEN..];
            let mut lms = LmsEqualizer::new(eq.lms_taps, eq.lms_step)?;
            lms.train(stream, &training);
            // pilots and CP symbols are not constellation points, so the
            // stream is filtered with frozen taps
            let out = lms.run(stream, bl..bl * (g.blocks + 1), None);
            out.chunks_exact(bl).map(|b| b[g.cp_len..].to_vec()).collect()
        }
    };

    let mut data = Vec::with_capacity(g.data_capacity());
    for block in &blocks {
        let (tracked, _) = estimate_and_track(block, &positions, &pilots)?;
        data.extend(extract_data(&tracked, g));
    }
    let n_chips = cfg.chips_per_codeword();
    data.truncate(cfg.data_symbols());
    let mut soft_chips = demodulate(&data, cfg.modulation);
    soft_chips.truncate(n_chips);
    let soft = despread(&soft_chips, &cfg.spreading)?;
    let decoded = codec::decode(&soft, &cfg.codec)?;

    let reencoded = codec::encode(&decoded.bits, &cfg.codec)?;
    let raw = hard_decisions(&soft);
    let flips = raw.iter().zip(&reencoded).filter(|(a, b)| a != b).count();

    let metrics = LinkMetrics {
        pre_decoder_ber_estimate: flips as f64 / raw.len() as f64,
        crc_ok: decoded.crc_ok,
        coded_bits: cfg.codec.coded_bits(),
        chips: n_chips,
        data_symbols: cfg.data_symbols(),
        preamble_samples: PREAMBLE_LEN,
        pilot_samples: bl + g.pilots_per_block() * g.blocks,
        payload_samples: g.data_capacity(),
        cp_samples: g.cp_len * g.blocks,
        frame_samples: g.frame_len(),
    };
    let mut info_bits = decoded.bits;
    info_bits.truncate(info_len);
    Ok(RxOutput {
        info_bits,
        crc_ok: decoded.crc_ok,
        sync,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseband::equalizer::EqualizerConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(seed: u64, n: usize) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn with_lead(frame: &BasebandFrame, lead: usize, tail: usize) -> Vec<Complex64> {
        let mut w = vec![Complex64::default(); lead];
        w.extend(frame.waveform());
        w.extend(std::iter::repeat_n(Complex64::default(), tail));
        w
    }

    #[test]
    fn default_loopback() {
        let cfg = LinkConfig::default();
        let x = bits(1, cfg.codec.payload_bits());
        let frame = tx_chain(&x, &cfg).unwrap();
        assert_eq!(frame.len(), cfg.geometry.frame_len());
        let ones = vec![Complex64::new(1.0, 0.0); cfg.geometry.fft_size];
        let rx = rx_chain(
            &frame.waveform(),
            &cfg,
            &EqualizerConfig::default(),
            Some(&ones),
            x.len(),
        )
        .unwrap();
        assert_eq!(rx.info_bits, x);
        assert!(rx.crc_ok);
        assert_eq!(rx.metrics.pre_decoder_ber_estimate, 0.0);
        assert_eq!(rx.sync.timing_offset, 0);
    }

    #[test]
    fn loopback_every_combination() {
        for sf in [1u32, 2, 8] {
            for scheme in [ModulationScheme::Bpsk, ModulationScheme::Qpsk] {
                for eq in [EqualizerConfig::default(), EqualizerConfig::time_domain()] {
                    let cfg = LinkConfig {
                        spreading: SpreadingConfig::new(sf).unwrap(),
                        modulation: scheme,
                        ..Default::default()
                    }
                    .fitted();
                    let x = bits(u64::from(sf), 500);
                    let frame = tx_chain(&x, &cfg).unwrap();
                    let ones = vec![Complex64::new(1.0, 0.0); cfg.geometry.fft_size];
                    let rx = rx_chain(&with_lead(&frame, 13, 10), &cfg, &eq, Some(&ones), x.len()).unwrap();
                    assert_eq!(rx.info_bits, x, "sf {sf} {scheme:?} {:?}", eq.variant);
                    assert!(rx.crc_ok);
                    assert_eq!(rx.sync.timing_offset, 13);
                }
            }
        }
    }

    #[test]
    fn capacity_overflow_reports_counts() {
        let cfg = LinkConfig {
            geometry: FrameGeometry {
                blocks: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        let err = tx_chain(&[0; 10], &cfg).unwrap_err().to_string();
        assert!(err.contains("2060") && err.contains("480"), "{err}");
    }

    #[test]
    fn genie_required_for_genie_mode() {
        let cfg = LinkConfig::default();
        let frame = tx_chain(&[1, 0], &cfg).unwrap();
        assert!(rx_chain(&frame.waveform(), &cfg, &EqualizerConfig::default(), None, 2).is_err());
    }

    #[test]
    fn truncated_waveform_rejected() {
        let cfg = LinkConfig::default();
        let w = tx_chain(&[1, 0], &cfg).unwrap().waveform();
        let ones = vec![Complex64::new(1.0, 0.0); 256];
        assert!(rx_chain(&w[..w.len() - 5], &cfg, &EqualizerConfig::default(), Some(&ones), 2).is_err());
    }
}
