//! Single-carrier baseband: coding, spreading, modulation, block framing with
//! cyclic prefix, synchronization, and the two equalizing receivers.
//!
//! All processing is at one complex sample per symbol. Nothing in here draws
//! random numbers; noise and channels are applied by the caller.

pub mod chain;
pub mod codec;
pub mod crc;
pub mod equalizer;
pub mod frame;
pub mod modulation;
pub mod spreading;
pub mod sync;

pub use chain::{rx_chain, tx_chain, LinkConfig, LinkMetrics, RxOutput};
pub use codec::{decode, decode_hard, encode, CodeRate, CodecConfig, Decoded};
pub use equalizer::{
    fd_equalize, td_equalize, ChannelEstimation, EqualizerConfig, EqualizerVariant, FdEqualizer, LmsEqualizer,
};
pub use frame::{add_cyclic_prefix, remove_cyclic_prefix, BasebandFrame, FrameGeometry};
pub use modulation::{demodulate, hard_decisions, modulate, ModulationScheme};
pub use spreading::{despread, spread, SpreadingConfig};
pub use sync::{acquire_sync, acquire_sync_with, track_phase, SyncState};

use crate::{Complex64, Error, Result};

/// Peak-to-average power ratio in dB: `10 log10(max |x|^2 / mean |x|^2)`.
pub fn papr(waveform: &[Complex64]) -> Result<f64> {
    if waveform.is_empty() {
        return Err(Error::invalid("PAPR of an empty waveform"));
    }
    let (peak, sum) = waveform
        .iter()
        .map(|x| x.norm_sqr())
        .fold((0.0f64, 0.0f64), |(p, s), v| (p.max(v), s + v));
    let mean = sum / waveform.len() as f64;
    if mean == 0.0 {
        return Err(Error::invalid("PAPR of an all-zero waveform"));
    }
    Ok(10.0 * (peak / mean).log10())
}
