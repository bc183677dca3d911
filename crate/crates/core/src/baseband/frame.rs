//! Frame geometry, cyclic prefix handling and the known sequences (preamble,
//! pilot block, in-block pilots).
//!
//! A frame on the air is
//!
//! ```text
//! | preamble (2 x 32) | CP | pilot block | CP | block 0 | ... | CP | block B-1 |
//! ```
//!
//! Each payload block carries `fft_size` symbols: pilots every
//! `pilot_spacing` positions, data everywhere else.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

/// Length of one preamble half.
pub const PREAMBLE_HALF: usize = 32;
pub const PREAMBLE_LEN: usize = 2 * PREAMBLE_HALF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameGeometry {
    pub fft_size: usize,
    pub cp_len: usize,
    pub pilot_spacing: usize,
    /// Payload blocks per frame.
    pub blocks: usize,
}

impl Default for FrameGeometry {
    fn default() -> Self {
        // 9 blocks of 240 data symbols fit one default BPSK codeword (2060).
        Self {
            fft_size: 256,
            cp_len: 32,
            pilot_spacing: 16,
            blocks: 9,
        }
    }
}

impl FrameGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(Error::invalid(format!(
                "fft_size must be a power of two >= 2, got {}",
                self.fft_size
            )));
        }
        if self.cp_len >= self.fft_size {
            return Err(Error::invalid("cp_len must be smaller than fft_size"));
        }
        if self.pilot_spacing == 0 || self.pilot_spacing > self.fft_size {
            return Err(Error::invalid("pilot_spacing must lie in 1..=fft_size"));
        }
        if self.blocks == 0 {
            return Err(Error::invalid("a frame needs at least one payload block"));
        }
        Ok(())
    }

    pub fn pilot_positions(&self) -> Vec<usize> {
        (0..self.fft_size).step_by(self.pilot_spacing).collect()
    }

    pub fn pilots_per_block(&self) -> usize {
        self.fft_size.div_ceil(self.pilot_spacing)
    }

    pub fn data_per_block(&self) -> usize {
        self.fft_size - self.pilots_per_block()
    }

    pub fn data_capacity(&self) -> usize {
        self.data_per_block() * self.blocks
    }

    pub fn block_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Total frame length in samples.
    pub fn frame_len(&self) -> usize {
        PREAMBLE_LEN + self.block_len() * (self.blocks + 1)
    }

    /// Smallest block count that carries `data_symbols`.
    pub fn with_capacity_for(mut self, data_symbols: usize) -> Self {
        self.blocks = data_symbols.div_ceil(self.data_per_block()).max(1);
        self
    }
}

/// Zadoff-Chu sequence of even length `n` with root `root`:
/// `exp(-j pi root k^2 / n)`. Constant amplitude with zero periodic
/// autocorrelation sidelobes when `root` is coprime to `n`.
pub fn zadoff_chu(n: usize, root: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            Complex64::from_polar(1.0, -PI * root as f64 * k * k / n as f64)
        })
        .collect()
}

/// Two identical halves of a length-32 Zadoff-Chu sequence.
pub fn preamble() -> Vec<Complex64> {
    let half = zadoff_chu(PREAMBLE_HALF, 1);
    half.iter().chain(half.iter()).copied().collect()
}

/// Known block used for channel estimation and equalizer training (no CP).
pub fn pilot_block(fft_size: usize) -> Vec<Complex64> {
    zadoff_chu(fft_size, 1)
}

/// Known in-block pilot symbols, one per pilot position.
pub fn block_pilots(geometry: &FrameGeometry) -> Vec<Complex64> {
    let zc = zadoff_chu(geometry.fft_size, 3);
    geometry.pilot_positions().iter().map(|&p| zc[p]).collect()
}

pub fn add_cyclic_prefix(block: &[Complex64], fft_size: usize, cp_len: usize) -> Result<Vec<Complex64>> {
    if block.len() != fft_size {
        return Err(Error::invalid(format!(
            "block has {} symbols, expected {fft_size}",
            block.len()
        )));
    }
    if cp_len >= fft_size {
        return Err(Error::invalid("cp_len must be smaller than fft_size"));
    }
    let mut out = Vec::with_capacity(fft_size + cp_len);
    out.extend_from_slice(&block[fft_size - cp_len..]);
    out.extend_from_slice(block);
    Ok(out)
}

pub fn remove_cyclic_prefix(extended: &[Complex64], fft_size: usize, cp_len: usize) -> Result<Vec<Complex64>> {
    if extended.len() != fft_size + cp_len {
        return Err(Error::invalid(format!(
            "extended block has {} symbols, expected {}",
            extended.len(),
            fft_size + cp_len
        )));
    }
    Ok(extended[cp_len..].to_vec())
}

/// Places data symbols and pilots into payload blocks (without CP). Unused
/// data slots in the last block carry `pad`.
pub fn map_blocks(data: &[Complex64], geometry: &FrameGeometry, pad: Complex64) -> Result<Vec<Vec<Complex64>>> {
    if data.len() > geometry.data_capacity() {
        return Err(Error::invalid(format!(
            "frame capacity exceeded: need {} data symbols, {} available",
            data.len(),
            geometry.data_capacity()
        )));
    }
    let pilots = block_pilots(geometry);
    let mut symbols = data.iter().copied().chain(std::iter::repeat(pad));
    let mut blocks = Vec::with_capacity(geometry.blocks);
    for _ in 0..geometry.blocks {
        let mut block = Vec::with_capacity(geometry.fft_size);
        let mut pilot_iter = pilots.iter();
        for i in 0..geometry.fft_size {
            if i % geometry.pilot_spacing == 0 {
                block.push(*pilot_iter.next().expect("pilot count matches positions"));
            } else {
                block.push(symbols.next().expect("infinite iterator"));
            }
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// Data symbols of one equalized block, pilots removed.
pub fn extract_data(block: &[Complex64], geometry: &FrameGeometry) -> Vec<Complex64> {
    block
        .iter()
        .enumerate()
        .filter(|(i, _)| i % geometry.pilot_spacing != 0)
        .map(|(_, s)| *s)
        .collect()
}

/// One physical-layer frame, every block already carrying its CP.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandFrame {
    pub geometry: FrameGeometry,
    pub preamble: Vec<Complex64>,
    pub pilot_block: Vec<Complex64>,
    pub payload_blocks: Vec<Vec<Complex64>>,
}

impl BasebandFrame {
    pub fn waveform(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.geometry.frame_len());
        out.extend_from_slice(&self.preamble);
        out.extend_from_slice(&self.pilot_block);
        for b in &self.payload_blocks {
            out.extend_from_slice(b);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.preamble.len() + self.pilot_block.len() + self.payload_blocks.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn cp_definition() {
        let block = vec![c(1.0), c(2.0), c(3.0), c(4.0)];
        let ext = add_cyclic_prefix(&block, 4, 2).unwrap();
        assert_eq!(ext, vec![c(3.0), c(4.0), c(1.0), c(2.0), c(3.0), c(4.0)]);
        assert_eq!(remove_cyclic_prefix(&ext, 4, 2).unwrap(), block);
        assert!(add_cyclic_prefix(&block, 8, 2).is_err());
        assert!(remove_cyclic_prefix(&block, 4, 2).is_err());
    }

    #[test]
    fn cp_turns_linear_into_circular_convolution() {
        let fft = 16;
        let cp = 4;
        let h = [c(1.0), Complex64::new(0.3, -0.2), Complex64::new(0.0, 0.25)];
        let block: Vec<Complex64> = (0..fft)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let ext = add_cyclic_prefix(&block, fft, cp).unwrap();
        // brute-force linear convolution of the extended block
        let mut lin = vec![Complex64::default(); ext.len() + h.len() - 1];
        for (i, x) in ext.iter().enumerate() {
            for (k, g) in h.iter().enumerate() {
                lin[i + k] += x * g;
            }
        }
        let kept = &lin[cp..cp + fft];
        for n in 0..fft {
            let circ: Complex64 = (0..h.len()).map(|k| h[k] * block[(n + fft - k) % fft]).sum();
            assert!((kept[n] - circ).norm() < 1e-12);
        }
    }

    #[test]
    fn preamble_halves_have_ideal_periodic_autocorrelation() {
        let p = preamble();
        assert_eq!(p.len(), PREAMBLE_LEN);
        assert_eq!(&p[..PREAMBLE_HALF], &p[PREAMBLE_HALF..]);
        assert!(p.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        let half = &p[..PREAMBLE_HALF];
        for lag in 1..PREAMBLE_HALF {
            let r: Complex64 = (0..PREAMBLE_HALF)
                .map(|n| half[(n + lag) % PREAMBLE_HALF] * half[n].conj())
                .sum();
            assert!(r.norm() / (PREAMBLE_HALF as f64) < 1e-9, "lag {lag}: {}", r.norm());
        }
    }

    #[test]
    fn pilot_block_is_spectrally_flat() {
        let pb = pilot_block(64);
        for k in 0..64 {
            let x: Complex64 = pb
                .iter()
                .enumerate()
                .map(|(n, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / 64.0))
                .sum();
            assert!((x.norm() - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn geometry_defaults() {
        let g = FrameGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.pilots_per_block(), 16);
        assert_eq!(g.data_per_block(), 240);
        assert_eq!(g.data_capacity(), 2160);
        assert_eq!(g.with_capacity_for(2060).blocks, 9);
        assert_eq!(g.with_capacity_for(1030).blocks, 5);
        assert!(FrameGeometry { fft_size: 100, ..g }.validate().is_err());
        assert!(FrameGeometry { cp_len: 256, ..g }.validate().is_err());
    }

    #[test]
    fn capacity_overflow_rejected() {
        let g = FrameGeometry {
            blocks: 1,
            ..Default::default()
        };
        let data = vec![c(1.0); 241];
        let err = map_blocks(&data, &g, c(1.0)).unwrap_err().to_string();
        assert!(err.contains("241") && err.contains("240"), "{err}");
    }

    proptest! {
        #[test]
        fn cp_round_trip(vals in proptest::collection::vec(-1.0f64..1.0, 32), cp in 0usize..32) {
            let block: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, -v)).collect();
            let ext = add_cyclic_prefix(&block, 32, cp).unwrap();
            prop_assert_eq!(&ext[..cp], &block[32 - cp..]);
            prop_assert_eq!(remove_cyclic_prefix(&ext, 32, cp).unwrap(), block);
        }

        #[test]
        fn map_extract_round_trip(n in 0usize..480) {
            let g = FrameGeometry { blocks: 2, ..Default::default() };
            let data: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
            let blocks = map_blocks(&data, &g, c(0.0)).unwrap();
            let back: Vec<Complex64> = blocks.iter().flat_map(|b| extract_data(b, &g)).collect();
            prop_assert_eq!(&back[..n], &data[..]);
        }
    }
}
