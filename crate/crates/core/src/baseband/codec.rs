//! Rate-1/2, K=7 convolutional code (generators 133/171 octal), trellis
//! terminated, with a CRC-32 for packet error detection, and a full-trellis
//! Viterbi decoder.
//!
//! Bit convention for soft values: positive means bit 0, negative means bit 1,
//! which is what BPSK/QPSK demodulation produces.

use serde::{Deserialize, Serialize};

use super::crc::{append_crc32, check_crc32};
use crate::{Error, Result};

const G1: u32 = 0o133;
const G2: u32 = 0o171;
const K: usize = 7;
const MEMORY: usize = K - 1;
const STATES: usize = 1 << MEMORY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeRate {
    pub numerator: u32,
    pub denominator: u32,
}

impl CodeRate {
    pub const HALF: CodeRate = CodeRate {
        numerator: 1,
        denominator: 2,
    };

    pub fn as_f64(self) -> f64 {
        f64::from(self.numerator) / f64::from(self.denominator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecConfig {
    /// Bits entering the convolutional encoder per codeword, CRC included.
    pub info_bits_per_codeword: usize,
    pub code_rate: CodeRate,
    pub constraint_length: u32,
    /// 32 or 0 (no CRC).
    pub crc_width: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            info_bits_per_codeword: 1024,
            code_rate: CodeRate::HALF,
            constraint_length: K as u32,
            crc_width: 32,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.code_rate != CodeRate::HALF {
            return Err(Error::invalid("only the rate-1/2 code is implemented"));
        }
        if self.constraint_length as usize != K {
            return Err(Error::invalid("only constraint length 7 is implemented"));
        }
        if self.crc_width != 0 && self.crc_width != 32 {
            return Err(Error::invalid("crc_width must be 0 or 32"));
        }
        if self.info_bits_per_codeword <= self.crc_width {
            return Err(Error::invalid("info_bits_per_codeword must exceed crc_width"));
        }
        Ok(())
    }

    /// User payload bits per codeword (the CRC occupies the rest).
    pub fn payload_bits(&self) -> usize {
        self.info_bits_per_codeword - self.crc_width
    }

    pub fn tail_bits(&self) -> usize {
        MEMORY
    }

    /// Coded bits per codeword: `(info + tail) * 2`.
    pub fn coded_bits(&self) -> usize {
        (self.info_bits_per_codeword + MEMORY) * self.code_rate.denominator as usize / self.code_rate.numerator as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    /// Payload bits, always `payload_bits()` long (short inputs were zero padded).
    pub bits: Vec<u8>,
    pub crc_ok: bool,
}

#[inline]
fn parity(v: u32) -> u8 {
    (v.count_ones() & 1) as u8
}

/// Output pair for `input` entering a register whose previous six inputs are
/// `state` (most recent in bit 5).
#[inline]
fn branch_output(state: usize, input: u8) -> (u8, u8) {
    let reg = (u32::from(input) << MEMORY) | state as u32;
    (parity(reg & G1), parity(reg & G2))
}

/// Runs the bare convolutional encoder over `bits` followed by six zero tail
/// bits. Linear over GF(2).
pub fn convolve(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity((bits.len() + MEMORY) * 2);
    let mut state = 0usize;
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, MEMORY)) {
        let b = b & 1;
        let (c1, c2) = branch_output(state, b);
        out.push(c1);
        out.push(c2);
        state = (usize::from(b) << (MEMORY - 1)) | (state >> 1);
    }
    out
}

/// Pads `payload` to `payload_bits()`, appends the CRC and encodes.
pub fn encode(payload: &[u8], cfg: &CodecConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    if payload.len() > cfg.payload_bits() {
        return Err(Error::invalid(format!(
            "payload of {} bits exceeds codeword capacity of {} bits",
            payload.len(),
            cfg.payload_bits()
        )));
    }
    let mut info = Vec::with_capacity(cfg.info_bits_per_codeword);
    info.extend(payload.iter().map(|b| b & 1));
    info.resize(cfg.payload_bits(), 0);
    if cfg.crc_width == 32 {
        append_crc32(&mut info);
    }
    Ok(convolve(&info))
}

/// Soft-decision Viterbi decoding of one terminated codeword.
pub fn decode(soft: &[f64], cfg: &CodecConfig) -> Result<Decoded> {
    cfg.validate()?;
    if soft.len() != cfg.coded_bits() {
        return Err(Error::invalid(format!(
            "expected {} coded values, got {}",
            cfg.coded_bits(),
            soft.len()
        )));
    }
    let info = viterbi(soft, cfg.info_bits_per_codeword);
    let crc_ok = cfg.crc_width == 0 || check_crc32(&info);
    let mut bits = info;
    bits.truncate(cfg.payload_bits());
    Ok(Decoded { bits, crc_ok })
}

/// Hard-decision convenience wrapper around [`decode`].
pub fn decode_hard(bits: &[u8], cfg: &CodecConfig) -> Result<Decoded> {
    let soft: Vec<f64> = bits.iter().map(|&b| if b & 1 == 0 { 1.0 } else { -1.0 }).collect();
    decode(&soft, cfg)
}

/// Maximizes the correlation metric `sum soft * (1 - 2c)` over all paths that
/// start and end in state zero. On equal metrics the predecessor whose dropped
/// bit is 0 wins.
fn viterbi(soft: &[f64], info_len: usize) -> Vec<u8> {
    let steps = info_len + MEMORY;
    let mut outputs = [[(0u8, 0u8); 2]; STATES];
    for (s, o) in outputs.iter_mut().enumerate() {
        o[0] = branch_output(s, 0);
        o[1] = branch_output(s, 1);
    }
    let sign = |c: u8| if c == 0 { 1.0 } else { -1.0 };

    let mut metric = [f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    let mut next = [f64::NEG_INFINITY; STATES];
    // bit `ns` of decisions[t] holds the dropped bit of the survivor into ns
    let mut decisions = vec![0u64; steps];

    for (t, decision) in decisions.iter_mut().enumerate() {
        let (y1, y2) = (soft[2 * t], soft[2 * t + 1]);
        let forced_zero = t >= info_len;
        for (ns, slot) in next.iter_mut().enumerate() {
            let input = (ns >> (MEMORY - 1)) as u8;
            if forced_zero && input == 1 {
                *slot = f64::NEG_INFINITY;
                continue;
            }
            let base = (ns << 1) & (STATES - 1);
            let mut best = f64::NEG_INFINITY;
            let mut best_b = 0u64;
            for b in 0..2usize {
                let prev = base | b;
                let pm = metric[prev];
                if pm == f64::NEG_INFINITY {
                    continue;
                }
                let (c1, c2) = outputs[prev][input as usize];
                let m = pm + y1 * sign(c1) + y2 * sign(c2);
                if m > best {
                    best = m;
                    best_b = b as u64;
                }
            }
            *slot = best;
            *decision |= best_b << ns;
        }
        std::mem::swap(&mut metric, &mut next);
    }

    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        bits[t] = (state >> (MEMORY - 1)) as u8;
        let b = ((decisions[t] >> state) & 1) as usize;
        state = ((state << 1) & (STATES - 1)) | b;
    }
    bits.truncate(info_len);
    bits
}
