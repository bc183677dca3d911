//! BPSK and Gray-mapped QPSK with unit average symbol energy.
//!
//! BPSK: bit 0 -> +1, bit 1 -> -1. QPSK maps the bit pair `(b0, b1)` to
//! `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`, so neighbouring points differ in
//! one bit. Soft outputs are scaled so a noiseless symbol gives +/-1, positive
//! meaning bit 0.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationScheme {
    #[default]
    Bpsk,
    Qpsk,
}

impl ModulationScheme {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModulationScheme::Bpsk => 1,
            ModulationScheme::Qpsk => 2,
        }
    }
}

#[inline]
fn level(bit: u8) -> f64 {
    if bit & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn modulate(bits: &[u8], scheme: ModulationScheme) -> Result<Vec<Complex64>> {
    match scheme {
        ModulationScheme::Bpsk => Ok(bits.iter().map(|&b| Complex64::new(level(b), 0.0)).collect()),
        ModulationScheme::Qpsk => {
            if !bits.len().is_multiple_of(2) {
                return Err(Error::invalid(format!(
                    "QPSK needs an even bit count, got {}",
                    bits.len()
                )));
            }
            Ok(bits
                .chunks_exact(2)
                .map(|p| Complex64::new(level(p[0]), level(p[1])) * FRAC_1_SQRT_2)
                .collect())
        }
    }
}

/// Soft demodulation; one value per bit.
pub fn demodulate(symbols: &[Complex64], scheme: ModulationScheme) -> Vec<f64> {
    match scheme {
        ModulationScheme::Bpsk => symbols.iter().map(|s| s.re).collect(),
        ModulationScheme::Qpsk => symbols
            .iter()
            .flat_map(|s| [s.re / FRAC_1_SQRT_2, s.im / FRAC_1_SQRT_2])
            .collect(),
    }
}

/// Hard bit decisions from soft values (ties go to bit 0).
pub fn hard_decisions(soft: &[f64]) -> Vec<u8> {
    soft.iter().map(|&x| (x < 0.0) as u8).collect()
}
