//! Direct-sequence spreading with a fixed +/-1 chip pattern per bit.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadingConfig {
    pub sf: u32,
}

impl Default for SpreadingConfig {
    fn default() -> Self {
        Self { sf: 1 }
    }
}

impl SpreadingConfig {
    pub fn new(sf: u32) -> Result<Self> {
        if sf == 0 {
            return Err(Error::invalid("spreading factor must be at least 1"));
        }
        Ok(Self { sf })
    }

    /// Chip pattern as bits (0 keeps the data bit, 1 inverts it). Taken from
    /// the x^7 + x^6 + 1 m-sequence and normalized so the first chip is 0,
    /// which makes `sf = 1` the identity.
    pub fn pattern(&self) -> Vec<u8> {
        let mut lfsr: u8 = 0x7f;
        let mut out = Vec::with_capacity(self.sf as usize);
        for _ in 0..self.sf {
            let bit = ((lfsr >> 6) ^ (lfsr >> 5)) & 1;
            out.push(lfsr & 1);
            lfsr = ((lfsr << 1) | bit) & 0x7f;
        }
        let first = out[0];
        out.iter_mut().for_each(|c| *c ^= first);
        out
    }
}

pub fn spread(bits: &[u8], cfg: &SpreadingConfig) -> Result<Vec<u8>> {
    if cfg.sf == 0 {
        return Err(Error::invalid("spreading factor must be at least 1"));
    }
    let pattern = cfg.pattern();
    Ok(bits
        .iter()
        .flat_map(|&b| pattern.iter().map(move |&c| (b & 1) ^ c))
        .collect())
}

/// Matched correlation of soft chip values against the pattern, averaged over
/// the `sf` chips of each bit. Positive output means bit 0.
pub fn despread(soft_chips: &[f64], cfg: &SpreadingConfig) -> Result<Vec<f64>> {
    let sf = cfg.sf as usize;
    if sf == 0 {
        return Err(Error::invalid("spreading factor must be at least 1"));
    }
    if !soft_chips.len().is_multiple_of(sf) {
        return Err(Error::invalid(format!(
            "{} chips is not a multiple of sf={sf}",
            soft_chips.len()
        )));
    }
    let signs: Vec<f64> = cfg.pattern().iter().map(|&c| if c == 0 { 1.0 } else { -1.0 }).collect();
    let scale = 1.0 / sf as f64;
    Ok(soft_chips
        .chunks_exact(sf)
        .map(|chunk| chunk.iter().zip(&signs).map(|(x, s)| x * s).sum::<f64>() * scale)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn to_soft(bits: &[u8]) -> Vec<f64> {
        bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
    }

    #[test]
    fn sf_one_is_identity() {
        let cfg = SpreadingConfig::new(1).unwrap();
        let bits = vec![0, 1, 1, 0, 1];
        assert_eq!(spread(&bits, &cfg).unwrap(), bits);
    }

    #[test]
    fn pattern_is_balanced_enough() {
        let p = SpreadingConfig::new(8).unwrap().pattern();
        assert_eq!(p.len(), 8);
        assert_eq!(p[0], 0);
        // not a trivial repetition code
        assert!(p.contains(&1));
    }

    #[test]
    fn sf8_recovers_bit() {
        let cfg = SpreadingConfig::new(8).unwrap();
        for b in [0u8, 1] {
            let chips = spread(&[b], &cfg).unwrap();
            assert_eq!(chips.len(), 8);
            let d = despread(&to_soft(&chips), &cfg).unwrap();
            assert_eq!(d, vec![if b == 0 { 1.0 } else { -1.0 }]);
        }
    }

    #[test]
    fn despreading_reduces_noise_variance() {
        let cfg = SpreadingConfig::new(8).unwrap();
        let sigma2: f64 = 0.5;
        let n_bits = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, sigma2.sqrt()).unwrap();
        let chips: Vec<f64> = (0..n_bits * 8).map(|_| noise.sample(&mut rng)).collect();
        let d = despread(&chips, &cfg).unwrap();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let expected = sigma2 / 8.0;
        assert!((var / expected - 1.0).abs() < 0.05, "var {var} vs {expected}");
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(SpreadingConfig::new(0).is_err());
        assert!(despread(&[1.0; 7], &SpreadingConfig::new(8).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn spread_despread_inverse(bits in proptest::collection::vec(0u8..2, 0..64), sf in 1u32..16) {
            let cfg = SpreadingConfig::new(sf).unwrap();
            let chips = spread(&bits, &cfg).unwrap();
            prop_assert_eq!(chips.len(), bits.len() * sf as usize);
            let back: Vec<u8> = despread(&to_soft(&chips), &cfg).unwrap().iter().map(|&x| (x < 0.0) as u8).collect();
            prop_assert_eq!(back, bits);
        }
    }
}
