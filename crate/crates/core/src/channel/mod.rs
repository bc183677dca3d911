//! Short-range radio channel: a static tapped delay line whose taps are
//! weighted by a directive, circularly polarized antenna pattern, followed by
//! CFO, a static phase offset and AWGN.
//!
//! Antenna effects are reduced to three numbers. Paths leaving or entering
//! through a side lobe lose `mainlobe_gain - sidelobe_gain` dB; paths with an
//! odd number of reflections arrive cross-polarized and lose
//! `crosspol_rejection` dB. The line-of-sight tap is never scaled.

mod presets;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use presets::{preset, preset_names, preset_taps, TapSpec};

use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaPattern {
    /// dBi.
    pub mainlobe_gain: f64,
    /// dBi.
    pub sidelobe_gain: f64,
    /// dB, applied to odd-bounce paths.
    pub crosspol_rejection: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self {
            mainlobe_gain: 18.0,
            sidelobe_gain: 4.0,
            crosspol_rejection: 15.0,
        }
    }
}

impl AntennaPattern {
    pub fn validate(&self) -> Result<()> {
        if !(self.mainlobe_gain > self.sidelobe_gain) {
            return Err(Error::invalid("main lobe gain must exceed side lobe gain"));
        }
        if !(self.crosspol_rejection >= 0.0) {
            return Err(Error::invalid("cross-polarization rejection must be non-negative"));
        }
        Ok(())
    }

    /// Linear amplitude factor for a path.
    pub fn path_factor(&self, bounce_count: u32, via_sidelobe: bool) -> f64 {
        if bounce_count == 0 && !via_sidelobe {
            return 1.0;
        }
        let mut loss_db = 0.0;
        if via_sidelobe {
            loss_db += self.mainlobe_gain - self.sidelobe_gain;
        }
        if bounce_count % 2 == 1 {
            loss_db += self.crosspol_rejection;
        }
        db_to_amplitude(-loss_db)
    }
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelTap {
    /// Samples.
    pub delay: usize,
    pub gain: Complex64,
    /// 0 is the line of sight.
    pub bounce_count: u32,
    pub via_sidelobe: bool,
}

impl ChannelTap {
    pub fn los(gain: Complex64) -> Self {
        Self {
            delay: 0,
            gain,
            bounce_count: 0,
            via_sidelobe: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub taps: Vec<ChannelTap>,
    pub antenna: AntennaPattern,
    /// Per-sample SNR relative to the received signal power; `None` is noiseless.
    pub snr_db: Option<f64>,
    /// Radians per sample.
    pub cfo: f64,
    /// Radians.
    pub phase_offset: f64,
    pub seed: u64,
}

impl ChannelModel {
    /// A single unit line-of-sight tap with no impairments.
    pub fn identity() -> Self {
        Self {
            taps: vec![ChannelTap::los(Complex64::new(1.0, 0.0))],
            antenna: AntennaPattern::default(),
            snr_db: None,
            cfo: 0.0,
            phase_offset: 0.0,
            seed: 0,
        }
    }

    pub fn with_taps(taps: Vec<ChannelTap>) -> Self {
        Self {
            taps,
            ..Self::identity()
        }
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = Some(snr_db);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::invalid("channel needs at least one tap"));
        }
        self.antenna.validate()?;
        if self.taps.windows(2).any(|w| w[1].delay <= w[0].delay) {
            return Err(Error::invalid("tap delays must be strictly increasing"));
        }
        let los = self.taps.iter().filter(|t| t.bounce_count == 0).count();
        if los > 1 {
            return Err(Error::invalid("at most one line-of-sight tap"));
        }
        if self.taps.iter().any(|t| t.bounce_count == 0 && t.via_sidelobe) {
            return Err(Error::invalid("the line-of-sight tap cannot arrive via a side lobe"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("snr_db must be finite"));
            }
        }
        Ok(())
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    /// Re-draws the phase of every non-LOS tap from `(seed, frame_index)`,
    /// keeping magnitudes. Models slow vibration between frames.
    pub fn with_redrawn_phases(&self, frame_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ frame_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut out = self.clone();
        for tap in out.taps.iter_mut().filter(|t| t.bounce_count > 0) {
            let phase = rng.random_range(0.0..2.0 * PI);
            tap.gain = Complex64::from_polar(tap.gain.norm(), phase);
        }
        out
    }
}

/// `(delay, gain)` after antenna weighting.
pub fn effective_taps(model: &ChannelModel) -> Vec<(usize, Complex64)> {
    model
        .taps
        .iter()
        .map(|t| {
            (
                t.delay,
                t.gain * model.antenna.path_factor(t.bounce_count, t.via_sidelobe),
            )
        })
        .collect()
}

/// Convolution with the effective taps, then rotation by `cfo * n +
/// phase_offset`, then AWGN drawn from `model.seed`. The output is
/// `max_delay` samples longer than the input.
///
/// Signal power for the SNR is the received energy divided by the input
/// length.
pub fn apply_channel(tx: &[Complex64], model: &ChannelModel) -> Result<Vec<Complex64>> {
    if tx.is_empty() {
        return Err(Error::invalid("cannot apply a channel to an empty waveform"));
    }
    model.validate()?;
    let taps = effective_taps(model);
    let mut rx = vec![Complex64::default(); tx.len() + model.max_delay()];
    for &(d, g) in &taps {
        for (i, x) in tx.iter().enumerate() {
            rx[i + d] += g * x;
        }
    }
    if model.cfo != 0.0 || model.phase_offset != 0.0 {
        for (n, y) in rx.iter_mut().enumerate() {
            *y *= Complex64::from_polar(1.0, model.cfo * n as f64 + model.phase_offset);
        }
    }
    if let Some(snr_db) = model.snr_db {
        let power = rx.iter().map(|y| y.norm_sqr()).sum::<f64>() / tx.len() as f64;
        let variance = power / 10f64.powf(snr_db / 10.0);
        add_awgn(&mut rx, variance, model.seed);
    }
    Ok(rx)
}

/// Adds circular complex Gaussian noise of total variance `variance`.
pub fn add_awgn(samples: &mut [Complex64], variance: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (variance / 2.0).sqrt();
    for y in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *y += Complex64::new(re * sigma, im * sigma);
    }
}

/// DFT of the zero-padded effective impulse response.
pub fn estimate_frequency_response(model: &ChannelModel, fft_size: usize) -> Result<Vec<Complex64>> {
    model.validate()?;
    if fft_size == 0 || fft_size < model.max_delay() {
        return Err(Error::invalid(format!(
            "fft_size {fft_size} is smaller than the maximum tap delay {}",
            model.max_delay()
        )));
    }
    let taps = effective_taps(model);
    Ok((0..fft_size)
        .map(|k| {
            taps.iter()
                .map(|&(d, g)| {
                    let idx = (k * d) % fft_size;
                    g * Complex64::from_polar(1.0, -2.0 * PI * idx as f64 / fft_size as f64)
                })
                .sum()
        })
        .collect())
}
