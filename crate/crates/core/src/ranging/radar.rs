//! Monostatic echo ranging and Doppler under residual self-interference.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseband::sync::{normalized_correlation, wrap_phase};
use crate::channel::{add_awgn, db_to_amplitude};
use crate::{Complex64, Error, Result, SPEED_OF_LIGHT};

pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoScene {
    /// Meters.
    pub true_range: f64,
    /// m/s, positive when closing.
    pub relative_velocity: f64,
    /// dB, amplitude scaling of the echo relative to the transmitted waveform.
    pub reflection_gain: f64,
    /// dB relative to the echo power; `None` means no leakage.
    pub residual_si_power: Option<f64>,
    /// Hz.
    pub sample_rate: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Meters.
    pub carrier_wavelength: f64,
    /// Samples per Doppler block.
    pub block_len: usize,
    /// Per-sample SNR relative to echo power; `None` is noiseless.
    pub snr_db: Option<f64>,
}

impl Default for EchoScene {
    fn default() -> Self {
        Self {
            true_range: 1.5,
            relative_velocity: 0.0,
            reflection_gain: -20.0,
            residual_si_power: None,
            sample_rate: 1e9,
            bandwidth: 500e6,
            carrier_wavelength: 0.05,
            block_len: 64,
            snr_db: None,
        }
    }
}

impl EchoScene {
    pub fn validate(&self) -> Result<()> {
        if !(self.true_range > 0.0) || !self.true_range.is_finite() {
            return Err(Error::invalid("true_range must be positive"));
        }
        if !(self.bandwidth > 0.0) || !(self.sample_rate >= self.bandwidth) {
            return Err(Error::invalid("need 0 < bandwidth <= sample_rate"));
        }
        if !(self.carrier_wavelength > 0.0) {
            return Err(Error::invalid("carrier_wavelength must be positive"));
        }
        if self.block_len == 0 {
            return Err(Error::invalid("block_len must be positive"));
        }
        if !self.relative_velocity.is_finite() || !self.reflection_gain.is_finite() {
            return Err(Error::invalid("velocity and reflection gain must be finite"));
        }
        Ok(())
    }

    /// Round-trip delay in whole samples.
    pub fn round_trip_samples(&self) -> usize {
        round_trip_samples(self.true_range, self.sample_rate)
    }

    /// Seconds per Doppler block.
    pub fn block_period(&self) -> f64 {
        self.block_len as f64 / self.sample_rate
    }
}

pub fn round_trip_samples(range: f64, sample_rate: f64) -> usize {
    (2.0 * range / SPEED_OF_LIGHT * sample_rate).round() as usize
}

/// Range of a round trip of `delay` samples.
pub fn delay_to_range(delay: f64, sample_rate: f64) -> f64 {
    SPEED_OF_LIGHT * delay / (2.0 * sample_rate)
}

/// Random QPSK symbols at `bandwidth` symbols per second, each held for
/// `round(sample_rate / bandwidth)` samples.
pub fn probe_waveform(len: usize, sample_rate: f64, bandwidth: f64, seed: u64) -> Vec<Complex64> {
    let hold = ((sample_rate / bandwidth).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let sym = Complex64::new(
            if rng.random::<bool>() { s } else { -s },
            if rng.random::<bool>() { s } else { -s },
        );
        for _ in 0..hold.min(len - out.len()) {
            out.push(sym);
        }
    }
    out
}

/// Received samples: the scaled, Doppler-rotated echo at the round-trip
/// delay, plus leakage of `tx` at delay 0, plus AWGN. The output is
/// `tx.len() + delay` samples long.
pub fn generate_echo(tx: &[Complex64], scene: &EchoScene, seed: u64) -> Result<Vec<Complex64>> {
    if tx.is_empty() {
        return Err(Error::invalid("empty transmit waveform"));
    }
    scene.validate()?;
    let delay = scene.round_trip_samples();
    if delay >= tx.len() {
        return Err(Error::invalid(format!(
            "round-trip delay of {delay} samples exceeds the {}-sample waveform",
            tx.len()
        )));
    }
    let amp = db_to_amplitude(scene.reflection_gain);
    let doppler = 2.0 * scene.relative_velocity / scene.carrier_wavelength;
    let mut rx = vec![Complex64::default(); tx.len() + delay];
    for (i, x) in tx.iter().enumerate() {
        let block_start = (i / scene.block_len * scene.block_len) as f64 / scene.sample_rate;
        rx[i + delay] += x * Complex64::from_polar(amp, 2.0 * PI * doppler * block_start);
    }
    if let Some(si_db) = scene.residual_si_power {
        let si = amp * db_to_amplitude(si_db);
        for (r, x) in rx.iter_mut().zip(tx) {
            *r += x * si;
        }
    }
    if let Some(snr_db) = scene.snr_db {
        let tx_power = tx.iter().map(|x| x.norm_sqr()).sum::<f64>() / tx.len() as f64;
        let variance = amp * amp * tx_power / 10f64.powf(snr_db / 10.0);
        add_awgn(&mut rx, variance, seed);
    }
    Ok(rx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoRangeConfig {
    pub threshold: f64,
    pub cancel_self_interference: bool,
    /// Parabolic peak interpolation.
    pub subsample: bool,
    /// Also estimate velocity from per-block phases.
    pub doppler: Option<DopplerConfig>,
}

impl Default for EchoRangeConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_DETECTION_THRESHOLD,
            cancel_self_interference: true,
            subsample: false,
            doppler: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerConfig {
    pub block_len: usize,
    pub carrier_wavelength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    /// Meters.
    pub range: f64,
    /// m/s when Doppler processing was requested.
    pub velocity: Option<f64>,
    /// Normalized correlation at the peak, in [0, 1].
    pub peak_quality: f64,
    /// Round-trip delay in samples (fractional with subsample interpolation).
    pub delay: f64,
}

/// Removes the least-squares zero-delay projection of `tx` from `rx`.
pub fn cancel_self_interference(tx: &[Complex64], rx: &[Complex64]) -> Vec<Complex64> {
    let n = tx.len().min(rx.len());
    let energy: f64 = tx[..n].iter().map(|x| x.norm_sqr()).sum();
    if energy == 0.0 {
        return rx.to_vec();
    }
    let proj: Complex64 = rx[..n]
        .iter()
        .zip(&tx[..n])
        .map(|(r, x)| r * x.conj())
        .sum::<Complex64>()
        / energy;
    let mut out = rx.to_vec();
    for (o, x) in out.iter_mut().zip(&tx[..n]) {
        *o -= proj * x;
    }
    out
}

/// [`echo_range_with`] at the default configuration.
pub fn echo_range(tx: &[Complex64], rx: &[Complex64], sample_rate: f64) -> Result<RangeEstimate> {
    echo_range_with(tx, rx, sample_rate, &EchoRangeConfig::default())
}

pub fn echo_range_with(
    tx: &[Complex64],
    rx: &[Complex64],
    sample_rate: f64,
    cfg: &EchoRangeConfig,
) -> Result<RangeEstimate> {
    let residual = prepare(tx, rx, sample_rate, cfg)?;
    let corr = normalized_correlation(&residual, tx);
    let (peak, quality) = argmax(&corr);
    if quality < cfg.threshold {
        return Err(Error::NoTarget {
            quality,
            threshold: cfg.threshold,
        });
    }
    estimate_at(tx, &residual, &corr, peak, sample_rate, cfg)
}

/// Successive detection: find the strongest echo, subtract its
/// least-squares fitted copy, repeat until `max_targets` are found or the
/// next peak falls below threshold. Sorted by range.
///
/// Quality after the first target is normalized by the window energy of the
/// received samples before any subtraction, so it reads as the fraction of
/// the original window explained by that echo.
pub fn detect_echoes(
    tx: &[Complex64],
    rx: &[Complex64],
    sample_rate: f64,
    max_targets: usize,
    cfg: &EchoRangeConfig,
) -> Result<Vec<RangeEstimate>> {
    let mut residual = prepare(tx, rx, sample_rate, cfg)?;
    let n = tx.len();
    let tx_energy: f64 = tx.iter().map(|x| x.norm_sqr()).sum();
    let window: Vec<f64> = (0..=residual.len() - n)
        .map(|d| residual[d..d + n].iter().map(|x| x.norm_sqr()).sum())
        .collect();
    let mut found = Vec::new();
    while found.len() < max_targets {
        let xc: Vec<Complex64> = (0..window.len())
            .map(|d| residual[d..d + n].iter().zip(tx).map(|(r, x)| r * x.conj()).sum())
            .collect();
        let corr: Vec<f64> = xc
            .iter()
            .zip(&window)
            .map(|(c, w)| {
                let den = (w * tx_energy).sqrt();
                if den > 0.0 {
                    (c.norm() / den).min(1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let (peak, quality) = argmax(&corr);
        if quality < cfg.threshold {
            break;
        }
        found.push(estimate_at(tx, &residual, &corr, peak, sample_rate, cfg)?);
        let a = xc[peak] / tx_energy;
        for (r, x) in residual[peak..].iter_mut().zip(tx) {
            *r -= a * x;
        }
    }
    found.sort_by(|a, b| a.range.total_cmp(&b.range));
    Ok(found)
}

fn prepare(tx: &[Complex64], rx: &[Complex64], sample_rate: f64, cfg: &EchoRangeConfig) -> Result<Vec<Complex64>> {
    if tx.is_empty() || rx.len() < tx.len() {
        return Err(Error::invalid("need a non-empty tx and an rx at least as long"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample_rate must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(Error::invalid("threshold must lie in [0, 1]"));
    }
    Ok(if cfg.cancel_self_interference {
        cancel_self_interference(tx, rx)
    } else {
        rx.to_vec()
    })
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, x)| if x > best.1 { (i, x) } else { best },
    )
}

fn estimate_at(
    tx: &[Complex64],
    residual: &[Complex64],
    corr: &[f64],
    peak: usize,
    sample_rate: f64,
    cfg: &EchoRangeConfig,
) -> Result<RangeEstimate> {
    let mut delay = peak as f64;
    if cfg.subsample && peak > 0 && peak + 1 < corr.len() {
        let (a, b, c) = (corr[peak - 1], corr[peak], corr[peak + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            delay += (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    let velocity = match cfg.doppler {
        Some(d) => {
            let phases = block_phases(tx, residual, peak, d.block_len)?;
            Some(doppler_velocity(
                &phases,
                d.block_len as f64 / sample_rate,
                d.carrier_wavelength,
            )?)
        }
        None => None,
    };
    Ok(RangeEstimate {
        range: delay_to_range(delay, sample_rate),
        velocity,
        peak_quality: corr[peak].clamp(0.0, 1.0),
        delay,
    })
}

/// Phase of `rx[delay..]` against `tx` in each block of `block_len` samples.
pub fn block_phases(tx: &[Complex64], rx: &[Complex64], delay: usize, block_len: usize) -> Result<Vec<f64>> {
    if block_len == 0 {
        return Err(Error::invalid("block_len must be positive"));
    }
    if rx.len() < delay + tx.len() {
        return Err(Error::invalid("echo window extends past the received samples"));
    }
    Ok(tx
        .chunks(block_len)
        .enumerate()
        .map(|(b, chunk)| {
            let start = delay + b * block_len;
            chunk
                .iter()
                .zip(&rx[start..])
                .map(|(x, r)| r * x.conj())
                .sum::<Complex64>()
                .arg()
        })
        .collect())
}

/// Velocity `lambda * slope / (4 pi T)` from the least-squares slope of the
/// unwrapped per-block phases.
pub fn doppler_velocity(phases: &[f64], block_period: f64, carrier_wavelength: f64) -> Result<f64> {
    if phases.len() < 2 {
        return Err(Error::invalid("Doppler needs at least two blocks"));
    }
    if !(block_period > 0.0) || !(carrier_wavelength > 0.0) {
        return Err(Error::invalid("block_period and carrier_wavelength must be positive"));
    }
    let mut unwrapped = Vec::with_capacity(phases.len());
    unwrapped.push(phases[0]);
    for (b, w) in phases.windows(2).enumerate() {
        let step = wrap_phase(w[1] - w[0]);
        if step.abs() >= PI - 1e-12 {
            return Err(Error::AmbiguousVelocity { step });
        }
        unwrapped.push(unwrapped[b] + step);
    }
    let n = unwrapped.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = unwrapped.iter().sum::<f64>() / n;
    let (num, den) = unwrapped.iter().enumerate().fold((0.0, 0.0), |(num, den), (i, y)| {
        let dx = i as f64 - mean_x;
        (num + dx * (y - mean_y), den + dx * dx)
    });
    let slope = num / den;
    Ok(carrier_wavelength * slope / (4.0 * PI * block_period))
}
