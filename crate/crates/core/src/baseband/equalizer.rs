//! Receiver equalizers: block frequency-domain MMSE (needs a CP) and an
//! adaptive LMS FIR in the time domain.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::modulation::ModulationScheme;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerVariant {
    TimeDomainLms,
    #[default]
    FrequencyDomainMmse,
}

/// How the FD receiver learns the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelEstimation {
    /// Exact response handed over by the caller.
    #[default]
    Genie,
    /// Least squares on the frame's pilot block.
    PilotLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EqualizerConfig {
    pub variant: EqualizerVariant,
    pub lms_taps: usize,
    pub lms_step: f64,
    /// Keep adapting on sliced decisions after training. `None` freezes the
    /// taps once training ends.
    pub decision_directed: Option<ModulationScheme>,
    pub noise_variance_hint: f64,
    pub channel_estimation: ChannelEstimation,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            variant: EqualizerVariant::FrequencyDomainMmse,
            lms_taps: 15,
            lms_step: 0.01,
            decision_directed: None,
            noise_variance_hint: 0.0,
            channel_estimation: ChannelEstimation::Genie,
        }
    }
}

impl EqualizerConfig {
    pub fn time_domain() -> Self {
        Self {
            variant: EqualizerVariant::TimeDomainLms,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lms_taps == 0 || self.lms_taps.is_multiple_of(2) {
            return Err(Error::invalid("lms_taps must be odd and at least 1"));
        }
        if !(self.lms_step > 0.0) {
            return Err(Error::invalid("lms_step must be positive"));
        }
        if !(self.noise_variance_hint >= 0.0) {
            return Err(Error::invalid("noise_variance_hint must be non-negative"));
        }
        Ok(())
    }
}

/// Forward/inverse FFT pair for one block size.
#[derive(Clone)]
pub struct FdEqualizer {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FdEqualizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FdEqualizer").field("size", &self.size).finish()
    }
}

impl FdEqualizer {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dft(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    pub fn idft(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    /// DFT, per-bin weight `conj(H) / (|H|^2 + noise_variance)`, inverse DFT.
    /// With zero noise variance this is zero forcing; bins where the weight is
    /// undefined are zeroed.
    pub fn equalize(
        &self,
        rx_block: &[Complex64],
        response: &[Complex64],
        noise_variance: f64,
    ) -> Result<Vec<Complex64>> {
        if rx_block.len() != self.size || response.len() != self.size {
            return Err(Error::invalid(format!(
                "block ({}) and response ({}) must both have {} bins",
                rx_block.len(),
                response.len(),
                self.size
            )));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::invalid("noise variance must be non-negative"));
        }
        if response.iter().all(|h| h.norm_sqr() == 0.0) {
            return Err(Error::DegenerateChannel);
        }
        let mut spectrum = self.dft(rx_block);
        for (y, h) in spectrum.iter_mut().zip(response) {
            let denom = h.norm_sqr() + noise_variance;
            *y = if denom > 0.0 && denom.is_finite() {
                *y * h.conj() / denom
            } else {
                Complex64::default()
            };
        }
        Ok(self.idft(&spectrum))
    }

    /// Least-squares response estimate `Y[k] / X[k]` from a received known
    /// block.
    pub fn estimate_ls(&self, rx_block: &[Complex64], known: &[Complex64]) -> Result<Vec<Complex64>> {
        if rx_block.len() != self.size || known.len() != self.size {
            return Err(Error::invalid("pilot block length must equal the FFT size"));
        }
        let y = self.dft(rx_block);
        let x = self.dft(known);
        if x.iter().any(|v| v.norm_sqr() < 1e-18) {
            return Err(Error::invalid("known block has spectral nulls"));
        }
        Ok(y.iter().zip(&x).map(|(a, b)| a / b).collect())
    }
}

/// One-shot frequency-domain MMSE equalization of a block with its CP removed.
pub fn fd_equalize(
    rx_block: &[Complex64],
    channel_freq_response: &[Complex64],
    noise_variance: f64,
) -> Result<Vec<Complex64>> {
    FdEqualizer::new(rx_block.len()).equalize(rx_block, channel_freq_response, noise_variance)
}

/// Linear FIR equalizer adapted by least mean squares. Tap `k` multiplies
/// `x[n + center - k]`, so a unit impulse at the center tap is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsEqualizer {
    taps: Vec<Complex64>,
    step: f64,
}

impl LmsEqualizer {
    /// Center-spike initialization.
    pub fn new(n_taps: usize, step: f64) -> Result<Self> {
        if n_taps == 0 || n_taps.is_multiple_of(2) {
            return Err(Error::invalid("lms_taps must be odd and at least 1"));
        }
        if !(step > 0.0) {
            return Err(Error::invalid("lms_step must be positive"));
        }
        let mut taps = vec![Complex64::default(); n_taps];
        taps[n_taps / 2] = Complex64::new(1.0, 0.0);
        Ok(Self { taps, step })
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    fn center(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn output(&self, x: &[Complex64], n: usize) -> Complex64 {
        let c = self.center();
        let mut y = Complex64::default();
        for (k, w) in self.taps.iter().enumerate() {
            let idx = n as isize + c as isize - k as isize;
            if idx >= 0 && (idx as usize) < x.len() {
                y += w * x[idx as usize];
            }
        }
        y
    }

    fn adapt(&mut self, x: &[Complex64], n: usize, err: Complex64) {
        let c = self.center();
        let mu = self.step;
        for (k, w) in self.taps.iter_mut().enumerate() {
            let idx = n as isize + c as isize - k as isize;
            if idx >= 0 && (idx as usize) < x.len() {
                *w += mu * err * x[idx as usize].conj();
            }
        }
    }

    /// Adapts on `x[..desired.len()]` against the known symbols and returns
    /// the mean squared error over the last quarter of the training run.
    pub fn train(&mut self, x: &[Complex64], desired: &[Complex64]) -> f64 {
        let tail_start = desired.len() - desired.len() / 4;
        let mut sq = 0.0;
        for (n, d) in desired.iter().enumerate() {
            let e = d - self.output(x, n);
            if n >= tail_start {
                sq += e.norm_sqr();
            }
            self.adapt(x, n, e);
        }
        sq / (desired.len() - tail_start).max(1) as f64
    }

    /// Filters `x[range]`, optionally adapting on sliced decisions.
    pub fn run(
        &mut self,
        x: &[Complex64],
        range: std::ops::Range<usize>,
        slicer: Option<ModulationScheme>,
    ) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(range.len());
        for n in range {
            let y = self.output(x, n);
            if let Some(scheme) = slicer {
                let e = slice(y, scheme) - y;
                self.adapt(x, n, e);
            }
            out.push(y);
        }
        out
    }
}

fn slice(y: Complex64, scheme: ModulationScheme) -> Complex64 {
    let sgn = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    match scheme {
        ModulationScheme::Bpsk => Complex64::new(sgn(y.re), 0.0),
        ModulationScheme::Qpsk => Complex64::new(sgn(y.re), sgn(y.im)) * std::f64::consts::FRAC_1_SQRT_2,
    }
}

/// Trains an LMS equalizer on the leading `training.len()` symbols of
/// `rx_symbols` and returns the equalized remainder.
pub fn td_equalize(rx_symbols: &[Complex64], training: &[Complex64], cfg: &EqualizerConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if training.len() < 10 * cfg.lms_taps {
        return Err(Error::invalid(format!(
            "training of {} symbols is shorter than 10 x {} taps",
            training.len(),
            cfg.lms_taps
        )));
    }
    if rx_symbols.len() < training.len() {
        return Err(Error::invalid(
            "received sequence is shorter than the training sequence",
        ));
    }
    let mut eq = LmsEqualizer::new(cfg.lms_taps, cfg.lms_step)?;
    eq.train(rx_symbols, training);
    Ok(eq.run(rx_symbols, training.len()..rx_symbols.len(), cfg.decision_directed))
}
