//! One-shot acquisition (timing, CFO, phase) on the repeated-half preamble
//! and per-block common phase tracking on pilots.

use std::f64::consts::PI;

use crate::{Complex64, Error, Result};

pub const DEFAULT_SYNC_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncState {
    /// Sample index where the preamble starts.
    pub timing_offset: usize,
    /// Radians per sample.
    pub cfo_estimate: f64,
    /// Carrier phase at the first preamble sample, in (-pi, pi].
    pub phase: f64,
    /// Normalized correlation at the detected peak.
    pub peak: f64,
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Normalized cross-correlation magnitude of `rx[d..d+p.len()]` against `p`
/// for every admissible `d`.
pub fn normalized_correlation(rx: &[Complex64], p: &[Complex64]) -> Vec<f64> {
    let n = p.len();
    if rx.len() < n || n == 0 {
        return Vec::new();
    }
    let p_energy: f64 = p.iter().map(|x| x.norm_sqr()).sum();
    let mut window_energy: f64 = rx[..n].iter().map(|x| x.norm_sqr()).sum();
    let mut out = Vec::with_capacity(rx.len() - n + 1);
    for d in 0..=rx.len() - n {
        if d > 0 {
            // recompute periodically to keep rounding drift out of the sliding sum
            window_energy = if d % 1024 == 0 {
                rx[d..d + n].iter().map(|x| x.norm_sqr()).sum()
            } else {
                window_energy - rx[d - 1].norm_sqr() + rx[d + n - 1].norm_sqr()
            };
        }
        let c: Complex64 = rx[d..d + n].iter().zip(p).map(|(r, q)| r * q.conj()).sum();
        let den = (window_energy.max(0.0) * p_energy).sqrt();
        out.push(if den > 0.0 { (c.norm() / den).min(1.0) } else { 0.0 });
    }
    out
}

/// [`acquire_sync_with`] at the default threshold.
pub fn acquire_sync(rx: &[Complex64], preamble: &[Complex64]) -> Result<SyncState> {
    acquire_sync_with(rx, preamble, DEFAULT_SYNC_THRESHOLD)
}

/// Timing from the normalized correlation peak; CFO from the phase of the
/// correlation between the two preamble halves divided by the half length;
/// phase from the CFO-corrected preamble correlation.
pub fn acquire_sync_with(rx: &[Complex64], preamble: &[Complex64], threshold: f64) -> Result<SyncState> {
    if preamble.len() < 2 || !preamble.len().is_multiple_of(2) {
        return Err(Error::invalid("preamble must consist of two equal halves"));
    }
    if rx.len() < preamble.len() {
        return Err(Error::invalid(format!(
            "waveform of {} samples is shorter than the {}-sample preamble",
            rx.len(),
            preamble.len()
        )));
    }
    let corr = normalized_correlation(rx, preamble);
    let (timing_offset, peak) =
        corr.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, v)| if v > best.1 { (i, v) } else { best },
        );
    if peak < threshold {
        return Err(Error::SyncFailure { peak, threshold });
    }

    let half = preamble.len() / 2;
    let seg = &rx[timing_offset..timing_offset + preamble.len()];
    let auto: Complex64 = (0..half).map(|n| seg[n].conj() * seg[n + half]).sum();
    let cfo_estimate = auto.arg() / half as f64;

    let rot: Complex64 = seg
        .iter()
        .zip(preamble)
        .enumerate()
        .map(|(n, (r, p))| r * Complex64::from_polar(1.0, -cfo_estimate * n as f64) * p.conj())
        .sum();

    Ok(SyncState {
        timing_offset,
        cfo_estimate,
        phase: wrap_phase(rot.arg()),
        peak,
    })
}

/// Derotates `rx` by `cfo * (n - origin)` in place.
pub fn remove_cfo(rx: &mut [Complex64], cfo: f64, origin: usize) {
    for (n, x) in rx.iter_mut().enumerate() {
        *x *= Complex64::from_polar(1.0, -cfo * (n as f64 - origin as f64));
    }
}

/// Estimates the block's common phase as `arg(sum rx[p] * conj(pilot))` and
/// removes it from every symbol.
pub fn track_phase(block: &[Complex64], positions: &[usize], pilots: &[Complex64]) -> Result<Vec<Complex64>> {
    Ok(estimate_and_track(block, positions, pilots)?.0)
}

/// Like [`track_phase`] but also returns the removed phase.
pub fn estimate_and_track(
    block: &[Complex64],
    positions: &[usize],
    pilots: &[Complex64],
) -> Result<(Vec<Complex64>, f64)> {
    if positions.is_empty() {
        return Err(Error::invalid("phase tracking needs at least one pilot"));
    }
    if positions.len() != pilots.len() {
        return Err(Error::invalid("pilot positions and values differ in length"));
    }
    if let Some(&p) = positions.iter().find(|&&p| p >= block.len()) {
        return Err(Error::invalid(format!("pilot position {p} outside block")));
    }
    let acc: Complex64 = positions.iter().zip(pilots).map(|(&p, s)| block[p] * s.conj()).sum();
    let phi = acc.arg();
    let derot = Complex64::from_polar(1.0, -phi);
    Ok((block.iter().map(|x| x * derot).collect(), phi))
}
