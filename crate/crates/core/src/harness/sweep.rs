//! Monte Carlo BER/PER sweeps.
//!
//! Trial `t` of point `i` draws all of its randomness from
//! `ChaCha8Rng::seed_from_u64(trial_seed(seed, i, t))`. Trials run on a rayon
//! pool and are merged with integer sums, so results do not depend on the
//! thread count or scheduling.
//!
//! Eb/N0 maps to per-sample SNR as `Es/N0 = Eb/N0 * bits_per_symbol * rate /
//! sf` with unit-energy symbols. In framed mode the pilots, preamble and
//! cyclic prefix are overhead and do not count toward Eb.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Scenario, SimulationConfig, SweepAxis, SweepMode};
use super::report::{Cell, Table};
use super::seed::trial_seed;
use crate::baseband::codec;
use crate::baseband::{demodulate, despread, hard_decisions, modulate, rx_chain, spread, tx_chain};
use crate::channel::{add_awgn, apply_channel, estimate_frequency_response};
use crate::{Complex64, Error, Result};

/// Bit and packet error tallies. Addition is associative and commutative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub bit_errors: u64,
    pub bits: u64,
    pub packet_errors: u64,
    pub packets: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            bit_errors: self.bit_errors + o.bit_errors,
            bits: self.bits + o.bits,
            packet_errors: self.packet_errors + o.packet_errors,
            packets: self.packets + o.packets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// dB on the configured axis; `None` is noiseless.
    pub axis_value: Option<f64>,
    pub trials: u64,
    pub counts: Counts,
    /// Seconds. Not part of the CSV, which must be reproducible.
    pub wall_clock: f64,
}

impl SweepPoint {
    pub fn ber(&self) -> f64 {
        ratio(self.counts.bit_errors, self.counts.bits)
    }

    pub fn per(&self) -> f64 {
        ratio(self.counts.packet_errors, self.counts.packets)
    }

    pub fn ber_ci95(&self) -> f64 {
        ci95_half_width(self.ber(), self.counts.bits)
    }

    pub fn per_ci95(&self) -> f64 {
        ci95_half_width(self.per(), self.counts.packets)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Normal-approximation half-width `1.96 sqrt(p (1 - p) / n)`.
pub fn ci95_half_width(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub mode: SweepMode,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

/// Per-sample SNR in dB for an axis value.
pub fn sample_snr_db(cfg: &SimulationConfig, axis_value: f64) -> f64 {
    match cfg.sweep.axis {
        SweepAxis::SnrDb => axis_value,
        SweepAxis::EbN0Db => {
            let link = cfg.baseband.link();
            let rate = match cfg.sweep.mode {
                SweepMode::Uncoded => 1.0,
                SweepMode::Coded | SweepMode::Framed => link.codec.code_rate.as_f64(),
            };
            let bps = link.modulation.bits_per_symbol() as f64;
            axis_value + 10.0 * (bps * rate / f64::from(link.spreading.sf)).log10()
        }
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Runs `f(point, trial)` for every pair on a pool of `threads` workers and
/// returns results in (point, trial) order.
pub(crate) fn run_trials<T: Send>(
    points: usize,
    trials: usize,
    threads: Option<usize>,
    f: impl Fn(usize, usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    pool(threads)?.install(|| {
        (0..points * trials)
            .into_par_iter()
            .map(|k| f(k / trials, k % trials))
            .collect()
    })
}

pub fn run_sweep(cfg: &SimulationConfig, threads: Option<usize>) -> Result<SweepResult> {
    let scenario = cfg.scenario.unwrap_or(Scenario::BerSweep);
    let scenario = if matches!(scenario, Scenario::BerSweep | Scenario::PerSweep) {
        scenario
    } else {
        Scenario::BerSweep
    };
    cfg.validate_for(scenario)?;
    let trials = cfg.trials;
    let values = &cfg.sweep.values;
    let start = Instant::now();
    let per_trial = run_trials(values.len(), trials, threads, |p, t| {
        let snr = values[p].map(|v| sample_snr_db(cfg, v));
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, p as u64, t as u64));
        match cfg.sweep.mode {
            SweepMode::Uncoded => uncoded_trial(cfg, snr, &mut rng),
            SweepMode::Coded => coded_trial(cfg, snr, &mut rng),
            SweepMode::Framed => framed_trial(cfg, snr, t as u64, &mut rng),
        }
    })?;
    let elapsed = start.elapsed().as_secs_f64() / values.len() as f64;
    let points = values
        .iter()
        .zip(per_trial.chunks(trials))
        .map(|(&v, chunk)| SweepPoint {
            axis_value: v,
            trials: trials as u64,
            counts: chunk.iter().copied().fold(Counts::default(), |a, b| a + b),
            wall_clock: elapsed,
        })
        .collect();
    Ok(SweepResult {
        mode: cfg.sweep.mode,
        axis: cfg.sweep.axis,
        points,
    })
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn noise_variance(snr_db: f64, signal_power: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// Spreads and modulates `bits`, adds AWGN, and returns per-bit soft values.
fn symbol_level(cfg: &SimulationConfig, bits: &[u8], snr_db: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let link = cfg.baseband.link();
    let mut chips = spread(bits, &link.spreading)?;
    let n_chips = chips.len();
    if chips.len() % link.modulation.bits_per_symbol() != 0 {
        chips.push(0);
    }
    let mut symbols = modulate(&chips, link.modulation)?;
    let noise_seed = rng.next_u64();
    if let Some(snr) = snr_db {
        add_awgn(&mut symbols, noise_variance(snr, 1.0), noise_seed);
    }
    let mut soft = demodulate(&symbols, link.modulation);
    soft.truncate(n_chips);
    despread(&soft, &link.spreading)
}

fn count(sent: &[u8], got: &[u8], crc_ok: bool) -> Counts {
    let errors = sent.iter().zip(got).filter(|(a, b)| a != b).count() as u64;
    Counts {
        bit_errors: errors,
        bits: sent.len() as u64,
        packet_errors: u64::from(errors > 0 || !crc_ok),
        packets: 1,
    }
}

fn uncoded_trial(cfg: &SimulationConfig, snr_db: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Counts> {
    let bits = random_bits(rng, cfg.sweep.bits_per_trial);
    let soft = symbol_level(cfg, &bits, snr_db, rng)?;
    Ok(count(&bits, &hard_decisions(&soft), true))
}

fn info_len(cfg: &SimulationConfig) -> usize {
    cfg.sweep.info_bits.unwrap_or(cfg.baseband.codec.payload_bits())
}

fn coded_trial(cfg: &SimulationConfig, snr_db: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Counts> {
    let codec_cfg = cfg.baseband.codec;
    let info = random_bits(rng, info_len(cfg));
    let coded = codec::encode(&info, &codec_cfg)?;
    let soft = symbol_level(cfg, &coded, snr_db, rng)?;
    let decoded = codec::decode(&soft, &codec_cfg)?;
    Ok(count(&info, &decoded.bits[..info.len()], decoded.crc_ok))
}

/// A frame the receiver cannot acquire counts every information bit as
/// wrong.
fn framed_trial(cfg: &SimulationConfig, snr_db: Option<f64>, trial: u64, rng: &mut ChaCha8Rng) -> Result<Counts> {
    let link = cfg.baseband.link();
    let info = random_bits(rng, info_len(cfg));
    let waveform = tx_chain(&info, &link)?.waveform();
    let mut model = cfg.channel.model()?;
    model.seed = rng.next_u64();
    if cfg.channel.redraw_phases {
        model = model.with_redrawn_phases(trial);
    }
    let response = estimate_frequency_response(&model, link.geometry.fft_size)?;
    let faded = apply_channel(&waveform, &model)?;
    let lead = cfg.channel.timing_lead;
    let mut rx = vec![Complex64::default(); lead];
    rx.extend_from_slice(&faded);
    if let Some(snr) = snr_db {
        let power = faded.iter().map(|y| y.norm_sqr()).sum::<f64>() / waveform.len() as f64;
        add_awgn(&mut rx, noise_variance(snr, power), rng.next_u64());
    }
    match rx_chain(&rx, &link, &cfg.baseband.equalizer, Some(&response), info.len()) {
        Ok(out) => Ok(count(&info, &out.info_bits, out.crc_ok)),
        Err(Error::SyncFailure { .. } | Error::DegenerateChannel) => Ok(Counts {
            bit_errors: info.len() as u64,
            bits: info.len() as u64,
            packet_errors: 1,
            packets: 1,
        }),
        Err(e) => Err(e),
    }
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "axis_value_db",
    "trials",
    "bit_errors",
    "bits",
    "packet_errors",
    "packets",
    "ber",
    "per",
    "ber_ci95",
    "per_ci95",
];

/// One row per point; a noiseless point has axis value `inf`.
pub fn sweep_table(result: &SweepResult) -> Table {
    let mut t = Table::new(SWEEP_COLUMNS.to_vec());
    for p in &result.points {
        t.push(vec![
            Cell::Float(p.axis_value.unwrap_or(f64::INFINITY)),
            p.trials.into(),
            p.counts.bit_errors.into(),
            p.counts.bits.into(),
            p.counts.packet_errors.into(),
            p.counts.packets.into(),
            p.ber().into(),
            p.per().into(),
            p.ber_ci95().into(),
            p.per_ci95().into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseband::ModulationScheme;

    fn q(x: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
    }

    fn bpsk_cfg(values: Vec<Option<f64>>, trials: usize, bits: usize) -> SimulationConfig {
        let mut cfg = SimulationConfig::default();
        cfg.sweep.values = values;
        cfg.trials = trials;
        cfg.sweep.bits_per_trial = bits;
        cfg
    }

    #[test]
    fn uncoded_bpsk_at_6db() {
        let r = run_sweep(&bpsk_cfg(vec![Some(6.0)], 40, 10_000), None).unwrap();
        let p = &r.points[0];
        let theory = q((2.0 * 10f64.powf(0.6)).sqrt());
        let sigma = (theory * (1.0 - theory) / p.counts.bits as f64).sqrt();
        assert_eq!(p.counts.bits, 400_000);
        assert!((p.ber() - theory).abs() < 3.0 * sigma, "{} vs {theory}", p.ber());
    }

    #[test]
    fn noiseless_point_is_error_free() {
        for mode in [SweepMode::Uncoded, SweepMode::Coded, SweepMode::Framed] {
            let mut cfg = bpsk_cfg(vec![None], 3, 1000);
            cfg.sweep.mode = mode;
            let r = run_sweep(&cfg, Some(2)).unwrap();
            assert_eq!(r.points[0].counts.bit_errors, 0, "{mode:?}");
            assert_eq!(r.points[0].per(), 0.0);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut cfg = bpsk_cfg(vec![Some(2.0), Some(4.0)], 7, 3000);
        cfg.baseband.modulation = ModulationScheme::Qpsk;
        let a = sweep_table(&run_sweep(&cfg, Some(1)).unwrap()).to_csv();
        let b = sweep_table(&run_sweep(&cfg, Some(5)).unwrap()).to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn qpsk_matches_bpsk_per_bit() {
        let mut cfg = bpsk_cfg(vec![Some(4.0)], 40, 25_000);
        cfg.baseband.modulation = ModulationScheme::Qpsk;
        let r = run_sweep(&cfg, None).unwrap();
        let theory = q((2.0 * 10f64.powf(0.4)).sqrt());
        let sigma = (theory * (1.0 - theory) / r.points[0].counts.bits as f64).sqrt();
        assert!((r.points[0].ber() - theory).abs() < 3.0 * sigma);
    }

    #[test]
    fn eb_n0_mapping() {
        let mut cfg = SimulationConfig::default();
        assert_eq!(sample_snr_db(&cfg, 6.0), 6.0);
        cfg.baseband.spreading.sf = 8;
        cfg.sweep.mode = SweepMode::Coded;
        cfg.baseband.modulation = ModulationScheme::Qpsk;
        // 2 bits/symbol * 1/2 / 8 = 1/8
        assert!((sample_snr_db(&cfg, 6.0) - (6.0 - 10.0 * 8f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn ci_formula() {
        assert_eq!(ci95_half_width(0.0, 100), 0.0);
        assert!((ci95_half_width(0.5, 100) - 0.098).abs() < 1e-12);
        assert_eq!(ci95_half_width(0.3, 0), 0.0);
    }

    #[test]
    fn framed_multipath_with_noise_decodes() {
        let mut cfg = bpsk_cfg(vec![Some(12.0)], 4, 0);
        cfg.sweep.mode = SweepMode::Framed;
        cfg.sweep.axis = SweepAxis::SnrDb;
        cfg.channel.preset = Some("coupling-harsh".into());
        cfg.channel.timing_lead = 19;
        cfg.channel.cfo = 2e-3;
        let r = run_sweep(&cfg, None).unwrap();
        assert_eq!(r.points[0].counts.packet_errors, 0);
    }
}
