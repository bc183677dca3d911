//! JSON run configuration. Every section is optional and falls back to
//! defaults; unknown keys anywhere are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseband::{CodecConfig, FrameGeometry, ModulationScheme, SpreadingConfig};
use crate::baseband::{EqualizerConfig, LinkConfig};
use crate::channel::{preset_taps, AntennaPattern, ChannelModel, TapSpec};
use crate::mux::{FrameSource, Redundancy};
use crate::profiles::{RequirementProfile, Robustness, ServiceProfile};
use crate::ranging::{EchoRangeConfig, EchoScene};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    BerSweep,
    PerSweep,
    MuxSim,
    Ranging,
    LatencyBudget,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::BerSweep => "ber-sweep",
            Scenario::PerSweep => "per-sweep",
            Scenario::MuxSim => "mux-sim",
            Scenario::Ranging => "ranging",
            Scenario::LatencyBudget => "latency-budget",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Must match the subcommand when given.
    pub scenario: Option<Scenario>,
    pub seed: u64,
    /// Trials per sweep point, or ranging trials.
    pub trials: usize,
    pub output: Option<PathBuf>,
    pub baseband: BasebandSection,
    pub channel: ChannelSection,
    pub sweep: SweepSection,
    pub mux: MuxSection,
    pub profiles: ProfilesSection,
    pub ranging: RangingSection,
    pub latency: LatencySection,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 1,
            trials: 100,
            output: None,
            baseband: BasebandSection::default(),
            channel: ChannelSection::default(),
            sweep: SweepSection::default(),
            mux: MuxSection::default(),
            profiles: ProfilesSection::default(),
            ranging: RangingSection::default(),
            latency: LatencySection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasebandSection {
    pub codec: CodecConfig,
    pub spreading: SpreadingConfig,
    pub modulation: ModulationScheme,
    pub geometry: FrameGeometry,
    /// Keep `geometry.blocks` as given instead of sizing it to one codeword.
    pub fixed_blocks: bool,
    pub equalizer: EqualizerConfig,
}

impl BasebandSection {
    pub fn link(&self) -> LinkConfig {
        let link = LinkConfig {
            codec: self.codec,
            spreading: self.spreading,
            modulation: self.modulation,
            geometry: self.geometry,
        };
        if self.fixed_blocks {
            link
        } else {
            link.fitted()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// Named preset; mutually exclusive with `taps`. Neither means a single
    /// line-of-sight tap.
    pub preset: Option<String>,
    pub taps: Option<Vec<TapSpec>>,
    pub antenna: AntennaPattern,
    /// Radians per sample.
    pub cfo: f64,
    /// Radians.
    pub phase_offset: f64,
    /// Re-draw non-LOS tap phases for every trial.
    pub redraw_phases: bool,
    /// Zero samples before the frame.
    pub timing_lead: usize,
}

impl ChannelSection {
    /// Noiseless model; the harness sets SNR and seed per trial.
    pub fn model(&self) -> Result<ChannelModel> {
        let rows: Vec<TapSpec> = match (&self.preset, &self.taps) {
            (Some(_), Some(_)) => return Err(Error::Config("channel: give either preset or taps, not both".into())),
            (Some(name), None) => preset_taps(name)
                .map_err(|e| Error::Config(format!("channel.preset: {e}")))?
                .to_vec(),
            (None, Some(rows)) => rows.clone(),
            (None, None) => preset_taps("coupling-los")?.to_vec(),
        };
        let model = ChannelModel {
            taps: rows.iter().map(TapSpec::to_tap).collect(),
            antenna: self.antenna,
            snr_db: None,
            cfo: self.cfo,
            phase_offset: self.phase_offset,
            seed: 0,
        };
        model.validate().map_err(|e| Error::Config(format!("channel: {e}")))?;
        Ok(model)
    }

    /// True when the channel is a unit line-of-sight tap with no rotation.
    pub fn is_awgn_only(&self) -> Result<bool> {
        let m = self.model()?;
        Ok(m.taps.len() == 1
            && m.taps[0].delay == 0
            && (m.taps[0].gain - crate::Complex64::new(1.0, 0.0)).norm() < 1e-12
            && self.cfo == 0.0
            && self.phase_offset == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Spread, modulate, AWGN, despread, slice. No code, no frame.
    #[default]
    Uncoded,
    /// One codeword per trial through the code, spreading and modulation over
    /// AWGN, without framing.
    Coded,
    /// Full transmit chain, channel model and receiver.
    Framed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Energy per information bit over N0.
    #[default]
    EbN0Db,
    /// Per-sample (per-chip) SNR.
    SnrDb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub axis: SweepAxis,
    /// Axis values in dB; `null` is a noiseless point.
    pub values: Vec<Option<f64>>,
    /// Uncoded mode: information bits per trial.
    pub bits_per_trial: usize,
    /// Coded and framed modes: information bits per codeword, at most the
    /// codec payload. `None` fills the payload.
    pub info_bits: Option<usize>,
    /// Optional PER target for the summary; must be at least 1e-6.
    pub target_per: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            mode: SweepMode::Uncoded,
            axis: SweepAxis::EbN0Db,
            values: vec![Some(0.0), Some(2.0), Some(4.0), Some(6.0), Some(8.0)],
            bits_per_trial: 10_000,
            info_bits: None,
            target_per: None,
        }
    }
}

/// Smallest PER a configuration may target; lower values cannot be
/// confirmed by Monte Carlo at desk scale.
pub const MIN_TARGET_PER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Custom {
        name: String,
        robustness: Robustness,
        max_bitrate_rb: f64,
        spreading_factor_sf: u32,
    },
}

impl ProfileRef {
    pub fn resolve(&self) -> Result<ServiceProfile> {
        match self {
            ProfileRef::Named(n) => ServiceProfile::by_name(n),
            ProfileRef::Custom {
                name,
                robustness,
                max_bitrate_rb,
                spreading_factor_sf,
            } => ServiceProfile::custom(name.clone(), *robustness, *max_bitrate_rb, *spreading_factor_sf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub id: u16,
    pub service_profile: ProfileRef,
    /// Seconds.
    pub deadline: f64,
    pub redundancy: Redundancy,
    /// Ignored when `mux.trace` is given.
    #[serde(default)]
    pub payload_bytes: usize,
    /// Seconds between frames. Ignored when `mux.trace` is given.
    #[serde(default)]
    pub interval: f64,
    /// Seconds before the first frame.
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "default_source")]
    pub source: FrameSource,
}

fn default_source() -> FrameSource {
    FrameSource::Ethernet
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkModel {
    /// Each copy is independently lost with the modem's probability.
    InducedLoss { loss: [f64; 2] },
    /// Each copy runs through the framed baseband chain and channel at the
    /// modem's per-sample SNR; the CRC decides.
    Phy { snr_db: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuxSection {
    pub mtu: usize,
    pub queue_depth: usize,
    pub channels: Vec<ChannelSpec>,
    pub packets_per_channel: u64,
    /// CSV of arrivals with header `time_s,channel_id,payload_bytes`. When
    /// set it replaces the periodic sources. A relative path is resolved
    /// against the directory of the config file.
    pub trace: Option<PathBuf>,
    pub link: LinkModel,
    /// Meters, adds propagation delay to every copy.
    pub distance: f64,
    /// Seconds per latency histogram bin.
    pub histogram_bin: f64,
}

impl Default for MuxSection {
    fn default() -> Self {
        Self {
            mtu: 1500,
            queue_depth: 64,
            channels: Vec::new(),
            packets_per_channel: 1000,
            trace: None,
            link: LinkModel::InducedLoss { loss: [0.0, 0.0] },
            distance: 0.5,
            histogram_bin: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfilesSection {
    /// Modem capacity C in Mbit/s. Required for mux runs.
    pub modem_capacity: Option<f64>,
    pub requirement: String,
}

impl Default for ProfilesSection {
    fn default() -> Self {
        Self {
            modem_capacity: None,
            requirement: "RP1".into(),
        }
    }
}

impl ProfilesSection {
    pub fn requirement_profile(&self) -> Result<RequirementProfile> {
        RequirementProfile::by_name(&self.requirement).map_err(|e| Error::Config(format!("profiles.requirement: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangingSection {
    pub scene: EchoScene,
    pub detector: EchoRangeConfig,
    /// Probe waveform length in samples.
    pub waveform_len: usize,
    /// When set, each trial draws its true range uniformly from this span
    /// instead of using `scene.true_range`.
    pub range_span: Option<[f64; 2]>,
}

impl Default for RangingSection {
    fn default() -> Self {
        Self {
            scene: EchoScene::default(),
            detector: EchoRangeConfig::default(),
            waveform_len: 1024,
            range_span: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencySection {
    pub coded_rate_bps: f64,
    /// Meters.
    pub distance: f64,
}

impl Default for LatencySection {
    fn default() -> Self {
        Self {
            coded_rate_bps: 500e6,
            distance: 0.5,
        }
    }
}

fn cfg_err(field: &str, e: impl fmt::Display) -> Error {
    Error::Config(format!("{field}: {e}"))
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let (Some(trace), Some(dir)) = (&mut cfg.mux.trace, path.parent()) {
            if trace.is_relative() {
                *trace = dir.join(&*trace);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the sections `scenario` reads.
    pub fn validate_for(&self, scenario: Scenario) -> Result<()> {
        if let Some(s) = self.scenario {
            if s != scenario {
                return Err(Error::Config(format!("config is for scenario {s}, not {scenario}")));
            }
        }
        match scenario {
            Scenario::BerSweep | Scenario::PerSweep => self.validate_sweep(scenario),
            Scenario::MuxSim => self.validate_mux(),
            Scenario::Ranging => self.validate_ranging(),
            Scenario::LatencyBudget => self.validate_latency(),
        }
    }

    fn validate_baseband(&self) -> Result<()> {
        self.baseband.link().validate().map_err(|e| cfg_err("baseband", e))?;
        self.baseband
            .equalizer
            .validate()
            .map_err(|e| cfg_err("baseband.equalizer", e))
    }

    fn validate_sweep(&self, scenario: Scenario) -> Result<()> {
        if self.trials == 0 {
            return Err(cfg_err("trials", "must be at least 1"));
        }
        self.validate_baseband()?;
        let s = &self.sweep;
        if s.values.is_empty() {
            return Err(cfg_err("sweep.values", "must not be empty"));
        }
        if s.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(cfg_err("sweep.values", "must be finite or null"));
        }
        match s.mode {
            SweepMode::Uncoded => {
                if s.bits_per_trial == 0 {
                    return Err(cfg_err("sweep.bits_per_trial", "must be at least 1"));
                }
                if scenario == Scenario::PerSweep {
                    return Err(cfg_err("sweep.mode", "per-sweep needs coded or framed mode"));
                }
            }
            SweepMode::Coded | SweepMode::Framed => {
                let max = self.baseband.codec.payload_bits();
                if let Some(n) = s.info_bits {
                    if n == 0 || n > max {
                        return Err(cfg_err("sweep.info_bits", format!("must be in 1..={max}")));
                    }
                }
            }
        }
        if s.mode != SweepMode::Framed && !self.channel.is_awgn_only()? {
            return Err(cfg_err(
                "channel",
                "uncoded and coded sweeps are AWGN only; use sweep.mode \"framed\" for multipath",
            ));
        }
        if s.mode == SweepMode::Framed {
            self.channel.model()?;
        }
        if let Some(t) = s.target_per {
            if !(MIN_TARGET_PER..1.0).contains(&t) {
                return Err(cfg_err(
                    "sweep.target_per",
                    format!("must be in [{MIN_TARGET_PER:e}, 1); smaller rates are not verifiable by simulation"),
                ));
            }
        }
        Ok(())
    }

    /// Largest packet the phy link model carries in one codeword.
    pub fn phy_max_payload(&self) -> usize {
        self.baseband.codec.payload_bits() / 8
    }

    fn validate_mux(&self) -> Result<()> {
        let m = &self.mux;
        if m.channels.is_empty() {
            return Err(cfg_err("mux.channels", "must not be empty"));
        }
        let periodic = m.trace.is_none();
        if periodic && m.packets_per_channel == 0 {
            return Err(cfg_err("mux.packets_per_channel", "must be at least 1"));
        }
        if m.mtu == 0 || m.queue_depth == 0 {
            return Err(cfg_err("mux", "mtu and queue_depth must be positive"));
        }
        if !(m.distance >= 0.0) || !(m.histogram_bin > 0.0) {
            return Err(cfg_err(
                "mux",
                "distance must be non-negative and histogram_bin positive",
            ));
        }
        let mut ids: Vec<u16> = m.channels.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(cfg_err("mux.channels", "duplicate channel id"));
        }
        for (i, c) in m.channels.iter().enumerate() {
            let field = format!("mux.channels[{i}]");
            c.service_profile.resolve().map_err(|e| cfg_err(&field, e))?;
            if !(c.deadline > 0.0) {
                return Err(cfg_err(&field, "deadline must be positive"));
            }
            if !periodic {
                continue;
            }
            if !(c.interval > 0.0) || !(c.offset >= 0.0) {
                return Err(cfg_err(&field, "interval must be positive and offset non-negative"));
            }
            if c.payload_bytes == 0 || c.payload_bytes > m.mtu {
                return Err(cfg_err(&field, format!("payload_bytes must be in 1..={}", m.mtu)));
            }
        }
        match m.link {
            LinkModel::InducedLoss { loss } => {
                if loss.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(cfg_err(
                        "mux.link.induced_loss.loss",
                        "probabilities must lie in [0, 1]",
                    ));
                }
            }
            LinkModel::Phy { snr_db } => {
                if snr_db.iter().any(|s| !s.is_finite()) {
                    return Err(cfg_err("mux.link.phy.snr_db", "must be finite"));
                }
                self.validate_baseband()?;
                self.channel.model()?;
                let max = self.phy_max_payload();
                if let Some(c) = m.channels.iter().find(|c| periodic && c.payload_bytes > max) {
                    return Err(cfg_err(
                        "mux.channels",
                        format!(
                            "channel {} payload of {} bytes exceeds one codeword ({max} bytes)",
                            c.id, c.payload_bytes
                        ),
                    ));
                }
            }
        }
        match self.profiles.modem_capacity {
            None => return Err(cfg_err("profiles.modem_capacity", "required for mux runs")),
            Some(c) if !(c > 0.0) || !c.is_finite() => {
                return Err(cfg_err("profiles.modem_capacity", "must be positive"))
            }
            Some(_) => {}
        }
        Ok(())
    }

    fn validate_ranging(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(cfg_err("trials", "must be at least 1"));
        }
        let r = &self.ranging;
        r.scene.validate().map_err(|e| cfg_err("ranging.scene", e))?;
        if r.waveform_len == 0 {
            return Err(cfg_err("ranging.waveform_len", "must be positive"));
        }
        if !(0.0..=1.0).contains(&r.detector.threshold) {
            return Err(cfg_err("ranging.detector.threshold", "must lie in [0, 1]"));
        }
        let max_range = |range: f64| {
            let delay = crate::ranging::radar::round_trip_samples(range, r.scene.sample_rate);
            if delay >= r.waveform_len {
                Err(cfg_err(
                    "ranging",
                    format!(
                        "range {range} m needs a {delay}-sample round trip, beyond the {}-sample waveform",
                        r.waveform_len
                    ),
                ))
            } else {
                Ok(())
            }
        };
        match r.range_span {
            Some([lo, hi]) => {
                if !(lo > 0.0 && hi >= lo) {
                    return Err(cfg_err("ranging.range_span", "need 0 < min <= max"));
                }
                max_range(hi)
            }
            None => max_range(r.scene.true_range),
        }
    }

    fn validate_latency(&self) -> Result<()> {
        self.validate_baseband()?;
        let l = &self.latency;
        if !(l.coded_rate_bps > 0.0) || !l.coded_rate_bps.is_finite() {
            return Err(cfg_err("latency.coded_rate_bps", "must be positive"));
        }
        if !(l.distance >= 0.0) {
            return Err(cfg_err("latency.distance", "must be non-negative"));
        }
        self.profiles.requirement_profile()?;
        Ok(())
    }
}
