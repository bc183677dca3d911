//! Named synthetic channel fixtures for a quasi-static coupling area.
//!
//! These are not measurements. `coupling-harsh` keeps its delay spread (24
//! samples) inside the default 32-sample cyclic prefix.

use serde::{Deserialize, Serialize};

use super::{db_to_amplitude, ChannelModel, ChannelTap};
use crate::{Complex64, Error, Result};

/// One tap row as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapSpec {
    pub delay: usize,
    pub gain_db: f64,
    #[serde(default)]
    pub phase_deg: f64,
    #[serde(default)]
    pub bounce_count: u32,
    #[serde(default)]
    pub via_sidelobe: bool,
}

impl TapSpec {
    pub fn to_tap(&self) -> ChannelTap {
        ChannelTap {
            delay: self.delay,
            gain: Complex64::from_polar(db_to_amplitude(self.gain_db), self.phase_deg.to_radians()),
            bounce_count: self.bounce_count,
            via_sidelobe: self.via_sidelobe,
        }
    }
}

const fn row(delay: usize, gain_db: f64, phase_deg: f64, bounce_count: u32, via_sidelobe: bool) -> TapSpec {
    TapSpec {
        delay,
        gain_db,
        phase_deg,
        bounce_count,
        via_sidelobe,
    }
}

const LOS: &[TapSpec] = &[row(0, 0.0, 0.0, 0, false)];

const MILD: &[TapSpec] = &[
    row(0, 0.0, 0.0, 0, false),
    row(3, -10.0, 60.0, 2, false),
    row(7, -15.0, -120.0, 2, false),
];

const HARSH: &[TapSpec] = &[
    row(0, 0.0, 0.0, 0, false),
    row(4, -6.0, 35.0, 1, false),
    row(9, -8.0, 160.0, 2, true),
    row(16, -12.0, -75.0, 1, true),
    row(24, -14.0, 110.0, 3, false),
];

pub fn preset_names() -> &'static [&'static str] {
    &["coupling-los", "coupling-mild", "coupling-harsh"]
}

pub fn preset_taps(name: &str) -> Result<&'static [TapSpec]> {
    match name {
        "coupling-los" => Ok(LOS),
        "coupling-mild" => Ok(MILD),
        "coupling-harsh" => Ok(HARSH),
        _ => Err(Error::invalid(format!(
            "unknown channel preset {name:?}; known: {}",
            preset_names().join(", ")
        ))),
    }
}

/// Noiseless model for a named preset with the default antenna pattern.
pub fn preset(name: &str) -> Result<ChannelModel> {
    Ok(ChannelModel::with_taps(
        preset_taps(name)?.iter().map(TapSpec::to_tap).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in preset_names() {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn harsh_fits_default_cp() {
        let m = preset("coupling-harsh").unwrap();
        assert_eq!(m.taps.len(), 5);
        assert_eq!(m.max_delay(), 24);
        assert!(m.taps.iter().any(|t| t.bounce_count % 2 == 1));
    }

    #[test]
    fn mild_is_even_bounce_only() {
        let m = preset("coupling-mild").unwrap();
        assert_eq!(m.taps.len(), 3);
        assert!(m.taps[1..].iter().all(|t| t.bounce_count == 2));
        assert!((m.taps[1].gain.norm() - db_to_amplitude(-10.0)).abs() < 1e-12);
    }
}
