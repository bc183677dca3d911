//! Requirement profiles (application-side QoS bounds), service profiles
//! (modem-side channel configurations) and admission control.
//!
//! The modem resource needed by one logical channel is
//!
//! ```text
//! R_req = R_b / C * SF
//! ```
//!
//! where `R_b` is the channel's maximum bitrate, `C` the modem capacity (both
//! in Mbit/s) and `SF` the spreading factor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Loads within this distance of 1.0 are still admitted.
pub const ADMISSION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequirementProfileId {
    Rp1,
    Rp2,
    Rp3,
    Rp4,
}

/// Security class. Carried as a label only; nothing enforces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Security {
    High,
    Medium,
}

/// Application requirement bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequirementProfile {
    pub id: RequirementProfileId,
    /// Seconds.
    pub max_latency: f64,
    /// Bits per second.
    pub max_bitrate: f64,
    pub per_bound: f64,
    /// Centimeters.
    pub distance_min: f64,
    /// Centimeters.
    pub distance_max: f64,
    pub los_required: bool,
    pub p2p_only: bool,
    pub security: Security,
    pub hw_redundancy: bool,
}

impl RequirementProfile {
    pub const RP1: RequirementProfile = RequirementProfile {
        id: RequirementProfileId::Rp1,
        max_latency: 50e-6,
        max_bitrate: 2e6,
        per_bound: 1e-9,
        distance_min: 20.0,
        distance_max: 50.0,
        los_required: true,
        p2p_only: true,
        security: Security::High,
        hw_redundancy: true,
    };
    pub const RP2: RequirementProfile = RequirementProfile {
        id: RequirementProfileId::Rp2,
        max_latency: 1e-3,
        max_bitrate: 5e6,
        per_bound: 1e-9,
        distance_min: 20.0,
        distance_max: 200.0,
        los_required: true,
        p2p_only: true,
        security: Security::High,
        hw_redundancy: true,
    };
    pub const RP3: RequirementProfile = RequirementProfile {
        id: RequirementProfileId::Rp3,
        max_latency: 10e-3,
        max_bitrate: 100e6,
        per_bound: 1e-4,
        distance_min: 20.0,
        distance_max: 500.0,
        los_required: true,
        p2p_only: true,
        security: Security::Medium,
        hw_redundancy: false,
    };
    pub const RP4: RequirementProfile = RequirementProfile {
        id: RequirementProfileId::Rp4,
        max_latency: 100e-3,
        max_bitrate: 1e9,
        per_bound: 1e-4,
        distance_min: 20.0,
        distance_max: 200.0,
        los_required: true,
        p2p_only: true,
        security: Security::Medium,
        hw_redundancy: false,
    };

    pub fn builtin(id: RequirementProfileId) -> RequirementProfile {
        match id {
            RequirementProfileId::Rp1 => Self::RP1,
            RequirementProfileId::Rp2 => Self::RP2,
            RequirementProfileId::Rp3 => Self::RP3,
            RequirementProfileId::Rp4 => Self::RP4,
        }
    }

    /// Looks up a built-in profile by name (`"RP1"` .. `"RP4"`, case-insensitive).
    pub fn by_name(name: &str) -> Result<RequirementProfile> {
        let id = match name.to_ascii_uppercase().as_str() {
            "RP1" => RequirementProfileId::Rp1,
            "RP2" => RequirementProfileId::Rp2,
            "RP3" => RequirementProfileId::Rp3,
            "RP4" => RequirementProfileId::Rp4,
            _ => return Err(Error::invalid(format!("unknown requirement profile {name:?}"))),
        };
        Ok(Self::builtin(id))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_latency > 0.0) {
            return Err(Error::invalid("max_latency must be positive"));
        }
        if !(self.per_bound > 0.0 && self.per_bound < 1.0) {
            return Err(Error::invalid("per_bound must lie in (0, 1)"));
        }
        if !(self.distance_min >= 0.0 && self.distance_min < self.distance_max) {
            return Err(Error::invalid("need 0 <= distance_min < distance_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ServiceProfileId {
    Sp1,
    Sp2,
    Sp3,
    Custom(String),
}

impl fmt::Display for ServiceProfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceProfileId::Sp1 => f.write_str("SP1"),
            ServiceProfileId::Sp2 => f.write_str("SP2"),
            ServiceProfileId::Sp3 => f.write_str("SP3"),
            ServiceProfileId::Custom(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Robustness {
    Improved,
    Normal,
    HighDataRate,
}

/// Configuration of one logical transmission channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    pub id: ServiceProfileId,
    pub robustness: Robustness,
    /// Maximum bitrate in Mbit/s.
    pub max_bitrate_rb: f64,
    pub spreading_factor_sf: u32,
}

impl ServiceProfile {
    pub fn sp1() -> Self {
        Self {
            id: ServiceProfileId::Sp1,
            robustness: Robustness::Improved,
            max_bitrate_rb: 25.0,
            spreading_factor_sf: 8,
        }
    }

    pub fn sp2() -> Self {
        Self {
            id: ServiceProfileId::Sp2,
            robustness: Robustness::Normal,
            max_bitrate_rb: 200.0,
            spreading_factor_sf: 2,
        }
    }

    pub fn sp3() -> Self {
        Self {
            id: ServiceProfileId::Sp3,
            robustness: Robustness::HighDataRate,
            max_bitrate_rb: 1000.0,
            spreading_factor_sf: 1,
        }
    }

    pub fn custom(
        name: impl Into<String>,
        robustness: Robustness,
        max_bitrate_rb: f64,
        spreading_factor_sf: u32,
    ) -> Result<Self> {
        let sp = Self {
            id: ServiceProfileId::Custom(name.into()),
            robustness,
            max_bitrate_rb,
            spreading_factor_sf,
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "SP1" => Ok(Self::sp1()),
            "SP2" => Ok(Self::sp2()),
            "SP3" => Ok(Self::sp3()),
            _ => Err(Error::invalid(format!("unknown service profile {name:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_bitrate_rb > 0.0) {
            return Err(Error::invalid("service profile bitrate must be positive"));
        }
        if self.spreading_factor_sf == 0 {
            return Err(Error::invalid("spreading factor must be at least 1"));
        }
        Ok(())
    }
}

impl FromStr for ServiceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::by_name(s)
    }
}

/// Modem capacity `C` in Mbit/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ModemCapacity(f64);

impl ModemCapacity {
    pub fn new(capacity_c: f64) -> Result<Self> {
        if !(capacity_c > 0.0) || !capacity_c.is_finite() {
            return Err(Error::invalid(format!(
                "modem capacity must be positive, got {capacity_c}"
            )));
        }
        Ok(Self(capacity_c))
    }

    pub fn mbps(self) -> f64 {
        self.0
    }
}

/// Fraction of one modem consumed by a channel using `sp`. Not clamped: values
/// above 1.0 mean the channel does not fit.
pub fn required_resources(sp: &ServiceProfile, cap: ModemCapacity) -> Result<f64> {
    if !(cap.0 > 0.0) {
        return Err(Error::invalid("modem capacity must be positive"));
    }
    Ok(sp.max_bitrate_rb / cap.0 * f64::from(sp.spreading_factor_sf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission {
    pub accepted: bool,
    pub load: f64,
}

/// Admits a set of logical channels onto one modem when their summed resource
/// need does not exceed the modem (within [`ADMISSION_TOLERANCE`]).
pub fn admit_channels(channels: &[(ServiceProfile, u32)], cap: ModemCapacity) -> Result<Admission> {
    if channels.is_empty() {
        return Err(Error::invalid("admission needs at least one channel"));
    }
    // Summed in a canonical order so the verdict does not depend on list order.
    let mut terms = Vec::with_capacity(channels.len());
    for (sp, count) in channels {
        sp.validate()?;
        terms.push(required_resources(sp, cap)? * f64::from(*count));
    }
    terms.sort_by(f64::total_cmp);
    let load: f64 = terms.iter().sum();
    Ok(Admission {
        accepted: load <= 1.0 + ADMISSION_TOLERANCE,
        load,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceReport {
    pub latency_ok: bool,
    pub per_ok: bool,
    pub distance_ok: bool,
}

impl ComplianceReport {
    pub fn pass(&self) -> bool {
        self.latency_ok && self.per_ok && self.distance_ok
    }
}

/// Compares measured link figures against a requirement profile. Latency is in
/// seconds, distance in centimeters. Latency and PER bounds are strict ("less
/// than"); the distance range is inclusive.
pub fn check_compliance(rp: &RequirementProfile, latency: f64, per: f64, distance_cm: f64) -> Result<ComplianceReport> {
    for (name, v) in [("latency", latency), ("per", per), ("distance", distance_cm)] {
        if !(v >= 0.0) {
            return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
        }
    }
    Ok(ComplianceReport {
        latency_ok: latency < rp.max_latency,
        per_ok: per < rp.per_bound,
        distance_ok: distance_cm >= rp.distance_min && distance_cm <= rp.distance_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cap(c: f64) -> ModemCapacity {
        ModemCapacity::new(c).unwrap()
    }

    #[test]
    fn table_constants() {
        let rp1 = RequirementProfile::RP1;
        assert_eq!(rp1.max_latency, 50e-6);
        assert_eq!(rp1.max_bitrate, 2e6);
        assert_eq!(rp1.per_bound, 1e-9);
        assert_eq!((rp1.distance_min, rp1.distance_max), (20.0, 50.0));
        assert!(rp1.hw_redundancy);
        assert_eq!(RequirementProfile::RP3.distance_max, 500.0);
        assert_eq!(RequirementProfile::RP4.max_bitrate, 1e9);
        assert!(!RequirementProfile::RP4.hw_redundancy);
        for rp in [
            RequirementProfile::RP1,
            RequirementProfile::RP2,
            RequirementProfile::RP3,
            RequirementProfile::RP4,
        ] {
            rp.validate().unwrap();
        }
        let sps = [ServiceProfile::sp1(), ServiceProfile::sp2(), ServiceProfile::sp3()];
        let pairs: Vec<_> = sps.iter().map(|s| (s.max_bitrate_rb, s.spreading_factor_sf)).collect();
        assert_eq!(pairs, vec![(25.0, 8), (200.0, 2), (1000.0, 1)]);
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(ServiceProfile::by_name("sp2").unwrap(), ServiceProfile::sp2());
        assert_eq!(RequirementProfile::by_name("RP3").unwrap(), RequirementProfile::RP3);
        assert!(ServiceProfile::by_name("SP9").is_err());
        assert!(RequirementProfile::by_name("RP0").is_err());
    }

    #[test]
    fn resource_formula_examples() {
        assert_eq!(required_resources(&ServiceProfile::sp1(), cap(200.0)).unwrap(), 1.0);
        assert_eq!(required_resources(&ServiceProfile::sp2(), cap(800.0)).unwrap(), 0.5);
        let ident = ServiceProfile::custom("x", Robustness::Normal, 300.0, 1).unwrap();
        assert_eq!(required_resources(&ident, cap(300.0)).unwrap(), 1.0);
    }

    #[test]
    fn capacity_must_be_positive() {
        assert!(ModemCapacity::new(0.0).is_err());
        assert!(ModemCapacity::new(-3.0).is_err());
        assert!(ModemCapacity::new(f64::NAN).is_err());
    }

    #[test]
    fn admission_examples() {
        let a = admit_channels(&[(ServiceProfile::sp2(), 1)], cap(400.0)).unwrap();
        assert!(a.accepted);
        assert_eq!(a.load, 1.0);

        let a = admit_channels(&[(ServiceProfile::sp3(), 1), (ServiceProfile::sp1(), 1)], cap(1000.0)).unwrap();
        assert!(!a.accepted);
        assert!((a.load - 1.2).abs() < 1e-12);

        assert!(admit_channels(&[], cap(1000.0)).is_err());
    }

    #[test]
    fn single_oversized_channel_rejected() {
        let a = admit_channels(&[(ServiceProfile::sp3(), 1)], cap(500.0)).unwrap();
        assert!(!a.accepted);
        assert_eq!(a.load, 2.0);
    }

    #[test]
    fn compliance_examples() {
        let rp1 = RequirementProfile::RP1;
        assert!(check_compliance(&rp1, 40e-6, 1e-10, 30.0).unwrap().pass());
        let r = check_compliance(&rp1, 60e-6, 1e-10, 30.0).unwrap();
        assert!(!r.pass());
        assert!(!r.latency_ok && r.per_ok && r.distance_ok);
        assert!(check_compliance(&RequirementProfile::RP4, 0.0, 0.0, 20.0)
            .unwrap()
            .pass());
        assert!(check_compliance(&rp1, -1.0, 0.0, 30.0).is_err());
        assert!(!check_compliance(&rp1, 1e-6, 0.0, 60.0).unwrap().distance_ok);
    }

    #[test]
    fn load_ordering_of_builtin_profiles() {
        for c in [100.0, 200.0, 1000.0, 5000.0] {
            let l: Vec<f64> = [ServiceProfile::sp1(), ServiceProfile::sp2(), ServiceProfile::sp3()]
                .iter()
                .map(|sp| required_resources(sp, cap(c)).unwrap())
                .collect();
            assert!(l[0] < l[1] && l[1] < l[2]);
        }
    }

    proptest! {
        #[test]
        fn resources_linear_in_bitrate(rb in 0.1f64..2000.0, sf in 1u32..64, c in 1.0f64..5000.0, k in 0.01f64..100.0) {
            let a = ServiceProfile::custom("a", Robustness::Normal, rb, sf).unwrap();
            let b = ServiceProfile::custom("b", Robustness::Normal, k * rb, sf).unwrap();
            let ra = required_resources(&a, cap(c)).unwrap();
            let rb_ = required_resources(&b, cap(c)).unwrap();
            prop_assert!((rb_ - k * ra).abs() <= 1e-12 * rb_.abs().max(1.0));
        }

        #[test]
        fn admission_permutation_invariant(counts in proptest::collection::vec((0usize..3, 0u32..4), 1..8), c in 100.0f64..3000.0, seed in any::<u64>()) {
            let sps = [ServiceProfile::sp1(), ServiceProfile::sp2(), ServiceProfile::sp3()];
            let list: Vec<(ServiceProfile, u32)> = counts.iter().map(|&(i, n)| (sps[i].clone(), n)).collect();
            let mut shuffled = list.clone();
            // deterministic rotation + reversal driven by the seed
            let r = (seed as usize) % shuffled.len();
            shuffled.rotate_left(r);
            if seed & 1 == 1 { shuffled.reverse(); }
            let a = admit_channels(&list, cap(c)).unwrap();
            let b = admit_channels(&shuffled, cap(c)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
