//! Two-way time-of-flight ranging from four timestamps.
//!
//! The initiator sends at `t1` and receives the reply at `t4` (its clock);
//! the responder receives at `t2` and replies at `t3` (its clock). Range is
//! `c * ((t4 - t1) - (t3 - t2)) / 2`. A constant responder clock offset
//! cancels. A responder rate error does not: with the clock model used here
//! (a true interval `T` reads as `T / (1 + drift)` on the responder) the range
//! comes out too long by exactly `drift * (t3 - t2) * c / 2`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwrExchange {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    /// Seconds. Descriptive: already folded into `t2`/`t3`.
    pub responder_clock_offset: f64,
    /// Parts per million. Descriptive: already folded into `t2`/`t3`.
    pub responder_clock_drift_ppm: f64,
}

impl TwrExchange {
    /// Timestamps for a responder at `range` meters that turns the packet
    /// around after `reply_time` true seconds.
    pub fn simulate(range: f64, t1: f64, reply_time: f64, clock_offset: f64, drift_ppm: f64) -> Self {
        let tof = range / SPEED_OF_LIGHT;
        let drift = drift_ppm * 1e-6;
        let arrive = t1 + tof;
        let depart = arrive + reply_time;
        let local = |t: f64| clock_offset + t / (1.0 + drift);
        Self {
            t1,
            t2: local(arrive),
            t3: local(depart),
            t4: depart + tof,
            responder_clock_offset: clock_offset,
            responder_clock_drift_ppm: drift_ppm,
        }
    }

    pub fn round_trip(&self) -> f64 {
        self.t4 - self.t1
    }

    pub fn reply(&self) -> f64 {
        self.t3 - self.t2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 < self.t4) {
            return Err(Error::MeasurementInvalid("initiator timestamps need t1 < t4".into()));
        }
        if !(self.t2 <= self.t3) {
            return Err(Error::MeasurementInvalid("responder timestamps need t2 <= t3".into()));
        }
        Ok(())
    }

    /// Rounds every timestamp to a multiple of `resolution` seconds.
    pub fn quantized(&self, resolution: f64) -> Self {
        let q = |t: f64| (t / resolution).round() * resolution;
        Self {
            t1: q(self.t1),
            t2: q(self.t2),
            t3: q(self.t3),
            t4: q(self.t4),
            ..*self
        }
    }

    /// Range bias caused by the responder drift, meters.
    pub fn drift_error(&self) -> f64 {
        self.responder_clock_drift_ppm * 1e-6 * self.reply() * SPEED_OF_LIGHT / 2.0
    }
}

/// Range in meters from a two-way exchange.
pub fn twr_range(x: &TwrExchange) -> Result<f64> {
    x.validate()?;
    let tof2 = x.round_trip() - x.reply();
    if tof2 < 0.0 {
        return Err(Error::MeasurementInvalid(format!(
            "negative time of flight: round trip {:.3e} s shorter than reply {:.3e} s",
            x.round_trip(),
            x.reply()
        )));
    }
    Ok(SPEED_OF_LIGHT * tof2 / 2.0)
}
