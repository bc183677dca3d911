//! Multiplexer between application traffic and two modems.
//!
//! Frames arriving from the application side are stamped into per-channel
//! data link packets with a sequence number and an absolute deadline. The
//! scheduler serves queues earliest-deadline-first (ties: lower channel id,
//! then lower sequence number) and decides which modem carries each packet:
//!
//! - `Redundant`: a copy on both modems.
//! - `Distributive`: the modem with fewer queued bytes; ties go to the modem
//!   with fewer bytes carried so far, then to modem 0.
//! - `Single`: modem 0.
//!
//! Expired packets are dropped before transmission and counted as deadline
//! misses. On receive, the first valid copy of a sequence number is delivered
//! and later copies are discarded. There is no resequencing.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::profiles::ServiceProfile;
use crate::{Error, Result};

pub const MODEMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Redundancy {
    Redundant,
    Distributive,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalChannel {
    pub id: u16,
    pub sp: ServiceProfile,
    /// Relative deadline per packet, seconds.
    pub deadline: f64,
    pub redundancy: Redundancy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSource {
    Wtb,
    Uic,
    Ethernet,
}

/// Framed application payload, e.g. one emulated train bus telegram.
#[derive(Debug, Clone, PartialEq)]
pub struct AppFrame {
    pub source: FrameSource,
    pub payload: Vec<u8>,
    pub arrival_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataLinkPacket {
    pub channel_id: u16,
    pub sequence_number: u64,
    pub payload: Vec<u8>,
    pub created_at: f64,
    pub deadline_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuxConfig {
    /// Maximum payload bytes per frame.
    pub mtu: usize,
    /// Packets per channel queue.
    pub queue_depth: usize,
}

impl Default for MuxConfig {
    fn default() -> Self {
        Self {
            mtu: 1500,
            queue_depth: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnqueueOutcome {
    Queued(DataLinkPacket),
    /// The queue was full; the new packet was dropped.
    Overflow(DataLinkPacket),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModemSet([bool; MODEMS]);

impl ModemSet {
    pub fn both() -> Self {
        Self([true; MODEMS])
    }

    pub fn only(modem: usize) -> Self {
        let mut s = [false; MODEMS];
        s[modem] = true;
        Self(s)
    }

    pub fn contains(&self, modem: usize) -> bool {
        self.0.get(modem).copied().unwrap_or(false)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..MODEMS).filter(|&m| self.0[m])
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheduled {
    pub packet: DataLinkPacket,
    pub modems: ModemSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub channel_id: u16,
    pub sequence_number: u64,
    pub payload: Vec<u8>,
    pub latency: f64,
    pub modem: usize,
}

/// Per-channel event counters. Packet-level fates (`delivered`,
/// `deadline_misses`, `lost`, `overflow_drops`) partition `enqueued` once
/// nothing is queued or in flight; copy-level counters do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ChannelCounters {
    pub enqueued: u64,
    pub overflow_drops: u64,
    pub deadline_misses: u64,
    pub dispatched: u64,
    pub delivered: u64,
    /// Packets whose every copy arrived corrupt.
    pub lost: u64,
    pub corrupt_copies: u64,
    pub duplicate_copies: u64,
}

#[derive(Debug, Clone)]
struct ChannelState {
    channel: LogicalChannel,
    queue: VecDeque<DataLinkPacket>,
    next_seq: u64,
    delivered: HashSet<u64>,
    counters: ChannelCounters,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    remaining: usize,
    delivered: bool,
}

/// Single-owner mux state machine, advanced by explicit calls with `now`.
#[derive(Debug, Clone)]
pub struct Mux {
    cfg: MuxConfig,
    channels: BTreeMap<u16, ChannelState>,
    modem_queued: [u64; MODEMS],
    modem_total: [u64; MODEMS],
    in_flight: HashMap<(u16, u64), InFlight>,
}

impl Mux {
    pub fn new(cfg: MuxConfig) -> Self {
        Self {
            cfg,
            channels: BTreeMap::new(),
            modem_queued: [0; MODEMS],
            modem_total: [0; MODEMS],
            in_flight: HashMap::new(),
        }
    }

    pub fn config(&self) -> &MuxConfig {
        &self.cfg
    }

    pub fn add_channel(&mut self, channel: LogicalChannel) -> Result<()> {
        if !(channel.deadline > 0.0) {
            return Err(Error::invalid(format!(
                "channel {} needs a positive deadline",
                channel.id
            )));
        }
        channel.sp.validate()?;
        if self.channels.contains_key(&channel.id) {
            return Err(Error::invalid(format!("duplicate channel id {}", channel.id)));
        }
        self.channels.insert(
            channel.id,
            ChannelState {
                channel,
                queue: VecDeque::new(),
                next_seq: 0,
                delivered: HashSet::new(),
                counters: ChannelCounters::default(),
            },
        );
        Ok(())
    }

    pub fn channel(&self, id: u16) -> Option<&LogicalChannel> {
        self.channels.get(&id).map(|c| &c.channel)
    }

    pub fn channel_ids(&self) -> impl Iterator<Item = u16> + '_ {
        self.channels.keys().copied()
    }

    pub fn counters(&self, id: u16) -> Option<ChannelCounters> {
        self.channels.get(&id).map(|c| c.counters)
    }

    pub fn queued(&self, id: u16) -> usize {
        self.channels.get(&id).map_or(0, |c| c.queue.len())
    }

    pub fn total_queued(&self) -> usize {
        self.channels.values().map(|c| c.queue.len()).sum()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    /// Bytes handed to each modem and not yet reported done.
    pub fn modem_queued_bytes(&self) -> [u64; MODEMS] {
        self.modem_queued
    }

    /// Bytes ever handed to each modem.
    pub fn modem_total_bytes(&self) -> [u64; MODEMS] {
        self.modem_total
    }

    /// Overrides the queued-byte counters, e.g. to seed a scenario.
    pub fn set_modem_queued_bytes(&mut self, bytes: [u64; MODEMS]) {
        self.modem_queued = bytes;
    }

    /// A modem finished transmitting `bytes`.
    pub fn modem_done(&mut self, modem: usize, bytes: u64) {
        self.modem_queued[modem] = self.modem_queued[modem].saturating_sub(bytes);
    }

    pub fn enqueue(&mut self, frame: AppFrame, channel_id: u16, now: f64) -> Result<EnqueueOutcome> {
        if frame.payload.len() > self.cfg.mtu {
            return Err(Error::invalid(format!(
                "frame of {} bytes exceeds MTU {}",
                frame.payload.len(),
                self.cfg.mtu
            )));
        }
        let depth = self.cfg.queue_depth;
        let state = self
            .channels
            .get_mut(&channel_id)
            .ok_or_else(|| Error::invalid(format!("unknown channel {channel_id}")))?;
        let packet = DataLinkPacket {
            channel_id,
            sequence_number: state.next_seq,
            payload: frame.payload,
            created_at: now,
            deadline_at: now + state.channel.deadline,
        };
        state.next_seq += 1;
        state.counters.enqueued += 1;
        if state.queue.len() >= depth {
            state.counters.overflow_drops += 1;
            return Ok(EnqueueOutcome::Overflow(packet));
        }
        state.queue.push_back(packet.clone());
        Ok(EnqueueOutcome::Queued(packet))
    }

    /// Drops expired packets, then picks the earliest-deadline head of line
    /// and the modems that carry it.
    pub fn schedule_next(&mut self, now: f64) -> Option<Scheduled> {
        for state in self.channels.values_mut() {
            let before = state.queue.len();
            state.queue.retain(|p| p.deadline_at >= now);
            state.counters.deadline_misses += (before - state.queue.len()) as u64;
        }

        let (&id, _) = self
            .channels
            .iter()
            .filter_map(|(id, s)| s.queue.front().map(|p| (id, p)))
            .min_by(|a, b| {
                a.1.deadline_at
                    .total_cmp(&b.1.deadline_at)
                    .then(a.0.cmp(b.0))
                    .then(a.1.sequence_number.cmp(&b.1.sequence_number))
            })?;
        let state = self.channels.get_mut(&id).expect("picked from map");
        let packet = state.queue.pop_front().expect("non-empty queue");
        state.counters.dispatched += 1;

        let modems = match state.channel.redundancy {
            Redundancy::Redundant => ModemSet::both(),
            Redundancy::Single => ModemSet::only(0),
            Redundancy::Distributive => {
                let key = |m: usize| (self.modem_queued[m], self.modem_total[m]);
                if key(1) < key(0) {
                    ModemSet::only(1)
                } else {
                    ModemSet::only(0)
                }
            }
        };
        let bytes = packet.payload.len() as u64;
        for m in modems.iter() {
            self.modem_queued[m] += bytes;
            self.modem_total[m] += bytes;
        }
        self.in_flight.insert(
            (id, packet.sequence_number),
            InFlight {
                remaining: modems.len(),
                delivered: false,
            },
        );
        Some(Scheduled { packet, modems })
    }

    /// Handles one received copy. Returns the delivery when this is the first
    /// valid copy of its sequence number.
    pub fn receive(&mut self, packet: &DataLinkPacket, from_modem: usize, crc_ok: bool, now: f64) -> Option<Delivery> {
        let key = (packet.channel_id, packet.sequence_number);
        let state = self.channels.get_mut(&packet.channel_id)?;
        let mut delivery = None;
        if !crc_ok {
            state.counters.corrupt_copies += 1;
        } else if state.delivered.contains(&packet.sequence_number) {
            state.counters.duplicate_copies += 1;
        } else {
            state.delivered.insert(packet.sequence_number);
            state.counters.delivered += 1;
            delivery = Some(Delivery {
                channel_id: packet.channel_id,
                sequence_number: packet.sequence_number,
                payload: packet.payload.clone(),
                latency: now - packet.created_at,
                modem: from_modem,
            });
        }
        if let Some(f) = self.in_flight.get_mut(&key) {
            f.remaining = f.remaining.saturating_sub(1);
            f.delivered |= delivery.is_some();
            if f.remaining == 0 {
                if !f.delivered {
                    state.counters.lost += 1;
                }
                self.in_flight.remove(&key);
            }
        }
        delivery
    }

    /// Checks `enqueued = delivered + lost + deadline misses + overflow drops
    /// + queued + in flight` for every channel.
    pub fn check_conservation(&self) -> Result<()> {
        for (id, s) in &self.channels {
            let in_flight = self.in_flight.keys().filter(|(c, _)| c == id).count() as u64;
            let c = s.counters;
            let accounted =
                c.delivered + c.lost + c.deadline_misses + c.overflow_drops + s.queue.len() as u64 + in_flight;
            if accounted != c.enqueued {
                return Err(Error::invalid(format!(
                    "conservation violated on channel {id}: enqueued {} vs accounted {accounted}",
                    c.enqueued
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channel(id: u16, deadline: f64, redundancy: Redundancy) -> LogicalChannel {
        LogicalChannel {
            id,
            sp: ServiceProfile::sp2(),
            deadline,
            redundancy,
        }
    }

    fn frame(bytes: usize) -> AppFrame {
        AppFrame {
            source: FrameSource::Wtb,
            payload: vec![0xAB; bytes],
            arrival_time: 0.0,
        }
    }

    fn queued(o: EnqueueOutcome) -> DataLinkPacket {
        match o {
            EnqueueOutcome::Queued(p) => p,
            EnqueueOutcome::Overflow(_) => panic!("unexpected overflow"),
        }
    }

    #[test]
    fn sequence_numbers_and_deadline_stamp() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(1, 1e-3, Redundancy::Redundant)).unwrap();
        let a = queued(mux.enqueue(frame(10), 1, 1.0).unwrap());
        let b = queued(mux.enqueue(frame(10), 1, 1.0).unwrap());
        assert_eq!((a.sequence_number, b.sequence_number), (0, 1));
        assert!((a.deadline_at - 1.001).abs() < 1e-12);
    }

    #[test]
    fn mtu_and_unknown_channel() {
        let mut mux = Mux::new(MuxConfig {
            mtu: 8,
            ..Default::default()
        });
        mux.add_channel(channel(1, 1e-3, Redundancy::Single)).unwrap();
        assert!(mux.enqueue(frame(9), 1, 0.0).is_err());
        assert!(mux.enqueue(frame(1), 2, 0.0).is_err());
        assert!(mux.add_channel(channel(1, 1e-3, Redundancy::Single)).is_err());
        assert!(mux.add_channel(channel(3, 0.0, Redundancy::Single)).is_err());
    }

    #[test]
    fn overflow_drops_newest() {
        let mut mux = Mux::new(MuxConfig {
            queue_depth: 2,
            ..Default::default()
        });
        mux.add_channel(channel(1, 1.0, Redundancy::Single)).unwrap();
        mux.enqueue(frame(1), 1, 0.0).unwrap();
        mux.enqueue(frame(1), 1, 0.0).unwrap();
        match mux.enqueue(frame(1), 1, 0.0).unwrap() {
            EnqueueOutcome::Overflow(p) => assert_eq!(p.sequence_number, 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(mux.counters(1).unwrap().overflow_drops, 1);
        assert_eq!(mux.queued(1), 2);
        mux.check_conservation().unwrap();
    }

    #[test]
    fn redundant_goes_to_both() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(1, 1e-3, Redundancy::Redundant)).unwrap();
        mux.enqueue(frame(10), 1, 0.0).unwrap();
        let s = mux.schedule_next(0.0).unwrap();
        assert_eq!(s.modems, ModemSet::both());
        assert!(mux.schedule_next(0.0).is_none());
    }

    #[test]
    fn earliest_deadline_first() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(1, 5e-3, Redundancy::Single)).unwrap();
        mux.add_channel(channel(2, 2e-3, Redundancy::Single)).unwrap();
        mux.enqueue(frame(1), 1, 0.0).unwrap();
        mux.enqueue(frame(1), 2, 0.0).unwrap();
        assert_eq!(mux.schedule_next(0.0).unwrap().packet.channel_id, 2);
        assert_eq!(mux.schedule_next(0.0).unwrap().packet.channel_id, 1);
    }

    #[test]
    fn equal_deadlines_break_on_channel_id() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(7, 1e-3, Redundancy::Single)).unwrap();
        mux.add_channel(channel(3, 1e-3, Redundancy::Single)).unwrap();
        mux.enqueue(frame(1), 7, 0.0).unwrap();
        mux.enqueue(frame(1), 3, 0.0).unwrap();
        assert_eq!(mux.schedule_next(0.0).unwrap().packet.channel_id, 3);
    }

    #[test]
    fn distributive_picks_lighter_modem() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(1, 1e-3, Redundancy::Distributive)).unwrap();
        mux.set_modem_queued_bytes([1000, 200]);
        mux.enqueue(frame(10), 1, 0.0).unwrap();
        assert_eq!(mux.schedule_next(0.0).unwrap().modems, ModemSet::only(1));
        mux.set_modem_queued_bytes([300, 300]);
        mux.enqueue(frame(10), 1, 0.0).unwrap();
        assert_eq!(mux.schedule_next(0.0).unwrap().modems, ModemSet::only(0));
    }

    #[test]
    fn expired_packets_are_never_sent() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(1, 1e-3, Redundancy::Single)).unwrap();
        mux.enqueue(frame(1), 1, 0.0).unwrap();
        assert!(mux.schedule_next(0.002).is_none());
        assert_eq!(mux.counters(1).unwrap().deadline_misses, 1);
        mux.check_conservation().unwrap();
    }

    #[test]
    fn duplicate_and_corrupt_handling() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(1, 1.0, Redundancy::Redundant)).unwrap();
        mux.enqueue(frame(4), 1, 0.0).unwrap();
        let s = mux.schedule_next(0.0).unwrap();
        let d = mux.receive(&s.packet, 0, true, 1e-5).unwrap();
        assert!((d.latency - 1e-5).abs() < 1e-15);
        assert!(mux.receive(&s.packet, 1, true, 2e-5).is_none());
        let c = mux.counters(1).unwrap();
        assert_eq!((c.delivered, c.duplicate_copies), (1, 1));

        mux.enqueue(frame(4), 1, 0.0).unwrap();
        let s = mux.schedule_next(0.0).unwrap();
        assert!(mux.receive(&s.packet, 0, false, 1e-5).is_none());
        let d = mux.receive(&s.packet, 1, true, 1e-5).unwrap();
        assert_eq!(d.modem, 1);

        mux.enqueue(frame(4), 1, 0.0).unwrap();
        let s = mux.schedule_next(0.0).unwrap();
        mux.receive(&s.packet, 0, false, 1e-5);
        mux.receive(&s.packet, 1, false, 1e-5);
        let c = mux.counters(1).unwrap();
        assert_eq!((c.delivered, c.lost, c.corrupt_copies), (2, 1, 3));
        mux.check_conservation().unwrap();
    }

    #[test]
    fn redundant_loss_is_product_of_modem_losses() {
        let mut mux = Mux::new(MuxConfig::default());
        mux.add_channel(channel(1, 1.0, Redundancy::Redundant)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000u64;
        let p = 0.1;
        for i in 0..n {
            let t = i as f64 * 1e-6;
            mux.enqueue(frame(8), 1, t).unwrap();
            let s = mux.schedule_next(t).unwrap();
            for m in s.modems.iter() {
                let ok = rng.random::<f64>() >= p;
                mux.receive(&s.packet, m, ok, t);
            }
        }
        let c = mux.counters(1).unwrap();
        let per = c.lost as f64 / n as f64;
        let sigma = (p * p * (1.0 - p * p) / n as f64).sqrt();
        assert!((per - p * p).abs() < 3.0 * sigma, "per {per}");
        mux.check_conservation().unwrap();
    }

    proptest! {
        #[test]
        fn distributive_stays_balanced(n in 1usize..200, size in 1usize..400) {
            let mut mux = Mux::new(MuxConfig { queue_depth: 1000, ..Default::default() });
            mux.add_channel(channel(1, 1.0, Redundancy::Distributive)).unwrap();
            for _ in 0..n {
                mux.enqueue(frame(size), 1, 0.0).unwrap();
                mux.schedule_next(0.0).unwrap();
                let [a, b] = mux.modem_total_bytes();
                prop_assert!(a.abs_diff(b) <= size as u64);
            }
        }

        #[test]
        fn distributive_balanced_when_modems_drain(n in 1usize..200, size in 1usize..400) {
            let mut mux = Mux::new(MuxConfig::default());
            mux.add_channel(channel(1, 1.0, Redundancy::Distributive)).unwrap();
            for _ in 0..n {
                mux.enqueue(frame(size), 1, 0.0).unwrap();
                let s = mux.schedule_next(0.0).unwrap();
                for m in s.modems.iter() {
                    mux.modem_done(m, size as u64);
                }
                let [a, b] = mux.modem_total_bytes();
                prop_assert!(a.abs_diff(b) <= size as u64);
            }
        }

        #[test]
        fn at_most_once_delivery(fates in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..60)) {
            let mut mux = Mux::new(MuxConfig::default());
            mux.add_channel(channel(1, 1.0, Redundancy::Redundant)).unwrap();
            let mut seen = HashSet::new();
            for (ok0, ok1, replay) in fates {
                mux.enqueue(frame(2), 1, 0.0).unwrap();
                let s = mux.schedule_next(0.0).unwrap();
                for (m, ok) in [(0, ok0), (1, ok1)] {
                    if let Some(d) = mux.receive(&s.packet, m, ok, 0.0) {
                        prop_assert!(seen.insert(d.sequence_number));
                    }
                }
                if replay {
                    prop_assert!(mux.receive(&s.packet, 0, true, 0.0).is_none() || !(ok0 || ok1));
                }
            }
        }
    }
}
