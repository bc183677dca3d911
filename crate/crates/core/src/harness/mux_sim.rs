//! Discrete-event simulation of the mux feeding two modems.
//!
//! Each modem transmits copies from its own FIFO back to back; a copy of `b`
//! bytes on a channel with spreading factor `sf` occupies the modem for
//! `8 b sf / C` seconds. The mux is asked for the next packet whenever a
//! modem it can use is idle, so queued packets stay under EDF control until a
//! modem is ready. Events at equal times are handled as completions, then
//! arrivals, then scheduling.
//!
//! Admission is checked per modem before the run. Redundant and distributive
//! channels count fully against both modems, single channels against modem
//! 0 only.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LinkModel, Scenario, SimulationConfig};
use super::report::Table;
use super::seed::trial_seed;
use super::sweep::ci95_half_width;
use crate::baseband::{rx_chain, tx_chain, LinkConfig};
use crate::channel::{add_awgn, apply_channel, estimate_frequency_response, ChannelModel};
use crate::mux::{AppFrame, ChannelCounters, DataLinkPacket, LogicalChannel, Mux, MuxConfig, Redundancy, MODEMS};
use crate::profiles::{admit_channels, ModemCapacity};
use crate::{Complex64, Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelReport {
    pub id: u16,
    pub redundancy: Redundancy,
    pub counters: ChannelCounters,
    /// Delivered after the packet's deadline.
    pub late_deliveries: u64,
    pub mean_latency: f64,
    pub max_latency: f64,
    /// `latency -> count` with bins of `histogram_bin` seconds, keyed by bin
    /// index.
    pub histogram: BTreeMap<u64, u64>,
}

impl ChannelReport {
    /// Fraction of enqueued packets never delivered.
    pub fn per(&self) -> f64 {
        let c = &self.counters;
        if c.enqueued == 0 {
            0.0
        } else {
            1.0 - c.delivered as f64 / c.enqueued as f64
        }
    }

    pub fn per_ci95(&self) -> f64 {
        ci95_half_width(self.per(), self.counters.enqueued)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuxSimResult {
    pub channels: Vec<ChannelReport>,
    pub modem_bytes: [u64; MODEMS],
    pub modem_loads: [f64; MODEMS],
    pub histogram_bin: f64,
    /// Seconds of simulated time.
    pub end_time: f64,
}

/// Decides whether one transmitted copy arrives intact.
enum Link {
    Loss {
        p: [f64; MODEMS],
        rngs: Vec<ChaCha8Rng>,
    },
    Phy {
        snr_db: [f64; MODEMS],
        rngs: Vec<ChaCha8Rng>,
        link: LinkConfig,
        eq: crate::baseband::EqualizerConfig,
        model: ChannelModel,
        response: Vec<Complex64>,
    },
}

impl Link {
    fn copy_ok(&mut self, modem: usize, payload: &[u8]) -> Result<bool> {
        match self {
            Link::Loss { p, rngs } => Ok(rngs[modem].random::<f64>() >= p[modem]),
            Link::Phy {
                snr_db,
                rngs,
                link,
                eq,
                model,
                response,
            } => {
                let bits: Vec<u8> = payload
                    .iter()
                    .flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1))
                    .collect();
                let tx = tx_chain(&bits, link)?.waveform();
                let mut rx = apply_channel(&tx, model)?;
                let power = rx.iter().map(|y| y.norm_sqr()).sum::<f64>() / tx.len() as f64;
                add_awgn(
                    &mut rx,
                    power / 10f64.powf(snr_db[modem] / 10.0),
                    rngs[modem].next_u64(),
                );
                match rx_chain(&rx, link, eq, Some(response), bits.len()) {
                    Ok(out) => Ok(out.crc_ok && out.info_bits == bits),
                    Err(Error::SyncFailure { .. } | Error::DegenerateChannel) => Ok(false),
                    Err(e) => Err(e),
                }
            }
        }
    }
}

struct Modem {
    fifo: VecDeque<DataLinkPacket>,
    current: Option<(f64, DataLinkPacket)>,
}

impl Modem {
    fn idle(&self) -> bool {
        self.current.is_none() && self.fifo.is_empty()
    }
}

/// Per-modem load for admission, following the redundancy of each channel.
pub fn modem_loads(channels: &[LogicalChannel], cap: ModemCapacity) -> Result<[f64; MODEMS]> {
    let mut loads = [0.0; MODEMS];
    for (m, load) in loads.iter_mut().enumerate() {
        let set: Vec<_> = channels
            .iter()
            .filter(|c| m == 0 || c.redundancy != Redundancy::Single)
            .map(|c| (c.sp.clone(), 1))
            .collect();
        if set.is_empty() {
            continue;
        }
        let a = admit_channels(&set, cap)?;
        if !a.accepted {
            return Err(Error::Config(format!(
                "channel set is not admissible on modem {m}: load {:.6} exceeds 1",
                a.load
            )));
        }
        *load = a.load;
    }
    Ok(loads)
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    time_s: f64,
    channel_id: u16,
    payload_bytes: usize,
}

/// Reads `(time, channel, bytes)` arrivals from a trace CSV and checks each
/// row against the configured channels and the largest packet size.
pub fn read_trace(path: &Path, channel_ids: &[u16], max_bytes: usize) -> Result<Vec<(f64, u16, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{}: {other:?}", path.display())),
        })?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<TraceRow>().enumerate() {
        let line = i + 2;
        let r = row.map_err(|e| Error::Config(format!("{}:{line}: {e}", path.display())))?;
        let bad = |what: &str| Error::Config(format!("{}:{line}: {what}", path.display()));
        if !(r.time_s >= 0.0) || !r.time_s.is_finite() {
            return Err(bad("time_s must be finite and non-negative"));
        }
        if !channel_ids.contains(&r.channel_id) {
            return Err(bad(&format!("channel {} is not configured", r.channel_id)));
        }
        if r.payload_bytes == 0 || r.payload_bytes > max_bytes {
            return Err(bad(&format!("payload_bytes must be in 1..={max_bytes}")));
        }
        rows.push((r.time_s, r.channel_id, r.payload_bytes));
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: trace has no arrivals", path.display())));
    }
    Ok(rows)
}

pub fn run_mux_sim(cfg: &SimulationConfig) -> Result<MuxSimResult> {
    cfg.validate_for(Scenario::MuxSim)?;
    let m = &cfg.mux;
    let cap = ModemCapacity::new(cfg.profiles.modem_capacity.expect("validated"))?;
    let channels: Vec<LogicalChannel> = m
        .channels
        .iter()
        .map(|c| {
            Ok(LogicalChannel {
                id: c.id,
                sp: c.service_profile.resolve()?,
                deadline: c.deadline,
                redundancy: c.redundancy,
            })
        })
        .collect::<Result<_>>()?;
    let modem_loads = modem_loads(&channels, cap)?;

    let mut mux = Mux::new(MuxConfig {
        mtu: m.mtu,
        queue_depth: m.queue_depth,
    });
    for c in &channels {
        mux.add_channel(c.clone())?;
    }
    let sf: BTreeMap<u16, u32> = channels.iter().map(|c| (c.id, c.sp.spreading_factor_sf)).collect();
    let deadline: BTreeMap<u16, f64> = channels.iter().map(|c| (c.id, c.deadline)).collect();
    let airtime = |p: &DataLinkPacket| (p.payload.len() * 8) as f64 * f64::from(sf[&p.channel_id]) / (cap.mbps() * 1e6);
    let propagation = m.distance / SPEED_OF_LIGHT;
    let uses_modem1 = channels.iter().any(|c| c.redundancy != Redundancy::Single);

    let rngs: Vec<ChaCha8Rng> = (0..MODEMS)
        .map(|i| ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, 0, i as u64)))
        .collect();
    let mut link = match m.link {
        LinkModel::InducedLoss { loss } => Link::Loss { p: loss, rngs },
        LinkModel::Phy { snr_db } => {
            let link = cfg.baseband.link();
            let model = cfg.channel.model()?;
            let response = estimate_frequency_response(&model, link.geometry.fft_size)?;
            Link::Phy {
                snr_db,
                rngs,
                link,
                eq: cfg.baseband.equalizer,
                model,
                response,
            }
        }
    };

    let mut arrivals: Vec<(f64, u16, usize)> = match &m.trace {
        Some(path) => {
            let max = match m.link {
                LinkModel::Phy { .. } => m.mtu.min(cfg.phy_max_payload()),
                LinkModel::InducedLoss { .. } => m.mtu,
            };
            let ids: Vec<u16> = channels.iter().map(|c| c.id).collect();
            read_trace(path, &ids, max)?
        }
        None => m
            .channels
            .iter()
            .flat_map(|c| {
                (0..m.packets_per_channel).map(move |k| (c.offset + k as f64 * c.interval, c.id, c.payload_bytes))
            })
            .collect(),
    };
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let source: BTreeMap<u16, _> = m.channels.iter().map(|c| (c.id, c.source)).collect();

    let mut modems: Vec<Modem> = (0..MODEMS)
        .map(|_| Modem {
            fifo: VecDeque::new(),
            current: None,
        })
        .collect();
    let mut stats: BTreeMap<u16, (u64, f64, f64, BTreeMap<u64, u64>)> = BTreeMap::new();
    let mut next_arrival = 0;
    let mut now = 0.0;

    loop {
        let t_arr = arrivals.get(next_arrival).map(|a| a.0);
        let t_done = modems
            .iter()
            .filter_map(|md| md.current.as_ref().map(|c| c.0))
            .min_by(f64::total_cmp);
        now = match (t_arr, t_done) {
            (None, None) if mux.total_queued() == 0 => break,
            (None, None) => now,
            (Some(a), None) => a,
            (None, Some(d)) => d,
            (Some(a), Some(d)) => a.min(d),
        };

        for (i, md) in modems.iter_mut().enumerate() {
            if md.current.as_ref().is_some_and(|c| c.0 <= now) {
                let (_, packet) = md.current.take().expect("checked");
                mux.modem_done(i, packet.payload.len() as u64);
                let ok = link.copy_ok(i, &packet.payload)?;
                let at = now + propagation;
                if let Some(d) = mux.receive(&packet, i, ok, at) {
                    let e = stats.entry(d.channel_id).or_default();
                    if d.latency > deadline[&d.channel_id] {
                        e.0 += 1;
                    }
                    e.1 += d.latency;
                    e.2 = e.2.max(d.latency);
                    *e.3.entry((d.latency / m.histogram_bin).floor() as u64).or_default() += 1;
                }
            }
        }

        while let Some(&(t, id, bytes)) = arrivals.get(next_arrival) {
            if t > now {
                break;
            }
            let frame = AppFrame {
                source: source[&id],
                payload: vec![(id & 0xff) as u8; bytes],
                arrival_time: t,
            };
            mux.enqueue(frame, id, t)?;
            next_arrival += 1;
        }

        loop {
            let idle_usable = modems[0].idle() || (uses_modem1 && modems[1].idle());
            if !idle_usable {
                break;
            }
            let idle_before: Vec<bool> = modems.iter().map(Modem::idle).collect();
            let Some(s) = mux.schedule_next(now) else { break };
            for i in s.modems.iter() {
                modems[i].fifo.push_back(s.packet.clone());
            }
            if !s.modems.iter().any(|i| idle_before[i]) {
                break;
            }
        }

        for md in modems.iter_mut() {
            if md.current.is_none() {
                if let Some(p) = md.fifo.pop_front() {
                    md.current = Some((now + airtime(&p), p));
                }
            }
        }
    }
    mux.check_conservation()?;

    let reports = channels
        .iter()
        .map(|c| {
            let counters = mux.counters(c.id).expect("registered");
            let (late, sum, max, histogram) = stats.remove(&c.id).unwrap_or_default();
            ChannelReport {
                id: c.id,
                redundancy: c.redundancy,
                counters,
                late_deliveries: late,
                mean_latency: if counters.delivered > 0 {
                    sum / counters.delivered as f64
                } else {
                    0.0
                },
                max_latency: max,
                histogram,
            }
        })
        .collect();
    Ok(MuxSimResult {
        channels: reports,
        modem_bytes: mux.modem_total_bytes(),
        modem_loads,
        histogram_bin: m.histogram_bin,
        end_time: now,
    })
}

pub const MUX_COLUMNS: [&str; 15] = [
    "channel_id",
    "redundancy",
    "enqueued",
    "dispatched",
    "delivered",
    "lost",
    "deadline_misses",
    "overflow_drops",
    "corrupt_copies",
    "duplicate_copies",
    "late_deliveries",
    "per",
    "per_ci95",
    "mean_latency_s",
    "max_latency_s",
];

pub fn mux_table(r: &MuxSimResult) -> Table {
    let mut t = Table::new(MUX_COLUMNS.to_vec());
    for c in &r.channels {
        let k = &c.counters;
        let red = match c.redundancy {
            Redundancy::Redundant => "redundant",
            Redundancy::Distributive => "distributive",
            Redundancy::Single => "single",
        };
        t.push(vec![
            c.id.into(),
            red.into(),
            k.enqueued.into(),
            k.dispatched.into(),
            k.delivered.into(),
            k.lost.into(),
            k.deadline_misses.into(),
            k.overflow_drops.into(),
            k.corrupt_copies.into(),
            k.duplicate_copies.into(),
            c.late_deliveries.into(),
            c.per().into(),
            c.per_ci95().into(),
            c.mean_latency.into(),
            c.max_latency.into(),
        ]);
    }
    t
}

pub const HISTOGRAM_COLUMNS: [&str; 4] = ["channel_id", "bin_start_s", "bin_end_s", "count"];

/// Non-empty latency bins per channel.
pub fn histogram_table(r: &MuxSimResult) -> Table {
    let mut t = Table::new(HISTOGRAM_COLUMNS.to_vec());
    for c in &r.channels {
        for (&bin, &n) in &c.histogram {
            t.push(vec![
                c.id.into(),
                (bin as f64 * r.histogram_bin).into(),
                ((bin + 1) as f64 * r.histogram_bin).into(),
                n.into(),
            ]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ChannelSpec, ProfileRef};
    use crate::mux::FrameSource;

    fn spec(id: u16, redundancy: Redundancy, sp: &str) -> ChannelSpec {
        ChannelSpec {
            id,
            service_profile: ProfileRef::Named(sp.into()),
            deadline: 1e-3,
            redundancy,
            payload_bytes: 100,
            interval: 10e-6,
            offset: 0.0,
            source: FrameSource::Wtb,
        }
    }

    fn cfg(channels: Vec<ChannelSpec>, loss: [f64; 2], packets: u64) -> SimulationConfig {
        let mut c = SimulationConfig::default();
        c.mux.channels = channels;
        c.mux.link = LinkModel::InducedLoss { loss };
        c.mux.packets_per_channel = packets;
        c.profiles.modem_capacity = Some(1000.0);
        c
    }

    #[test]
    fn single_lossless_delivers_everything() {
        let r = run_mux_sim(&cfg(vec![spec(1, Redundancy::Single, "SP2")], [0.0, 0.0], 2000)).unwrap();
        let c = &r.channels[0].counters;
        assert_eq!(c.delivered, c.enqueued);
        assert_eq!(c.enqueued, 2000);
        assert_eq!(r.modem_bytes[1], 0);
        // 100 bytes at SF 2 over 1 Gbit/s plus half a meter
        let expected = 800.0 * 2.0 / 1e9 + 0.5 / SPEED_OF_LIGHT;
        assert!((r.channels[0].max_latency - expected).abs() < 1e-15);
    }

    #[test]
    fn redundant_product_law_small() {
        let r = run_mux_sim(&cfg(vec![spec(1, Redundancy::Redundant, "SP2")], [0.3, 0.3], 20_000)).unwrap();
        let ch = &r.channels[0];
        let sigma = (0.09f64 * 0.91 / 20_000.0).sqrt();
        assert!((ch.per() - 0.09).abs() < 3.0 * sigma, "{}", ch.per());
        assert_eq!(ch.counters.lost + ch.counters.delivered, ch.counters.enqueued);
    }

    #[test]
    fn distributive_balances_bytes() {
        let r = run_mux_sim(&cfg(vec![spec(1, Redundancy::Distributive, "SP3")], [0.0, 0.0], 5000)).unwrap();
        let [a, b] = r.modem_bytes;
        assert!(a.abs_diff(b) <= 100, "{a} vs {b}");
        assert_eq!(a + b, 500_000);
    }

    #[test]
    fn inadmissible_set_names_load() {
        let chans = vec![
            spec(1, Redundancy::Redundant, "SP3"),
            spec(2, Redundancy::Single, "SP1"),
        ];
        let err = run_mux_sim(&cfg(chans, [0.0, 0.0], 10)).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("load 1.2")), "{err}");
    }

    #[test]
    fn overload_produces_deadline_misses_and_conserves() {
        let mut s = spec(1, Redundancy::Single, "SP1");
        s.interval = 1e-6;
        s.deadline = 20e-6;
        s.payload_bytes = 1000;
        let mut c = cfg(vec![s], [0.0, 0.0], 500);
        c.mux.queue_depth = 8;
        let r = run_mux_sim(&c).unwrap();
        let k = &r.channels[0].counters;
        assert!(k.overflow_drops + k.deadline_misses > 0);
        assert_eq!(k.delivered + k.lost + k.deadline_misses + k.overflow_drops, k.enqueued);
    }

    #[test]
    fn edf_serves_tighter_deadline_first() {
        let mut a = spec(1, Redundancy::Single, "SP2");
        a.deadline = 1e-3;
        let mut b = spec(2, Redundancy::Single, "SP2");
        b.deadline = 5e-6;
        // both arrive together faster than one modem can serve them
        a.interval = 2e-6;
        b.interval = 2e-6;
        let r = run_mux_sim(&cfg(vec![a, b], [0.0, 0.0], 200)).unwrap();
        assert!(r.channels[1].mean_latency < r.channels[0].mean_latency);
    }

    #[test]
    fn phy_link_over_clean_channel() {
        let mut c = cfg(vec![spec(1, Redundancy::Redundant, "SP2")], [0.0, 0.0], 20);
        c.mux.link = LinkModel::Phy { snr_db: [30.0, -20.0] };
        let r = run_mux_sim(&c).unwrap();
        let k = &r.channels[0].counters;
        assert_eq!(k.delivered, 20);
        assert_eq!(k.corrupt_copies, 20);
    }

    #[test]
    fn deterministic_tables() {
        let c = cfg(
            vec![
                spec(1, Redundancy::Redundant, "SP2"),
                spec(7, Redundancy::Distributive, "SP1"),
            ],
            [0.1, 0.2],
            3000,
        );
        let a = run_mux_sim(&c).unwrap();
        let b = run_mux_sim(&c).unwrap();
        assert_eq!(mux_table(&a).to_csv(), mux_table(&b).to_csv());
        assert_eq!(histogram_table(&a).to_csv(), histogram_table(&b).to_csv());
    }

    fn write_trace(dir: &Path, text: &str) -> std::path::PathBuf {
        let p = dir.join("trace.csv");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn trace_matches_equivalent_periodic_source() {
        let mut periodic = cfg(vec![spec(1, Redundancy::Redundant, "SP2")], [0.2, 0.2], 300);
        let c = &periodic.mux.channels[0];
        let mut text = String::from("time_s,channel_id,payload_bytes\n");
        for k in 0..300 {
            text += &format!("{:e}, 1, {}\n", c.offset + k as f64 * c.interval, c.payload_bytes);
        }
        let dir = tempfile::tempdir().unwrap();
        let mut traced = periodic.clone();
        traced.mux.trace = Some(write_trace(dir.path(), &text));
        traced.mux.packets_per_channel = 0;
        traced.mux.channels[0].interval = 0.0;
        periodic.seed = 5;
        traced.seed = 5;
        let (a, b) = (run_mux_sim(&periodic).unwrap(), run_mux_sim(&traced).unwrap());
        assert_eq!(mux_table(&a).to_csv(), mux_table(&b).to_csv());
        assert_eq!(b.channels[0].counters.enqueued, 300);
    }

    #[test]
    fn bad_traces_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(vec![spec(1, Redundancy::Single, "SP2")], [0.0, 0.0], 1);
        for (text, needle) in [
            ("time_s,channel_id,payload_bytes\n0,7,10\n", "channel 7"),
            ("time_s,channel_id,payload_bytes\n-1,1,10\n", "time_s"),
            ("time_s,channel_id,payload_bytes\n0,1,0\n", "payload_bytes"),
            ("time_s,channel_id,payload_bytes\n0,1,99999\n", "payload_bytes"),
            ("time_s,channel_id,payload_bytes\n", "no arrivals"),
            ("time_s,channel_id\n0,1\n", "payload_bytes"),
        ] {
            c.mux.trace = Some(write_trace(dir.path(), text));
            let e = run_mux_sim(&c).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{e}");
            assert!(e.to_string().contains(needle), "{e}");
        }
        c.mux.trace = Some(dir.path().join("absent.csv"));
        assert!(matches!(run_mux_sim(&c), Err(Error::Io { .. })));
    }
}
