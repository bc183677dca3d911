use linksim::baseband::{
    rx_chain, tx_chain, ChannelEstimation, EqualizerConfig, LinkConfig, ModulationScheme, SpreadingConfig,
};
use linksim::channel::{apply_channel, estimate_frequency_response, preset, preset_names};
use linksim::harness::sweep::ci95_half_width;
use linksim::harness::{run_sweep, SimulationConfig, SweepMode};
use linksim::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

fn bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..2)).collect()
}

fn link(modulation: ModulationScheme, sf: u32) -> LinkConfig {
    LinkConfig {
        modulation,
        spreading: SpreadingConfig::new(sf).unwrap(),
        ..Default::default()
    }
    .fitted()
}

#[test]
fn noiseless_loopback_over_every_preset() {
    for name in preset_names() {
        for modulation in [ModulationScheme::Bpsk, ModulationScheme::Qpsk] {
            for sf in [1, 2, 8] {
                let link = link(modulation, sf);
                let info = bits(link.codec.payload_bits(), sf as u64);
                let tx = tx_chain(&info, &link).unwrap().waveform();
                let model = preset(name).unwrap().with_seed(5);
                let rx = apply_channel(&tx, &model).unwrap();
                let h = estimate_frequency_response(&model, link.geometry.fft_size).unwrap();
                for estimation in [ChannelEstimation::Genie, ChannelEstimation::PilotLeastSquares] {
                    let eq = EqualizerConfig {
                        channel_estimation: estimation,
                        ..Default::default()
                    };
                    let out = rx_chain(&rx, &link, &eq, Some(&h), info.len()).unwrap();
                    assert!(out.crc_ok, "{name} {modulation:?} sf {sf} {estimation:?}");
                    assert_eq!(out.info_bits, info, "{name} {modulation:?} sf {sf} {estimation:?}");
                }
            }
        }
    }
}

#[test]
fn acquisition_absorbs_timing_lead_cfo_and_phase() {
    let link = link(ModulationScheme::Qpsk, 1);
    let info = bits(link.codec.payload_bits(), 9);
    let tx = tx_chain(&info, &link).unwrap().waveform();
    let mut model = preset("coupling-mild").unwrap();
    model.cfo = 3e-3;
    model.phase_offset = 2.1;
    model.snr_db = Some(25.0);
    model.seed = 12;
    let h = estimate_frequency_response(&model, link.geometry.fft_size).unwrap();
    for lead in [0, 1, 40, 333] {
        let mut rx = vec![Complex64::default(); lead];
        rx.extend(apply_channel(&tx, &model).unwrap());
        let eq = EqualizerConfig {
            channel_estimation: ChannelEstimation::PilotLeastSquares,
            ..Default::default()
        };
        let out = rx_chain(&rx, &link, &eq, Some(&h), info.len()).unwrap();
        assert_eq!(out.info_bits, info, "lead {lead}");
        assert_eq!(out.sync.timing_offset, lead);
    }
}

#[test]
fn framed_sweep_degrades_monotonically_with_snr() {
    let mut cfg = SimulationConfig::default();
    cfg.trials = 60;
    cfg.baseband.modulation = ModulationScheme::Qpsk;
    cfg.channel.preset = Some("coupling-harsh".into());
    cfg.channel.redraw_phases = true;
    cfg.sweep.mode = SweepMode::Framed;
    cfg.sweep.values = vec![Some(-2.0), Some(2.0), Some(6.0), None];
    let r = run_sweep(&cfg, None).unwrap();
    let per: Vec<f64> = r.points.iter().map(|p| p.per()).collect();
    assert!(per.windows(2).all(|w| w[0] >= w[1]), "{per:?}");
    assert!(per[0] > 0.5, "{per:?}");
    assert_eq!(per[3], 0.0);
}

/// The reported 95 % interval should contain the closed form for most
/// independent seeds; a width bug shows up as systematic misses.
#[test]
fn confidence_intervals_cover_the_closed_form() {
    let ebn0_db: f64 = 5.0;
    let theory = 0.5 * erfc((10f64.powf(ebn0_db / 10.0)).sqrt());
    let mut covered = 0;
    for seed in 0..20 {
        let mut cfg = SimulationConfig::default();
        cfg.seed = 1000 + seed;
        cfg.trials = 10;
        cfg.sweep.bits_per_trial = 10_000;
        cfg.sweep.values = vec![Some(ebn0_db)];
        let p = &run_sweep(&cfg, None).unwrap().points[0];
        assert_eq!(p.ber_ci95(), ci95_half_width(p.ber(), p.counts.bits));
        if (p.ber() - theory).abs() <= p.ber_ci95() {
            covered += 1;
        }
    }
    assert!(covered >= 18, "covered {covered} of 20");
}

#[test]
fn shipped_configs_round_trip_through_json() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let cfg = SimulationConfig::load(&path).unwrap();
        cfg.validate_for(cfg.scenario.expect("shipped configs name their scenario"))
            .unwrap();
        assert_eq!(
            SimulationConfig::from_json(&cfg.to_json()).unwrap(),
            cfg,
            "{}",
            path.display()
        );
        seen += 1;
    }
    assert_eq!(seen, 6);
}
