mod common;

use aoi_tandem::analysis::expected_transmission_time;
use aoi_tandem::des::{paoi_from_trace, sample_interarrival, sample_tx_time};
use aoi_tandem::model::processing_time;
use aoi_tandem::{run, PacketRecord, QuadratureSettings, Scenario, SimConfig, TraceRetention};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn traced(seed: u64, n: u64) -> SimConfig {
    SimConfig {
        seed,
        n_packets: n,
        warmup_fraction: 0.0,
        trace_retention: TraceRetention::Full,
    }
}

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (
        prop::collection::vec((0.01f64..1.0, 0.01f64..2.0), 1..5),
        prop::bool::ANY,
    )
        .prop_map(|(classes, slow_link)| {
            let channel = if slow_link { calibrated_channel() } else { quiet_channel() };
            let sources = classes
                .iter()
                .enumerate()
                .map(|(i, (l, z))| aoi_tandem::SourceSpec::new(i as u32 + 1, *l, z * 50e6 + 20e6, 20e6, 50e6))
                .collect();
            scenario(channel, sources)
        })
}

fn check_trace(sc: &Scenario, trace: &[PacketRecord]) -> Result<(), TestCaseError> {
    for p in trace {
        prop_assert!(p.is_time_ordered(), "{p:?}");
        let z = processing_time(&sc.sources[p.source - 1]);
        prop_assert!((p.t_proc_end - p.t_proc_start - z).abs() <= 1e-9 * p.t_proc_end.max(1.0));
    }
    // Departure order; FCFS transmitter that never idles with work waiting.
    for w in trace.windows(2) {
        prop_assert!(w[0].t_depart <= w[1].t_depart);
        prop_assert!(w[0].t_proc_end <= w[1].t_proc_end);
        prop_assert_eq!(w[1].t_tx_start, w[1].t_proc_end.max(w[0].t_depart));
    }
    // Processor: non-idling, and never serves a class while a higher one waits.
    let mut by_start: Vec<&PacketRecord> = trace.iter().collect();
    by_start.sort_by(|a, b| a.t_proc_start.total_cmp(&b.t_proc_start));
    for w in by_start.windows(2) {
        prop_assert_eq!(w[1].t_proc_start, w[1].t_arrival.max(w[0].t_proc_end));
    }
    for p in &by_start {
        for q in &by_start {
            if q.source < p.source && q.t_arrival < p.t_proc_start {
                prop_assert!(q.t_proc_start <= p.t_proc_start, "{q:?} waited behind {p:?}");
            }
        }
    }
    // Per-source arrival order is preserved.
    for j in 1..=sc.num_sources() {
        let seqs: Vec<u64> = trace.iter().filter(|p| p.source == j).map(|p| p.seq).collect();
        prop_assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_invariants(sc in scenario_strategy(), seed in any::<u64>()) {
        let out = run(&sc, &traced(seed, 400)).unwrap();
        let trace = out.trace.unwrap();
        prop_assert_eq!(trace.len(), 400);
        check_trace(&sc, &trace)?;

        let samples = paoi_from_trace(&trace).unwrap();
        for s in &out.report.sources {
            let xs = samples.get(&s.priority).cloned().unwrap_or_default();
            prop_assert_eq!(s.paoi_samples, xs.len() as u64);
            if let Some(m) = s.paoi_mean {
                let want = xs.iter().sum::<f64>() / xs.len() as f64;
                prop_assert!((m - want).abs() <= 1e-9 * want);
            }
        }
        let delivered: u64 = out.report.sources.iter().map(|s| s.delivered).sum();
        prop_assert_eq!(delivered, 400);
    }

    #[test]
    fn replay_is_exact(sc in scenario_strategy(), seed in any::<u64>()) {
        let a = run(&sc, &traced(seed, 300)).unwrap();
        let b = run(&sc, &traced(seed, 300)).unwrap();
        prop_assert_eq!(format!("{:?}", a.report), format!("{:?}", b.report));
        prop_assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn single_packet_has_no_sample() {
    let sc = scenario(quiet_channel(), vec![timed_source(1, 0.1, 1.0)]);
    let r = run(&sc, &traced(1, 1)).unwrap().report;
    assert_eq!(r.sources[0].delivered, 1);
    assert_eq!(r.sources[0].paoi_samples, 0);
    assert_eq!(r.sources[0].paoi_mean, None);
    assert!(run(&sc, &traced(1, 0)).is_err());
}

#[test]
fn zero_load_limit() {
    let mut channel = calibrated_channel();
    channel.gain_floor = 30.0;
    let sc = scenario(channel, vec![aoi_tandem::SourceSpec::new(1, 0.001, 120e6, 20e6, 50e6)]);
    let ztx = expected_transmission_time(1, &sc, &QuadratureSettings::default()).unwrap();
    let r = run(&sc, &SimConfig { seed: 4, n_packets: 20_000, ..SimConfig::default() })
        .unwrap()
        .report;
    let s = &r.sources[0];
    let want = 1000.0 + 2.0 + ztx;
    let got = s.paoi_mean.unwrap();
    assert!((got - want).abs() <= s.paoi_ci95.unwrap(), "{got} vs {want} +- {:?}", s.paoi_ci95);
    assert!(s.wait_proc.unwrap() < 1e-2 && s.wait_tx.unwrap() < 1e-2);
}

#[test]
fn sampled_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 1_000_000;
    let lambda = 0.25;
    let mean = (0..n).map(|_| sample_interarrival(&mut rng, lambda)).sum::<f64>() / n as f64;
    assert!((mean - 4.0).abs() <= 3.0 * 4.0 / (n as f64).sqrt());

    let sc = three_sources(50e6);
    let ch = &sc.channel;
    let n = 10_000_000u64;
    let (mut m, mut m2) = (0.0, 0.0);
    for k in 1..=n {
        let x = sample_tx_time(&mut rng, 20e6, ch);
        let d = x - m;
        m += d / k as f64;
        m2 += d * (x - m);
    }
    let se = (m2 / (n - 1) as f64 / n as f64).sqrt();
    let quad = expected_transmission_time(1, &sc, &QuadratureSettings::default()).unwrap();
    assert!((m - quad).abs() <= 3.0 * se, "{m} vs {quad} (se {se})");
    assert_eq!(sample_tx_time(&mut rng, 0.0, ch), 0.0);
}

#[test]
fn priority_waits_match_closed_form() {
    let sc = priority_scenario(quiet_channel());
    let r = run(&sc, &SimConfig { seed: 1, ..SimConfig::default() }).unwrap().report;
    for (s, want) in r.sources.iter().zip([0.119444, 0.137292, 0.147099]) {
        assert!(rel(s.wait_proc.unwrap(), want) <= 0.02, "{:?} vs {want}", s.wait_proc);
    }
    assert!(!r.stability_warning);
}

#[test]
fn overload_is_flagged() {
    let sc = scenario(quiet_channel(), vec![timed_source(1, 0.6, 1.0), timed_source(2, 0.6, 1.0)]);
    let r = run(&sc, &SimConfig { seed: 2, n_packets: 50_000, ..SimConfig::default() }).unwrap().report;
    assert!(r.stability_warning);
    assert!(r.processor_busy_fraction > 0.999);
}
