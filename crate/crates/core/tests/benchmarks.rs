use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use secmsg::aead::{AeadProvider, Backend, SecretKey, FRAME_OVERHEAD};
use secmsg::benchmarks::{
    collective_bench, encdec_bench, mean_stddev, multipair, pingpong, read_samples,
    run_until_stable, throughput, write_samples, BenchError, CollectiveOp, Multipair, PingPong,
    StopPolicy, StopReason, WINDOW,
};
use secmsg::transport::{run_local, GroupConfig, Security};

fn key() -> SecretKey {
    SecretKey::new(&[0x42; 32]).unwrap()
}

fn encrypted() -> Security {
    Security::Encrypted(AeadProvider::new(Backend::Ring, &key()).unwrap())
}

fn cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Seeded draws from N(mean, (cv·mean)²), floored at a small positive value.
fn noisy(cv: f64, seed: u64) -> impl FnMut(usize) -> Result<f64, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(100.0, cv * 100.0).unwrap();
    move |_| Ok(n.sample(&mut rng).max(1e-3))
}

#[test]
fn constant_runs_stop_at_twenty() {
    let r = run_until_stable(&StopPolicy::default(), 8, 1, |_| Ok::<_, BenchError>(5.0)).unwrap();
    assert_eq!((r.runs(), r.stop_reason), (20, StopReason::StddevOk));
    assert_eq!((r.mean, r.stddev), (5.0, 0.0));
}

#[test]
fn low_variance_stops_at_twenty() {
    for seed in 0..5 {
        let r = run_until_stable(&StopPolicy::default(), 8, 1, noisy(0.04, seed)).unwrap();
        assert_eq!(r.runs(), 20, "seed {seed}");
        assert_eq!(r.stop_reason, StopReason::StddevOk);
    }
}

#[test]
fn high_variance_takes_the_confidence_interval_branch() {
    for seed in 0..5 {
        let p = StopPolicy::default();
        let r = run_until_stable(&p, 8, 1, noisy(0.20, seed)).unwrap();
        assert_eq!(r.stop_reason, StopReason::CiOk, "seed {seed}");
        assert!(r.runs() > 100);
        assert!(r.ci99_halfwidth <= 0.05 * r.mean);
        let (m, s) = mean_stddev(&r.samples.iter().map(|x| x.latency).collect::<Vec<_>>());
        assert!((m - r.mean).abs() <= 1e-12 * m);
        assert!((r.ci99_halfwidth - 2.5758 * s / (r.runs() as f64).sqrt()).abs() < 1e-3 * s);
    }
}

#[test]
fn budget_is_a_flag_not_an_error() {
    let p = StopPolicy {
        hard_budget: 150,
        ..Default::default()
    };
    let r = run_until_stable(&p, 8, 1, noisy(1.0, 7)).unwrap();
    assert_eq!((r.runs(), r.stop_reason), (150, StopReason::Budget));
}

#[test]
fn encdec_policy_needs_five_runs() {
    let r = run_until_stable(&StopPolicy::encdec(), 8, 1, |_| Ok::<_, BenchError>(2.0)).unwrap();
    assert_eq!(r.runs(), 5);
}

#[test]
fn nonpositive_measurements_are_rejected() {
    assert!(run_until_stable(&StopPolicy::default(), 8, 1, |_| Ok::<_, BenchError>(0.0)).is_err());
}

#[test]
fn pingpong_loopback_plain_and_encrypted() {
    for sec in [Security::Plain, encrypted()] {
        let out = run_local(2, GroupConfig::default(), |g| {
            pingpong(&g, &sec, &PingPong { size: 4096, rounds: 50, initiator: 0 }).unwrap()
        })
        .unwrap();
        assert!(out[0].is_finite() && out[0] > 0.0);
        assert_eq!(out[0], out[1], "both ranks agree on the value");
    }
}

#[test]
fn pingpong_is_symmetric_in_initiator() {
    let sec = Security::Plain;
    let out = run_local(2, GroupConfig::default(), |g| {
        let mut by_initiator = [Vec::new(), Vec::new()];
        for run in 0..40 {
            let initiator = run % 2;
            let cfg = PingPong { size: 65536, rounds: 100, initiator };
            by_initiator[initiator].push(pingpong(&g, &sec, &cfg).unwrap());
        }
        by_initiator.map(|xs| mean_stddev(&xs).0)
    })
    .unwrap();
    let [a, b] = out[0];
    assert!((a - b).abs() / a.min(b) < 0.10, "initiator 0: {a}, initiator 1: {b}");
}

#[test]
fn throughput_counts_plaintext_while_the_wire_carries_frames() {
    let size = 1024usize;
    let rounds = 40;
    let out = run_local(2, GroupConfig::default(), |g| {
        let sec = encrypted();
        g.barrier().unwrap();
        let before = g.wire_stats();
        let lat = pingpong(&g, &sec, &PingPong { size, rounds, initiator: 0 }).unwrap();
        g.barrier().unwrap();
        let after = g.wire_stats();
        (lat, after.body_bytes_sent - before.body_bytes_sent)
    })
    .unwrap();
    let (lat, sent) = out[0];
    // warm-up plus timed rounds, one frame out per round for each rank, plus
    // the 8-byte latency agreement
    let per_rank_rounds = (rounds + secmsg::benchmarks::warmup_rounds(rounds)) as u64;
    assert_eq!(sent, per_rank_rounds * (size + FRAME_OVERHEAD) as u64 + 8);
    let tp = throughput(size as u64, lat).unwrap();
    assert_eq!(tp, 1024.0 / lat);
    assert!(tp < throughput(sent / per_rank_rounds, lat).unwrap());
}

#[test]
fn multipair_shapes_and_degenerate_case() {
    for k in [1usize, 2] {
        let out = run_local(2 * k, GroupConfig::default(), |g| {
            multipair(&g, &encrypted(), &Multipair { k, size: 1024, iterations: 5 }).unwrap()
        })
        .unwrap();
        let t = out[0];
        assert!(out.iter().all(|x| *x == t));
        assert!(t.round_us > 0.0);
        assert!((t.per_message_us * WINDOW as f64 - t.round_us).abs() < 1e-9 * t.round_us);
    }
    // ranks beyond 2k sit out but still agree
    let out = run_local(3, GroupConfig::default(), |g| {
        multipair(&g, &Security::Plain, &Multipair { k: 1, size: 16, iterations: 3 }).unwrap()
    })
    .unwrap();
    assert!(out.iter().all(|x| *x == out[0]));
    let err = run_local(2, GroupConfig::default(), |g| {
        multipair(&g, &Security::Plain, &Multipair { k: 2, size: 16, iterations: 3 }).is_err()
    })
    .unwrap();
    assert!(err.iter().all(|e| *e));
}

#[test]
fn multipair_aggregate_throughput_does_not_collapse() {
    if cores() < 2 {
        eprintln!("skipped: one core, pairs cannot run concurrently");
        return;
    }
    let size = 16 * 1024;
    let agg = |k: usize| {
        let out = run_local(2 * k, GroupConfig::default(), |g| {
            let xs: Vec<f64> = (0..10)
                .map(|_| multipair(&g, &Security::Plain, &Multipair { k, size, iterations: 20 }).unwrap().per_message_us)
                .collect();
            mean_stddev(&xs).0
        })
        .unwrap();
        throughput((k * size) as u64, out[0]).unwrap()
    };
    let (one, two) = (agg(1), agg(2));
    assert!(two >= 0.9 * one, "k=1 {one} MB/s, k=2 {two} MB/s");
}

#[test]
fn encdec_costs() {
    let zero = encdec_bench(Backend::Ring, &key(), 0, 1000, 1).unwrap();
    assert!(zero > 0.0);
    // stable means over increasing sizes never go down by more than noise
    let stable = |m: usize| {
        run_until_stable(&StopPolicy::encdec(), m as u64, 1, |_| encdec_bench(Backend::Ring, &key(), m, 200, 1))
            .unwrap()
            .mean
    };
    let sizes = [1024usize, 16 * 1024, 256 * 1024];
    let means: Vec<f64> = sizes.iter().map(|&m| stable(m)).collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn encdec_two_workers_scale_on_multicore_hosts() {
    if cores() < 2 {
        eprintln!("skipped: one core");
        return;
    }
    let m = 64 * 1024;
    let per_msg = |k: usize| {
        run_until_stable(&StopPolicy::encdec(), m as u64, k as u32, |_| {
            encdec_bench(Backend::Ring, &key(), m, 200, k)
        })
        .unwrap()
        .mean
            / k as f64
    };
    let (one, two) = (per_msg(1), per_msg(2));
    assert!(two <= one * 1.1, "k=1 {one} µs, k=2 {two} µs per message");
}

#[test]
fn collective_timings() {
    // a one-rank encrypted bcast is pure seal + open
    let out = run_local(1, GroupConfig::default(), |g| {
        collective_bench(&g, &encrypted(), CollectiveOp::Bcast, 4096, 50).unwrap()
    })
    .unwrap();
    assert!(out[0] > 0.0);

    let out = run_local(4, GroupConfig::default(), |g| {
        let plain = collective_bench(&g, &Security::Plain, CollectiveOp::Alltoall, 1024, 30).unwrap();
        let enc = collective_bench(&g, &encrypted(), CollectiveOp::Alltoall, 1024, 30).unwrap();
        let one = collective_bench(&g, &Security::Plain, CollectiveOp::Alltoall, 1, 50).unwrap();
        let sixteen = collective_bench(&g, &Security::Plain, CollectiveOp::Alltoall, 16, 50).unwrap();
        for op in [CollectiveOp::Allgather, CollectiveOp::Alltoallv] {
            assert!(collective_bench(&g, &encrypted(), op, 100, 5).unwrap() > 0.0);
        }
        (plain, enc, one, sixteen)
    })
    .unwrap();
    let (plain, enc, one, sixteen) = out[0];
    let overhead = enc / plain - 1.0;
    assert!(overhead.is_finite() && enc > 0.0 && plain > 0.0);
    assert!(one <= 3.0 * sixteen && sixteen <= 3.0 * one, "1 B {one} µs vs 16 B {sixteen} µs");
}

#[test]
fn csv_round_trip_from_a_real_run() {
    let r = run_until_stable(&StopPolicy::encdec(), 256, 1, |_| encdec_bench(Backend::Ring, &key(), 256, 100, 1))
        .unwrap();
    let mut buf = Vec::new();
    write_samples(&mut buf, &r.samples).unwrap();
    let back = read_samples(buf.as_slice()).unwrap();
    assert_eq!(back, r.samples);
}
