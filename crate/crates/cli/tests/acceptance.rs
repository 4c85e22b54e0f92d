//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Tolerances and time limits are pinned
//! below next to each check.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use secmsg::aead::{AeadError, AeadProvider, Backend, SecretKey, FRAME_OVERHEAD};
use secmsg::benchmarks::{
    default_pingpong_rounds, load_samples, pingpong, read_samples, run_until_stable, throughput,
    warmup_rounds, write_samples, BenchError, LatencySample, PingPong, StopPolicy, StopReason,
};
use secmsg::collectives::{
    encrypted_allgather, encrypted_alltoall, encrypted_alltoallv, encrypted_bcast,
};
use secmsg::models::{
    compose_enhanced, eval_maxrate, fit_encdec_line, fit_hockney, fit_maxrate, fit_maxrate_class,
    maxrate_sse, overhead_single_large, predict_multipair, presets, MaxRateClassParams,
    MaxRatePoint, ParamFile, SizeClass,
};
use secmsg::transport::{run_local, GroupConfig, Security};

type Check = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn pow2(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|e| 1u64 << e).collect()
}

fn linspace(lo: u64, hi: u64, n: u64) -> Vec<u64> {
    (0..n).map(|i| lo + (hi - lo) * i / (n - 1)).collect()
}

fn sample(m: u64, k: u32, run: u32, latency: f64) -> LatencySample {
    LatencySample {
        message_size: m,
        k_pairs: k,
        run_index: run,
        latency,
    }
}

/// α + β·m at every size, `runs` times, with multiplicative N(1, noise).
fn line(alpha: f64, beta: f64, sizes: &[u64], runs: u32, noise: f64, rng: &mut ChaCha8Rng) -> Vec<LatencySample> {
    let n = Normal::new(1.0, noise).unwrap();
    let mut out = Vec::new();
    for &m in sizes {
        for r in 0..runs {
            let f = if noise > 0.0 { n.sample(rng) } else { 1.0 };
            out.push(sample(m, 1, r, (alpha + beta * m as f64) * f));
        }
    }
    out
}

const KS: [u32; 4] = [1, 2, 4, 8];

fn class_points(p: &MaxRateClassParams<f64>, sizes: &[u64], runs: u32, noise: f64, rng: &mut ChaCha8Rng) -> Vec<MaxRatePoint<f64>> {
    let n = Normal::new(1.0, noise).unwrap();
    let mut out = Vec::new();
    for &m in sizes {
        for k in KS {
            for _ in 0..runs {
                let f = if noise > 0.0 { n.sample(rng) } else { 1.0 };
                out.push(MaxRatePoint { k, m, latency: p.eval(k, m) * f });
            }
        }
    }
    out
}

// ---- 1 -------------------------------------------------------------------

fn composition() -> Check {
    let e = compose_enhanced(&presets::ib::<f64>(), &presets::boringssl());
    let (a, b) = (e.eager.alpha_ecom, e.eager.beta_ecom);
    // oracle: the two sums done by hand
    ensure(a == 3.40 + 0.53 && b == 3.83e-4 + 6.90e-4, || format!("({a}, {b}) is not the plain sum"))?;
    let shown = (format!("{a:.2}"), format!("{:.2}", b * 1e4));
    ensure(shown == ("3.93".into(), "10.73".into()), || format!("rounded to {shown:?}"))?;
    Ok(format!("({}, {}e-4)", shown.0, shown.1))
}

// ---- 2 -------------------------------------------------------------------

fn overheads() -> Check {
    let enc = presets::boringssl::<f64>();
    let slow = presets::ethernet_multipair::<f64>().rendezvous;
    let fast = presets::ib::<f64>().rendezvous;
    let pct = |h| (100.0 * overhead_single_large(&enc, &h).unwrap()).round();
    let (a, b) = (pct(slow), pct(fast));
    // ±1 percentage point
    ensure((a - 86.0).abs() <= 1.0, || format!("6.9/8.0 gave {a}%"))?;
    ensure((b - 221.0).abs() <= 1.0, || format!("6.9/3.12 gave {b}%"))?;
    Ok(format!("{a}% and {b}%"))
}

// ---- 3 -------------------------------------------------------------------

fn maxrate_numbers() -> Check {
    let m = 2u64 << 20;
    let table = presets::boringssl_maxrate::<f64>();
    // oracle: large class (3.44, 1502.21, 1262.59), 8 threads, 2 MiB
    let t_enc_hand: f64 = 3.44 + 8.0 * 2_097_152.0 / (1502.21 + 7.0 * 1262.59);
    let t_enc = eval_maxrate(&table, 8, m);
    ensure((t_enc - t_enc_hand).abs() < 1e-9, || format!("T_enc {t_enc} vs hand {t_enc_hand}"))?;
    ensure((t_enc - 1626.0).abs() <= 0.5, || format!("T_enc {t_enc}"))?;

    // oracle: IB multiple-pair rendezvous (2.38, 2.78e-4) at k·m = 8·2 MiB
    let t_comm_hand: f64 = 2.38 + 2.78e-4 * 8.0 * 2_097_152.0;
    let hand = t_comm_hand.max(t_enc_hand / 2.0) + t_enc_hand / 2.0;
    let p = predict_multipair(&presets::ib_multipair::<f64>(), &table, 8, m);
    ensure((p.micros - hand).abs() < 1e-9, || format!("multipair {} vs hand {hand}", p.micros))?;
    ensure((p.micros - 5479.7).abs() <= 1.0, || format!("multipair {}", p.micros))?;
    Ok(format!("T_enc {t_enc:.2} µs, multipair {:.2} µs", p.micros))
}

// ---- 4 -------------------------------------------------------------------

/// Exhaustive (α, A, B) grid: 20 linear α steps, 40 log steps for A and
/// B, plus B = 0. Returns the smallest residual.
fn grid_oracle(pts: &[MaxRatePoint<f64>]) -> f64 {
    let rates: Vec<f64> = pts.iter().filter(|p| p.m > 0).map(|p| p.k as f64 * p.m as f64 / p.latency).collect();
    let rmin = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let rmax = rates.iter().cloned().fold(0.0, f64::max);
    let ymin = pts.iter().map(|p| p.latency).fold(f64::INFINITY, f64::min);
    let logs = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
    };
    let mut b_grid = vec![0.0];
    b_grid.extend(logs(rmin / 100.0, rmax * 10.0, 39));
    let mut best = f64::INFINITY;
    for i in 0..20 {
        let al = ymin * i as f64 / 19.0;
        for &a in &logs(rmin / 10.0, rmax * 10.0, 40) {
            for &b in &b_grid {
                best = best.min(maxrate_sse(&MaxRateClassParams::new(al, a, b), pts));
            }
        }
    }
    best
}

/// Worst relative error over (α, A, B); a true B of 0 is scored as B/A.
fn class_error(got: &MaxRateClassParams<f64>, truth: &MaxRateClassParams<f64>) -> f64 {
    let b = if truth.b == 0.0 { got.b / got.a } else { rel(got.b, truth.b) };
    rel(got.alpha_enc, truth.alpha_enc).max(rel(got.a, truth.a)).max(b)
}

fn comm_presets() -> [(&'static str, secmsg::PhasedHockneyParams); 4] {
    [
        ("ethernet", presets::ethernet()),
        ("ib", presets::ib()),
        ("ethernet-multipair", presets::ethernet_multipair()),
        ("ib-multipair", presets::ib_multipair()),
    ]
}

fn enc_presets() -> [(&'static str, secmsg::EncDecLineParams); 4] {
    [
        ("boringssl", presets::boringssl()),
        ("libsodium", presets::libsodium()),
        ("cryptopp-mpich", presets::cryptopp_mpich()),
        ("cryptopp-mvapich", presets::cryptopp_mvapich()),
    ]
}

fn hockney_error(s: &[LatencySample], p: &secmsg::PhasedHockneyParams) -> Result<f64, String> {
    let f = fit_hockney::<f64>(s, 131_072).map_err(|e| e.to_string())?.params;
    Ok([
        rel(f.eager.alpha, p.eager.alpha),
        rel(f.eager.beta, p.eager.beta),
        rel(f.rendezvous.alpha, p.rendezvous.alpha),
        rel(f.rendezvous.beta, p.rendezvous.beta),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

fn enc_error(s: &[LatencySample], p: &secmsg::EncDecLineParams) -> Result<f64, String> {
    let f = fit_encdec_line::<f64>(s).map_err(|e| e.to_string())?.params;
    Ok(rel(f.alpha_enc, p.alpha_enc).max(rel(f.beta_enc, p.beta_enc)))
}

fn fit_recovery() -> Check {
    const EXACT: f64 = 1e-4;
    const NOISY: f64 = 0.10;
    const NOISE: f64 = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_exact = 0.0f64;
    let mut worst_noisy = 0.0f64;
    let note = |name: &str, err: f64, tol: f64, worst: &mut f64| -> Result<(), String> {
        *worst = worst.max(err);
        ensure(err <= tol, || format!("{name}: relative error {err:.3e} > {tol}"))
    };

    for (name, p) in comm_presets() {
        let mut s = line(p.eager.alpha, p.eager.beta, &pow2(0, 16), 1, 0.0, &mut rng);
        s.extend(line(p.rendezvous.alpha, p.rendezvous.beta, &pow2(17, 21), 1, 0.0, &mut rng));
        note(name, hockney_error(&s, &p)?, EXACT, &mut worst_exact)?;

        // α is a small share of rendezvous latency, so the sweep crowds the
        // threshold and repeats often
        let mut s = line(p.eager.alpha, p.eager.beta, &pow2(0, 16), 50, NOISE, &mut rng);
        s.extend(line(p.rendezvous.alpha, p.rendezvous.beta, &linspace(131_072, 262_144, 16), 2000, NOISE, &mut rng));
        note(&format!("{name} noisy"), hockney_error(&s, &p)?, NOISY, &mut worst_noisy)?;
    }
    for (name, p) in enc_presets() {
        let s = line(p.alpha_enc, p.beta_enc, &pow2(0, 21), 1, 0.0, &mut rng);
        note(name, enc_error(&s, &p)?, EXACT, &mut worst_exact)?;
        // beyond a few KiB the intercept drowns in 5% of β·m
        let s = line(p.alpha_enc, p.beta_enc, &pow2(0, 12), 50, NOISE, &mut rng);
        note(&format!("{name} noisy"), enc_error(&s, &p)?, NOISY, &mut worst_noisy)?;
    }

    let table = presets::boringssl_maxrate::<f64>();
    let exact_sizes = |c| match c {
        SizeClass::Small => pow2(0, 8),
        SizeClass::Moderate => pow2(9, 14),
        SizeClass::Large => pow2(15, 21),
    };
    let mut samples = Vec::new();
    for c in SizeClass::ALL {
        for q in class_points(table.class(c), &exact_sizes(c), 1, 0.0, &mut rng) {
            samples.push(sample(q.m, q.k, 0, q.latency));
        }
    }
    let f = fit_maxrate::<f64>(&samples).map_err(|e| e.to_string())?;
    for c in SizeClass::ALL {
        note(&format!("max-rate {c}"), class_error(f.params.class(c), table.class(c)), EXACT, &mut worst_exact)?;
    }

    let mut ratio = 0.0f64;
    for c in SizeClass::ALL {
        let truth = table.class(c);
        let sizes = match c {
            SizeClass::Large => {
                let mut v = linspace(32_768, 65_536, 9);
                v.extend([131_072, 524_288, 2_097_152]);
                v
            }
            _ => exact_sizes(c),
        };
        let pts = class_points(truth, &sizes, 200, NOISE, &mut rng);
        let got = fit_maxrate_class(&pts, c).map_err(|e| e.to_string())?;
        note(&format!("max-rate {c} noisy"), class_error(&got.params, truth), NOISY, &mut worst_noisy)?;

        // residual against the exhaustive grid, on a smaller sample
        let pts = class_points(truth, &exact_sizes(c), 5, NOISE, &mut rng);
        let got = fit_maxrate_class(&pts, c).map_err(|e| e.to_string())?;
        let oracle = grid_oracle(&pts);
        ratio = ratio.max(got.sse / oracle);
        ensure(got.sse <= 1.05 * oracle, || format!("{c}: solver {} vs grid {oracle}", got.sse))?;
    }
    Ok(format!(
        "noiseless worst {worst_exact:.1e}, 5% noise worst {:.1}%, solver/grid residual ≤ {ratio:.3}",
        100.0 * worst_noisy
    ))
}

// ---- 5 -------------------------------------------------------------------

fn aead_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    let k = SecretKey::new(&key).unwrap();
    let ring = AeadProvider::new(Backend::Ring, &k).unwrap();
    let rc = AeadProvider::new(Backend::RustCrypto, &k).unwrap();
    let mut lengths = std::collections::BTreeSet::new();
    for i in 0..10_000 {
        let len = rng.gen_range(0..4096);
        let mut msg = vec![0u8; len];
        rng.fill_bytes(&mut msg);
        let (seal, open) = if i % 2 == 0 { (&ring, &rc) } else { (&rc, &ring) };
        let f = seal.seal_to_bytes(&msg).map_err(|e| e.to_string())?;
        ensure(f.len() == len + FRAME_OVERHEAD, || format!("length {len} expanded to {}", f.len()))?;
        ensure(open.open_bytes(&f).as_deref() == Ok(&msg[..]), || format!("round trip {i} failed"))?;
        lengths.insert(len);
    }
    let mut rejected = 0;
    for p in [&ring, &rc] {
        let frame = p.seal_to_bytes(&[0xa5; 64 - FRAME_OVERHEAD]).unwrap();
        ensure(frame.len() == 64, || "frame is not 64 bytes".into())?;
        for i in 0..frame.len() {
            for mask in 1..=255u8 {
                let mut t = frame.clone();
                t[i] ^= mask;
                ensure(p.open_bytes(&t) == Err(AeadError::Integrity), || format!("flip {mask:#04x} at {i} accepted"))?;
                rejected += 1;
            }
        }
    }
    Ok(format!(
        "10000 round trips over {} lengths, {rejected}/{rejected} tampered frames rejected, +{FRAME_OVERHEAD} B",
        lengths.len()
    ))
}

// ---- 6 -------------------------------------------------------------------

fn element(src: usize, dst: usize, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    ChaCha8Rng::seed_from_u64((src as u64) << 40 | (dst as u64) << 20 | len as u64).fill_bytes(&mut v);
    v
}

fn collectives() -> Check {
    let mut cases = 0;
    for n in [1usize, 2, 4] {
        for len in [0usize, 1, 256, 4096, 131_072] {
            let vlen = |s: usize, d: usize| if (s + d) % 2 == 0 { len } else { len / 2 };
            let out = run_local(n, GroupConfig::default(), |g| {
                let r = g.rank();
                let aead = AeadProvider::new(Backend::Ring, &SecretKey::new(&[6; 32]).unwrap()).unwrap();
                let mut bad = Vec::new();

                let send: Vec<_> = (0..n).map(|j| element(r, j, len)).collect();
                let want: Vec<_> = (0..n).map(|i| element(i, r, len)).collect();
                if encrypted_alltoall(&g, &aead, &send).unwrap() != want {
                    bad.push("alltoall");
                }
                let want: Vec<_> = (0..n).map(|i| element(i, i, len)).collect();
                if encrypted_allgather(&g, &aead, &element(r, r, len)).unwrap() != want {
                    bad.push("allgather");
                }
                for root in 0..n {
                    let payload = element(root, n, len);
                    let body = (r == root).then_some(payload.as_slice());
                    if encrypted_bcast(&g, &aead, root, body).unwrap() != payload {
                        bad.push("bcast");
                    }
                }
                let send: Vec<_> = (0..n).map(|j| element(r, j, vlen(r, j))).collect();
                let recv_lens: Vec<_> = (0..n).map(|i| vlen(i, r)).collect();
                let want: Vec<_> = (0..n).map(|i| element(i, r, vlen(i, r))).collect();
                if encrypted_alltoallv(&g, &aead, &send, &recv_lens).unwrap() != want {
                    bad.push("alltoallv");
                }
                bad
            })
            .map_err(|e| e.to_string())?;
            for (r, bad) in out.into_iter().enumerate() {
                ensure(bad.is_empty(), || format!("n={n} len={len} rank {r}: {bad:?} differ from the oracle"))?;
            }
            cases += 1;
        }
    }
    Ok(format!("4 collectives × {cases} (n, ℓ) cases match the in-memory oracle"))
}

// ---- 7 -------------------------------------------------------------------

fn methodology() -> Check {
    let policy = StopPolicy::default();
    let r = run_until_stable(&policy, 8, 1, |_| Ok::<_, BenchError>(7.0)).map_err(|e| e.to_string())?;
    ensure((r.runs(), r.stop_reason) == (20, StopReason::StddevOk), || format!("constant: {} runs, {}", r.runs(), r.stop_reason))?;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(100.0f64, 20.0).unwrap();
        let r = run_until_stable(&policy, 8, 1, |_| Ok::<_, BenchError>(d.sample(&mut rng).max(1e-3)))
            .map_err(|e| e.to_string())?;
        ensure(r.stop_reason == StopReason::CiOk, || format!("CV 0.20 seed {seed}: {}", r.stop_reason))?;
    }

    // encrypted vs plain ping-pong at 2 MiB, scale 0.01
    let size = 2usize << 20;
    let cfg = PingPong { size, rounds: default_pingpong_rounds(size, 0.01), initiator: 0 };
    let key = SecretKey::new(&[7; 32]).unwrap();
    let out = run_local(2, GroupConfig::default(), |g| {
        let enc = Security::Encrypted(AeadProvider::new(Backend::Ring, &key).unwrap());
        [Security::Plain, enc].map(|sec| {
            run_until_stable(&policy, size as u64, 1, |_| pingpong(&g, &sec, &cfg)).unwrap()
        })
    })
    .map_err(|e| e.to_string())?;
    let [plain, enc] = &out[0];
    for r in [plain, enc] {
        ensure(r.stop_reason != StopReason::Budget, || format!("2 MiB run did not stabilize ({} runs)", r.runs()))?;
    }
    ensure(enc.mean >= plain.mean, || format!("encrypted {} µs < plain {} µs", enc.mean, plain.mean))?;

    // throughput counts plaintext bytes while the wire carries frames
    let (len, rounds) = (4096usize, 30usize);
    let out = run_local(2, GroupConfig::default(), |g| {
        let sec = Security::Encrypted(AeadProvider::new(Backend::Ring, &key).unwrap());
        g.barrier().unwrap();
        let before = g.wire_stats().body_bytes_sent;
        let lat = pingpong(&g, &sec, &PingPong { size: len, rounds, initiator: 0 }).unwrap();
        g.barrier().unwrap();
        (lat, g.wire_stats().body_bytes_sent - before)
    })
    .map_err(|e| e.to_string())?;
    let (lat, sent) = out[0];
    let per_rank = (rounds + warmup_rounds(rounds)) as u64;
    // each round sends one frame; the trailing 8 bytes agree on the latency
    ensure(sent == per_rank * (len + FRAME_OVERHEAD) as u64 + 8, || format!("wire carried {sent} bytes"))?;
    let tp = throughput(len as u64, lat).map_err(|e| e.to_string())?;
    ensure(tp == len as f64 / lat, || "throughput does not use plaintext bytes".into())?;
    Ok(format!(
        "constant → 20 runs STDDEV_OK, CV 0.20 → CI_OK, 2 MiB plain {:.0} µs ({}) ≤ encrypted {:.0} µs ({}), wire {sent} B",
        plain.mean, plain.stop_reason, enc.mean, enc.stop_reason
    ))
}

// ---- 8 -------------------------------------------------------------------

fn secmsg(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_secmsg"))
        .args(args)
        .current_dir(dir)
        .env_remove("SECMSG_KEY")
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure(out.status.success(), || {
        format!("`secmsg {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(stdout)
}

fn overall_mape(stdout: &str) -> Result<f64, String> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("overall "))
        .and_then(|v| v.trim_end_matches('%').parse().ok())
        .ok_or_else(|| format!("no overall error in:\n{stdout}"))
}

fn pipeline() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let sizes = "1,1024,16384,131072,1048576";
    let common = ["--sizes", sizes, "--scale", "0.01"];
    let with = |head: &[&'static str]| -> Vec<&'static str> { [head, &common[..]].concat() };

    secmsg(d, &with(&["bench", "pingpong", "--local", "--plain", "--out", "plain.csv"]))?;
    secmsg(d, &["fit", "hockney", "--input", "plain.csv", "--out", "params.json"])?;
    secmsg(d, &with(&["bench", "encdec", "--out", "encdec.csv"]))?;
    secmsg(d, &["fit", "encdec", "--input", "encdec.csv", "--out", "params.json"])?;
    secmsg(d, &with(&["bench", "pingpong", "--local", "--out", "enc.csv"]))?;
    secmsg(d, &["predict", "--params", "params.json", "--sizes", sizes])?;
    let plain = overall_mape(&secmsg(d, &["validate", "--input", "plain.csv", "--model", "hockney", "--params", "params.json"])?)?;
    let enc = overall_mape(&secmsg(
        d,
        &["validate", "--input", "enc.csv", "--model", "enhanced", "--params", "params.json", "--out", "report.csv"],
    )?)?;
    ensure(plain.is_finite() && enc.is_finite(), || format!("MAPE {plain} / {enc}"))?;

    // format round trips
    for f in ["plain.csv", "encdec.csv", "enc.csv"] {
        let text = std::fs::read(d.join(f)).map_err(|e| e.to_string())?;
        let samples = load_samples(d.join(f)).map_err(|e| e.to_string())?;
        let mut again = Vec::new();
        write_samples(&mut again, &samples).map_err(|e| e.to_string())?;
        ensure(again == text, || format!("{f} does not round-trip byte for byte"))?;
        ensure(read_samples(again.as_slice()).map_err(|e| e.to_string())? == samples, || format!("{f} reread differs"))?;
    }
    let params = ParamFile::load(d.join("params.json")).map_err(|e| e.to_string())?;
    ensure(params.hockney.is_some() && params.encdec.is_some(), || "fits did not merge".into())?;
    ensure(ParamFile::parse(&params.to_json()).map_err(|e| e.to_string())? == params, || "params.json round trip".into())?;
    let report = std::fs::read_to_string(d.join("report.csv")).map_err(|e| e.to_string())?;
    let rows = report.lines().skip(1).count();
    ensure(rows == sizes.split(',').count(), || format!("report has {rows} rows"))?;
    Ok(format!("MAPE plain {plain:.2}%, encrypted {enc:.2}%"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "enhanced composition", Duration::from_secs(1), composition),
        (2, "overhead estimates", Duration::from_secs(1), overheads),
        (3, "max-rate and multiple-pair predictions", Duration::from_secs(1), maxrate_numbers),
        (4, "fit recovery", Duration::from_secs(30), fit_recovery),
        (5, "AEAD suite", Duration::from_secs(30), aead_suite),
        (6, "encrypted collectives vs oracle", Duration::from_secs(120), collectives),
        (7, "benchmark methodology", Duration::from_secs(300), methodology),
        (8, "bench → fit → predict → validate", Duration::from_secs(300), pipeline),
    ];
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let result = result.and_then(|d| {
            if took <= limit {
                Ok(d)
            } else {
                Err(format!("{d}; took {took:.1?}, limit {limit:?}"))
            }
        });
        match result {
            Ok(d) => println!("PASS {n} {name}: {d} [{took:.2?} ≤ {limit:?}]"),
            Err(e) => {
                failed += 1;
                println!("FAIL {n} {name}: {e} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
