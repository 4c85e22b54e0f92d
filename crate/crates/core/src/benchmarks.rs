//! Measurement harness: ping-pong, multiple-pair, encrypt/decrypt and
//! collective timings, the run-until-stable stopping rule, and the samples
//! CSV format.
//!
//! All latencies are microseconds measured with a monotonic clock. Networked
//! benchmarks return the same value on every rank (the slowest rank's time),
//! so every rank reaches the same stopping decision without extra messages.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::aead::{AeadError, AeadProvider, Backend, SecretKey};
use crate::collectives::{self, CollectiveError};
use crate::transport::{waitall, ProcessGroup, Request, Security, TransportError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Collective(#[from] CollectiveError),
    #[error(transparent)]
    Aead(#[from] AeadError),
    #[error("{0}")]
    Domain(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    pub fn is_integrity(&self) -> bool {
        match self {
            BenchError::Transport(e) => e.is_integrity(),
            BenchError::Collective(e) => e.is_integrity(),
            BenchError::Aead(e) => matches!(e, AeadError::Integrity),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

const TAG_PINGPONG: u32 = 1;
const TAG_MULTIPAIR: u32 = 2;
const TAG_MULTIPAIR_ACK: u32 = 3;

/// Messages in flight per multiple-pair iteration.
pub const WINDOW: usize = 64;

/// One timed run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    #[serde(rename = "size_bytes")]
    pub message_size: u64,
    pub k_pairs: u32,
    pub run_index: u32,
    #[serde(rename = "latency_us")]
    pub latency: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    StddevOk,
    CiOk,
    Budget,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::StddevOk => "STDDEV_OK",
            StopReason::CiOk => "CI_OK",
            StopReason::Budget => "BUDGET",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopPolicy {
    pub min_runs: usize,
    pub max_runs_phase1: usize,
    pub cv_target: f64,
    pub ci_level: f64,
    pub hard_budget: usize,
}

impl Default for StopPolicy {
    fn default() -> Self {
        Self {
            min_runs: 20,
            max_runs_phase1: 100,
            cv_target: 0.05,
            ci_level: 0.99,
            hard_budget: 1000,
        }
    }
}

impl StopPolicy {
    /// The encrypt/decrypt benchmark repeats at least 5 times.
    pub fn encdec() -> Self {
        Self {
            min_runs: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.min_runs >= 1
            && self.min_runs <= self.max_runs_phase1
            && self.max_runs_phase1 <= self.hard_budget
            && self.cv_target > 0.0
            && self.ci_level > 0.0
            && self.ci_level < 1.0;
        if ok {
            Ok(())
        } else {
            Err(BenchError::Domain(format!("inconsistent stop policy {self:?}")))
        }
    }

    /// Two-sided normal quantile for `ci_level`.
    pub fn z(&self) -> f64 {
        let n = Normal::new(0.0, 1.0).expect("standard normal");
        n.inverse_cdf(1.0 - (1.0 - self.ci_level) / 2.0)
    }

    /// Stopping decision after `xs.len()` runs, or `None` to keep going.
    pub fn decide(&self, xs: &[f64]) -> Option<StopReason> {
        let n = xs.len();
        if n < self.min_runs {
            return None;
        }
        let (mean, sd) = mean_stddev(xs);
        let bound = self.cv_target * mean;
        if n <= self.max_runs_phase1 && sd <= bound {
            return Some(StopReason::StddevOk);
        }
        if n > self.max_runs_phase1 && self.z() * sd / (n as f64).sqrt() <= bound {
            return Some(StopReason::CiOk);
        }
        (n >= self.hard_budget).then_some(StopReason::Budget)
    }
}

/// Arithmetic mean and sample (n − 1) standard deviation.
pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkResult {
    pub samples: Vec<LatencySample>,
    pub mean: f64,
    pub stddev: f64,
    pub ci99_halfwidth: f64,
    pub stop_reason: StopReason,
}

impl BenchmarkResult {
    pub fn runs(&self) -> usize {
        self.samples.len()
    }

    /// Throughput of the mean latency.
    pub fn throughput(&self) -> Result<f64> {
        let size = self.samples.first().map_or(0, |s| s.message_size);
        let k = self.samples.first().map_or(1, |s| s.k_pairs);
        throughput(size * u64::from(k), self.mean)
    }
}

/// Runs `measure(run_index)` until `policy` says stop.
pub fn run_until_stable<E>(
    policy: &StopPolicy,
    message_size: u64,
    k_pairs: u32,
    mut measure: impl FnMut(usize) -> std::result::Result<f64, E>,
) -> std::result::Result<BenchmarkResult, E>
where
    E: From<BenchError>,
{
    policy.validate()?;
    let mut xs = Vec::with_capacity(policy.min_runs);
    let stop_reason = loop {
        let x = measure(xs.len())?;
        if !(x.is_finite() && x > 0.0) {
            return Err(BenchError::Domain(format!("run {} measured {x} µs", xs.len())).into());
        }
        xs.push(x);
        if let Some(r) = policy.decide(&xs) {
            break r;
        }
    };
    let (mean, stddev) = mean_stddev(&xs);
    log::debug!("size {message_size} k {k_pairs}: {stop_reason} after {} runs, mean {mean:.3} µs", xs.len());
    Ok(BenchmarkResult {
        samples: xs
            .iter()
            .enumerate()
            .map(|(i, &latency)| LatencySample {
                message_size,
                k_pairs,
                run_index: i as u32,
                latency,
            })
            .collect(),
        mean,
        stddev,
        ci99_halfwidth: policy.z() * stddev / (xs.len() as f64).sqrt(),
        stop_reason,
    })
}

/// MB/s (10⁶ bytes) for `size` plaintext bytes taking `latency` µs.
pub fn throughput(size: u64, latency: f64) -> Result<f64> {
    if size == 0 {
        return Err(BenchError::Domain("throughput of a 0-byte message is undefined".into()));
    }
    if !(latency > 0.0) {
        return Err(BenchError::Domain(format!("latency must be positive, got {latency}")));
    }
    Ok(size as f64 / latency)
}

/// Untimed warm-up rounds before each run: 10%, at least 10.
pub fn warmup_rounds(rounds: usize) -> usize {
    (rounds / 10).max(10)
}

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(1)
}

/// 10 000 rounds below 1 MiB, 1 000 from 1 MiB up, times `scale`.
pub fn default_pingpong_rounds(size: usize, scale: f64) -> usize {
    scaled(if size < 1 << 20 { 10_000 } else { 1_000 }, scale)
}

pub fn default_iterations(scale: f64) -> usize {
    scaled(100, scale)
}

pub fn default_encdec_iterations(scale: f64) -> usize {
    scaled(500_000, scale)
}

/// Every rank learns the largest value any rank contributed.
pub fn agree_max(g: &ProcessGroup, x: f64) -> Result<f64> {
    let all = collectives::allgather(g, &x.to_le_bytes())?;
    Ok(all
        .iter()
        .map(|b| f64::from_le_bytes(b.as_slice().try_into().unwrap_or([0; 8])))
        .fold(f64::NEG_INFINITY, f64::max))
}

fn payload(size: usize) -> Vec<u8> {
    (0..size).map(|i| (i as u8).wrapping_mul(31).wrapping_add(7)).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct PingPong {
    pub size: usize,
    pub rounds: usize,
    /// Which of ranks 0 and 1 starts each round trip.
    pub initiator: usize,
}

/// One ping-pong run between ranks 0 and 1: µs per one-way message, i.e.
/// elapsed / (2 × rounds). Ranks beyond 1 only join the final agreement.
pub fn pingpong(g: &ProcessGroup, security: &Security, cfg: &PingPong) -> Result<f64> {
    if g.size() < 2 || cfg.initiator > 1 || cfg.rounds == 0 {
        return Err(BenchError::Domain(
            "ping-pong needs ranks 0 and 1, initiator 0 or 1 and rounds ≥ 1".into(),
        ));
    }
    let ch = g.channel(security);
    let me = g.rank();
    let mut elapsed = 0.0;
    if me <= 1 {
        let peer = 1 - me;
        let buf = payload(cfg.size);
        let lead = me == cfg.initiator;
        let round = || -> Result<()> {
            if lead {
                ch.send(peer, TAG_PINGPONG, &buf)?;
                ch.recv(peer, TAG_PINGPONG)?;
            } else {
                let m = ch.recv(peer, TAG_PINGPONG)?;
                ch.send(peer, TAG_PINGPONG, &m)?;
            }
            Ok(())
        };
        for _ in 0..warmup_rounds(cfg.rounds) {
            round()?;
        }
        let t0 = Instant::now();
        for _ in 0..cfg.rounds {
            round()?;
        }
        if lead {
            elapsed = t0.elapsed().as_secs_f64() * 1e6 / (2 * cfg.rounds) as f64;
        }
    }
    agree_max(g, elapsed)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultipairTiming {
    /// Elapsed / iterations, one 64-message window plus the reply.
    pub round_us: f64,
    /// `round_us / 64`, the unit the multiple-pair model predicts.
    pub per_message_us: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Multipair {
    pub k: usize,
    pub size: usize,
    pub iterations: usize,
}

/// One multiple-pair run. Rank `i < k` sends to rank `i + k`; each iteration
/// posts 64 non-blocking sends, waits for them, and waits for a one-byte
/// reply sent once the receiver has all 64 messages.
pub fn multipair(g: &ProcessGroup, security: &Security, cfg: &Multipair) -> Result<MultipairTiming> {
    let Multipair { k, size, iterations } = *cfg;
    if k == 0 || g.size() < 2 * k || iterations == 0 {
        return Err(BenchError::Domain(format!(
            "multipair with k={k} needs {} ranks and iterations ≥ 1, group has {}",
            2 * k,
            g.size()
        )));
    }
    let ch = g.channel(security);
    let me = g.rank();
    let buf = payload(size);
    let iteration = |sender: bool| -> Result<()> {
        if sender {
            let peer = me + k;
            let mut reqs: Vec<Request> = (0..WINDOW)
                .map(|_| ch.isend(peer, TAG_MULTIPAIR, &buf).map(Request::from))
                .collect::<std::result::Result<_, _>>()?;
            waitall(&mut reqs)?;
            g.recv(peer, TAG_MULTIPAIR_ACK)?;
        } else {
            let peer = me - k;
            let mut reqs: Vec<Request> = (0..WINDOW)
                .map(|_| ch.irecv(peer, TAG_MULTIPAIR).map(Request::from))
                .collect::<std::result::Result<_, _>>()?;
            waitall(&mut reqs)?;
            g.send(peer, TAG_MULTIPAIR_ACK, &[0])?;
        }
        Ok(())
    };
    let mut elapsed = 0.0;
    if me < 2 * k {
        let sender = me < k;
        for _ in 0..warmup_rounds(iterations) {
            iteration(sender)?;
        }
        g.barrier()?;
        let t0 = Instant::now();
        for _ in 0..iterations {
            iteration(sender)?;
        }
        if sender {
            elapsed = t0.elapsed().as_secs_f64() * 1e6;
        }
    } else {
        g.barrier()?;
    }
    let round_us = agree_max(g, elapsed)? / iterations as f64;
    Ok(MultipairTiming {
        round_us,
        per_message_us: round_us / WINDOW as f64,
    })
}

/// `threads` workers each seal then open a `size`-byte buffer `iterations`
/// times with their own provider. Returns wall time / iterations in µs.
pub fn encdec_bench(
    backend: Backend,
    key: &SecretKey,
    size: usize,
    iterations: usize,
    threads: usize,
) -> Result<f64> {
    if iterations == 0 || threads == 0 {
        return Err(BenchError::Domain("iterations and threads must be ≥ 1".into()));
    }
    let providers = (0..threads)
        .map(|_| AeadProvider::new(backend, key))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let buf = payload(size);
    let barrier = std::sync::Barrier::new(threads + 1);
    let (elapsed, results) = std::thread::scope(|s| {
        let handles: Vec<_> = providers
            .iter()
            .map(|p| {
                let (buf, barrier) = (&buf, &barrier);
                s.spawn(move || -> Result<()> {
                    barrier.wait();
                    for _ in 0..iterations {
                        let f = p.seal(buf)?;
                        let back = p.open(&f)?;
                        if back.len() != buf.len() {
                            return Err(BenchError::Domain("round trip changed length".into()));
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        barrier.wait();
        let t0 = Instant::now();
        let results: Vec<Result<()>> = handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(BenchError::Domain("worker panicked".into()))))
            .collect();
        (t0.elapsed(), results)
    });
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(elapsed.as_secs_f64() * 1e6 / iterations as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollectiveOp {
    Alltoall,
    Alltoallv,
    Allgather,
    Bcast,
}

impl std::str::FromStr for CollectiveOp {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alltoall" => Ok(Self::Alltoall),
            "alltoallv" => Ok(Self::Alltoallv),
            "allgather" => Ok(Self::Allgather),
            "bcast" => Ok(Self::Bcast),
            _ => Err(BenchError::Domain(format!(
                "unknown collective `{s}` (alltoall, alltoallv, allgather, bcast)"
            ))),
        }
    }
}

/// Mean µs per call over `iterations` calls of `op` with `size`-byte
/// elements, with a barrier between calls that is not timed.
pub fn collective_bench(
    g: &ProcessGroup,
    security: &Security,
    op: CollectiveOp,
    size: usize,
    iterations: usize,
) -> Result<f64> {
    if iterations == 0 {
        return Err(BenchError::Domain("iterations must be ≥ 1".into()));
    }
    let n = g.size();
    let elems: Vec<Vec<u8>> = vec![payload(size); n];
    let lens = vec![size; n];
    let call = || -> Result<()> {
        use collectives::*;
        match (op, security) {
            (CollectiveOp::Alltoall, Security::Plain) => drop(alltoall(g, &elems)?),
            (CollectiveOp::Alltoall, Security::Encrypted(a)) => {
                drop(encrypted_alltoall(g, a, &elems)?)
            }
            (CollectiveOp::Alltoallv, Security::Plain) => drop(alltoallv(g, &elems, &lens)?),
            (CollectiveOp::Alltoallv, Security::Encrypted(a)) => {
                drop(encrypted_alltoallv(g, a, &elems, &lens)?)
            }
            (CollectiveOp::Allgather, Security::Plain) => drop(allgather(g, &elems[0])?),
            (CollectiveOp::Allgather, Security::Encrypted(a)) => {
                drop(encrypted_allgather(g, a, &elems[0])?)
            }
            (CollectiveOp::Bcast, sec) => {
                let body = (g.rank() == 0).then_some(elems[0].as_slice());
                match sec {
                    Security::Plain => drop(bcast(g, 0, body)?),
                    Security::Encrypted(a) => drop(encrypted_bcast(g, a, 0, body)?),
                }
            }
        }
        Ok(())
    };
    for _ in 0..warmup_rounds(iterations).min(iterations) {
        call()?;
    }
    let mut total = 0.0;
    for _ in 0..iterations {
        g.barrier()?;
        let t0 = Instant::now();
        call()?;
        total += t0.elapsed().as_secs_f64() * 1e6;
    }
    agree_max(g, total / iterations as f64)
}

fn sort_samples(samples: &mut [LatencySample]) {
    samples.sort_by_key(|s| (s.message_size, s.k_pairs, s.run_index));
}

/// Writes the samples CSV ordered by size, then k, then run index.
pub fn write_samples<W: Write>(w: W, samples: &[LatencySample]) -> Result<()> {
    let mut rows = samples.to_vec();
    sort_samples(&mut rows);
    let mut wr = csv::Writer::from_writer(w);
    for r in &rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(r: R) -> Result<Vec<LatencySample>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let rows = rd
        .deserialize()
        .collect::<std::result::Result<Vec<LatencySample>, _>>()?;
    if let Some(bad) = rows.iter().find(|s| !(s.latency > 0.0) || s.k_pairs == 0) {
        return Err(BenchError::Domain(format!("invalid sample row {bad:?}")));
    }
    Ok(rows)
}

pub fn save_samples(path: impl AsRef<Path>, samples: &[LatencySample]) -> Result<()> {
    write_samples(std::fs::File::create(path)?, samples)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<LatencySample>> {
    read_samples(std::fs::File::open(path)?)
}

/// Mean latency per (size, k), ordered by size then k. Each group is summed
/// in sorted order so the result does not depend on row order.
pub fn mean_by_key(samples: &[LatencySample]) -> Vec<((u64, u32), f64)> {
    let mut groups: std::collections::BTreeMap<(u64, u32), Vec<f64>> = Default::default();
    for s in samples {
        groups.entry((s.message_size, s.k_pairs)).or_default().push(s.latency);
    }
    groups
        .into_iter()
        .map(|(key, mut xs)| {
            xs.sort_by(f64::total_cmp);
            (key, mean_stddev(&xs).0)
        })
        .collect()
}
