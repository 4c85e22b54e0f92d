use std::path::PathBuf;

use secmsg::aead::{AeadProvider, Backend, SecretKey};
use secmsg::benchmarks::{
    self as b, BenchError, BenchmarkResult, CollectiveOp, Multipair, PingPong, StopPolicy,
};
use secmsg::transport::{run_local, GroupConfig, ProcessGroup, Roster, Security};

use crate::args::{self, BenchArgs, BenchKind, Op};
use crate::fail::{Failure, Outcome};

/// Used when neither SECMSG_KEY nor --key is given.
pub const DEFAULT_KEY: &str = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";

/// Plaintext bytes one encdec worker processes per run at scale 1.
const ENCDEC_BYTES_PER_RUN: u64 = 256 << 20;

pub fn key_from(sec: &args::Security) -> Outcome<SecretKey> {
    let hex = std::env::var("SECMSG_KEY")
        .ok()
        .or_else(|| sec.key.clone())
        .unwrap_or_else(|| DEFAULT_KEY.to_string());
    SecretKey::from_hex(&hex).map_err(|e| Failure::usage(format!("invalid key: {e}")))
}

fn backend_from(sec: &args::Security) -> Outcome<Backend> {
    sec.backend.parse().map_err(|e: secmsg::aead::AeadError| Failure::usage(e.to_string()))
}

/// 500 000 seal/open pairs, capped at 256 MiB of plaintext, times `scale`.
pub fn encdec_iterations(size: u64, scale: f64) -> usize {
    let cap = (ENCDEC_BYTES_PER_RUN / size.max(1)).max(1);
    let base = 500_000u64.min(cap) as f64;
    ((base * scale).round() as usize).max(1)
}

struct Plan {
    kind: BenchKind,
    sizes: Vec<u64>,
    pairs: Vec<u32>,
    scale: f64,
    iterations: Option<usize>,
    op: CollectiveOp,
    policy: StopPolicy,
    backend: Backend,
    key: SecretKey,
    encrypt: bool,
}

impl Plan {
    fn security(&self) -> Result<Security, BenchError> {
        Ok(if self.encrypt {
            Security::Encrypted(AeadProvider::new(self.backend, &self.key)?)
        } else {
            Security::Plain
        })
    }

    fn on_group(&self, g: &ProcessGroup) -> Result<Vec<BenchmarkResult>, BenchError> {
        let sec = self.security()?;
        let mut out = Vec::new();
        for &size in &self.sizes {
            let m = size as usize;
            match self.kind {
                BenchKind::Pingpong => {
                    let rounds = self.iterations.unwrap_or(b::default_pingpong_rounds(m, self.scale));
                    let cfg = PingPong { size: m, rounds, initiator: 0 };
                    out.push(b::run_until_stable(&self.policy, size, 1, |_| b::pingpong(g, &sec, &cfg))?);
                }
                BenchKind::Multipair => {
                    for &k in &self.pairs {
                        let cfg = Multipair {
                            k: k as usize,
                            size: m,
                            iterations: self.iterations.unwrap_or(b::default_iterations(self.scale)),
                        };
                        out.push(b::run_until_stable(&self.policy, size, k, |_| {
                            b::multipair(g, &sec, &cfg).map(|t| t.per_message_us)
                        })?);
                    }
                }
                BenchKind::Collective => {
                    let iters = self.iterations.unwrap_or(b::default_iterations(self.scale));
                    out.push(b::run_until_stable(&self.policy, size, g.size() as u32, |_| {
                        b::collective_bench(g, &sec, self.op, m, iters)
                    })?);
                }
                BenchKind::Encdec => unreachable!("encdec runs without a group"),
            }
        }
        Ok(out)
    }

    fn encdec(&self) -> Result<Vec<BenchmarkResult>, BenchError> {
        let mut out = Vec::new();
        for &size in &self.sizes {
            for &k in &self.pairs {
                let iters = self.iterations.unwrap_or(encdec_iterations(size, self.scale));
                out.push(b::run_until_stable(&self.policy, size, k, |_| {
                    b::encdec_bench(self.backend, &self.key, size as usize, iters, k as usize)
                })?);
            }
        }
        Ok(out)
    }

    fn local_ranks(&self, ranks: usize) -> usize {
        match self.kind {
            BenchKind::Pingpong => 2,
            BenchKind::Multipair => 2 * self.pairs.iter().copied().max().unwrap_or(1) as usize,
            _ => ranks,
        }
    }
}

/// The first integrity failure if any rank saw one, else the first error.
fn first_failure(results: Vec<Result<Vec<BenchmarkResult>, BenchError>>) -> Outcome<Vec<BenchmarkResult>> {
    let mut first = None;
    let mut ok = None;
    for r in results {
        match r {
            Ok(v) => {
                ok.get_or_insert(v);
            }
            Err(e) if e.is_integrity() => return Err(e.into()),
            Err(e) => {
                first.get_or_insert(e);
            }
        }
    }
    match (first, ok) {
        (Some(e), _) => Err(e.into()),
        (None, Some(v)) => Ok(v),
        (None, None) => Err(Failure::runtime("no ranks ran")),
    }
}

pub fn run(a: &BenchArgs) -> Outcome {
    if a.sizes.is_empty() {
        return Err(Failure::usage("--sizes must not be empty"));
    }
    if !(a.scale > 0.0 && a.scale.is_finite()) {
        return Err(Failure::usage("--scale must be positive"));
    }
    if a.pairs.is_empty() || a.pairs.contains(&0) {
        return Err(Failure::usage("--pairs must list counts of at least 1"));
    }
    if a.kind == BenchKind::Collective && a.ranks == 0 {
        return Err(Failure::usage("--ranks must be at least 1"));
    }
    let mut policy = if a.kind == BenchKind::Encdec {
        StopPolicy::encdec()
    } else {
        StopPolicy::default()
    };
    if let Some(n) = a.min_runs {
        policy.min_runs = n;
    }
    if let Some(n) = a.hard_budget {
        // a short budget also shortens the first phase
        policy.hard_budget = n;
        policy.max_runs_phase1 = policy.max_runs_phase1.min(n);
        if a.min_runs.is_none() {
            policy.min_runs = policy.min_runs.min(n);
        }
    }
    policy.validate().map_err(|e| Failure::usage(e.to_string()))?;

    let plan = Plan {
        kind: a.kind,
        sizes: a.sizes.clone(),
        pairs: a.pairs.clone(),
        scale: a.scale,
        iterations: a.iterations,
        op: match a.op {
            Op::Alltoall => CollectiveOp::Alltoall,
            Op::Alltoallv => CollectiveOp::Alltoallv,
            Op::Allgather => CollectiveOp::Allgather,
            Op::Bcast => CollectiveOp::Bcast,
        },
        policy,
        backend: backend_from(&a.security)?,
        key: key_from(&a.security)?,
        encrypt: !a.security.plain,
    };
    let config = GroupConfig {
        phase_threshold: a.threshold,
        ..Default::default()
    };

    let (results, report) = if a.kind == BenchKind::Encdec {
        (plan.encdec()?, true)
    } else if a.local {
        let n = plan.local_ranks(a.ranks);
        let per_rank = run_local(n, config, |g| plan.on_group(&g))?;
        (first_failure(per_rank)?, true)
    } else if let (Some(path), Some(rank)) = (&a.roster, a.rank) {
        let roster = Roster::load(path)?;
        let g = ProcessGroup::init(rank, &roster, config)?;
        (plan.on_group(&g)?, rank == 0)
    } else {
        return Err(Failure::usage(format!(
            "{:?} needs --local or --roster with --rank",
            a.kind
        )));
    };

    if !report {
        return Ok(());
    }
    print_summary(a.kind, &results);
    let samples: Vec<_> = results.iter().flat_map(|r| r.samples.iter().copied()).collect();
    let out = a.out.clone().unwrap_or_else(|| {
        PathBuf::from(format!("secmsg-{}.csv", format!("{:?}", a.kind).to_lowercase()))
    });
    b::save_samples(&out, &samples)?;
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}

fn print_summary(kind: BenchKind, results: &[BenchmarkResult]) {
    let k_label = match kind {
        BenchKind::Encdec => "threads",
        BenchKind::Collective => "ranks",
        _ => "pairs",
    };
    println!(
        "{:>10} {:>7} {:>5} {:>12} {:>11} {:>11} {:>9} {:>10}",
        "size_B", k_label, "runs", "mean_us", "stddev_us", "ci99_us", "stop", "MB/s"
    );
    for r in results {
        let s = r.samples[0];
        let tp = match kind {
            BenchKind::Collective => None,
            _ => b::throughput(s.message_size * u64::from(s.k_pairs), r.mean).ok(),
        };
        println!(
            "{:>10} {:>7} {:>5} {:>12.3} {:>11.3} {:>11.3} {:>9} {:>10}",
            s.message_size,
            s.k_pairs,
            r.runs(),
            r.mean,
            r.stddev,
            r.ci99_halfwidth,
            r.stop_reason.to_string(),
            tp.map_or("-".to_string(), |t| format!("{t:.2}")),
        );
    }
}
