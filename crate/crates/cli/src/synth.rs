use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use secmsg::benchmarks::{save_samples, write_samples, LatencySample};

use crate::args::{SynthArgs, ValidateModel};
use crate::fail::{Failure, Outcome};
use crate::model::resolve;

pub fn run(a: &SynthArgs) -> Outcome {
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(Failure::usage("--noise must be a nonnegative number"));
    }
    if a.runs == 0 || a.pairs.is_empty() || a.pairs.contains(&0) || a.sizes.is_empty() {
        return Err(Failure::usage("--runs, --pairs and --sizes must be nonempty and positive"));
    }
    let s = resolve(&a.source, a.model == ValidateModel::Multipair)?;
    let noise = Normal::new(1.0, a.noise).map_err(|e| Failure::usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut samples = Vec::new();
    for &m in &a.sizes {
        for &k in &a.pairs {
            let y = s.latency(a.model, m, k)?;
            if !(y > 0.0) {
                return Err(Failure::runtime(format!("model gives {y} µs at size {m}, k {k}")));
            }
            for run in 0..a.runs {
                samples.push(LatencySample {
                    message_size: m,
                    k_pairs: k,
                    run_index: run,
                    latency: (y * noise.sample(&mut rng)).max(y * 1e-6),
                });
            }
        }
    }
    match &a.out {
        Some(p) => save_samples(p, &samples)?,
        None => write_samples(std::io::stdout().lock(), &samples)?,
    }
    Ok(())
}
