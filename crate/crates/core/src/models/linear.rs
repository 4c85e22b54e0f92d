use std::collections::BTreeSet;

use super::{
    EncDecLineParams, HockneyParams, ModelError, Phase, Phased, PhasedHockneyParams, Result,
};
use crate::benchmarks::LatencySample;
use crate::scalar::Scalar;

/// How a least-squares line was pulled back into the nonnegative quadrant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Adjustment {
    #[default]
    None,
    /// α came out negative, so α is the mean 1-byte latency and β was refit
    /// with α held fixed.
    OneByteAlpha,
    /// β came out negative, so β = 0 and α is the mean latency.
    ZeroBeta,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HockneyFit<T> {
    pub params: PhasedHockneyParams<T>,
    pub eager: Adjustment,
    pub rendezvous: Adjustment,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit<T> {
    pub params: EncDecLineParams<T>,
    pub adjustment: Adjustment,
}

/// Ordinary least squares on centered data.
fn ols<T: Scalar>(pts: &[(T, T)]) -> (T, T) {
    let n = T::of_u64(pts.len() as u64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: T = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let beta = sxy / sxx;
    (my - beta * mx, beta)
}

/// Nonnegative line through `pts`. `one_byte` is the fallback intercept.
fn fit_line<T: Scalar>(
    pts: &[(T, T)],
    one_byte: Option<T>,
    what: &str,
) -> Result<(HockneyParams<T>, Adjustment)> {
    let distinct: BTreeSet<u64> = pts.iter().map(|p| p.0.as_f64().to_bits()).collect();
    if distinct.len() < 2 {
        return Err(ModelError::Underdetermined(format!(
            "{what} needs at least 2 distinct sizes, got {}",
            distinct.len()
        )));
    }
    let (alpha, beta) = ols(pts);
    if alpha < T::zero() {
        let alpha = one_byte.ok_or_else(|| {
            ModelError::Underdetermined(format!(
                "{what}: intercept is negative and there is no 1-byte sample to fall back on"
            ))
        })?;
        let sxy: T = pts.iter().map(|&(x, y)| x * (y - alpha)).sum();
        let sxx: T = pts.iter().map(|&(x, _)| x * x).sum();
        let beta = (sxy / sxx).max(T::zero());
        return Ok((HockneyParams::new(alpha, beta), Adjustment::OneByteAlpha));
    }
    if beta < T::zero() {
        let n = T::of_u64(pts.len() as u64);
        let mean = pts.iter().map(|p| p.1).sum::<T>() / n;
        return Ok((HockneyParams::new(mean, T::zero()), Adjustment::ZeroBeta));
    }
    Ok((HockneyParams::new(alpha, beta), Adjustment::None))
}

fn mean_one_byte<T: Scalar>(samples: &[LatencySample]) -> Option<T> {
    let ones: Vec<f64> = samples
        .iter()
        .filter(|s| s.message_size == 1)
        .map(|s| s.latency)
        .collect();
    (!ones.is_empty()).then(|| T::lit(ones.iter().sum::<f64>() / ones.len() as f64))
}

/// Fits one line per phase by least squares against k·m, where the phase
/// is picked by m alone (k = 1 for ping-pong data).
pub fn fit_hockney<T: Scalar>(samples: &[LatencySample], threshold: u64) -> Result<HockneyFit<T>> {
    if threshold == 0 {
        return Err(ModelError::Domain("threshold must be positive".into()));
    }
    let one_byte = mean_one_byte::<T>(samples);
    let fit = |phase: Phase| {
        let pts: Vec<(T, T)> = samples
            .iter()
            .filter(|s| Phase::of(s.message_size, threshold) == phase)
            .map(|s| {
                let km = T::of_u64(s.message_size) * T::of_u64(u64::from(s.k_pairs));
                (km, T::lit(s.latency))
            })
            .collect();
        fit_line(&pts, one_byte, &format!("{phase} phase"))
    };
    let (eager, ea) = fit(Phase::Eager)?;
    let (rendezvous, ra) = fit(Phase::Rendezvous)?;
    Ok(HockneyFit {
        params: Phased {
            eager,
            rendezvous,
            threshold,
        },
        eager: ea,
        rendezvous: ra,
    })
}

/// Fits the single-thread encrypt+decrypt line (rows with k = 1).
pub fn fit_encdec_line<T: Scalar>(samples: &[LatencySample]) -> Result<LineFit<T>> {
    let single: Vec<LatencySample> = samples.iter().filter(|s| s.k_pairs == 1).copied().collect();
    let pts: Vec<(T, T)> = single
        .iter()
        .map(|s| (T::of_u64(s.message_size), T::lit(s.latency)))
        .collect();
    let (line, adjustment) = fit_line(&pts, mean_one_byte(&single), "encryption line")?;
    Ok(LineFit {
        params: EncDecLineParams::new(line.alpha, line.beta),
        adjustment,
    })
}
