//! Bounded nonlinear least squares for the max-rate encryption model.
//!
//! Levenberg–Marquardt with Marquardt's diagonal scaling. Bounds
//! (α ≥ 0, A > 0, B ≥ 0) are handled by projecting each trial point and
//! freezing coordinates that sit on a bound with the gradient pushing out.
//! Starts come from a coarse log grid over (A, B) with α eliminated in
//! closed form.

use std::collections::BTreeSet;

use super::{MaxRateClassParams, MaxRateParams, ModelError, Result, SizeClass};
use crate::benchmarks::LatencySample;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxRatePoint<T> {
    pub k: u32,
    pub m: u64,
    pub latency: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassFit<T> {
    pub params: MaxRateClassParams<T>,
    /// Sum of squared residuals at the solution.
    pub sse: T,
    pub points: usize,
    pub starts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxRateFit<T> {
    pub params: MaxRateParams<T>,
    pub small: ClassFit<T>,
    pub moderate: ClassFit<T>,
    pub large: ClassFit<T>,
}

const MAX_ITERATIONS: usize = 2000;
const STARTS: usize = 6;

pub fn maxrate_sse<T: Scalar>(p: &MaxRateClassParams<T>, pts: &[MaxRatePoint<T>]) -> T {
    pts.iter()
        .map(|q| {
            let r = p.eval(q.k, q.m) - q.latency;
            r * r
        })
        .sum()
}

fn to_params<T: Scalar>(v: [T; 3]) -> MaxRateClassParams<T> {
    MaxRateClassParams::new(v[0], v[1], v[2])
}

/// Solves the `n`×`n` leading block of `a x = b` by Gaussian elimination
/// with partial pivoting.
fn solve<T: Scalar>(mut a: [[T; 3]; 3], mut b: [T; 3], n: usize) -> Option<[T; 3]> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == T::zero() || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[row][c] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

struct Problem<'a, T> {
    pts: &'a [MaxRatePoint<T>],
    lower: [T; 3],
}

impl<T: Scalar> Problem<'_, T> {
    fn clamp(&self, mut v: [T; 3]) -> [T; 3] {
        for i in 0..3 {
            v[i] = v[i].max(self.lower[i]);
        }
        v
    }

    fn sse(&self, v: [T; 3]) -> T {
        maxrate_sse(&to_params(v), self.pts)
    }

    /// α minimizing the residual for fixed (A, B), clamped at 0.
    fn best_alpha(&self, a: T, b: T) -> T {
        let p = MaxRateClassParams::new(T::zero(), a, b);
        let n = T::of_u64(self.pts.len() as u64);
        (self.pts.iter().map(|q| q.latency - p.eval(q.k, q.m)).sum::<T>() / n).max(T::zero())
    }

    /// Gradient Jᵀr and Gauss–Newton matrix JᵀJ.
    fn normal_equations(&self, v: [T; 3]) -> ([T; 3], [[T; 3]; 3]) {
        let p = to_params(v);
        let mut g = [T::zero(); 3];
        let mut h = [[T::zero(); 3]; 3];
        for q in self.pts {
            let rate = p.rate(q.k);
            let x = T::of_u64(u64::from(q.k)) * T::of_u64(q.m);
            let r = p.eval(q.k, q.m) - q.latency;
            let da = -x / (rate * rate);
            let j = [T::one(), da, da * T::of_u64(u64::from(q.k - 1))];
            for i in 0..3 {
                g[i] += j[i] * r;
                for c in 0..3 {
                    h[i][c] += j[i] * j[c];
                }
            }
        }
        (g, h)
    }

    /// Returns the local solution and whether a stopping test (rather than
    /// the iteration cap) ended the search.
    fn levenberg_marquardt(&self, start: [T; 3]) -> ([T; 3], T, bool) {
        let tiny = T::min_positive_value();
        let eps = T::epsilon();
        let mut v = self.clamp(start);
        let mut cost = self.sse(v);
        let mut lambda = T::lit(1e-3);
        for _ in 0..MAX_ITERATIONS {
            if cost <= tiny {
                return (v, cost, true);
            }
            let (g, h) = self.normal_equations(v);
            let free: Vec<usize> = (0..3)
                .filter(|&i| !(v[i] <= self.lower[i] && g[i] > T::zero()))
                .collect();
            let n = free.len();
            if n == 0 {
                return (v, cost, true);
            }
            let hmax = free.iter().map(|&i| h[i][i]).fold(T::zero(), T::max);
            let improved = loop {
                let mut a = [[T::zero(); 3]; 3];
                let mut b = [T::zero(); 3];
                for (r, &i) in free.iter().enumerate() {
                    for (c, &j) in free.iter().enumerate() {
                        a[r][c] = h[i][j];
                    }
                    a[r][r] += lambda * h[i][i].max(hmax * eps);
                    b[r] = -g[i];
                }
                if let Some(d) = solve(a, b, n) {
                    let mut trial = v;
                    for (r, &i) in free.iter().enumerate() {
                        trial[i] += d[r];
                    }
                    let trial = self.clamp(trial);
                    let c = self.sse(trial);
                    if c.is_finite() && c < cost {
                        lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                        break Some((trial, c));
                    }
                }
                lambda *= T::lit(4.0);
                if lambda > T::lit(1e16) {
                    break None;
                }
            };
            match improved {
                None => return (v, cost, true),
                Some((trial, c)) => {
                    let gain = cost - c;
                    let step_small = (0..3).all(|i| {
                        (trial[i] - v[i]).abs() <= eps * T::lit(16.0) * (v[i].abs() + eps)
                    });
                    v = trial;
                    cost = c;
                    if gain <= eps * cost || step_small {
                        return (v, cost, true);
                    }
                }
            }
        }
        (v, cost, false)
    }
}

fn log_grid<T: Scalar>(lo: T, hi: T, steps: usize) -> Vec<T> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..steps)
        .map(|i| (l + (h - l) * T::of_u64(i as u64) / T::of_u64((steps - 1) as u64)).exp())
        .collect()
}

/// Fits (α, A, B) for points that all belong to one size class.
pub fn fit_maxrate_class<T: Scalar>(
    pts: &[MaxRatePoint<T>],
    class: SizeClass,
) -> Result<ClassFit<T>> {
    let ks: BTreeSet<u32> = pts.iter().map(|p| p.k).collect();
    let ms: BTreeSet<u64> = pts.iter().map(|p| p.m).collect();
    if ks.len() < 2 || ms.len() < 2 {
        return Err(ModelError::Underdetermined(format!(
            "{class} class needs at least 2 distinct thread counts and 2 distinct sizes \
             (got {} and {})",
            ks.len(),
            ms.len()
        )));
    }
    if pts.iter().any(|p| p.k == 0 || !p.latency.is_finite()) {
        return Err(ModelError::Domain(format!("{class} class has k = 0 or non-finite latency")));
    }

    // plausible aggregate rates bracket the start grid
    let rates: Vec<T> = pts
        .iter()
        .filter(|p| p.m > 0 && p.latency > T::zero())
        .map(|p| T::of_u64(u64::from(p.k)) * T::of_u64(p.m) / p.latency)
        .collect();
    if rates.is_empty() {
        return Err(ModelError::Underdetermined(format!(
            "{class} class has no nonzero-size samples to identify A"
        )));
    }
    let rmin = rates.iter().copied().fold(T::infinity(), T::min);
    let rmax = rates.iter().copied().fold(T::zero(), T::max);
    let prob = Problem {
        pts,
        lower: [T::zero(), rmin * T::lit(1e-9), T::zero()],
    };

    let a_grid = log_grid(rmin / T::lit(10.0), rmax * T::lit(10.0), 12);
    let mut b_grid = vec![T::zero()];
    b_grid.extend(log_grid(rmin / T::lit(100.0), rmax * T::lit(10.0), 10));
    let mut starts: Vec<(T, [T; 3])> = Vec::new();
    for &a in &a_grid {
        for &b in &b_grid {
            let v = [prob.best_alpha(a, b), a, b];
            starts.push((prob.sse(v), v));
        }
    }
    starts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut best: Option<([T; 3], T)> = None;
    let mut any_converged = false;
    for &(_, s) in starts.iter().take(STARTS) {
        let (v, c, ok) = prob.levenberg_marquardt(s);
        any_converged |= ok;
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((v, c));
        }
    }
    let (v, sse) = best.expect("at least one start");
    if !any_converged || !sse.is_finite() {
        return Err(ModelError::NoConvergence {
            class,
            best_residual: sse.as_f64(),
        });
    }
    Ok(ClassFit {
        params: to_params(v),
        sse,
        points: pts.len(),
        starts: STARTS.min(starts.len()),
    })
}

/// Splits the samples by size class (k = `k_pairs`) and fits each class.
pub fn fit_maxrate<T: Scalar>(samples: &[LatencySample]) -> Result<MaxRateFit<T>> {
    let fit = |class: SizeClass| {
        let pts: Vec<MaxRatePoint<T>> = samples
            .iter()
            .filter(|s| SizeClass::of(s.message_size) == class)
            .map(|s| MaxRatePoint {
                k: s.k_pairs,
                m: s.message_size,
                latency: T::lit(s.latency),
            })
            .collect();
        fit_maxrate_class(&pts, class)
    };
    let (small, moderate, large) = (
        fit(SizeClass::Small)?,
        fit(SizeClass::Moderate)?,
        fit(SizeClass::Large)?,
    );
    Ok(MaxRateFit {
        params: MaxRateParams {
            small: small.params,
            moderate: moderate.params,
            large: large.params,
        },
        small,
        moderate,
        large,
    })
}
