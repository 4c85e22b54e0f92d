//! Performance models for plain and encrypted point-to-point messaging.
//!
//! Units are microseconds and bytes throughout: α in µs, β in µs/byte,
//! A and B in bytes/µs. Predictions ignore the 28-byte frame expansion.

mod file;
mod linear;
mod maxrate;
pub mod presets;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use file::{ClassFile, EncDecFile, HockneyFile, LineFile, MaxRateFile, ParamFile};
pub use linear::{fit_encdec_line, fit_hockney, Adjustment, HockneyFit, LineFit};
pub use maxrate::{
    fit_maxrate, fit_maxrate_class, maxrate_sse, ClassFit, MaxRateFit, MaxRatePoint,
};
pub use report::{validate, KeyedLatency, PredictionReport, ReportRow, SizeSummary};

pub const DEFAULT_THRESHOLD: u64 = 131_072;
pub const SMALL_MAX: u64 = 256;
pub const LARGE_MIN: u64 = 32_768;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("not enough data: {0}")]
    Underdetermined(String),
    #[error("solver did not converge for {class}: best residual {best_residual:e}")]
    NoConvergence { class: SizeClass, best_residual: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("parameter file: {0}")]
    File(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Eager,
    Rendezvous,
}

impl Phase {
    /// Eager strictly below the threshold.
    pub fn of(m: u64, threshold: u64) -> Self {
        if m < threshold {
            Phase::Eager
        } else {
            Phase::Rendezvous
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Eager => "eager",
            Phase::Rendezvous => "rendezvous",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Moderate,
    Large,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::Small, SizeClass::Moderate, SizeClass::Large];

    /// Small up to 256 B, large from 32 KiB, moderate in between.
    pub fn of(m: u64) -> Self {
        if m <= SMALL_MAX {
            SizeClass::Small
        } else if m < LARGE_MIN {
            SizeClass::Moderate
        } else {
            SizeClass::Large
        }
    }
}

impl std::fmt::Display for SizeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SizeClass::Small => "small",
            SizeClass::Moderate => "moderate",
            SizeClass::Large => "large",
        })
    }
}

/// T(m) = α + β·m.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HockneyParams<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> HockneyParams<T> {
    pub fn new(alpha: T, beta: T) -> Self {
        Self { alpha, beta }
    }

    pub fn eval(&self, bytes: T) -> T {
        self.alpha + self.beta * bytes
    }
}

/// One line below the threshold and one from the threshold up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phased<P> {
    pub eager: P,
    pub rendezvous: P,
    pub threshold: u64,
}

impl<P> Phased<P> {
    pub fn get(&self, phase: Phase) -> &P {
        match phase {
            Phase::Eager => &self.eager,
            Phase::Rendezvous => &self.rendezvous,
        }
    }

    pub fn select(&self, m: u64) -> (Phase, &P) {
        let phase = Phase::of(m, self.threshold);
        (phase, self.get(phase))
    }
}

pub type PhasedHockneyParams<T> = Phased<HockneyParams<T>>;

/// T_enc(m) = α_enc + β_enc·m for one encrypt plus one decrypt.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EncDecLineParams<T> {
    pub alpha_enc: T,
    pub beta_enc: T,
}

impl<T: Scalar> EncDecLineParams<T> {
    pub fn new(alpha_enc: T, beta_enc: T) -> Self {
        Self { alpha_enc, beta_enc }
    }

    pub fn eval(&self, m: u64) -> T {
        self.alpha_enc + self.beta_enc * T::of_u64(m)
    }
}

/// Hockney line whose parameters are communication plus encryption.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EnhancedHockneyParams<T> {
    pub alpha_ecom: T,
    pub beta_ecom: T,
}

impl<T: Scalar> EnhancedHockneyParams<T> {
    pub fn eval(&self, m: u64) -> T {
        self.alpha_ecom + self.beta_ecom * T::of_u64(m)
    }
}

/// α_enc + k·m / (A + B·(k − 1)) for one size class.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MaxRateClassParams<T> {
    pub alpha_enc: T,
    pub a: T,
    pub b: T,
}

impl<T: Scalar> MaxRateClassParams<T> {
    pub fn new(alpha_enc: T, a: T, b: T) -> Self {
        Self { alpha_enc, a, b }
    }

    /// Aggregate encryption rate of `k` workers in bytes/µs.
    pub fn rate(&self, k: u32) -> T {
        self.a + self.b * T::of_u64(u64::from(k.max(1) - 1))
    }

    pub fn eval(&self, k: u32, m: u64) -> T {
        let km = T::of_u64(u64::from(k)) * T::of_u64(m);
        self.alpha_enc + km / self.rate(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MaxRateParams<T> {
    pub small: MaxRateClassParams<T>,
    pub moderate: MaxRateClassParams<T>,
    pub large: MaxRateClassParams<T>,
}

impl<T: Scalar> MaxRateParams<T> {
    /// Encryption that takes no time at any size.
    pub fn zero_cost() -> Self {
        let c = MaxRateClassParams::new(T::zero(), T::infinity(), T::zero());
        Self {
            small: c,
            moderate: c,
            large: c,
        }
    }
}

impl<T> MaxRateParams<T> {
    pub fn class(&self, c: SizeClass) -> &MaxRateClassParams<T> {
        match c {
            SizeClass::Small => &self.small,
            SizeClass::Moderate => &self.moderate,
            SizeClass::Large => &self.large,
        }
    }

    pub fn class_mut(&mut self, c: SizeClass) -> &mut MaxRateClassParams<T> {
        match c {
            SizeClass::Small => &mut self.small,
            SizeClass::Moderate => &mut self.moderate,
            SizeClass::Large => &mut self.large,
        }
    }
}

/// A model value together with the phase and class it was evaluated in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction<T> {
    pub micros: T,
    pub phase: Option<Phase>,
    pub class: Option<SizeClass>,
}

/// Adds the encryption line to each phase of the communication line.
pub fn compose_enhanced<T: Scalar>(
    comm: &PhasedHockneyParams<T>,
    enc: &EncDecLineParams<T>,
) -> Phased<EnhancedHockneyParams<T>> {
    let add = |h: &HockneyParams<T>| EnhancedHockneyParams {
        alpha_ecom: h.alpha + enc.alpha_enc,
        beta_ecom: h.beta + enc.beta_enc,
    };
    Phased {
        eager: add(&comm.eager),
        rendezvous: add(&comm.rendezvous),
        threshold: comm.threshold,
    }
}

/// Anything that evaluates as a line in the message size.
pub trait Line<T> {
    fn at(&self, m: u64) -> T;
}

impl<T: Scalar> Line<T> for HockneyParams<T> {
    fn at(&self, m: u64) -> T {
        self.eval(T::of_u64(m))
    }
}

impl<T: Scalar> Line<T> for EnhancedHockneyParams<T> {
    fn at(&self, m: u64) -> T {
        self.eval(m)
    }
}

/// α + β·m with the phase chosen by `m`.
pub fn predict_single<T: Scalar, P: Line<T>>(params: &Phased<P>, m: u64) -> Prediction<T> {
    let (phase, p) = params.select(m);
    Prediction {
        micros: p.at(m),
        phase: Some(phase),
        class: None,
    }
}

/// Max-rate encryption time with the class chosen by `m`.
pub fn eval_maxrate<T: Scalar>(p: &MaxRateParams<T>, k: u32, m: u64) -> T {
    p.class(SizeClass::of(m)).eval(k, m)
}

/// Breakdown of a multiple-pair prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultipairPrediction<T> {
    pub micros: T,
    pub t_comm: T,
    pub t_enc: T,
    pub phase: Phase,
    pub class: SizeClass,
}

/// T_comm(k, m) = α + β·k·m with the phase chosen by `m`.
pub fn comm_multipair<T: Scalar>(comm: &PhasedHockneyParams<T>, k: u32, m: u64) -> (Phase, T) {
    let (phase, h) = comm.select(m);
    (phase, h.eval(T::of_u64(u64::from(k)) * T::of_u64(m)))
}

/// max{T_enc/2, T_comm} + T_enc/2 per message and pair.
pub fn predict_multipair<T: Scalar>(
    comm: &PhasedHockneyParams<T>,
    enc: &MaxRateParams<T>,
    k: u32,
    m: u64,
) -> MultipairPrediction<T> {
    let (phase, t_comm) = comm_multipair(comm, k, m);
    let t_enc = eval_maxrate(enc, k, m);
    let half = t_enc / T::lit(2.0);
    MultipairPrediction {
        micros: half.max(t_comm) + half,
        t_comm,
        t_enc,
        phase,
        class: SizeClass::of(m),
    }
}

/// β_enc / β_comm: relative throughput loss for large single-pair messages.
pub fn overhead_single_large<T: Scalar>(
    enc: &EncDecLineParams<T>,
    comm_rendezvous: &HockneyParams<T>,
) -> Result<T> {
    if comm_rendezvous.beta <= T::zero() {
        return Err(ModelError::Domain("communication beta must be positive".into()));
    }
    Ok(enc.beta_enc / comm_rendezvous.beta)
}

/// A ratio together with whether the formula's regime assumption holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeTagged<T> {
    pub ratio: T,
    /// T_comm(k, m) ≥ T_enc(k, m) / 2 at the queried point.
    pub in_regime: bool,
    pub phase: Phase,
    pub class: SizeClass,
}

/// 1 / (2·β_comm·(A + (k − 1)·B)), tagged with the regime check at (k, m).
pub fn overhead_multipair_slow<T: Scalar>(
    comm: &PhasedHockneyParams<T>,
    enc: &MaxRateParams<T>,
    k: u32,
    m: u64,
) -> Result<RegimeTagged<T>> {
    let (phase, h) = comm.select(m);
    let class = SizeClass::of(m);
    if h.beta <= T::zero() {
        return Err(ModelError::Domain("communication beta must be positive".into()));
    }
    let c = enc.class(class);
    let ratio = T::one() / (T::lit(2.0) * h.beta * c.rate(k));
    let (_, t_comm) = comm_multipair(comm, k, m);
    Ok(RegimeTagged {
        ratio,
        in_regime: t_comm >= c.eval(k, m) / T::lit(2.0),
        phase,
        class,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelinedPrediction<T> {
    pub micros: T,
    pub t_comm: T,
    pub t_enc: T,
    pub phase: Phase,
}

impl<T: Scalar> PipelinedPrediction<T> {
    /// Extra time relative to unencrypted communication.
    pub fn overhead(&self) -> T {
        self.micros / self.t_comm - T::one()
    }
}

/// max{T_comm(m), T_enc(m)}: encryption fully overlapped with transfer.
pub fn predict_pipelined<T: Scalar>(
    comm: &PhasedHockneyParams<T>,
    enc: &EncDecLineParams<T>,
    m: u64,
) -> PipelinedPrediction<T> {
    let (phase, h) = comm.select(m);
    let t_comm = h.eval(T::of_u64(m));
    let t_enc = enc.eval(m);
    PipelinedPrediction {
        micros: t_comm.max(t_enc),
        t_comm,
        t_enc,
        phase,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        assert_eq!(Phase::of(131_071, DEFAULT_THRESHOLD), Phase::Eager);
        assert_eq!(Phase::of(131_072, DEFAULT_THRESHOLD), Phase::Rendezvous);
        assert_eq!(SizeClass::of(0), SizeClass::Small);
        assert_eq!(SizeClass::of(256), SizeClass::Small);
        assert_eq!(SizeClass::of(257), SizeClass::Moderate);
        assert_eq!(SizeClass::of(32_767), SizeClass::Moderate);
        assert_eq!(SizeClass::of(32_768), SizeClass::Large);
    }

    #[test]
    fn single_prediction_uses_threshold_phase() {
        let p = Phased {
            eager: HockneyParams::new(1.0, 0.0),
            rendezvous: HockneyParams::new(2.0, 0.0),
            threshold: 100,
        };
        assert_eq!(predict_single(&p, 99).micros, 1.0);
        let at = predict_single(&p, 100);
        assert_eq!((at.micros, at.phase), (2.0, Some(Phase::Rendezvous)));
    }

    #[test]
    fn works_in_single_precision() {
        let c = MaxRateClassParams::new(1.0f32, 100.0, 0.0);
        assert_eq!(c.eval(1, 100), 2.0f32);
    }

    #[test]
    fn zero_encryption_leaves_multipair_as_communication() {
        let comm = presets::ib_multipair::<f64>();
        let p = predict_multipair(&comm, &MaxRateParams::zero_cost(), 4, 4096);
        assert_eq!(p.micros, p.t_comm);
    }

    #[test]
    fn pipelined_overhead_vanishes_when_network_is_slower() {
        let comm = presets::ethernet::<f64>();
        let enc = EncDecLineParams::new(0.0, 1e-5);
        let p = predict_pipelined(&comm, &enc, 1 << 20);
        assert_eq!(p.micros, p.t_comm);
        assert_eq!(p.overhead(), 0.0);
    }
}
