//! Encrypted message passing over TCP, collectives built on it, a
//! benchmark harness, and latency models for encrypted communication.
//!
//! The model code is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, which is what the CLI and the tests use.

pub mod aead;
pub mod benchmarks;
pub mod collectives;
pub mod models;
pub mod scalar;
pub mod transport;

pub use scalar::Scalar;

pub type HockneyParams = models::HockneyParams<f64>;
pub type PhasedHockneyParams = models::PhasedHockneyParams<f64>;
pub type EncDecLineParams = models::EncDecLineParams<f64>;
pub type EnhancedHockneyParams = models::EnhancedHockneyParams<f64>;
pub type MaxRateClassParams = models::MaxRateClassParams<f64>;
pub type MaxRateParams = models::MaxRateParams<f64>;
pub type PredictionReport = models::PredictionReport<f64>;
