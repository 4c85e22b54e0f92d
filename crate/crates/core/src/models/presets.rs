//! Published parameter sets: single-pair and multiple-pair communication on
//! 10 Gbps Ethernet and 40 Gbps InfiniBand, four AES-GCM libraries, and the
//! multi-threaded BoringSSL max-rate classes.

use super::{
    EncDecLineParams, HockneyParams, MaxRateClassParams, MaxRateParams, Phased,
    PhasedHockneyParams, DEFAULT_THRESHOLD,
};
use crate::scalar::Scalar;

fn phased<T: Scalar>(eager: (f64, f64), rendezvous: (f64, f64)) -> PhasedHockneyParams<T> {
    Phased {
        eager: HockneyParams::new(T::lit(eager.0), T::lit(eager.1)),
        rendezvous: HockneyParams::new(T::lit(rendezvous.0), T::lit(rendezvous.1)),
        threshold: DEFAULT_THRESHOLD,
    }
}

/// Ping-pong on Ethernet.
pub fn ethernet<T: Scalar>() -> PhasedHockneyParams<T> {
    phased((32.74, 23.7e-4), (117.30, 8.63e-4))
}

/// Ping-pong on InfiniBand.
pub fn ib<T: Scalar>() -> PhasedHockneyParams<T> {
    phased((3.40, 3.83e-4), (7.17, 3.12e-4))
}

/// Multiple-pair on Ethernet.
pub fn ethernet_multipair<T: Scalar>() -> PhasedHockneyParams<T> {
    phased((3.84, 8.11e-4), (16.35, 8e-4))
}

/// Multiple-pair on InfiniBand.
pub fn ib_multipair<T: Scalar>() -> PhasedHockneyParams<T> {
    phased((1.02, 2.88e-4), (2.38, 2.78e-4))
}

pub fn boringssl<T: Scalar>() -> EncDecLineParams<T> {
    EncDecLineParams::new(T::lit(0.53), T::lit(6.90e-4))
}

pub fn libsodium<T: Scalar>() -> EncDecLineParams<T> {
    EncDecLineParams::new(T::lit(0.48), T::lit(16.3e-4))
}

pub fn cryptopp_mpich<T: Scalar>() -> EncDecLineParams<T> {
    EncDecLineParams::new(T::lit(5.51), T::lit(34.8e-4))
}

pub fn cryptopp_mvapich<T: Scalar>() -> EncDecLineParams<T> {
    EncDecLineParams::new(T::lit(5.16), T::lit(21.4e-4))
}

/// BoringSSL with 1, 2, 4 and 8 threads.
pub fn boringssl_maxrate<T: Scalar>() -> MaxRateParams<T> {
    let c = |a: f64, aa: f64, b: f64| MaxRateClassParams::new(T::lit(a), T::lit(aa), T::lit(b));
    MaxRateParams {
        small: c(1.8, 888.5, 0.0),
        moderate: c(2.66, 1764.0, 4135.0),
        large: c(3.44, 1502.21, 1262.59),
    }
}

pub const COMM_NAMES: [&str; 4] = ["ethernet", "ib", "ethernet-multipair", "ib-multipair"];
pub const ENC_NAMES: [&str; 4] = ["boringssl", "libsodium", "cryptopp-mpich", "cryptopp-mvapich"];

pub fn comm_by_name<T: Scalar>(name: &str) -> Option<PhasedHockneyParams<T>> {
    Some(match name {
        "ethernet" => ethernet(),
        "ib" | "infiniband" => ib(),
        "ethernet-multipair" => ethernet_multipair(),
        "ib-multipair" | "infiniband-multipair" => ib_multipair(),
        _ => return None,
    })
}

pub fn enc_by_name<T: Scalar>(name: &str) -> Option<EncDecLineParams<T>> {
    Some(match name {
        "boringssl" => boringssl(),
        "libsodium" => libsodium(),
        "cryptopp-mpich" => cryptopp_mpich(),
        "cryptopp-mvapich" => cryptopp_mvapich(),
        _ => return None,
    })
}

pub fn maxrate_by_name<T: Scalar>(name: &str) -> Option<MaxRateParams<T>> {
    (name == "boringssl").then(boringssl_maxrate)
}
