use std::collections::BTreeMap;

use crate::scalar::Scalar;

/// Latencies keyed by (message size, k).
pub type KeyedLatency<T> = [((u64, u32), T)];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportRow<T> {
    pub size: u64,
    pub k: u32,
    pub predicted: T,
    pub measured: T,
    /// |measured − predicted| / measured
    pub rel_error: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizeSummary<T> {
    pub size: u64,
    /// Mean of the per-key relative errors at this size.
    pub mape: T,
    pub keys: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionReport<T> {
    pub rows: Vec<ReportRow<T>>,
    pub per_size: Vec<SizeSummary<T>>,
    pub missing_predictions: Vec<(u64, u32)>,
    pub missing_measurements: Vec<(u64, u32)>,
}

impl<T: Scalar> PredictionReport<T> {
    /// Mean relative error over every matched key.
    pub fn mape(&self) -> Option<T> {
        (!self.rows.is_empty()).then(|| {
            self.rows.iter().map(|r| r.rel_error).sum::<T>() / T::of_u64(self.rows.len() as u64)
        })
    }

    pub fn is_complete(&self) -> bool {
        self.missing_predictions.is_empty() && self.missing_measurements.is_empty()
    }
}

/// Compares measured and predicted latencies key by key. Keys present on
/// only one side are listed, not treated as errors. Duplicate keys keep
/// the last value.
pub fn validate<T: Scalar>(
    measured: &KeyedLatency<T>,
    predicted: &KeyedLatency<T>,
) -> PredictionReport<T> {
    let meas: BTreeMap<_, _> = measured.iter().copied().collect();
    let pred: BTreeMap<_, _> = predicted.iter().copied().collect();
    let mut rows = Vec::new();
    let mut missing_predictions = Vec::new();
    for (&(size, k), &m) in &meas {
        match pred.get(&(size, k)) {
            Some(&p) => rows.push(ReportRow {
                size,
                k,
                predicted: p,
                measured: m,
                rel_error: (m - p).abs() / m,
            }),
            None => missing_predictions.push((size, k)),
        }
    }
    let missing_measurements = pred.keys().filter(|k| !meas.contains_key(k)).copied().collect();
    let mut by_size: BTreeMap<u64, Vec<T>> = BTreeMap::new();
    for r in &rows {
        by_size.entry(r.size).or_default().push(r.rel_error);
    }
    let per_size = by_size
        .into_iter()
        .map(|(size, errs)| SizeSummary {
            size,
            mape: errs.iter().copied().sum::<T>() / T::of_u64(errs.len() as u64),
            keys: errs.len(),
        })
        .collect();
    PredictionReport {
        rows,
        per_size,
        missing_predictions,
        missing_measurements,
    }
}
