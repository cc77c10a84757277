//! The four measured quantities: accuracy, precomputation time, query
//! latency and index size.

use std::hint::black_box;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{DistanceIndex, IndexScratch};
use crate::oracle::GroundTruthSample;
use crate::util::par_map;
use crate::workload::QueryPair;

/// Held for the duration of every latency measurement so that concurrent
/// benchmark work cannot disturb the timings.
static QUIESCE: Mutex<()> = Mutex::new(());

/// `(1/N) Σ |p − d| / d`.
pub fn mre(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("MRE of an empty query set".into()));
    }
    if let Some(d) = truth.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!("label {d} is not positive")));
    }
    let mut sum = 0.0;
    for (p, d) in pred.iter().zip(truth) {
        sum += (p - d).abs() / d;
    }
    Ok(sum / truth.len() as f64)
}

pub fn predictions(model: &DistanceIndex, test: &[GroundTruthSample]) -> Result<Vec<f64>> {
    let n = model.n();
    let mut s = IndexScratch::default();
    test.iter()
        .map(|q| {
            if q.u >= n || q.v >= n {
                return Err(Error::NodeOutOfRange { node: q.u.max(q.v), n });
            }
            Ok(model.predict_with(q.u, q.v, &mut s))
        })
        .collect()
}

pub fn evaluate_mre(model: &DistanceIndex, test: &[GroundTruthSample]) -> Result<f64> {
    let truth: Vec<f64> = test.iter().map(|q| q.d).collect();
    mre(&predictions(model, test)?, &truth)
}

/// [`evaluate_mre`] for any estimator `f(u, v)`.
pub fn evaluate_mre_with(test: &[GroundTruthSample], mut f: impl FnMut(usize, usize) -> f64) -> Result<f64> {
    let pred: Vec<f64> = test.iter().map(|q| f(q.u, q.v)).collect();
    let truth: Vec<f64> = test.iter().map(|q| q.d).collect();
    mre(&pred, &truth)
}

/// Runs `f` and returns its value with the elapsed wall-clock seconds.
pub fn measure_precompute<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    /// Mean over passes of pass time divided by queries per pass.
    pub mean_us: f64,
    pub std_us: f64,
    /// Per-query wall time when the same pass runs on all workers.
    pub batch_us: f64,
    pub queries_per_pass: usize,
}

/// Times `repeats` single-threaded passes over `queries` after `warmup`
/// untimed passes.
pub fn measure_query_latency(
    model: &DistanceIndex,
    queries: &[QueryPair],
    warmup: usize,
    repeats: usize,
) -> Result<Latency> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument("latency needs at least one query".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("latency needs at least one timed pass".into()));
    }
    let n = model.n();
    if let Some(&(u, v)) = queries.iter().find(|&&(u, v)| u >= n || v >= n) {
        return Err(Error::NodeOutOfRange { node: u.max(v), n });
    }
    let _quiet = QUIESCE.lock().unwrap_or_else(|e| e.into_inner());
    let mut s = IndexScratch::default();
    let pass = |s: &mut IndexScratch| {
        let start = Instant::now();
        let mut acc = 0.0;
        for &(u, v) in queries {
            acc += model.predict_with(black_box(u), black_box(v), s);
        }
        black_box(acc);
        start.elapsed().as_secs_f64() * 1e6 / queries.len() as f64
    };
    for _ in 0..warmup {
        pass(&mut s);
    }
    let times: Vec<f64> = (0..repeats).map(|_| pass(&mut s)).collect();
    let mean = times.iter().sum::<f64>() / repeats as f64;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / repeats as f64;

    let chunks: Vec<&[QueryPair]> = queries.chunks(4096).collect();
    let start = Instant::now();
    let sums = par_map(&chunks, |c| {
        let mut s = IndexScratch::default();
        c.iter().map(|&(u, v)| model.predict_with(u, v, &mut s)).sum::<f64>()
    });
    black_box(sums);
    let batch_us = start.elapsed().as_secs_f64() * 1e6 / queries.len() as f64;
    Ok(Latency { mean_us: mean, std_us: var.sqrt(), batch_us, queries_per_pass: queries.len() })
}

/// Per-query nanoseconds, each the mean of `reps` back-to-back calls.
pub fn per_query_latency_ns(model: &DistanceIndex, queries: &[QueryPair], reps: usize) -> Vec<f64> {
    let _quiet = QUIESCE.lock().unwrap_or_else(|e| e.into_inner());
    let reps = reps.max(1);
    let mut s = IndexScratch::default();
    queries
        .iter()
        .map(|&(u, v)| {
            let start = Instant::now();
            for _ in 0..reps {
                black_box(model.predict_with(black_box(u), black_box(v), &mut s));
            }
            start.elapsed().as_nanos() as f64 / reps as f64
        })
        .collect()
}

/// Bytes of the serialized index: tables, decoder parameters and side
/// structures plus the manifest.
pub fn measure_index_size(model: &DistanceIndex) -> u64 {
    model.index_bytes() as u64
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (x[i] - mx, y[i] - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mre_rejects_bad_input() {
        assert!(mre(&[], &[]).is_err());
        assert!(mre(&[1.0], &[]).is_err());
        assert!(mre(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn pearson_of_lines() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[-1.0, -2.0, -3.0, -4.0]) + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[5.0; 4]), 0.0);
    }
}
