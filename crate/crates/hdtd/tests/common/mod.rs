//! Shared helpers for the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use hdtd::{CovConfig, InnovationLaw, MatrixSample, ModelSpec, Sampler};

/// Serialize heavy suites so per-criterion wall clocks are meaningful and
/// each test gets the whole rayon pool.
static HEAVY_LOCK: std::sync::Mutex<()> = std::sync::Mutex::new(());

/// Poison-tolerant guard: one failing test must not cascade into the rest.
pub fn heavy_guard() -> std::sync::MutexGuard<'static, ()> {
    HEAVY_LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn model(
    n: usize,
    r: usize,
    c: usize,
    row: CovConfig,
    col: CovConfig,
    law: InnovationLaw,
    seed: u64,
) -> ModelSpec {
    ModelSpec::new(n, r, c, row, col)
        .with_law(law)
        .with_seed(seed)
}

pub fn sampler(spec: &ModelSpec) -> Sampler {
    Sampler::prepare(spec).expect("valid model spec")
}

/// Mean and standard error of a slice.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Draw replicate datasets in parallel and map each to a statistic.
pub fn replicate_stats<F>(spec: &ModelSpec, reps: u64, f: F) -> Vec<f64>
where
    F: Fn(&MatrixSample) -> f64 + Sync,
{
    use rayon::prelude::*;
    let sampler = sampler(spec);
    (0..reps)
        .into_par_iter()
        .map(|rep| f(&sampler.draw(rep)))
        .collect()
}
