//! Deterministic parallel replication and the reductions used on its output.
//!
//! Replicate `i` always draws from the substream `(seed, tag, i)`. Results come
//! back in index order and every reduction walks them sequentially, so the
//! outcome does not depend on the worker count.

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::rng::RngStream;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Runs `reps` replicates of `f` on `workers` threads and returns them in index order.
pub fn replicate<T, F>(seed: u64, tag: &str, reps: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream, usize) -> Result<T> + Sync,
{
    let run = |i: usize| {
        let mut rng = RngStream::substream(seed, tag, i as u64);
        f(&mut rng, i)
    };
    if workers <= 1 {
        return (0..reps).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    pool.install(|| (0..reps).into_par_iter().map(run).collect())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Unbiased sample covariance matrix of the rows.
pub fn covariance(points: &PointSet) -> DMatrix<f64> {
    let k = points.dim();
    let n = points.len() as f64;
    let mut mean = vec![0.0; k];
    for r in points.rows() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut c = DMatrix::zeros(k, k);
    for r in points.rows() {
        for i in 0..k {
            let di = r[i] - mean[i];
            for j in i..k {
                c[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            c[(i, j)] /= n - 1.0;
            c[(j, i)] = c[(i, j)];
        }
    }
    c
}

/// Empirical generalized inverse `inf{x : F_n(x) ≥ u}` of an unsorted sample.
pub fn empirical_quantile(xs: &[f64], u: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((u * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}
