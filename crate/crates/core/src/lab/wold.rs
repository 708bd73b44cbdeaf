//! Cramér–Wold checks: one-dimensional projections of vector replicates
//! against the projected Gaussian limit.

use super::metrics::ks_empirical;
use crate::dist::ScalarLaw;
use crate::error::{Error, Result};
use crate::fep::GaussianLimit;
use crate::mc::empirical_quantile;
use crate::points::PointSet;
use crate::rng::RngStream;
use rand_distr::{Distribution, StandardNormal};

pub const MIN_DIRECTIONS: usize = 8;

/// Projected variance below which a direction counts as degenerate.
pub const DEGENERATE_VAR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// KS distance of `⟨a, Z_n⟩` to `N(⟨a, μ⟩, aᵀΣa)`.
    Gaussian {
        direction: Vec<f64>,
        variance: f64,
        ks: f64,
    },
    /// `aᵀΣa = 0`: the limit projection is the constant `⟨a, μ⟩`, and the
    /// 99% quantile of `|⟨a, Z_n⟩ - ⟨a, μ⟩|` is reported instead.
    Degenerate { direction: Vec<f64>, q99_abs: f64 },
}

impl Projection {
    pub fn direction(&self) -> &[f64] {
        match self {
            Self::Gaussian { direction, .. } | Self::Degenerate { direction, .. } => direction,
        }
    }

    pub fn ks(&self) -> Option<f64> {
        match self {
            Self::Gaussian { ks, .. } => Some(*ks),
            Self::Degenerate { .. } => None,
        }
    }
}

/// The `k` canonical axes followed by normalized Gaussian directions, `total` in all.
pub fn wold_directions(k: usize, total: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            e
        })
        .collect();
    while out.len() < total {
        let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

pub fn wold_test(
    replicates: &PointSet,
    limit: &GaussianLimit,
    directions: &[Vec<f64>],
) -> Result<Vec<Projection>> {
    let k = limit.dim();
    if replicates.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: replicates.dim(),
        });
    }
    if directions.len() < MIN_DIRECTIONS {
        return Err(Error::Insufficient(format!(
            "{} directions, need {MIN_DIRECTIONS}",
            directions.len()
        )));
    }
    if replicates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let scale = (0..k).map(|i| limit.cov()[(i, i)]).fold(1.0, f64::max);
    directions
        .iter()
        .map(|a| {
            if a.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: a.len(),
                });
            }
            let center: f64 = a.iter().zip(limit.mean().iter()).map(|(x, m)| x * m).sum();
            let proj: Vec<f64> = replicates
                .rows()
                .map(|z| a.iter().zip(z).map(|(x, y)| x * y).sum())
                .collect();
            let var = limit.variance_along(a);
            if var <= DEGENERATE_VAR * scale {
                let dev: Vec<f64> = proj.iter().map(|p| (p - center).abs()).collect();
                return Ok(Projection::Degenerate {
                    direction: a.clone(),
                    q99_abs: empirical_quantile(&dev, 0.99),
                });
            }
            let law = ScalarLaw::gaussian(center, var)?;
            Ok(Projection::Gaussian {
                direction: a.clone(),
                variance: var,
                ks: ks_empirical(&proj, &law)?,
            })
        })
        .collect()
}

/// Largest KS distance over the non-degenerate directions.
pub fn max_ks(results: &[Projection]) -> f64 {
    results
        .iter()
        .filter_map(Projection::ks)
        .fold(0.0, f64::max)
}
