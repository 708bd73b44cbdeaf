//! Empirical o_P / O_P checks from replicate values along an index ladder.

use crate::error::{Error, Result};
use crate::mc::empirical_quantile;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderMode {
    /// `X_n / a_n → 0` in probability.
    SmallO,
    /// `X_n / a_n` bounded in probability.
    BigO,
}

/// Minimum replicates per index value.
pub const MIN_REPLICATES: usize = 1000;

/// Largest max/min ratio of the quantile trace accepted as bounded.
pub const BIG_O_RATIO: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct OrderCheck {
    pub pass: bool,
    /// Empirical 99% quantile of `|X_n| / a_n` per index value.
    pub trace: Vec<f64>,
}

/// `samples_by_n` pairs each index value with its replicates; `rate` gives `a_n`.
/// In small-o mode the trace must strictly decrease (a run of exact zeros counts)
/// and end below `tol`; `tol` is unused in big-O mode.
pub fn stoch_order_check(
    samples_by_n: &[(f64, Vec<f64>)],
    rate: impl Fn(f64) -> f64,
    mode: OrderMode,
    tol: f64,
) -> Result<OrderCheck> {
    if samples_by_n.len() < 3 {
        return Err(Error::Insufficient(format!(
            "{} index values, need at least 3",
            samples_by_n.len()
        )));
    }
    let mut trace = Vec::with_capacity(samples_by_n.len());
    for (n, xs) in samples_by_n {
        if xs.len() < MIN_REPLICATES {
            return Err(Error::Insufficient(format!(
                "{} replicates at n = {n}, need {MIN_REPLICATES}",
                xs.len()
            )));
        }
        let a = rate(*n);
        let scaled: Vec<f64> = xs.iter().map(|x| x.abs() / a).collect();
        trace.push(empirical_quantile(&scaled, 0.99));
    }
    let pass = match mode {
        OrderMode::SmallO => {
            let decreasing = trace
                .windows(2)
                .all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
            decreasing && trace.last().is_some_and(|&q| q < tol)
        }
        OrderMode::BigO => {
            let max = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = trace.iter().copied().fold(f64::INFINITY, f64::min);
            max == 0.0 || (min > 0.0 && max / min < BIG_O_RATIO)
        }
    };
    Ok(OrderCheck { pass, trace })
}
