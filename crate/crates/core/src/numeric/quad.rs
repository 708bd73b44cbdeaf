//! Adaptive Gauss–Kronrod (7/15) quadrature on finite or infinite intervals.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: QuadOpts) -> Result<Quadrature> {
    let (v, e) = kronrod(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        value: v,
        error: e,
    });
    let (mut total, mut err) = (v, e);
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:.3e} after {} subintervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // interval exhausted at machine resolution; keep its estimate
            heap.push(Piece {
                error: 0.0,
                ..worst
            });
            err = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let (v1, e1) = kronrod(f, worst.a, m);
        let (v2, e2) = kronrod(f, m, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: m,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(Quadrature { value, error })
}

/// Integrates `f` over `[lo, hi]`; either end may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opts: QuadOpts) -> Result<Quadrature> {
    if lo == hi {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
        });
    }
    if lo > hi {
        let q = integrate(f, hi, lo, opts)?;
        return Ok(Quadrature {
            value: -q.value,
            error: q.error,
        });
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adapt(&f, lo, hi, opts),
        (true, false) => adapt(
            &|t: f64| {
                let s = 1.0 - t;
                f(lo + t / s) / (s * s)
            },
            0.0,
            1.0,
            opts,
        ),
        (false, true) => adapt(
            &|t: f64| {
                let s = 1.0 - t;
                f(hi - t / s) / (s * s)
            },
            0.0,
            1.0,
            opts,
        ),
        (false, false) => adapt(
            &|t: f64| {
                let s = 1.0 - t * t;
                f(t / s) * (1.0 + t * t) / (s * s)
            },
            -1.0,
            1.0,
            opts,
        ),
    }
}

/// Integrates over `[lo, hi]` split at the interior `breaks`, which helps when
/// the integrand has kinks or jumps at known points.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: QuadOpts,
) -> Result<Quadrature> {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    let mut out = Quadrature {
        value: 0.0,
        error: 0.0,
    };
    for w in edges.windows(2) {
        let q = integrate(&f, w[0], w[1], opts)?;
        out.value += q.value;
        out.error += q.error;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::normal_pdf;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, QuadOpts::default()).unwrap();
        assert!((q.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_over_line() {
        let q = integrate(
            normal_pdf,
            f64::NEG_INFINITY,
            f64::INFINITY,
            QuadOpts::default(),
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        let q = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, QuadOpts::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        let q = integrate(|x| x.exp(), f64::NEG_INFINITY, 0.0, QuadOpts::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_function_with_breaks() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let q = integrate_pieces(f, 0.0, 1.0, &[0.3], QuadOpts::default()).unwrap();
        assert!((q.value - 0.3).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = QuadOpts {
            max_intervals: 3,
            abs_tol: 1e-15,
            rel_tol: 0.0,
        };
        assert!(integrate(
            |x: f64| x.abs().sqrt().sin() / x.abs().max(1e-300),
            -1.0,
            1.0,
            opts
        )
        .is_err());
    }
}
