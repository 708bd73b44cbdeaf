//! Generalized inverses of monotone right-continuous maps.
//!
//! `F⁻¹(u) = inf{x : F(x) ≥ u}` is evaluated in closed form when the map
//! provides one (this includes exact integer search on lattice tables) and by
//! bracketed bisection otherwise. Bisection keeps `F(lo) < u ≤ F(hi)` and
//! returns `hi`, so `F(F⁻¹(u)) ≥ u` holds for the returned value itself.

use crate::dist::{Cdf, ScalarLaw};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use std::io::Write;

/// Relative bisection tolerance.
pub const BISECTION_TOL: f64 = 1e-12;
const MAX_DOUBLINGS: u32 = 60;
/// Ulp steps allowed when snapping a closed-form quantile onto the computed cdf.
const MAX_ULP_STEPS: usize = 64;

/// A non-decreasing, right-continuous map ℝ → [a, b].
pub trait MonotoneMap {
    fn eval(&self, x: f64) -> f64;

    /// Initial finite bracket for the root search.
    fn bracket(&self) -> (f64, f64);

    /// Codomain bounds `(a, b)`.
    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn inverse_closed(&self, _u: f64) -> Option<f64> {
        None
    }
}

impl MonotoneMap for ScalarLaw {
    fn eval(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    fn bracket(&self) -> (f64, f64) {
        self.search_bracket()
    }

    fn inverse_closed(&self, u: f64) -> Option<f64> {
        self.quantile_closed(u)
    }
}

/// A monotone map given by a closure.
pub struct FnMap<F> {
    pub f: F,
    pub bracket: (f64, f64),
    pub range: (f64, f64),
}

impl<F: Fn(f64) -> f64> FnMap<F> {
    pub fn new(f: F, bracket: (f64, f64), range: (f64, f64)) -> Self {
        Self { f, bracket, range }
    }
}

impl<F: Fn(f64) -> f64> MonotoneMap for FnMap<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    fn range(&self) -> (f64, f64) {
        self.range
    }
}

/// Adapts a non-increasing map `G` by negation, so that
/// `inf{x : G(x) ≤ y}` is the ordinary generalized inverse of `-G` at `-y`.
pub struct Negated<M>(pub M);

impl<M: MonotoneMap> MonotoneMap for Negated<M> {
    fn eval(&self, x: f64) -> f64 {
        -self.0.eval(x)
    }

    fn bracket(&self) -> (f64, f64) {
        self.0.bracket()
    }

    fn range(&self) -> (f64, f64) {
        let (a, b) = self.0.range();
        (-b, -a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    /// Closed form when the map offers one, bisection otherwise.
    Auto,
    /// Always bisect, with the given relative tolerance.
    Bisection { tol: f64 },
}

/// The generalized inverse of a monotone map under a chosen strategy.
pub struct GeneralizedInverse<'a, M: ?Sized> {
    pub source: &'a M,
    pub strategy: Strategy,
}

impl<'a, M: MonotoneMap + ?Sized> GeneralizedInverse<'a, M> {
    pub fn new(source: &'a M) -> Self {
        Self {
            source,
            strategy: Strategy::Auto,
        }
    }

    pub fn bisection(source: &'a M, tol: f64) -> Self {
        Self {
            source,
            strategy: Strategy::Bisection { tol },
        }
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        let (a, b) = self.source.range();
        if !(u > a && u <= b) {
            return Err(Error::LevelOutOfRange(u));
        }
        match self.strategy {
            Strategy::Auto => match self.source.inverse_closed(u) {
                Some(x) => snap_to_infimum(self.source, u, x),
                None => bisect(self.source, u, BISECTION_TOL),
            },
            Strategy::Bisection { tol } => bisect(self.source, u, tol),
        }
    }
}

/// Moves a closed-form root to the exact floating-point `inf{x : F(x) ≥ u}` of
/// the map as computed, so the Galois equivalence holds without rounding slack.
fn snap_to_infimum<M: MonotoneMap + ?Sized>(f: &M, u: f64, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Ok(x);
    }
    let mut x = x;
    let mut steps = 0;
    while f.eval(x) < u {
        if steps == MAX_ULP_STEPS {
            return bisect(f, u, BISECTION_TOL);
        }
        x = x.next_up();
        steps += 1;
    }
    for _ in 0..MAX_ULP_STEPS {
        let below = x.next_down();
        if f.eval(below) < u {
            break;
        }
        x = below;
    }
    Ok(x)
}

fn bisect<M: MonotoneMap + ?Sized>(f: &M, u: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = f.bracket();
    let limit = 2f64.powi(MAX_DOUBLINGS as i32);
    let mut step = (hi - lo).max(1.0);
    let mut tries = 0;
    while f.eval(lo) >= u {
        if tries == MAX_DOUBLINGS || lo <= -limit {
            return Err(Error::BracketExhausted(u));
        }
        hi = lo;
        lo -= step;
        step *= 2.0;
        tries += 1;
    }
    let mut step = (hi - lo).max(1.0);
    let mut tries = 0;
    while f.eval(hi) < u {
        if tries == MAX_DOUBLINGS || hi >= limit {
            return Err(Error::BracketExhausted(u));
        }
        lo = hi;
        hi += step;
        step *= 2.0;
        tries += 1;
    }
    // invariant: F(lo) < u <= F(hi)
    while hi - lo > tol * hi.abs().max(1.0) {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if f.eval(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `inf{x : F(x) ≥ u}`.
pub fn gen_inv<M: MonotoneMap + ?Sized>(f: &M, u: f64) -> Result<f64> {
    GeneralizedInverse::new(f).eval(u)
}

/// Generalized inverse of a non-increasing map, `inf{x : G(x) ≤ y}`.
pub fn gen_inv_decreasing<M: MonotoneMap>(g: M, y: f64) -> Result<f64> {
    let neg = Negated(g);
    GeneralizedInverse::bisection(&neg, BISECTION_TOL).eval(-y)
}

/// Truth values of both sides of `F⁻¹(u) ≤ t ⟺ u ≤ F(t)`.
pub fn galois_check<M: MonotoneMap + ?Sized>(f: &M, u: f64, t: f64) -> Result<(bool, bool)> {
    let x = gen_inv(f, u)?;
    Ok((x <= t, u <= f.eval(t)))
}

/// Truth values of both sides of `F⁻¹(u) > t ⟺ u > F(t)`.
pub fn galois_check_strict<M: MonotoneMap + ?Sized>(f: &M, u: f64, t: f64) -> Result<(bool, bool)> {
    let x = gen_inv(f, u)?;
    Ok((x > t, u > f.eval(t)))
}

/// `n` draws `F⁻¹(U_i)` from iid uniforms.
pub fn inv_cdf_sample(law: &ScalarLaw, rng: &mut RngStream, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| gen_inv(law, rng.uniform())).collect()
}

/// Rows `(F_1⁻¹(U_i), …, F_m⁻¹(U_i), F⁻¹(U_i))` sharing one uniform per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CoupledTable {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn skorohod_couple(
    laws: &[ScalarLaw],
    limit: &ScalarLaw,
    rng: &mut RngStream,
    n: usize,
) -> Result<CoupledTable> {
    let mut headers: Vec<String> = laws.iter().map(|l| l.name().to_string()).collect();
    headers.push(limit.name().to_string());
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform();
        let mut row = Vec::with_capacity(laws.len() + 1);
        for law in laws.iter().chain(std::iter::once(limit)) {
            row.push(gen_inv(law, u)?);
        }
        rows.push(row);
    }
    Ok(CoupledTable { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_quantile() {
        let b = ScalarLaw::bernoulli(0.5).unwrap();
        assert_eq!(gen_inv(&b, 0.3).unwrap(), 0.0);
        assert_eq!(gen_inv(&b, 0.5).unwrap(), 0.0);
        assert_eq!(gen_inv(&b, 0.7).unwrap(), 1.0);
        let bis = GeneralizedInverse::bisection(&b, BISECTION_TOL);
        assert!((bis.eval(0.3).unwrap() - 0.0).abs() <= BISECTION_TOL);
        assert!((bis.eval(0.7).unwrap() - 1.0).abs() <= BISECTION_TOL);
    }

    #[test]
    fn exponential_quantile() {
        let e = ScalarLaw::exponential(1.0).unwrap();
        let u = 1.0 - (-1.0f64).exp();
        assert!((gen_inv(&e, u).unwrap() - 1.0).abs() < 1e-15);
        let bis = GeneralizedInverse::bisection(&e, BISECTION_TOL)
            .eval(u)
            .unwrap();
        assert!((bis - 1.0).abs() < 2e-12);
    }

    #[test]
    fn level_out_of_range() {
        let e = ScalarLaw::exponential(1.0).unwrap();
        assert_eq!(gen_inv(&e, 0.0), Err(Error::LevelOutOfRange(0.0)));
        assert_eq!(gen_inv(&e, 1.5), Err(Error::LevelOutOfRange(1.5)));
    }

    #[test]
    fn bracket_exhausted_when_level_unreachable() {
        // sup F = 0.5 < u: no x reaches the level
        let f = FnMap::new(|x: f64| 0.5 / (1.0 + (-x).exp()), (0.0, 1.0), (0.0, 1.0));
        assert_eq!(gen_inv(&f, 0.75), Err(Error::BracketExhausted(0.75)));
    }

    #[test]
    fn galois_examples() {
        let e = ScalarLaw::exponential(1.0).unwrap();
        assert_eq!(galois_check(&e, 0.5, 1.0).unwrap(), (true, true));
        let b = ScalarLaw::bernoulli(0.5).unwrap();
        assert_eq!(galois_check(&b, 0.7, 0.0).unwrap(), (false, false));
        assert_eq!(galois_check_strict(&b, 0.7, 0.0).unwrap(), (true, true));
    }

    #[test]
    fn decreasing_map_via_negation() {
        // G(x) = e^{-x} on [0, ∞): inf{x : G(x) ≤ y} = -ln y
        let g = FnMap::new(|x: f64| (-x.max(0.0)).exp(), (0.0, 1.0), (0.0, 1.0));
        let x = gen_inv_decreasing(g, 0.25).unwrap();
        assert!((x - 4f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn coupling_with_itself_gives_equal_columns() {
        let p = ScalarLaw::poisson(3.0).unwrap();
        let mut rng = RngStream::new(9);
        let t = skorohod_couple(std::slice::from_ref(&p), &p, &mut rng, 200).unwrap();
        assert_eq!(t.column(0), t.column(1));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Poisson(3),Poisson(3)\n"));
        assert_eq!(text.lines().count(), 201);
    }

    #[test]
    fn uniform_sampling_returns_raw_uniforms() {
        let u = ScalarLaw::standard_uniform();
        let mut a = RngStream::new(5);
        let mut b = RngStream::new(5);
        let xs = inv_cdf_sample(&u, &mut a, 100).unwrap();
        for x in xs {
            assert_eq!(x, b.uniform());
        }
    }

    #[test]
    fn exponential_sampling_is_minus_log() {
        let e = ScalarLaw::exponential(1.0).unwrap();
        let mut a = RngStream::new(6);
        let mut b = RngStream::new(6);
        for x in inv_cdf_sample(&e, &mut a, 100).unwrap() {
            let u = b.uniform();
            assert!((x - (-(1.0 - u).ln())).abs() <= 1e-12 * x.max(1.0));
        }
    }
}
