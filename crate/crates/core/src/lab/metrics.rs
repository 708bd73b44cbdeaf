//! Distances between laws: Kolmogorov, total variation, characteristic functions.

use crate::dist::{Cdf, ScalarLaw, VectorLaw};
use crate::error::{Error, Result};
use crate::numeric::{integrate_pieces, QuadOpts};
use num_complex::Complex64;

/// Right-continuous empirical cdf of a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(sample: &[f64]) -> Self {
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Jump points `(x, F_n(x-), F_n(x))`.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let j = self.sorted.partition_point(|v| *v <= x);
            out.push((x, i as f64 / n, j as f64 / n));
            i = j;
        }
        out
    }
}

impl Cdf for EmpiricalCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v < x) as f64 / self.sorted.len() as f64
    }
}

/// `sup_x |G(x) - F(x)|` for a step cdf `G` given by its jumps `(x, G(x-), G(x))`.
///
/// Exact when `F` is continuous or jumps only at points of `G`: between jumps
/// `G` is flat and `F` monotone, so the sup sits at a jump, from one side or
/// the other.
pub fn ks_step(jumps: &[(f64, f64, f64)], f: &dyn Cdf) -> Result<f64> {
    if jumps.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(jumps.iter().fold(0.0f64, |d, &(x, left, right)| {
        d.max((left - f.cdf_left(x)).abs())
            .max((right - f.cdf(x)).abs())
    }))
}

/// Exact Kolmogorov distance between the empirical cdf of `sample` and `f`.
pub fn ks_empirical(sample: &[f64], f: &dyn Cdf) -> Result<f64> {
    ks_step(&EmpiricalCdf::new(sample).jumps(), f)
}

/// `max |F1 - F2|` over `grid`, both one-sided values at every grid point.
pub fn ks_distance(f1: &dyn Cdf, f2: &dyn Cdf, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(grid.iter().fold(0.0f64, |d, &x| {
        d.max((f1.cdf(x) - f2.cdf(x)).abs())
            .max((f1.cdf_left(x) - f2.cdf_left(x)).abs())
    }))
}

/// Sup distance between two continuous cdfs: dense scan on quantiles of `reference`,
/// then golden-section refinement around the largest local maxima.
pub fn sup_distance_continuous(f1: &dyn Cdf, reference: &ScalarLaw, points: usize) -> Result<f64> {
    if points < 3 {
        return Err(Error::EmptyGrid);
    }
    let mut xs = Vec::with_capacity(points);
    for j in 1..=points {
        let u = j as f64 / (points + 1) as f64;
        xs.push(crate::quantile::gen_inv(reference, u)?);
    }
    let d = |x: f64| (f1.cdf(x) - reference.cdf(x)).abs();
    let ds: Vec<f64> = xs.iter().map(|&x| d(x)).collect();
    let mut best = ds.iter().copied().fold(0.0, f64::max);
    let mut peaks: Vec<usize> = (1..points - 1)
        .filter(|&i| ds[i] >= ds[i - 1] && ds[i] >= ds[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| ds[b].total_cmp(&ds[a]));
    for &i in peaks.iter().take(4) {
        best = best.max(golden_max(&d, xs[i - 1], xs[i + 1]));
    }
    Ok(best)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut e = a + r * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + r * (b - a);
            fe = f(e);
        }
    }
    fc.max(fe)
}

/// Masses on finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct MassTable {
    atoms: Vec<(f64, f64)>,
}

impl MassTable {
    /// Merges repeated atoms; rejects negative mass.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(atom, mass)) = atoms.iter().find(|a| a.1 < 0.0 || a.1.is_nan()) {
            return Err(Error::NegativeMass { atom, mass });
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => merged.push((x, m)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn from_law(law: &ScalarLaw) -> Result<Self> {
        let atoms = law.atoms().ok_or(Error::Unsupported {
            law: law.name().into(),
            what: "mass table",
        })?;
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

/// Total variation and, for small supports, the maximizing event.
#[derive(Clone, Debug, PartialEq)]
pub struct TvResult {
    pub tv: f64,
    pub witness: Option<Vec<f64>>,
}

/// Support size up to which the subset supremum is brute-forced.
pub const BRUTE_FORCE_MAX: usize = 20;

/// `½ Σ |p - q|` over the union of supports, checked against `sup_B |P(B) - Q(B)|`
/// over all subsets when the union has at most [`BRUTE_FORCE_MAX`] atoms.
pub fn tv_discrete(p: &MassTable, q: &MassTable) -> Result<TvResult> {
    let mut union: Vec<(f64, f64)> = Vec::new();
    let (a, b) = (&p.atoms, &q.atoms);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            union.push((a[i].0, a[i].1));
            i += 1;
        } else if take_b {
            union.push((b[j].0, -b[j].1));
            j += 1;
        } else {
            union.push((a[i].0, a[i].1 - b[j].1));
            i += 1;
            j += 1;
        }
    }
    let tv = 0.5 * union.iter().map(|u| u.1.abs()).sum::<f64>();
    if union.len() > BRUTE_FORCE_MAX {
        return Ok(TvResult { tv, witness: None });
    }
    // Gray-code walk over all subsets, tracking D(B) = P(B) - Q(B)
    let s = union.len();
    let mut in_set = vec![false; s];
    let mut running = 0.0f64;
    let mut best = 0.0f64;
    let mut best_set = in_set.clone();
    for step in 1u64..(1u64 << s) {
        let bit = step.trailing_zeros() as usize;
        in_set[bit] = !in_set[bit];
        running += if in_set[bit] {
            union[bit].1
        } else {
            -union[bit].1
        };
        if running.abs() > best {
            best = running.abs();
            best_set.clone_from(&in_set);
        }
    }
    let exact: f64 = union
        .iter()
        .zip(&best_set)
        .filter(|(_, &b)| b)
        .map(|(u, _)| u.1)
        .sum::<f64>()
        .abs();
    if (exact - tv).abs() > 1e-12 {
        return Err(Error::ScheffeMismatch {
            brute: exact,
            half_l1: tv,
        });
    }
    let witness = union
        .iter()
        .zip(&best_set)
        .filter(|(_, &b)| b)
        .map(|(u, _)| u.0)
        .collect();
    Ok(TvResult {
        tv,
        witness: Some(witness),
    })
}

/// `½ ∫ |p1 - p2|` over `[lo, hi]` with known kinks in `breaks`.
pub fn tv_continuous(
    p1: &dyn Fn(f64) -> f64,
    p2: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
) -> Result<f64> {
    let opts = QuadOpts {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_intervals: 20_000,
    };
    let q = integrate_pieces(|x| (p1(x) - p2(x)).abs(), lo, hi, breaks, opts)?;
    if q.error >= 1e-6 {
        return Err(Error::Quadrature(format!(
            "error estimate {} too large",
            q.error
        )));
    }
    Ok(0.5 * q.value)
}

/// A law with a characteristic function on ℝᵏ.
pub trait CharFn {
    fn cf_dim(&self) -> usize;
    fn cf_at(&self, u: &[f64]) -> Result<Complex64>;
}

impl CharFn for ScalarLaw {
    fn cf_dim(&self) -> usize {
        1
    }

    fn cf_at(&self, u: &[f64]) -> Result<Complex64> {
        if u.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: u.len(),
            });
        }
        self.cf(u[0])
    }
}

impl CharFn for VectorLaw {
    fn cf_dim(&self) -> usize {
        self.dim()
    }

    fn cf_at(&self, u: &[f64]) -> Result<Complex64> {
        self.cf(u)
    }
}

/// Symmetric lattice on `[-10, 10]ᵏ`: step 0.1 for k = 1, coarser above.
pub fn default_cf_grid(k: usize) -> Vec<Vec<f64>> {
    let step: f64 = match k {
        1 => 0.1,
        2 => 0.5,
        _ => 2.0,
    };
    let m = (10.0 / step).round() as i64;
    let axis: Vec<f64> = (-m..=m).map(|j| j as f64 * step).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// `max_u |Φ_n(u) - Φ(u)|` over `grid`.
pub fn cf_distance(law_n: &dyn CharFn, law: &dyn CharFn, grid: &[Vec<f64>]) -> Result<f64> {
    if law_n.cf_dim() != law.cf_dim() {
        return Err(Error::DimensionMismatch {
            expected: law.cf_dim(),
            got: law_n.cf_dim(),
        });
    }
    let mut d = 0.0f64;
    for u in grid {
        d = d.max((law_n.cf_at(u)? - law.cf_at(u)?).norm());
    }
    Ok(d)
}

/// Mass above which a point counts as an atom of the limit.
pub const ATOM_MASS: f64 = 1e-12;

/// `|F_n(t) - F(t)|` at each point, refusing atoms of the limit law.
pub fn cdf_continuity_check(law_n: &dyn Cdf, law: &ScalarLaw, points: &[f64]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&t| {
            if law.mass_at(t) > ATOM_MASS {
                Err(Error::AtomPoint(t))
            } else {
                Ok((law_n.cdf(t) - law.cdf(t)).abs())
            }
        })
        .collect()
}

/// Smallest `M` with `min_law P([-M, M]) ≥ 1 - eps`, to 1e-3 relative resolution.
pub fn tightness_radius(laws: &[ScalarLaw], eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            value: eps,
            detail: "eps must lie in (0, 1)",
        });
    }
    if laws.is_empty() {
        return Err(Error::Insufficient("no laws given".into()));
    }
    let ok = |m: f64| {
        laws.iter()
            .map(|l| l.cdf(m) - l.cdf_left(-m))
            .fold(f64::INFINITY, f64::min)
            >= 1.0 - eps
    };
    let limit = 2f64.powi(60);
    let (mut lo, mut hi);
    if ok(1.0) {
        hi = 1.0;
        lo = 0.5;
        while ok(lo) {
            hi = lo;
            lo *= 0.5;
            if lo < 1.0 / limit {
                return Ok(hi);
            }
        }
    } else {
        lo = 1.0;
        hi = 2.0;
        while !ok(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > limit {
                return Err(Error::RadiusNotFound);
            }
        }
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
