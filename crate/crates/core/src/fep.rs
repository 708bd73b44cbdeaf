//! Functional empirical process: `G_n(f)`, the covariance functional Γ,
//! finite-dimensional Gaussian limits, the expansion algebra and the
//! correlation-coefficient pipeline built on it.

use crate::delta::SmoothMap;
use crate::dist::{ScalarLaw, Support, VectorLaw};
use crate::error::{Error, Result};
use crate::numeric::hermite::gauss_hermite;
use crate::numeric::special::ln_factorial;
use crate::numeric::{integrate_pieces, QuadOpts};
use crate::points::PointSet;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

type Eval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named measurable function on sample-space points.
#[derive(Clone)]
pub struct Basis {
    label: String,
    f: Eval,
}

impl Basis {
    pub fn new<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(label: &str, f: F) -> Arc<Self> {
        Arc::new(Self {
            label: label.to_string(),
            f: Arc::new(f),
        })
    }
}

/// `c_0 + Σ c_j φ_j` over basis functions, with optional moment hints under a working law.
///
/// Linear operations merge terms that share a basis, so influence functions
/// built by the expansion algebra stay cheap to evaluate.
#[derive(Clone)]
pub struct FnHandle {
    name: Option<String>,
    constant: f64,
    terms: Vec<(f64, Arc<Basis>)>,
    mean: Option<f64>,
    second: Option<f64>,
    breaks: Vec<f64>,
}

impl fmt::Debug for FnHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnHandle({})", self.label())
    }
}

fn fmt_coef(c: f64) -> String {
    format!("{c:.6}")
        .trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}

impl FnHandle {
    pub fn new<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(label: &str, f: F) -> Self {
        Self::from_basis(Basis::new(label, f))
    }

    pub fn from_basis(b: Arc<Basis>) -> Self {
        Self {
            name: None,
            constant: 0.0,
            terms: vec![(1.0, b)],
            mean: None,
            second: None,
            breaks: Vec::new(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            name: None,
            constant: c,
            terms: Vec::new(),
            mean: Some(c),
            second: Some(c * c),
            breaks: Vec::new(),
        }
    }

    /// `π_{j+1}(x) = x_j`.
    pub fn coord(j: usize) -> Self {
        Self::new(&format!("pi{}", j + 1), move |x| x[j])
    }

    pub fn coord_power(j: usize, k: i32) -> Self {
        Self::new(&format!("pi{}^{k}", j + 1), move |x| x[j].powi(k))
    }

    /// `x_i · x_j`.
    pub fn coord_product(i: usize, j: usize) -> Self {
        Self::new(&format!("pi{}*pi{}", i + 1, j + 1), move |x| x[i] * x[j])
    }

    /// `1(x_j ≤ s)`; `s` is recorded as a breakpoint for quadrature.
    pub fn indicator_le(j: usize, s: f64) -> Self {
        let mut h = Self::new(&format!("1(pi{} <= {s})", j + 1), move |x| {
            if x[j] <= s {
                1.0
            } else {
                0.0
            }
        });
        h.breaks.push(s);
        h
    }

    pub fn named(mut self, label: &str) -> Self {
        self.name = Some(label.to_string());
        self
    }

    pub fn with_mean(mut self, m: f64) -> Self {
        self.mean = Some(m);
        self
    }

    pub fn with_moments(mut self, mean: f64, second: f64) -> Self {
        self.mean = Some(mean);
        self.second = Some(second);
        self
    }

    pub fn with_breaks(mut self, b: &[f64]) -> Self {
        self.breaks.extend_from_slice(b);
        self
    }

    pub fn mean(&self) -> Option<f64> {
        self.mean
    }

    pub fn second_moment(&self) -> Option<f64> {
        self.second
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let mut parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, b)| {
                if *c == 1.0 {
                    b.label.clone()
                } else {
                    format!("{}*{}", fmt_coef(*c), b.label)
                }
            })
            .collect();
        if self.constant != 0.0 || parts.is_empty() {
            parts.push(fmt_coef(self.constant));
        }
        parts.join(" + ")
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, (c, b)| acc + c * (b.f)(x))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }

    /// `a·f`.
    pub fn scale(&self, a: f64) -> Self {
        Self {
            name: None,
            constant: a * self.constant,
            terms: self.terms.iter().map(|(c, b)| (a * c, b.clone())).collect(),
            mean: self.mean.map(|m| a * m),
            second: self.second.map(|s| a * a * s),
            breaks: self.breaks.clone(),
        }
    }

    /// `a·f + b·g`.
    pub fn lin(a: f64, f: &FnHandle, b: f64, g: &FnHandle) -> Self {
        let mut terms: Vec<(f64, Arc<Basis>)> =
            f.terms.iter().map(|(c, x)| (a * c, x.clone())).collect();
        for (c, x) in &g.terms {
            match terms.iter_mut().find(|(_, y)| Arc::ptr_eq(x, y)) {
                Some(t) => t.0 += b * c,
                None => terms.push((b * c, x.clone())),
            }
        }
        let mut breaks = f.breaks.clone();
        breaks.extend_from_slice(&g.breaks);
        Self {
            name: None,
            constant: a * f.constant + b * g.constant,
            terms,
            mean: f.mean.zip(g.mean).map(|(m, n)| a * m + b * n),
            second: None,
            breaks,
        }
    }

    pub fn add(&self, g: &FnHandle) -> Self {
        Self::lin(1.0, self, 1.0, g)
    }

    pub fn sub(&self, g: &FnHandle) -> Self {
        Self::lin(1.0, self, -1.0, g)
    }

    fn same_function(&self, g: &FnHandle) -> bool {
        self.constant == g.constant
            && self.terms.len() == g.terms.len()
            && self
                .terms
                .iter()
                .zip(&g.terms)
                .all(|((a, x), (b, y))| a == b && Arc::ptr_eq(x, y))
    }
}

/// How `G_n` centers: the true mean from the handle's hint, or the sample mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centering {
    Analytic,
    PlugIn,
}

/// `n^{-1/2} Σ (f(Z_i) - m)`.
pub fn gn_eval(sample: &PointSet, f: &FnHandle, mode: Centering) -> Result<f64> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::Insufficient(
            "G_n needs at least one observation".into(),
        ));
    }
    let vals: Vec<f64> = sample.rows().map(|z| f.eval(z)).collect();
    let m = match mode {
        Centering::Analytic => f.mean.ok_or_else(|| Error::MissingMoment(f.label()))?,
        // shifted by the first value so that a constant f centers to exactly zero
        Centering::PlugIn => vals[0] + vals.iter().map(|v| v - vals[0]).sum::<f64>() / n as f64,
    };
    Ok(vals.iter().map(|v| v - m).sum::<f64>() / (n as f64).sqrt())
}

/// Where Γ takes its expectations.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    /// The handles' own mean and second-moment hints (Γ(f, f) only).
    Hints,
    Scalar(&'a ScalarLaw),
    Vector(&'a VectorLaw),
    Sample(&'a PointSet),
}

const MAX_NODES: usize = 2_000_000;

fn quad_opts() -> QuadOpts {
    QuadOpts {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_intervals: 20_000,
    }
}

/// E φ(X) under the source law.
fn expect(src: Source<'_>, phi: &dyn Fn(&[f64]) -> f64, breaks: &[f64]) -> Result<f64> {
    match src {
        Source::Hints => unreachable!("hints are handled by the caller"),
        Source::Sample(s) => {
            if s.is_empty() {
                return Err(Error::Insufficient("empty sample".into()));
            }
            Ok(s.rows().map(phi).sum::<f64>() / s.len() as f64)
        }
        Source::Scalar(law) => {
            if let Some(atoms) = law.atoms() {
                return Ok(atoms.iter().map(|(x, m)| m * phi(&[*x])).sum());
            }
            let (lo, hi) = match law.support() {
                Support::Interval { lo, hi } => (lo, hi),
                _ => unreachable!("continuous laws have interval support"),
            };
            let q = integrate_pieces(|x| phi(&[x]) * law.density(x), lo, hi, breaks, quad_opts())?;
            Ok(q.value)
        }
        Source::Vector(VectorLaw::Gaussian { mean, cov, .. }) => {
            let k = mean.len();
            let m = ((MAX_NODES as f64).powf(1.0 / k as f64).floor() as usize).clamp(2, 24);
            let (z, w) = gauss_hermite(m);
            let eig = SymmetricEigen::new(cov.clone());
            let root = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
            let norm = std::f64::consts::PI.powf(-0.5 * k as f64);
            let mut idx = vec![0usize; k];
            let mut point = vec![0.0; k];
            let mut total = 0.0;
            loop {
                let zv =
                    DVector::from_iterator(k, idx.iter().map(|&i| std::f64::consts::SQRT_2 * z[i]));
                let x = mean + &root * zv;
                point.copy_from_slice(x.as_slice());
                total += idx.iter().map(|&i| w[i]).product::<f64>() * phi(&point);
                let mut d = 0;
                while d < k {
                    idx[d] += 1;
                    if idx[d] < m {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == k {
                    break;
                }
            }
            Ok(total * norm)
        }
        Source::Vector(VectorLaw::Multinomial { n, p, .. }) => {
            let k = p.len();
            let count =
                (ln_factorial(n + k as u64 - 1) - ln_factorial(k as u64 - 1) - ln_factorial(*n))
                    .exp();
            if count > MAX_NODES as f64 {
                return Err(Error::Unsupported {
                    law: "Multinomial".into(),
                    what: "exact expectation beyond 2e6 outcomes",
                });
            }
            let mut x = vec![0.0; k];
            let mut total = 0.0;
            enumerate_counts(*n, 0, p, &mut x, &mut total, phi);
            Ok(total)
        }
    }
}

fn enumerate_counts(
    left: u64,
    cell: usize,
    p: &[f64],
    x: &mut [f64],
    total: &mut f64,
    phi: &dyn Fn(&[f64]) -> f64,
) {
    let k = p.len();
    if cell == k - 1 {
        x[cell] = left as f64;
        let n: f64 = x.iter().sum();
        let mut lp = ln_factorial(n as u64);
        for (xi, pi) in x.iter().zip(p) {
            lp += xi * pi.ln() - ln_factorial(*xi as u64);
        }
        *total += lp.exp() * phi(x);
        return;
    }
    for c in 0..=left {
        x[cell] = c as f64;
        enumerate_counts(left - c, cell + 1, p, x, total, phi);
    }
}

/// `Γ(f, g) = ∫ (f - Pf)(g - Pg) dP`.
pub fn gamma(f: &FnHandle, g: &FnHandle, src: Source<'_>) -> Result<f64> {
    if let Source::Hints = src {
        if !f.same_function(g) {
            return Err(Error::MissingMoment(format!(
                "cross moment of {} and {}",
                f.label(),
                g.label()
            )));
        }
        let m = f.mean.ok_or_else(|| Error::MissingMoment(f.label()))?;
        let s = f.second.ok_or_else(|| Error::MissingMoment(f.label()))?;
        return Ok(s - m * m);
    }
    let mut breaks = f.breaks.clone();
    breaks.extend_from_slice(&g.breaks);
    let pf = expect(src, &|x| f.eval(x), &breaks)?;
    let pg = expect(src, &|x| g.eval(x), &breaks)?;
    let v = expect(src, &|x| (f.eval(x) - pf) * (g.eval(x) - pg), &breaks)?;
    if !v.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite covariance of {} and {}",
            f.label(),
            g.label()
        )));
    }
    Ok(v)
}

/// Origin of a covariance entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Formula,
    Estimated,
}

/// A Gaussian law on ℝᵏ reached as a weak limit.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLimit {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    provenance: Vec<Provenance>,
}

const LIMIT_TOL: f64 = 1e-10;

impl GaussianLimit {
    /// `provenance` is row-major, one tag per covariance entry.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, provenance: Vec<Provenance>) -> Result<Self> {
        let k = mean.len();
        if cov.shape() != (k, k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: cov.nrows(),
            });
        }
        if provenance.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                got: provenance.len(),
            });
        }
        let scale = cov.abs().max().max(1.0);
        let invalid = |value, expected| Error::ParamOutOfRange {
            law: "GaussianLimit".into(),
            field: "cov".into(),
            value,
            expected,
        };
        if !crate::dist::vector_is_symmetric(&cov, LIMIT_TOL * scale) {
            return Err(invalid(f64::NAN, "symmetric covariance"));
        }
        if k > 0 {
            let lo = crate::dist::vector_min_eigenvalue(&cov);
            if lo < -LIMIT_TOL * scale {
                return Err(invalid(lo, "positive semidefinite covariance"));
            }
        }
        Ok(Self {
            mean,
            cov,
            provenance,
        })
    }

    pub fn centered(cov: DMatrix<f64>, tag: Provenance) -> Result<Self> {
        let k = cov.nrows();
        Self::new(DVector::zeros(k), cov, vec![tag; k * k])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn provenance(&self, i: usize, j: usize) -> Provenance {
        self.provenance[i * self.dim() + j]
    }

    /// Tags for an `m × m` image: estimated if any input entry was.
    pub fn propagated_provenance(&self, m: usize) -> Vec<Provenance> {
        let tag = if self.provenance.contains(&Provenance::Estimated) {
            Provenance::Estimated
        } else {
            Provenance::Formula
        };
        vec![tag; m * m]
    }

    /// `aᵀ Σ a`.
    pub fn variance_along(&self, a: &[f64]) -> f64 {
        let v = DVector::from_column_slice(a);
        (v.transpose() * &self.cov * &v)[(0, 0)]
    }

    pub fn to_vector_law(&self) -> Result<VectorLaw> {
        VectorLaw::gaussian(self.mean.clone(), self.cov.clone())
    }
}

/// Centered Gaussian with covariance `Γ(f_i, f_j)`.
pub fn fd_limit(fs: &[FnHandle], src: Source<'_>) -> Result<GaussianLimit> {
    let k = fs.len();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = gamma(&fs[i], &fs[j], src)?;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let tag = match src {
        Source::Sample(_) => Provenance::Estimated,
        _ => Provenance::Formula,
    };
    GaussianLimit::centered(cov, tag)
}

/// `A_n = A + n^{-1/2} G_n(L) + o_P(n^{-1/2})`.
#[derive(Clone, Debug)]
pub struct InfluenceExpansion {
    pub center: f64,
    pub influence: FnHandle,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionDescriptor {
    pub center: f64,
    pub influence: String,
}

impl InfluenceExpansion {
    pub fn new(center: f64, influence: FnHandle) -> Self {
        Self { center, influence }
    }

    /// The sample mean of `f`: center `Pf`, influence `f`.
    pub fn sample_mean(f: FnHandle, center: f64) -> Self {
        Self {
            center,
            influence: f,
        }
    }

    pub fn descriptor(&self) -> ExpansionDescriptor {
        ExpansionDescriptor {
            center: self.center,
            influence: self.influence.label(),
        }
    }

    /// `A_n - A - n^{-1/2} G_n(L)` for a directly computed statistic `direct` on `sample`.
    pub fn remainder(&self, direct: f64, sample: &PointSet) -> Result<f64> {
        let g = gn_eval(sample, &self.influence, Centering::Analytic)?;
        Ok(direct - self.center - g / (sample.len() as f64).sqrt())
    }
}

pub fn exp_add(a: &InfluenceExpansion, b: &InfluenceExpansion) -> InfluenceExpansion {
    InfluenceExpansion::new(a.center + b.center, a.influence.add(&b.influence))
}

pub fn exp_sub(a: &InfluenceExpansion, b: &InfluenceExpansion) -> InfluenceExpansion {
    InfluenceExpansion::new(a.center - b.center, a.influence.sub(&b.influence))
}

/// `(AB, B·L + A·H)`.
pub fn exp_mul(a: &InfluenceExpansion, b: &InfluenceExpansion) -> InfluenceExpansion {
    InfluenceExpansion::new(
        a.center * b.center,
        FnHandle::lin(b.center, &a.influence, a.center, &b.influence),
    )
}

/// `(A/B, L/B - A H / B²)`.
pub fn exp_div(a: &InfluenceExpansion, b: &InfluenceExpansion) -> Result<InfluenceExpansion> {
    if b.center == 0.0 {
        return Err(Error::ZeroCenter);
    }
    let bb = b.center;
    Ok(InfluenceExpansion::new(
        a.center / bb,
        FnHandle::lin(1.0 / bb, &a.influence, -a.center / (bb * bb), &b.influence),
    ))
}

/// `(g(A), g'(A)·L)`; `g` must carry a closed-form derivative.
pub fn exp_map(g: &SmoothMap, a: &InfluenceExpansion) -> Result<InfluenceExpansion> {
    if g.in_dim() != 1 || g.out_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: g.in_dim().max(g.out_dim()),
        });
    }
    let d = g
        .closed_jacobian(&[a.center])
        .map(|j| j[(0, 0)])
        .filter(|d| d.is_finite())
        .ok_or_else(|| Error::DerivativeUnavailable(g.label().to_string()))?;
    let v = g.eval(&[a.center])?[0];
    Ok(InfluenceExpansion::new(v, a.influence.scale(d)))
}

/// Central moments entering the asymptotic variance of the correlation coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CentralMoments {
    pub var_x: f64,
    pub var_y: f64,
    pub rho: f64,
    pub m22: f64,
    pub m4x: f64,
    pub m4y: f64,
    pub m31: f64,
    pub m13: f64,
}

impl CentralMoments {
    /// Moments of a bivariate Gaussian, via Isserlis' identities.
    pub fn bivariate_gaussian(rho: f64, var_x: f64, var_y: f64) -> Self {
        let (sx, sy) = (var_x.sqrt(), var_y.sqrt());
        Self {
            var_x,
            var_y,
            rho,
            m22: var_x * var_y * (1.0 + 2.0 * rho * rho),
            m4x: 3.0 * var_x * var_x,
            m4y: 3.0 * var_y * var_y,
            m31: 3.0 * rho * sx.powi(3) * sy,
            m13: 3.0 * rho * sx * sy.powi(3),
        }
    }

    pub fn from_sample(pairs: &PointSet) -> Result<Self> {
        check_pairs(pairs)?;
        let n = pairs.len() as f64;
        let (mx, my) = pair_means(pairs);
        let mut s = [0.0f64; 8];
        for r in pairs.rows() {
            let (dx, dy) = (r[0] - mx, r[1] - my);
            s[0] += dx * dx;
            s[1] += dy * dy;
            s[2] += dx * dy;
            s[3] += dx * dx * dy * dy;
            s[4] += dx.powi(4);
            s[5] += dy.powi(4);
            s[6] += dx.powi(3) * dy;
            s[7] += dx * dy.powi(3);
        }
        let s = s.map(|v| v / n);
        if s[0] <= 0.0 || s[1] <= 0.0 {
            return Err(Error::DegenerateSample(
                "a coordinate has zero empirical variance",
            ));
        }
        Ok(Self {
            var_x: s[0],
            var_y: s[1],
            rho: s[2] / (s[0] * s[1]).sqrt(),
            m22: s[3],
            m4x: s[4],
            m4y: s[5],
            m31: s[6],
            m13: s[7],
        })
    }
}

/// Asymptotic variance of `√n(ρ_n - ρ)`.
pub fn corr_sigma2(m: &CentralMoments) -> Result<f64> {
    if m.var_x <= 0.0 || m.var_y <= 0.0 {
        return Err(Error::DegenerateVariance(
            "sigma_x^2 and sigma_y^2 must be positive",
        ));
    }
    let (sx, sy) = (m.var_x.sqrt(), m.var_y.sqrt());
    let r = m.rho;
    Ok((1.0 + r * r / 2.0) * m.m22 / (m.var_x * m.var_y)
        + r * r * (m.m4x / (m.var_x * m.var_x) + m.m4y / (m.var_y * m.var_y)) / 4.0
        - r * (m.m31 / (sx.powi(3) * sy) + m.m13 / (sx * sy.powi(3))))
}

/// Raw moments `E X, E Y, E X², E Y², E XY`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RawMoments {
    pub mx: f64,
    pub my: f64,
    pub mxx: f64,
    pub myy: f64,
    pub mxy: f64,
}

impl RawMoments {
    pub fn bivariate_gaussian(rho: f64) -> Self {
        Self {
            mx: 0.0,
            my: 0.0,
            mxx: 1.0,
            myy: 1.0,
            mxy: rho,
        }
    }

    pub fn from_sample(pairs: &PointSet) -> Result<Self> {
        check_pairs(pairs)?;
        let n = pairs.len() as f64;
        let mut s = [0.0f64; 5];
        for r in pairs.rows() {
            s[0] += r[0];
            s[1] += r[1];
            s[2] += r[0] * r[0];
            s[3] += r[1] * r[1];
            s[4] += r[0] * r[1];
        }
        let s = s.map(|v| v / n);
        Ok(Self {
            mx: s[0],
            my: s[1],
            mxx: s[2],
            myy: s[3],
            mxy: s[4],
        })
    }
}

fn check_pairs(pairs: &PointSet) -> Result<()> {
    if pairs.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: pairs.dim(),
        });
    }
    if pairs.len() < 3 {
        return Err(Error::Insufficient(
            "correlation needs at least 3 pairs".into(),
        ));
    }
    Ok(())
}

fn pair_means(pairs: &PointSet) -> (f64, f64) {
    let n = pairs.len() as f64;
    let (sx, sy) = pairs
        .rows()
        .fold((0.0, 0.0), |(a, b), r| (a + r[0], b + r[1]));
    (sx / n, sy / n)
}

/// The plug-in correlation coefficient, computed from centered sums.
pub fn rho_hat(pairs: &PointSet) -> Result<f64> {
    check_pairs(pairs)?;
    let (mx, my) = pair_means(pairs);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for r in pairs.rows() {
        let (dx, dy) = (r[0] - mx, r[1] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateSample(
            "a coordinate has zero empirical variance",
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Expansion of `ρ_n` replayed through the algebra: numerator `mean(p) - mean(π1)·mean(π2)`,
/// denominator the product of the square roots of `mean(π_j²) - mean(π_j)²`.
///
/// Centers and mean hints come from `m`; pass true moments to get the
/// asymptotic expansion, or sample moments for the plug-in version.
pub fn correlation_expansion(m: &RawMoments) -> Result<InfluenceExpansion> {
    let p = FnHandle::coord_product(0, 1).with_mean(m.mxy);
    let pi1 = FnHandle::coord(0).with_mean(m.mx);
    let pi2 = FnHandle::coord(1).with_mean(m.my);
    let pi1sq = FnHandle::coord_power(0, 2).with_mean(m.mxx);
    let pi2sq = FnHandle::coord_power(1, 2).with_mean(m.myy);
    let mean = InfluenceExpansion::sample_mean;

    let numer = exp_sub(
        &mean(p, m.mxy),
        &exp_mul(&mean(pi1.clone(), m.mx), &mean(pi2.clone(), m.my)),
    );

    let square = SmoothMap::scalar("x^2", |x| x * x, Some(|x| 2.0 * x));
    let root = SmoothMap::scalar("sqrt", f64::sqrt, Some(|x| 0.5 / x.sqrt()));
    let var_x = exp_sub(&mean(pi1sq, m.mxx), &exp_map(&square, &mean(pi1, m.mx))?);
    let var_y = exp_sub(&mean(pi2sq, m.myy), &exp_map(&square, &mean(pi2, m.my))?);
    if var_x.center <= 0.0 || var_y.center <= 0.0 {
        return Err(Error::DegenerateVariance(
            "sigma_x^2 and sigma_y^2 must be positive",
        ));
    }
    let denom = exp_mul(&exp_map(&root, &var_x)?, &exp_map(&root, &var_y)?);
    let mut out = exp_div(&numer, &denom)?;
    out.influence = out.influence.named("H");
    Ok(out)
}

/// Output of [`corr_pipeline`].
#[derive(Clone, Debug)]
pub struct CorrFit {
    pub rho_hat: f64,
    pub expansion: InfluenceExpansion,
    pub sigma2_hat: f64,
}

/// `ρ_n`, its plug-in expansion, and the empirical `Γ(H, H)`.
pub fn corr_pipeline(pairs: &PointSet) -> Result<CorrFit> {
    let rho = rho_hat(pairs)?;
    let expansion = correlation_expansion(&RawMoments::from_sample(pairs)?)?;
    let sigma2_hat = gamma(
        &expansion.influence,
        &expansion.influence,
        Source::Sample(pairs),
    )?;
    Ok(CorrFit {
        rho_hat: rho,
        expansion,
        sigma2_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn uniform_sample(n: usize, seed: u64) -> PointSet {
        let u = ScalarLaw::standard_uniform();
        PointSet::from_scalars(&u.sample(&mut RngStream::new(seed), n).unwrap())
    }

    #[test]
    fn gn_constant_plug_in_is_exactly_zero() {
        let s = uniform_sample(1000, 1);
        for c in [0.1, 1.0 / 3.0, -7.25, 1e9] {
            assert_eq!(
                gn_eval(&s, &FnHandle::constant(c), Centering::PlugIn).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn gn_analytic_needs_mean() {
        let s = uniform_sample(10, 1);
        assert!(matches!(
            gn_eval(&s, &FnHandle::coord(0), Centering::Analytic),
            Err(Error::MissingMoment(_))
        ));
        assert!(gn_eval(&s, &FnHandle::coord(0).with_mean(0.5), Centering::Analytic).is_ok());
    }

    #[test]
    fn gn_is_linear() {
        let s = uniform_sample(5000, 3);
        let f = FnHandle::coord(0).with_mean(0.5);
        let g = FnHandle::coord_power(0, 2).with_mean(1.0 / 3.0);
        let (a, b) = (2.5, -1.75);
        for mode in [Centering::Analytic, Centering::PlugIn] {
            let lhs = gn_eval(&s, &FnHandle::lin(a, &f, b, &g), mode).unwrap();
            let rhs = a * gn_eval(&s, &f, mode).unwrap() + b * gn_eval(&s, &g, mode).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn gamma_examples() {
        let u = ScalarLaw::standard_uniform();
        let pi1 = FnHandle::coord(0);
        assert!((gamma(&pi1, &pi1, Source::Scalar(&u)).unwrap() - 1.0 / 12.0).abs() < 1e-12);
        let (s, t) = (
            FnHandle::indicator_le(0, 0.25),
            FnHandle::indicator_le(0, 0.5),
        );
        assert!((gamma(&s, &t, Source::Scalar(&u)).unwrap() - 0.125).abs() < 1e-12);
        let h = FnHandle::coord(0).with_moments(0.5, 1.0 / 3.0);
        assert!((gamma(&h, &h, Source::Hints).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(gamma(&h, &pi1, Source::Hints).is_err());
    }

    #[test]
    fn gamma_is_symmetric_and_bilinear() {
        let g = ScalarLaw::gaussian(0.3, 2.0).unwrap();
        let f1 = FnHandle::coord(0);
        let f2 = FnHandle::coord_power(0, 2);
        let f3 = FnHandle::indicator_le(0, 0.1);
        let src = Source::Scalar(&g);
        let a = gamma(&f1, &f3, src).unwrap();
        let b = gamma(&f3, &f1, src).unwrap();
        assert!((a - b).abs() < 1e-12);
        let lhs = gamma(&FnHandle::lin(2.0, &f1, -3.0, &f2), &f3, src).unwrap();
        let rhs = 2.0 * a - 3.0 * gamma(&f2, &f3, src).unwrap();
        assert!((lhs - rhs).abs() < 1e-9);
        assert!(gamma(&f3, &f3, src).unwrap() >= -1e-12);
    }

    #[test]
    fn gamma_under_discrete_and_vector_laws() {
        let p = ScalarLaw::poisson(4.0).unwrap();
        let pi1 = FnHandle::coord(0);
        assert!((gamma(&pi1, &pi1, Source::Scalar(&p)).unwrap() - 4.0).abs() < 1e-10);
        let g = VectorLaw::standard_bivariate_gaussian(0.5).unwrap();
        let (x, y) = (FnHandle::coord(0), FnHandle::coord(1));
        assert!((gamma(&x, &y, Source::Vector(&g)).unwrap() - 0.5).abs() < 1e-12);
        let xy = FnHandle::coord_product(0, 1);
        // Var(XY) = 1 + rho^2
        assert!((gamma(&xy, &xy, Source::Vector(&g)).unwrap() - 1.25).abs() < 1e-12);
        let m = VectorLaw::multinomial(6, &[0.2, 0.3, 0.5]).unwrap();
        let c = gamma(&x, &y, Source::Vector(&m)).unwrap();
        assert!((c - (-6.0 * 0.2 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn empirical_gamma_of_odd_moment() {
        let n = 100_000;
        let z = ScalarLaw::standard_gaussian()
            .sample(&mut RngStream::new(8), n)
            .unwrap();
        let s = PointSet::from_scalars(&z);
        let v = gamma(
            &FnHandle::coord(0),
            &FnHandle::coord_power(0, 2),
            Source::Sample(&s),
        )
        .unwrap();
        // sd of X·(X² - 1) is sqrt(E X⁶ - 2 E X⁴ + E X²) = sqrt(10)
        assert!(v.abs() < 6.0 * 10f64.sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn fd_limit_examples() {
        let u = ScalarLaw::standard_uniform();
        let l = fd_limit(&[FnHandle::constant(2.0)], Source::Scalar(&u)).unwrap();
        assert_eq!(l.cov()[(0, 0)], 0.0);
        let ts = [0.25, 0.5, 0.75];
        let fs: Vec<FnHandle> = ts.iter().map(|&t| FnHandle::indicator_le(0, t)).collect();
        let l = fd_limit(&fs, Source::Scalar(&u)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((l.cov()[(i, j)] - (ts[i].min(ts[j]) - ts[i] * ts[j])).abs() < 1e-12);
                assert_eq!(l.provenance(i, j), Provenance::Formula);
            }
        }
        let s = uniform_sample(100_000, 12);
        let e = fd_limit(&fs, Source::Sample(&s)).unwrap();
        assert_eq!(e.provenance(0, 1), Provenance::Estimated);
        assert!((e.cov() - l.cov()).abs().max() < 0.02);
    }

    #[test]
    fn expansion_algebra_examples() {
        let l = FnHandle::coord(0);
        let h = FnHandle::coord(1);
        let s = exp_add(
            &InfluenceExpansion::new(1.0, l.clone()),
            &InfluenceExpansion::new(2.0, h.clone()),
        );
        assert_eq!(s.center, 3.0);
        assert_eq!(s.influence.eval(&[0.3, 0.9]), 0.3 + 0.9);
        let m = exp_mul(
            &InfluenceExpansion::new(1.7, l.clone()),
            &InfluenceExpansion::new(0.0, h.clone()),
        );
        assert_eq!(m.center, 0.0);
        assert!((m.influence.eval(&[5.0, 2.0]) - 1.7 * 2.0).abs() < 1e-15);
        let d = exp_div(
            &InfluenceExpansion::new(2.0, l.clone()),
            &InfluenceExpansion::new(4.0, h.clone()),
        )
        .unwrap();
        assert_eq!(d.center, 0.5);
        for z in [[1.0, 2.0], [-0.3, 0.7]] {
            assert!((d.influence.eval(&z) - (0.25 * z[0] - 0.125 * z[1])).abs() < 1e-15);
        }
        assert_eq!(
            exp_div(
                &InfluenceExpansion::new(2.0, l.clone()),
                &InfluenceExpansion::new(0.0, h)
            )
            .unwrap_err(),
            Error::ZeroCenter
        );
    }

    #[test]
    fn exp_map_examples() {
        let a = InfluenceExpansion::new(1.0, FnHandle::coord(0));
        let id = SmoothMap::identity(1);
        let out = exp_map(&id, &a).unwrap();
        assert_eq!((out.center, out.influence.eval(&[0.7])), (1.0, 0.7));
        let sq = SmoothMap::scalar("x^2", |x| x * x, Some(|x| 2.0 * x));
        assert_eq!(exp_map(&sq, &a).unwrap().influence.eval(&[0.7]), 1.4);
        let sigma2 = 2.25;
        let r = exp_map(
            &SmoothMap::scalar("sqrt", f64::sqrt, Some(|x| 0.5 / x.sqrt())),
            &InfluenceExpansion::new(sigma2, FnHandle::coord(0)),
        )
        .unwrap();
        assert!((r.influence.eval(&[1.0]) - 1.0 / (2.0 * 1.5)).abs() < 1e-15);
        let nod = SmoothMap::scalar("sqrt", f64::sqrt, None);
        assert!(matches!(
            exp_map(&nod, &a),
            Err(Error::DerivativeUnavailable(_))
        ));
    }

    #[test]
    fn corr_sigma2_examples() {
        let indep = CentralMoments {
            var_x: 1.0,
            var_y: 1.0,
            rho: 0.0,
            m22: 1.0,
            m4x: 3.0,
            m4y: 3.0,
            m31: 0.0,
            m13: 0.0,
        };
        assert_eq!(corr_sigma2(&indep).unwrap(), 1.0);
        for rho in [0.0, 0.3, -0.3, 0.5, 0.9, -0.9] {
            let v = corr_sigma2(&CentralMoments::bivariate_gaussian(rho, 1.0, 1.0)).unwrap();
            assert!((v - (1.0 - rho * rho).powi(2)).abs() < 1e-12, "rho={rho}");
        }
        assert!(
            (corr_sigma2(&CentralMoments::bivariate_gaussian(0.5, 1.0, 1.0)).unwrap() - 0.5625)
                .abs()
                < 1e-12
        );
        // unstandardized inputs give the same value
        let v = corr_sigma2(&CentralMoments::bivariate_gaussian(0.5, 4.0, 0.25)).unwrap();
        assert!((v - 0.5625).abs() < 1e-12);
        let rho0 = CentralMoments {
            var_x: 2.0,
            var_y: 3.0,
            rho: 0.0,
            m22: 7.0,
            m4x: 1.0,
            m4y: 1.0,
            m31: 0.3,
            m13: 0.2,
        };
        assert!((corr_sigma2(&rho0).unwrap() - 7.0 / 6.0).abs() < 1e-15);
        let zero = CentralMoments {
            var_x: 0.0,
            ..indep
        };
        assert!(matches!(
            corr_sigma2(&zero),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn influence_variance_matches_closed_form() {
        for rho in [0.0, 0.5, -0.8] {
            let e = correlation_expansion(&RawMoments::bivariate_gaussian(rho)).unwrap();
            assert!((e.center - rho).abs() < 1e-15);
            let g = VectorLaw::standard_bivariate_gaussian(rho).unwrap();
            let v = gamma(&e.influence, &e.influence, Source::Vector(&g)).unwrap();
            assert!((v - (1.0 - rho * rho).powi(2)).abs() < 1e-12);
            // standardized influence is xy - (rho/2)(x² + y²)
            let z = [0.4, -1.3];
            let want = z[0] * z[1] - rho / 2.0 * (z[0] * z[0] + z[1] * z[1]);
            assert!((e.influence.eval(&z) - want).abs() < 1e-14);
            assert!(e.influence.mean().unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn pipeline_examples() {
        let g = VectorLaw::standard_bivariate_gaussian(0.0).unwrap();
        let s = g.sample(&mut RngStream::new(21), 100_000);
        let fit = corr_pipeline(&s).unwrap();
        assert!((fit.sigma2_hat - 1.0).abs() < 0.05);
        assert!(fit.rho_hat.abs() <= 1.0);
        let g = VectorLaw::standard_bivariate_gaussian(0.5).unwrap();
        let s = g.sample(&mut RngStream::new(22), 100_000);
        let fit = corr_pipeline(&s).unwrap();
        assert!((fit.sigma2_hat - 0.5625).abs() < 0.05);
        assert!((fit.expansion.center - fit.rho_hat).abs() < 1e-12);
        let same = PointSet::from_rows(2, &[[1.0, 1.0], [2.0, 2.0], [4.0, 4.0]]);
        assert_eq!(corr_pipeline(&same).unwrap().rho_hat, 1.0);
        let flat = PointSet::from_rows(2, &[[1.0, 1.0], [1.0, 2.0], [1.0, 4.0]]);
        assert!(matches!(
            corr_pipeline(&flat),
            Err(Error::DegenerateSample(_))
        ));
        let short = PointSet::from_rows(2, &[[1.0, 1.0], [2.0, 2.0]]);
        assert!(matches!(corr_pipeline(&short), Err(Error::Insufficient(_))));
    }

    #[test]
    fn descriptor_serializes() {
        let e = correlation_expansion(&RawMoments::bivariate_gaussian(0.5)).unwrap();
        let j = serde_json::to_string(&e.descriptor()).unwrap();
        assert_eq!(j, r#"{"center":0.5,"influence":"H"}"#);
    }
}
