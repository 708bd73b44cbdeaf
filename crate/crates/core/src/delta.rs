//! Delta-method propagation of Gaussian limits through smooth maps.

use crate::error::{Error, Result};
use crate::fep::GaussianLimit;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A map ℝᵏ → ℝᵐ with an optional closed-form Jacobian.
#[derive(Clone)]
pub struct SmoothMap {
    label: String,
    in_dim: usize,
    out_dim: usize,
    f: MapFn,
    jac: Option<JacFn>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SmoothMap({}: {} -> {})",
            self.label, self.in_dim, self.out_dim
        )
    }
}

impl SmoothMap {
    pub fn new<F>(label: &str, in_dim: usize, out_dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            label: label.to_string(),
            in_dim,
            out_dim,
            f: Arc::new(f),
            jac: None,
        }
    }

    pub fn with_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(j));
        self
    }

    /// A scalar map `g`, with derivative `dg` when known.
    pub fn scalar<G>(label: &str, g: G, dg: Option<fn(f64) -> f64>) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let m = Self::new(label, 1, 1, move |x| vec![g(x[0])]);
        match dg {
            Some(d) => m.with_jacobian(move |x| DMatrix::from_element(1, 1, d(x[0]))),
            None => m,
        }
    }

    pub fn identity(k: usize) -> Self {
        Self::new("id", k, k, |x| x.to_vec()).with_jacobian(move |_| DMatrix::identity(k, k))
    }

    /// `x ↦ A x`.
    pub fn linear(a: DMatrix<f64>) -> Self {
        let (m, k) = a.shape();
        let a2 = a.clone();
        Self::new("linear", k, m, move |x| {
            (&a * DVector::from_column_slice(x))
                .iter()
                .copied()
                .collect()
        })
        .with_jacobian(move |_| a2.clone())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn has_closed_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.in_dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            })
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok((self.f)(x))
    }

    /// Closed-form Jacobian, if one was supplied.
    pub fn closed_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(x))
    }

    /// Central differences with step `ε^{1/3}·max(1, |x_j|)` per coordinate.
    pub fn fd_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.out_dim, self.in_dim);
        let mut xp = x.to_vec();
        for j in 0..self.in_dim {
            let h = f64::EPSILON.cbrt() * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let up = (self.f)(&xp);
            xp[j] = x[j] - h;
            let down = (self.f)(&xp);
            xp[j] = x[j];
            for i in 0..self.out_dim {
                out[(i, j)] = (up[i] - down[i]) / (2.0 * h);
            }
        }
        out
    }

    /// Closed form when available, central differences otherwise.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let j = self
            .closed_jacobian(x)
            .unwrap_or_else(|| self.fd_jacobian(x));
        if j.shape() != (self.out_dim, self.in_dim) {
            return Err(Error::DimensionMismatch {
                expected: self.out_dim * self.in_dim,
                got: j.len(),
            });
        }
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::DerivativeUnavailable(self.label.clone()));
        }
        Ok(j)
    }

    /// `self ∘ inner`, with the chain-rule Jacobian when both factors have closed forms.
    pub fn compose(&self, inner: &SmoothMap) -> Result<SmoothMap> {
        if inner.out_dim != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: inner.out_dim,
            });
        }
        let (fo, fi) = (self.f.clone(), inner.f.clone());
        let mut m = SmoothMap::new(
            &format!("{} . {}", self.label, inner.label),
            inner.in_dim,
            self.out_dim,
            move |x| fo(&fi(x)),
        );
        if let (Some(jo), Some(ji)) = (self.jac.clone(), inner.jac.clone()) {
            let fi = inner.f.clone();
            m = m.with_jacobian(move |x| jo(&fi(x)) * ji(x));
        }
        Ok(m)
    }
}

/// `N(0, J Σ Jᵀ)` for the Jacobian `J` of `g` at `theta`.
pub fn delta_jac(limit: &GaussianLimit, theta: &[f64], g: &SmoothMap) -> Result<GaussianLimit> {
    if theta.len() != limit.dim() {
        return Err(Error::DimensionMismatch {
            expected: limit.dim(),
            got: theta.len(),
        });
    }
    let j = g.jacobian(theta)?;
    let cov = &j * limit.cov() * j.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let mean = &j * limit.mean();
    let m = cov.nrows();
    GaussianLimit::new(mean, cov, limit.propagated_provenance(m))
}

/// `N(0, ∇g(θ)ᵀ Σ ∇g(θ))`.
pub fn delta_grad(limit: &GaussianLimit, theta: &[f64], g: &SmoothMap) -> Result<GaussianLimit> {
    if g.out_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: g.out_dim(),
        });
    }
    delta_jac(limit, theta, g)
}

/// `N(0, g'(θ)² σ²)`.
pub fn delta_uni(limit: &GaussianLimit, theta: f64, g: &SmoothMap) -> Result<GaussianLimit> {
    if limit.dim() != 1 || g.in_dim() != 1 || g.out_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: limit.dim().max(g.in_dim()),
        });
    }
    delta_jac(limit, &[theta], g)
}
