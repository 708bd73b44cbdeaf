//! Order statistics through the Renyi and Malmquist representations.

use crate::dist::ScalarLaw;
use crate::error::{Error, Result};
use crate::numeric::special::ln_factorial;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    SortedIid,
    RenyiExponential,
    Transform,
}

/// A non-decreasing sample `X_{1,n} ≤ … ≤ X_{n,n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedSample {
    values: Vec<f64>,
    origin: Origin,
}

impl OrderedSample {
    /// Wraps values that are already sorted; returns `None` otherwise.
    pub fn from_sorted(values: Vec<f64>, origin: Origin) -> Option<Self> {
        values
            .windows(2)
            .all(|w| w[0] <= w[1])
            .then_some(Self { values, origin })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sorts `n` iid draws of `law`. The sort is stable, so tied lattice values keep draw order.
pub fn sorted_iid(law: &ScalarLaw, n: usize, rng: &mut RngStream) -> Result<OrderedSample> {
    let mut v = law.sample(rng, n)?;
    v.sort_by(f64::total_cmp);
    Ok(OrderedSample {
        values: v,
        origin: Origin::SortedIid,
    })
}

fn std_exponential(rng: &mut RngStream) -> f64 {
    -libm::log1p(-rng.uniform())
}

/// `(S_1/S_{n+1}, …, S_n/S_{n+1})` with `S_j` partial sums of `n+1` standard exponentials.
pub fn uniform_os_renyi(n: usize, rng: &mut RngStream) -> Result<OrderedSample> {
    if n == 0 {
        return Err(Error::Insufficient(
            "uniform order statistics need n >= 1".into(),
        ));
    }
    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        acc += std_exponential(rng);
        s.push(acc);
    }
    let total = acc + std_exponential(rng);
    for x in &mut s {
        *x /= total;
    }
    Ok(OrderedSample {
        values: s,
        origin: Origin::RenyiExponential,
    })
}

fn check_open_unit(u: &OrderedSample) -> Result<()> {
    match u.values.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        Some(&x) => Err(Error::Domain {
            value: x,
            detail: "uniform order statistics must lie in (0, 1)",
        }),
        None => Ok(()),
    }
}

/// `(-log U_{n,n}, …, -log U_{1,n})`, exponential order statistics.
pub fn exp_os_from_uniform(u_os: &OrderedSample) -> Result<OrderedSample> {
    check_open_unit(u_os)?;
    let values = u_os.values.iter().rev().map(|u| -u.ln()).collect();
    Ok(OrderedSample {
        values,
        origin: Origin::Transform,
    })
}

/// `((n-i+1)(α_{i,n} - α_{i-1,n}))_{i=1..n}` with `α_{i,n} = -log(1 - U_{i,n})`, `α_{0,n} = 0`.
pub fn normalized_spacings(u_os: &OrderedSample) -> Result<Vec<f64>> {
    check_open_unit(u_os)?;
    let n = u_os.len();
    let mut prev = 0.0;
    Ok(u_os
        .values
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let a = -libm::log1p(-u);
            let out = (n - i) as f64 * (a - prev);
            prev = a;
            out
        })
        .collect())
}

/// `(i·log(U_{i+1,n}/U_{i,n}))_{i=1..n}` with `U_{n+1,n} = 1`.
pub fn malmquist_ratios(u_os: &OrderedSample) -> Result<Vec<f64>> {
    if let Some(&x) = u_os.values.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::Domain {
            value: x,
            detail: "Malmquist ratios need values in (0, 1]",
        });
    }
    let v = &u_os.values;
    Ok((0..v.len())
        .map(|i| {
            let next = v.get(i + 1).copied().unwrap_or(1.0);
            (i + 1) as f64 * (next / v[i]).ln()
        })
        .collect())
}

/// Joint density of `(X_{n_1,n}, …, X_{n_r,n})` at `z` for iid draws with density `h` and cdf `cdf`.
///
/// `indices` are 1-based. The density factor enters only at the `r` selected
/// points; the `r + 1` gaps contribute `(H(z_j) - H(z_{j-1}))^{m_j} / m_j!`
/// with `H(-∞) = 0`, `H(+∞) = 1`.
pub fn os_joint_density<D, C>(h: D, cdf: C, n: usize, indices: &[usize], z: &[f64]) -> Result<f64>
where
    D: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    let bad = |why: &str| Err(Error::InvalidIndices(format!("{indices:?}: {why}")));
    if indices.is_empty() {
        return bad("empty");
    }
    if indices[0] < 1 || indices.windows(2).any(|w| w[0] >= w[1]) {
        return bad("must be strictly increasing and start at 1 or above");
    }
    if *indices.last().expect("non-empty") > n {
        return bad("index exceeds n");
    }
    if z.len() != indices.len() {
        return Err(Error::DimensionMismatch {
            expected: indices.len(),
            got: z.len(),
        });
    }
    if z.windows(2).any(|w| w[0] >= w[1]) {
        return Ok(0.0);
    }
    let mut log_d = ln_factorial(n as u64);
    for &x in z {
        let hx = h(x);
        if hx <= 0.0 {
            return Ok(0.0);
        }
        log_d += hx.ln();
    }
    let r = indices.len();
    let mut prev_idx = 0;
    let mut prev_cdf = 0.0;
    for j in 0..=r {
        let (idx, c) = if j < r {
            (indices[j], cdf(z[j]))
        } else {
            (n + 1, 1.0)
        };
        let m = (idx - prev_idx - 1) as u64;
        if m > 0 {
            let gap = c - prev_cdf;
            if gap <= 0.0 {
                return Ok(0.0);
            }
            log_d += m as f64 * gap.ln() - ln_factorial(m);
        }
        prev_idx = idx;
        prev_cdf = c;
    }
    Ok(log_d.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Cdf;
    use crate::numeric::{integrate, QuadOpts};

    fn unif_h(x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            1.0
        } else {
            0.0
        }
    }

    fn unif_cdf(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn renyi_output_sorted_inside_unit_interval() {
        let mut rng = RngStream::new(11);
        for n in [1, 2, 10, 100] {
            let s = uniform_os_renyi(n, &mut rng).unwrap();
            assert_eq!(s.len(), n);
            assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
            assert!(s.values().iter().all(|&u| u > 0.0 && u < 1.0));
        }
        assert!(uniform_os_renyi(0, &mut rng).is_err());
    }

    #[test]
    fn exp_transform_examples() {
        let u = OrderedSample::from_sorted(vec![0.5], Origin::Transform).unwrap();
        assert!((exp_os_from_uniform(&u).unwrap().values()[0] - 2f64.ln()).abs() < 1e-15);
        let u = OrderedSample::from_sorted(vec![0.1, 0.4, 0.9], Origin::Transform).unwrap();
        let e = exp_os_from_uniform(&u).unwrap();
        assert!(e.values().windows(2).all(|w| w[0] <= w[1]));
        let bad = OrderedSample::from_sorted(vec![0.0, 0.5], Origin::Transform).unwrap();
        assert!(matches!(
            exp_os_from_uniform(&bad),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn spacing_and_ratio_examples() {
        let u = OrderedSample::from_sorted(vec![1.0 - (-1.0f64).exp()], Origin::Transform).unwrap();
        assert!((normalized_spacings(&u).unwrap()[0] - 1.0).abs() < 1e-15);
        let u = OrderedSample::from_sorted(vec![(-1.0f64).exp()], Origin::Transform).unwrap();
        assert!((malmquist_ratios(&u).unwrap()[0] - 1.0).abs() < 1e-15);
        let one = OrderedSample::from_sorted(vec![0.3, 1.0], Origin::Transform).unwrap();
        assert!(normalized_spacings(&one).is_err());
        let zero = OrderedSample::from_sorted(vec![0.0, 0.3], Origin::Transform).unwrap();
        assert!(malmquist_ratios(&zero).is_err());
    }

    #[test]
    fn density_examples() {
        let d = os_joint_density(unif_h, unif_cdf, 2, &[1, 2], &[0.2, 0.6]).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
        assert_eq!(
            os_joint_density(unif_h, unif_cdf, 2, &[1, 2], &[0.6, 0.2]).unwrap(),
            0.0
        );
        let d = os_joint_density(unif_h, unif_cdf, 3, &[3], &[0.5]).unwrap();
        assert!((d - 0.75).abs() < 1e-14);
    }

    #[test]
    fn density_index_errors() {
        assert!(matches!(
            os_joint_density(unif_h, unif_cdf, 3, &[2, 2], &[0.1, 0.2]),
            Err(Error::InvalidIndices(_))
        ));
        assert!(matches!(
            os_joint_density(unif_h, unif_cdf, 3, &[0], &[0.1]),
            Err(Error::InvalidIndices(_))
        ));
        assert!(matches!(
            os_joint_density(unif_h, unif_cdf, 3, &[4], &[0.1]),
            Err(Error::InvalidIndices(_))
        ));
        assert!(matches!(
            os_joint_density(unif_h, unif_cdf, 3, &[1, 2], &[0.1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn full_vector_density_is_factorial_times_product() {
        let e = ScalarLaw::exponential(1.5).unwrap();
        let z = [0.1, 0.3, 0.35, 2.0];
        let d = os_joint_density(|x| e.density(x), |x| e.cdf(x), 4, &[1, 2, 3, 4], &z).unwrap();
        let want = 24.0 * z.iter().map(|&x| e.density(x)).product::<f64>();
        assert!((d - want).abs() <= 1e-13 * want);
    }

    fn nested(
        depth: usize,
        lo: f64,
        n: usize,
        point: &mut Vec<f64>,
        hi: f64,
        law: &ScalarLaw,
    ) -> f64 {
        let opts = QuadOpts {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            ..QuadOpts::default()
        };
        if depth == n {
            let idx: Vec<usize> = (1..=n).collect();
            return os_joint_density(|x| law.density(x), |x| law.cdf(x), n, &idx, point).unwrap();
        }
        integrate(
            |x| {
                let mut p = point.clone();
                p.push(x);
                nested(depth + 1, x, n, &mut p, hi, law)
            },
            lo,
            hi,
            opts,
        )
        .unwrap()
        .value
    }

    #[test]
    fn full_density_integrates_to_one_over_simplex() {
        let u = ScalarLaw::standard_uniform();
        for n in 1..=4 {
            let total = nested(0, 0.0, n, &mut Vec::new(), 1.0, &u);
            assert!((total - 1.0).abs() < 1e-6, "n={n}: {total}");
        }
        let e = ScalarLaw::exponential(1.0).unwrap();
        for n in 1..=2 {
            let total = nested(0, 0.0, n, &mut Vec::new(), 40.0, &e);
            assert!((total - 1.0).abs() < 1e-6, "exp n={n}: {total}");
        }
    }

    #[test]
    fn maximum_density_integrates_to_one() {
        let opts = QuadOpts::default();
        for n in 1..=6 {
            let q = integrate(
                |x| os_joint_density(unif_h, unif_cdf, n, &[n], &[x]).unwrap(),
                0.0,
                1.0,
                opts,
            )
            .unwrap();
            assert!((q.value - 1.0).abs() < 1e-10);
        }
        // middle order statistic of 5 under a Gaussian
        let g = ScalarLaw::standard_gaussian();
        let q = integrate(
            |x| os_joint_density(|t| g.density(t), |t| g.cdf(t), 5, &[3], &[x]).unwrap(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            opts,
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sorted_iid_is_sorted() {
        let p = ScalarLaw::poisson(2.0).unwrap();
        let s = sorted_iid(&p, 500, &mut RngStream::new(5)).unwrap();
        assert_eq!(s.origin(), Origin::SortedIid);
        assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
    }
}
