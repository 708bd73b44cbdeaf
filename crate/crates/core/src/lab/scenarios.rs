//! The scenario catalog: each scenario walks an index ladder, measures the
//! distance between the finite-index law and its limit, and renders a verdict.

use super::metrics::{
    cf_distance, default_cf_grid, ks_empirical, ks_step, sup_distance_continuous, tv_discrete,
    MassTable,
};
use super::report::{verdict, CdfOverlay, ConvergenceReport, McRecord, TraceRule, KS_SD};
use super::wold::{max_ks, wold_directions, wold_test, Projection};
use crate::dist::{Cdf, ScalarLaw, VectorLaw};
use crate::error::{Error, Result};
use crate::fep::{corr_sigma2, rho_hat, CentralMoments, GaussianLimit, Provenance};
use crate::mc::{self, replicate};
use crate::numeric::special::normal_pdf;
use crate::points::PointSet;
use crate::rng::RngStream;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{Map, Value};
use std::fmt::Write as _;

pub type Params = Map<String, Value>;

/// Catalog entry: id, the phrase of the limit statement it reproduces, and a summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioInfo {
    pub id: &'static str,
    pub anchor: &'static str,
    pub summary: &'static str,
}

/// Alphabetical.
pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        id: "BIN2POIS",
        anchor: "weakly converges to a Poisson random variable",
        summary: "Binomial(n, lambda/n) to Poisson(lambda): exact total variation over n",
    },
    ScenarioInfo {
        id: "BIN_CLT",
        anchor: "(X_{n}-np)/\\sqrt{npq}",
        summary: "standardized Binomial(n, p) to N(0,1): exact Kolmogorov distance over n",
    },
    ScenarioInfo {
        id: "CLT_RK",
        anchor: "central limit theorem on $\\mathbb{R}^{k}$",
        summary: "sqrt(n)(mean - mu) of (B1, B1+B2) to N(0, Sigma): projections over n",
    },
    ScenarioInfo {
        id: "CORR_COEF",
        anchor: "both have finite fourth moments",
        summary: "sqrt(n)(rho_n - rho)/sigma for Gaussian pairs to N(0,1) over n",
    },
    ScenarioInfo {
        id: "EP_FINDIM",
        anchor: "Any finite distribution of the uniform empirical process",
        summary: "(alpha_n(t_j)) to N(0, min(s,t) - st): projections over n",
    },
    ScenarioInfo {
        id: "EVT_FRECHET",
        anchor: "Fr\\'echet random variable with parameter",
        summary: "n^{-1/alpha} times Pareto maxima to Frechet(alpha): exact sup distance over n",
    },
    ScenarioInfo {
        id: "EVT_GUMBEL",
        anchor: "Gumbel random variable of distribution function",
        summary: "exponential maxima minus log n to Gumbel: exact sup distance over n",
    },
    ScenarioInfo {
        id: "EVT_WEIBULL",
        anchor: "Weibull random variable with parameter",
        summary: "n(M_n - 1) for uniform maxima to Weibull(1): exact sup distance over n",
    },
    ScenarioInfo {
        id: "HYP2BIN",
        anchor: "weakly converges to a Binomial random variable",
        summary: "Hypergeometric(N, rN, n) to Binomial(n, r): exact total variation over N",
    },
    ScenarioInfo {
        id: "INVAR_PRINC",
        anchor: "centered Gaussian vector with variance-covariance",
        summary: "(S_[nt_j]/sqrt(n)) of a simple random walk to N(0, min(s,t)): projections over n",
    },
    ScenarioInfo {
        id: "MULTINOM_CLT",
        anchor: "weakly converges to a $k$-dimensional Gaussian vector",
        summary: "((X_i - np_i)/sqrt(np_i)) to N(0, I - sqrt(p)sqrt(p)^T): projections over n",
    },
    ScenarioInfo {
        id: "NEGBIN_CLT",
        anchor: "sequence of Negative Binomial random variables",
        summary: "p(Y_k - k/p)/sqrt(qk) to N(0,1): exact Kolmogorov distance over k",
    },
    ScenarioInfo {
        id: "POIS2GAUSS",
        anchor: "weakly converges to standard Gaussian random variable",
        summary:
            "(Z_lambda - lambda)/sqrt(lambda) to N(0,1): exact Kolmogorov distance over lambda",
    },
];

pub fn scenario_info(id: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.id == id)
}

pub fn scenario_ids() -> Vec<&'static str> {
    SCENARIOS.iter().map(|s| s.id).collect()
}

pub const DEFAULT_REPLICATES: usize = 10_000;
pub const MIN_REPLICATES: usize = 1000;
/// Replicate cap for the Monte Carlo maxima attached to the exact EVT traces.
pub const EVT_MC_CAP: usize = 2000;
const DEFAULT_LADDER: [f64; 3] = [1e2, 1e3, 1e4];
/// Kolmogorov critical value at level 0.01, times the slack factor 1.5.
const KS_CRIT: f64 = 1.63 * 1.5;
/// Evaluation points of the dense scan behind the continuous sup distance.
const SUP_POINTS: usize = 4000;

/// Monte Carlo settings shared by a run.
#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    pub seed: u64,
    pub replicates: usize,
    /// Overrides the default ladder of sample-size indexed scenarios.
    pub sample_sizes: Option<Vec<u64>>,
    pub workers: usize,
}

impl McConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            replicates: DEFAULT_REPLICATES,
            sample_sizes: None,
            workers: 1,
        }
    }
}

struct Args<'a> {
    id: &'static str,
    map: &'a Params,
}

impl<'a> Args<'a> {
    fn new(id: &'static str, map: &'a Params, allowed: &[&str]) -> Result<Self> {
        if let Some(k) = map
            .keys()
            .find(|k| k.as_str() != "ladder" && !allowed.contains(&k.as_str()))
        {
            return Err(param_err(id, format!("unknown parameter `{k}`")));
        }
        Ok(Self { id, map })
    }

    fn err(&self, detail: String) -> Error {
        param_err(self.id, detail)
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| self.err(format!("`{key}` must be a finite number"))),
        }
    }

    fn reals(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(xs)) => xs
                .iter()
                .map(|v| v.as_f64().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| self.err(format!("`{key}` must be an array of finite numbers"))),
            Some(_) => Err(self.err(format!("`{key}` must be an array"))),
        }
    }

    /// The index ladder: `ladder` parameter, else the run's sample sizes when
    /// the index is a sample size, else `default`. Strictly increasing, positive.
    fn ladder(&self, mc: &McConfig, sample_size_index: bool, default: &[f64]) -> Result<Vec<f64>> {
        let ladder = match (&self.map.get("ladder"), &mc.sample_sizes) {
            (Some(_), _) => self.reals("ladder", default)?,
            (None, Some(ns)) if sample_size_index => ns.iter().map(|&n| n as f64).collect(),
            _ => default.to_vec(),
        };
        if ladder.is_empty()
            || ladder.iter().any(|x| *x <= 0.0)
            || ladder.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(
                self.err("ladder must be non-empty, positive and strictly increasing".into())
            );
        }
        Ok(ladder)
    }

    fn integer_ladder(&self, mc: &McConfig, default: &[f64]) -> Result<Vec<u64>> {
        let l = self.ladder(mc, true, default)?;
        if l.iter().any(|x| x.fract() != 0.0 || *x > 1e9) {
            return Err(self.err("ladder entries must be integers up to 1e9".into()));
        }
        Ok(l.into_iter().map(|x| x as u64).collect())
    }
}

fn param_err(id: &str, detail: String) -> Error {
    Error::ScenarioParam {
        scenario: id.into(),
        detail,
    }
}

fn check_range(args: &Args, key: &str, x: f64, ok: bool, expected: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(args.err(format!("`{key}` = {x} must satisfy {expected}")))
    }
}

/// Runs one scenario; the metric trace depends only on `(id, params, mc.seed,
/// mc.replicates, mc.sample_sizes)`.
pub fn run_scenario(id: &str, params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    if mc.replicates < MIN_REPLICATES {
        return Err(param_err(
            id,
            format!(
                "{} replicates, need at least {MIN_REPLICATES}",
                mc.replicates
            ),
        ));
    }
    match id {
        "HYP2BIN" => hyp2bin(params, mc),
        "BIN2POIS" => bin2pois(params, mc),
        "POIS2GAUSS" => pois2gauss(params, mc),
        "BIN_CLT" => bin_clt(params, mc),
        "NEGBIN_CLT" => negbin_clt(params, mc),
        "EVT_GUMBEL" | "EVT_FRECHET" | "EVT_WEIBULL" => evt(id, params, mc),
        "CLT_RK" => clt_rk(params, mc),
        "MULTINOM_CLT" => multinom_clt(params, mc),
        "EP_FINDIM" => ep_findim(params, mc),
        "INVAR_PRINC" => invar_princ(params, mc),
        "CORR_COEF" => corr_coef(params, mc),
        _ => Err(Error::UnknownScenario(id.into())),
    }
}

fn exact_report(
    id: &str,
    ladder: Vec<f64>,
    metric: &str,
    values: Vec<f64>,
    tolerance: f64,
    mc: McRecord,
    notes: String,
) -> ConvergenceReport {
    let verdict = verdict(&values, tolerance, TraceRule::Exact);
    ConvergenceReport {
        scenario: id.into(),
        index_values: ladder,
        metric: metric.into(),
        values,
        mc,
        tolerance,
        verdict,
        notes,
    }
}

fn no_mc(seed: u64) -> McRecord {
    McRecord {
        seed,
        replicates: 0,
        sample_sizes: vec![],
    }
}

// ---- discrete laws: total variation ----

fn hyp2bin_laws(args: &Args, big_n: f64, draws: f64, ratio: f64) -> Result<(ScalarLaw, ScalarLaw)> {
    let pop = big_n as u64;
    let succ = (ratio * big_n).round() as u64;
    if (big_n as u64) < draws as u64 || big_n.fract() != 0.0 {
        return Err(args.err(format!(
            "population {big_n} must be an integer at least n = {draws}"
        )));
    }
    Ok((
        ScalarLaw::hypergeometric(pop, succ, draws as u64)?,
        ScalarLaw::binomial(draws as u64, succ as f64 / pop as f64)?,
    ))
}

fn hyp2bin(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("HYP2BIN", params, &["n", "ratio"])?;
    let draws = args.real("n", 5.0)?;
    check_range(
        &args,
        "n",
        draws,
        draws >= 1.0 && draws.fract() == 0.0,
        "a positive integer",
    )?;
    let ratio = args.real("ratio", 0.5)?;
    check_range(
        &args,
        "ratio",
        ratio,
        ratio > 0.0 && ratio < 1.0,
        "0 < ratio < 1",
    )?;
    let ladder = args.ladder(mc, false, &DEFAULT_LADDER)?;
    let mut values = Vec::new();
    let mut notes = String::from("total variation; witness events:");
    for &big_n in &ladder {
        let (h, b) = hyp2bin_laws(&args, big_n, draws, ratio)?;
        let r = tv_discrete(&MassTable::from_law(&h)?, &MassTable::from_law(&b)?)?;
        values.push(r.tv);
        if let Some(w) = r.witness {
            let _ = write!(notes, " N={big_n}: {w:?};");
        }
    }
    Ok(exact_report(
        "HYP2BIN",
        ladder,
        "tv",
        values,
        1e-2,
        no_mc(mc.seed),
        notes,
    ))
}

fn bin2pois_laws(args: &Args, n: u64, lambda: f64) -> Result<(ScalarLaw, ScalarLaw)> {
    if (n as f64) <= lambda {
        return Err(args.err(format!("n = {n} must exceed lambda = {lambda}")));
    }
    Ok((
        ScalarLaw::binomial(n, lambda / n as f64)?,
        ScalarLaw::poisson(lambda)?,
    ))
}

fn bin2pois(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("BIN2POIS", params, &["lambda"])?;
    let lambda = args.real("lambda", 3.0)?;
    check_range(
        &args,
        "lambda",
        lambda,
        lambda > 0.0 && lambda <= 1e4,
        "0 < lambda <= 1e4",
    )?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let grid = default_cf_grid(1);
    let mut values = Vec::new();
    let mut notes = String::from("total variation; cf distance on [-10, 10] step 0.1:");
    for &n in &ladder {
        let (b, p) = bin2pois_laws(&args, n, lambda)?;
        values.push(tv_discrete(&MassTable::from_law(&b)?, &MassTable::from_law(&p)?)?.tv);
        let _ = write!(notes, " n={n}: {:.6e};", cf_distance(&b, &p, &grid)?);
    }
    let index = ladder.iter().map(|&n| n as f64).collect();
    Ok(exact_report(
        "BIN2POIS",
        index,
        "tv",
        values,
        1e-3,
        no_mc(mc.seed),
        notes,
    ))
}

// ---- lattice laws against the standard Gaussian: exact Kolmogorov distance ----

fn pois2gauss_law(lambda: f64) -> Result<ScalarLaw> {
    ScalarLaw::poisson(lambda)?.affine(lambda, lambda.sqrt())
}

fn bin_clt_law(n: u64, p: f64) -> Result<ScalarLaw> {
    let nf = n as f64;
    ScalarLaw::binomial(n, p)?.affine(nf * p, (nf * p * (1.0 - p)).sqrt())
}

/// `p(Y_k - k/p)/√(qk)`, i.e. `(Y_k - k/p) / (√(qk)/p)`.
fn negbin_clt_law(k: u64, p: f64) -> Result<ScalarLaw> {
    let kf = k as f64;
    ScalarLaw::negative_binomial(k, p)?.affine(kf / p, ((1.0 - p) * kf).sqrt() / p)
}

fn lattice_ks(law: &ScalarLaw) -> Result<f64> {
    let jumps = law.jumps().ok_or(Error::Unsupported {
        law: law.name().into(),
        what: "jump table",
    })?;
    ks_step(&jumps, &ScalarLaw::standard_gaussian())
}

fn lattice_report(
    id: &str,
    ladder: Vec<f64>,
    laws: Vec<ScalarLaw>,
    tol: f64,
    seed: u64,
) -> Result<ConvergenceReport> {
    let values = laws.iter().map(lattice_ks).collect::<Result<Vec<_>>>()?;
    let notes = "exact sup over both one-sided values at every atom".to_string();
    Ok(exact_report(
        id,
        ladder,
        "ks",
        values,
        tol,
        no_mc(seed),
        notes,
    ))
}

fn pois2gauss(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("POIS2GAUSS", params, &[])?;
    let ladder = args.ladder(mc, false, &DEFAULT_LADDER)?;
    if let Some(l) = ladder.iter().find(|l| **l > 1e6) {
        return Err(args.err(format!("lambda = {l} above 1e6")));
    }
    let laws = ladder
        .iter()
        .map(|&l| pois2gauss_law(l))
        .collect::<Result<_>>()?;
    lattice_report("POIS2GAUSS", ladder, laws, 5e-3, mc.seed)
}

fn bin_clt(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("BIN_CLT", params, &["p"])?;
    let p = args.real("p", 0.3)?;
    check_range(&args, "p", p, p > 0.0 && p < 1.0, "0 < p < 1")?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let laws = ladder
        .iter()
        .map(|&n| bin_clt_law(n, p))
        .collect::<Result<_>>()?;
    lattice_report(
        "BIN_CLT",
        ladder.iter().map(|&n| n as f64).collect(),
        laws,
        1e-2,
        mc.seed,
    )
}

fn negbin_clt(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("NEGBIN_CLT", params, &["p"])?;
    let p = args.real("p", 0.5)?;
    check_range(&args, "p", p, p > 0.0 && p < 1.0, "0 < p < 1")?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let laws = ladder
        .iter()
        .map(|&k| negbin_clt_law(k, p))
        .collect::<Result<_>>()?;
    lattice_report(
        "NEGBIN_CLT",
        ladder.iter().map(|&k| k as f64).collect(),
        laws,
        1e-2,
        mc.seed,
    )
}

// ---- maxima ----

struct Evt {
    base: ScalarLaw,
    limit: ScalarLaw,
    /// `(shift, scale)` with `(M_n - shift) / scale` converging.
    norm: Box<dyn Fn(f64) -> (f64, f64)>,
}

fn evt_setup(id: &str, args: &Args) -> Result<Evt> {
    Ok(match id {
        "EVT_GUMBEL" => Evt {
            base: ScalarLaw::exponential(1.0)?,
            limit: ScalarLaw::gumbel(),
            norm: Box::new(|n| (n.ln(), 1.0)),
        },
        "EVT_FRECHET" => {
            let alpha = args.real("alpha", 1.0)?;
            check_range(
                args,
                "alpha",
                alpha,
                alpha > 0.0 && alpha <= 100.0,
                "0 < alpha <= 100",
            )?;
            Evt {
                base: ScalarLaw::pareto(alpha)?,
                limit: ScalarLaw::frechet(alpha)?,
                norm: Box::new(move |n| (0.0, n.powf(1.0 / alpha))),
            }
        }
        _ => Evt {
            base: ScalarLaw::standard_uniform(),
            limit: ScalarLaw::weibull(1.0)?,
            norm: Box::new(|n| (1.0, 1.0 / n)),
        },
    })
}

fn evt_finite_law(e: &Evt, n: u64) -> Result<ScalarLaw> {
    let (shift, scale) = (e.norm)(n as f64);
    e.base.normalized_max(n, shift, scale)
}

fn evt(id: &str, params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let info = scenario_info(id).expect("catalog id");
    let allowed: &[&str] = if id == "EVT_FRECHET" { &["alpha"] } else { &[] };
    let args = Args::new(info.id, params, allowed)?;
    let e = evt_setup(id, &args)?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let reps = mc.replicates.min(EVT_MC_CAP);
    let mut values = Vec::new();
    let mut notes =
        format!("exact sup |F_n - F|; Monte Carlo maxima ({reps} replicates) KS vs F_n / vs F:");
    for &n in &ladder {
        let fin = evt_finite_law(&e, n)?;
        values.push(sup_distance_continuous(&fin, &e.limit, SUP_POINTS)?);
        let (shift, scale) = (e.norm)(n as f64);
        let tag = format!("{id}/n={n}");
        let maxima = replicate(mc.seed, &tag, reps, mc.workers, |rng, _| {
            let mut m = f64::NEG_INFINITY;
            for _ in 0..n {
                m = m.max(e.base.draw(rng)?);
            }
            Ok((m - shift) / scale)
        })?;
        let _ = write!(
            notes,
            " n={n}: {:.4} / {:.4};",
            ks_empirical(&maxima, &fin)?,
            ks_empirical(&maxima, &e.limit)?
        );
    }
    let record = McRecord {
        seed: mc.seed,
        replicates: reps,
        sample_sizes: ladder.clone(),
    };
    let index = ladder.iter().map(|&n| n as f64).collect();
    Ok(exact_report(
        id, index, "sup_cdf", values, 5e-3, record, notes,
    ))
}

// ---- vector limits: Cramér–Wold projections ----

/// Total number of Wold directions (canonical axes plus random unit vectors).
pub const WOLD_DIRECTIONS: usize = 8;

/// Replicates `Z_n` for one index value, in replicate order.
fn vector_replicates<F>(tag: &str, k: usize, mc: &McConfig, draw: F) -> Result<PointSet>
where
    F: Fn(&mut RngStream) -> Vec<f64> + Sync,
{
    let rows = replicate(mc.seed, tag, mc.replicates, mc.workers, |rng, _| {
        Ok(draw(rng))
    })?;
    Ok(PointSet::from_rows(k, &rows))
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs the Wold trace. `lattice_step(n)` is the largest atom spacing of a
/// canonical projection divided by its limit standard deviation.
fn vector_report<F>(
    id: &str,
    ladder: &[u64],
    limit: &GaussianLimit,
    extra_directions: &[Vec<f64>],
    lattice_step: impl Fn(f64) -> f64,
    mc: &McConfig,
    draw: F,
) -> Result<ConvergenceReport>
where
    F: Fn(u64, &mut RngStream) -> Vec<f64> + Sync,
{
    let k = limit.dim();
    let mut dir_rng = RngStream::substream(mc.seed, &format!("{id}/directions"), 0);
    let mut dirs = wold_directions(k, WOLD_DIRECTIONS.max(k + 1), &mut dir_rng);
    dirs.extend_from_slice(extra_directions);
    let mut values = Vec::new();
    let mut notes = format!(
        "max KS over {} projections; max |cov_hat - Sigma|:",
        dirs.len()
    );
    let mut degenerate = String::new();
    for &n in ladder {
        let z = vector_replicates(&format!("{id}/n={n}"), k, mc, |rng| draw(n, rng))?;
        let res = wold_test(&z, limit, &dirs)?;
        values.push(max_ks(&res));
        let _ = write!(
            notes,
            " n={n}: {:.4};",
            max_abs_diff(&mc::covariance(&z), limit.cov())
        );
        for r in &res {
            if let Projection::Degenerate { q99_abs, .. } = r {
                let _ = write!(degenerate, " n={n}: {q99_abs:.4};");
            }
        }
    }
    if !degenerate.is_empty() {
        let _ = write!(
            notes,
            " degenerate direction 99% quantile of |projection|:{degenerate}"
        );
    }
    let r = mc.replicates as f64;
    let last = *ladder.last().expect("non-empty ladder") as f64;
    let tolerance = KS_CRIT / r.sqrt() + normal_pdf(0.0) * lattice_step(last);
    let band = 3.0 * KS_SD / r.sqrt();
    let verdict = verdict(&values, tolerance, TraceRule::Noisy { band });
    Ok(ConvergenceReport {
        scenario: id.into(),
        index_values: ladder.iter().map(|&n| n as f64).collect(),
        metric: "wold_max_ks".into(),
        values,
        mc: McRecord {
            seed: mc.seed,
            replicates: mc.replicates,
            sample_sizes: ladder.to_vec(),
        },
        tolerance,
        verdict,
        notes,
    })
}

/// Limit of `√n(X̄_n - μ)` for `X = (B1, B1 + B2)`, `B_j` iid Bernoulli(p).
pub fn clt_rk_limit(p: f64) -> Result<GaussianLimit> {
    let v = p * (1.0 - p);
    GaussianLimit::centered(
        DMatrix::from_row_slice(2, 2, &[v, v, v, 2.0 * v]),
        Provenance::Formula,
    )
}

/// One replicate of `√n(X̄_n - μ)` for `X = (B1, B1 + B2)`.
pub fn clt_rk_draw(p: f64, n: u64, rng: &mut RngStream) -> Vec<f64> {
    let (mut s1, mut s2) = (0u64, 0u64);
    for _ in 0..n {
        let b1 = u64::from(rng.uniform() <= p);
        let b2 = u64::from(rng.uniform() <= p);
        s1 += b1;
        s2 += b1 + b2;
    }
    let nf = n as f64;
    let rt = nf.sqrt();
    vec![(s1 as f64 - nf * p) / rt, (s2 as f64 - 2.0 * nf * p) / rt]
}

fn clt_rk(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("CLT_RK", params, &["p"])?;
    let p = args.real("p", 0.3)?;
    check_range(&args, "p", p, p > 0.0 && p < 1.0, "0 < p < 1")?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let limit = clt_rk_limit(p)?;
    let step = move |n: f64| 1.0 / (n * p * (1.0 - p)).sqrt();
    vector_report("CLT_RK", &ladder, &limit, &[], step, mc, |n, rng| {
        clt_rk_draw(p, n, rng)
    })
}

fn check_probabilities(args: &Args, p: &[f64]) -> Result<()> {
    if p.len() < 2 || p.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(args.err(format!("p = {p:?} needs at least two entries in (0, 1)")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(args.err(format!("p sums to {total}, not 1")));
    }
    Ok(())
}

/// `Σ_ii = 1 - p_i`, `Σ_ij = -√(p_i p_j)`.
pub fn multinomial_limit(p: &[f64]) -> Result<GaussianLimit> {
    let s: Vec<f64> = p.iter().map(|x| x.sqrt()).collect();
    let k = p.len();
    let cov = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 - p[i] } else { -s[i] * s[j] });
    GaussianLimit::centered(cov, Provenance::Formula)
}

/// One replicate of `((X_i - n p_i)/√(n p_i))_i` for multinomial counts `X`.
pub fn multinomial_draw(law: &VectorLaw, p: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let VectorLaw::Multinomial { n, .. } = law else {
        unreachable!("multinomial law")
    };
    let nf = *n as f64;
    let mut x = vec![0.0; p.len()];
    law.draw_into(rng, &mut x);
    x.iter()
        .zip(p)
        .map(|(c, pi)| (c - nf * pi) / (nf * pi).sqrt())
        .collect()
}

fn multinom_clt(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("MULTINOM_CLT", params, &["p"])?;
    let p = args.reals("p", &[0.2, 0.3, 0.5])?;
    check_probabilities(&args, &p)?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let limit = multinomial_limit(&p)?;
    let laws = ladder
        .iter()
        .map(|&n| Ok((n, VectorLaw::multinomial(n, &p)?)))
        .collect::<Result<Vec<_>>>()?;
    let root_p: Vec<f64> = p.iter().map(|x| x.sqrt()).collect();
    let min_pq = p
        .iter()
        .map(|x| x * (1.0 - x))
        .fold(f64::INFINITY, f64::min);
    let step = move |n: f64| 1.0 / (n * min_pq).sqrt();
    vector_report(
        "MULTINOM_CLT",
        &ladder,
        &limit,
        &[root_p],
        step,
        mc,
        |n, rng| {
            let law = &laws.iter().find(|(m, _)| *m == n).expect("ladder law").1;
            multinomial_draw(law, &p, rng)
        },
    )
}

fn check_times(args: &Args, t: &[f64]) -> Result<()> {
    if t.is_empty()
        || t.iter().any(|x| !(*x > 0.0 && *x <= 1.0))
        || t.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(args.err(format!("t = {t:?} must be strictly increasing in (0, 1]")));
    }
    Ok(())
}

/// `min(s, t) - st`.
pub fn empirical_process_limit(t: &[f64]) -> Result<GaussianLimit> {
    let k = t.len();
    GaussianLimit::centered(
        DMatrix::from_fn(k, k, |i, j| t[i].min(t[j]) - t[i] * t[j]),
        Provenance::Formula,
    )
}

/// One replicate of `(α_n(t_j))_j`, `α_n(s) = √n(U_n(s) - s)`, with `U_n`
/// evaluated on the sorted sample by binary search.
pub fn empirical_process_draw(t: &[f64], n: u64, rng: &mut RngStream) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    u.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    t.iter()
        .map(|&s| nf.sqrt() * (u.partition_point(|x| *x <= s) as f64 / nf - s))
        .collect()
}

fn ep_findim(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("EP_FINDIM", params, &["t"])?;
    let t = args.reals("t", &[0.25, 0.5, 0.75])?;
    check_times(&args, &t)?;
    if t.last() == Some(&1.0) {
        return Err(args.err("t = 1 gives the degenerate value alpha_n(1) = 0".into()));
    }
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let limit = empirical_process_limit(&t)?;
    let min_var = t
        .iter()
        .map(|s| s * (1.0 - s))
        .fold(f64::INFINITY, f64::min);
    let step = move |n: f64| 1.0 / (n * min_var).sqrt();
    vector_report("EP_FINDIM", &ladder, &limit, &[], step, mc, |n, rng| {
        empirical_process_draw(&t, n, rng)
    })
}

/// `min(s, t)`.
pub fn invariance_limit(t: &[f64]) -> Result<GaussianLimit> {
    let k = t.len();
    GaussianLimit::centered(
        DMatrix::from_fn(k, k, |i, j| t[i].min(t[j])),
        Provenance::Formula,
    )
}

/// One replicate of `(S_[n t_j] / √n)_j` for a ±1 random walk.
pub fn invariance_draw(t: &[f64], n: u64, rng: &mut RngStream) -> Vec<f64> {
    let stops: Vec<u64> = t.iter().map(|s| (n as f64 * s).floor() as u64).collect();
    let mut out = Vec::with_capacity(t.len());
    let mut s = 0i64;
    let mut m = 0u64;
    for &stop in &stops {
        while m < stop {
            s += if rng.uniform() < 0.5 { -1 } else { 1 };
            m += 1;
        }
        out.push(s as f64 / (n as f64).sqrt());
    }
    out
}

fn invar_princ(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("INVAR_PRINC", params, &["t"])?;
    let t = args.reals("t", &[0.25, 0.5, 0.75])?;
    check_times(&args, &t)?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    let limit = invariance_limit(&t)?;
    // partial sums move on a lattice of spacing 2
    let t0 = t[0];
    let step = move |n: f64| 2.0 / (n * t0).sqrt();
    vector_report("INVAR_PRINC", &ladder, &limit, &[], step, mc, |n, rng| {
        invariance_draw(&t, n, rng)
    })
}

// ---- correlation coefficient ----

/// `n` pairs `(X, ρX + √(1-ρ²)Y)` with `X, Y` iid standard Gaussian.
pub fn gaussian_pairs(rho: f64, n: usize, rng: &mut RngStream) -> PointSet {
    let c = (1.0 - rho * rho).sqrt();
    let mut out = PointSet::with_capacity(2, n);
    for _ in 0..n {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        out.push(&[x, rho * x + c * y]);
    }
    out
}

/// Replicates of `√n(ρ_n - ρ)` over Gaussian pairs with correlation `rho`.
pub fn corr_replicates(
    rho: f64,
    n: u64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<f64>> {
    let tag = format!("CORR_COEF/rho={rho}/n={n}");
    let rt = (n as f64).sqrt();
    replicate(seed, &tag, reps, workers, |rng, _| {
        Ok(rt * (rho_hat(&gaussian_pairs(rho, n as usize, rng))? - rho))
    })
}

fn corr_coef(params: &Params, mc: &McConfig) -> Result<ConvergenceReport> {
    let args = Args::new("CORR_COEF", params, &["rho"])?;
    let rho = args.real("rho", 0.5)?;
    check_range(&args, "rho", rho, rho.abs() < 1.0, "|rho| < 1")?;
    let ladder = args.integer_ladder(mc, &DEFAULT_LADDER)?;
    if ladder[0] < 4 {
        return Err(args.err("n must be at least 4".into()));
    }
    let sigma2 = corr_sigma2(&CentralMoments::bivariate_gaussian(rho, 1.0, 1.0))?;
    let sigma = sigma2.sqrt();
    let std_normal = ScalarLaw::standard_gaussian();
    let mut values = Vec::new();
    let mut notes = format!(
        "KS of sqrt(n)(rho_n - rho)/sigma vs N(0,1), sigma^2 = {sigma2:.6}; replicate variance:"
    );
    for &n in &ladder {
        let xs = corr_replicates(rho, n, mc.replicates, mc.seed, mc.workers)?;
        let _ = write!(notes, " n={n}: {:.4};", mc::variance(&xs));
        let z: Vec<f64> = xs.iter().map(|x| x / sigma).collect();
        values.push(ks_empirical(&z, &std_normal)?);
    }
    let r = mc.replicates as f64;
    let tolerance = KS_CRIT / r.sqrt();
    let verdict = verdict(
        &values,
        tolerance,
        TraceRule::Noisy {
            band: 3.0 * KS_SD / r.sqrt(),
        },
    );
    Ok(ConvergenceReport {
        scenario: "CORR_COEF".into(),
        index_values: ladder.iter().map(|&n| n as f64).collect(),
        metric: "ks".into(),
        values,
        mc: McRecord {
            seed: mc.seed,
            replicates: mc.replicates,
            sample_sizes: ladder,
        },
        tolerance,
        verdict,
        notes,
    })
}

// ---- overlays ----

/// Largest number of points per index value in an overlay.
const OVERLAY_POINTS: usize = 201;

fn overlay_points(
    law_n: &dyn Cdf,
    limit: &ScalarLaw,
    lattice: Option<Vec<f64>>,
    index: f64,
    out: &mut CdfOverlay,
) -> Result<()> {
    let xs: Vec<f64> = match lattice {
        Some(atoms) => {
            let stride = atoms.len().div_ceil(OVERLAY_POINTS).max(1);
            atoms.into_iter().step_by(stride).collect()
        }
        None => (1..=OVERLAY_POINTS)
            .map(|j| crate::quantile::gen_inv(limit, j as f64 / (OVERLAY_POINTS + 1) as f64))
            .collect::<Result<_>>()?,
    };
    out.rows.extend(
        xs.into_iter()
            .map(|x| [index, x, law_n.cdf(x), limit.cdf(x)]),
    );
    Ok(())
}

/// Central atoms of a lattice law, those with cdf in [1e-6, 1 - 1e-6].
fn central_atoms(law: &ScalarLaw) -> Vec<f64> {
    law.jumps()
        .unwrap_or_default()
        .into_iter()
        .filter(|&(_, left, right)| right >= 1e-6 && left <= 1.0 - 1e-6)
        .map(|j| j.0)
        .collect()
}

/// `(index, x, F_n(x), F(x))` rows for the scenarios whose finite-index law
/// has a closed-form cdf; `None` for Monte Carlo scenarios.
pub fn cdf_overlay(id: &str, params: &Params, mc: &McConfig) -> Result<Option<CdfOverlay>> {
    let mut out = CdfOverlay::default();
    let gauss = ScalarLaw::standard_gaussian();
    match id {
        "HYP2BIN" => {
            let args = Args::new("HYP2BIN", params, &["n", "ratio"])?;
            let (draws, ratio) = (args.real("n", 5.0)?, args.real("ratio", 0.5)?);
            for big_n in args.ladder(mc, false, &DEFAULT_LADDER)? {
                let (h, b) = hyp2bin_laws(&args, big_n, draws, ratio)?;
                overlay_points(&h, &b, Some(central_atoms(&b)), big_n, &mut out)?;
            }
        }
        "BIN2POIS" => {
            let args = Args::new("BIN2POIS", params, &["lambda"])?;
            let lambda = args.real("lambda", 3.0)?;
            for n in args.integer_ladder(mc, &DEFAULT_LADDER)? {
                let (b, p) = bin2pois_laws(&args, n, lambda)?;
                overlay_points(&b, &p, Some(central_atoms(&p)), n as f64, &mut out)?;
            }
        }
        "POIS2GAUSS" | "BIN_CLT" | "NEGBIN_CLT" => {
            let allowed: &[&str] = if id == "POIS2GAUSS" { &[] } else { &["p"] };
            let id_static = scenario_info(id).expect("catalog id").id;
            let args = Args::new(id_static, params, allowed)?;
            let laws: Vec<(f64, ScalarLaw)> = match id {
                "POIS2GAUSS" => args
                    .ladder(mc, false, &DEFAULT_LADDER)?
                    .into_iter()
                    .map(|l| Ok((l, pois2gauss_law(l)?)))
                    .collect::<Result<_>>()?,
                "BIN_CLT" => {
                    let p = args.real("p", 0.3)?;
                    args.integer_ladder(mc, &DEFAULT_LADDER)?
                        .into_iter()
                        .map(|n| Ok((n as f64, bin_clt_law(n, p)?)))
                        .collect::<Result<_>>()?
                }
                _ => {
                    let p = args.real("p", 0.5)?;
                    args.integer_ladder(mc, &DEFAULT_LADDER)?
                        .into_iter()
                        .map(|k| Ok((k as f64, negbin_clt_law(k, p)?)))
                        .collect::<Result<_>>()?
                }
            };
            for (index, law) in laws {
                overlay_points(&law, &gauss, Some(central_atoms(&law)), index, &mut out)?;
            }
        }
        "EVT_GUMBEL" | "EVT_FRECHET" | "EVT_WEIBULL" => {
            let allowed: &[&str] = if id == "EVT_FRECHET" { &["alpha"] } else { &[] };
            let args = Args::new(scenario_info(id).expect("catalog id").id, params, allowed)?;
            let e = evt_setup(id, &args)?;
            for n in args.integer_ladder(mc, &DEFAULT_LADDER)? {
                overlay_points(&evt_finite_law(&e, n)?, &e.limit, None, n as f64, &mut out)?;
            }
        }
        _ if scenario_info(id).is_some() => return Ok(None),
        _ => return Err(Error::UnknownScenario(id.into())),
    }
    Ok(Some(out))
}
