use convlab::dist::{catalog_representatives, Cdf, ScalarLaw};
use convlab::error::Error;
use convlab::lab::metrics::{cdf_continuity_check, tv_discrete, MassTable};
use convlab::quantile::{galois_check, galois_check_strict, gen_inv, skorohod_couple};
use convlab::rng::RngStream;
use proptest::prelude::*;

fn law_strategy() -> impl Strategy<Value = ScalarLaw> {
    let laws = catalog_representatives();
    (0..laws.len()).prop_map(move |i| laws[i].clone())
}

fn level() -> impl Strategy<Value = f64> {
    (1e-9f64..1.0 - 1e-9).prop_filter("open interval", |u| *u > 0.0 && *u < 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn galois_holds_at_the_quantile_and_around_it(law in law_strategy(), u in level(), eps in -1e-3f64..1e-3) {
        let x = gen_inv(&law, u).unwrap();
        for t in [x, x + eps * x.abs().max(1.0)] {
            let (l, r) = galois_check(&law, u, t).unwrap();
            prop_assert_eq!(l, r, "u <= F(t) vs F^-1(u) <= t at u={} t={}", u, t);
            let (l, r) = galois_check_strict(&law, u, t).unwrap();
            prop_assert_eq!(l, r, "strict form at u={} t={}", u, t);
        }
    }

    #[test]
    fn quantile_is_monotone(law in law_strategy(), a in level(), b in level()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(gen_inv(&law, lo).unwrap() <= gen_inv(&law, hi).unwrap());
    }

    #[test]
    fn quantile_is_left_continuous(law in law_strategy(), u in 0.01f64..0.99) {
        let x = gen_inv(&law, u).unwrap();
        let probes: Vec<f64> = [1e-3, 1e-6, 1e-9].iter().map(|d| gen_inv(&law, u - d).unwrap()).collect();
        prop_assert!(probes.windows(2).all(|w| w[0] <= w[1]) && probes[2] <= x);
        let gaps: Vec<f64> = probes.iter().map(|p| x - p).collect();
        prop_assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
        if let Some(jumps) = law.jumps() {
            // no cumulative level inside [u - 1e-9, u): the quantile cannot move
            let crossing = jumps.iter().any(|&(_, _, right)| right >= u - 1e-9 && right < u);
            if !crossing {
                prop_assert_eq!(probes[2], x);
            }
        } else {
            prop_assert!(gaps[2] <= 1e-6 * x.abs().max(1.0), "gap {} at u={}", gaps[2], u);
        }
    }

    #[test]
    fn scheffe_matches_half_l1(seed in any::<u64>(), s in 1usize..=12) {
        let mut rng = RngStream::new(seed);
        let mut table = || {
            let mut w: Vec<f64> = (0..s).map(|_| rng.uniform()).collect();
            w[0] += 0.1;
            let total: f64 = w.iter().sum();
            MassTable::new((0..s).map(|k| (k as f64, w[k] / total)).collect()).unwrap()
        };
        let (p, q) = (table(), table());
        let r = tv_discrete(&p, &q).unwrap();
        let half_l1 = 0.5 * p.atoms().iter().zip(q.atoms()).map(|(a, b)| (a.1 - b.1).abs()).sum::<f64>();
        prop_assert!((r.tv - half_l1).abs() <= 1e-12);
    }

    #[test]
    fn continuity_check_rejects_exactly_the_atoms(k in 0u64..12, off in 0.05f64..0.95) {
        let limit = ScalarLaw::poisson(3.0).unwrap();
        let approx = ScalarLaw::binomial(200, 0.015).unwrap();
        let atom = k as f64;
        prop_assert_eq!(cdf_continuity_check(&approx, &limit, &[atom]), Err(Error::AtomPoint(atom)));
        let d = cdf_continuity_check(&approx, &limit, &[atom + off]).unwrap();
        prop_assert!((d[0] - (approx.cdf(atom + off) - limit.cdf(atom + off)).abs()).abs() == 0.0);
    }
}

fn mean_abs_gap(n: u64, rows: usize) -> f64 {
    let bin = ScalarLaw::binomial(n, 3.0 / n as f64).unwrap();
    let pois = ScalarLaw::poisson(3.0).unwrap();
    let mut rng = RngStream::substream(11, "coupling/binomial", n);
    let table = skorohod_couple(&[bin], &pois, &mut rng, rows).unwrap();
    table.rows.iter().map(|r| (r[0] - r[1]).abs()).sum::<f64>() / rows as f64
}

#[test]
fn coupled_binomial_approaches_poisson() {
    let gaps: Vec<f64> = [10, 100, 1000]
        .iter()
        .map(|&n| mean_abs_gap(n, 20_000))
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 0.01, "{gaps:?}");
}

#[test]
fn coupled_gumbel_maxima_converge() {
    let gumbel = ScalarLaw::gumbel();
    let exp = ScalarLaw::exponential(1.0).unwrap();
    let medians: Vec<f64> = [100u64, 1000, 10_000]
        .iter()
        .map(|&n| {
            let m = exp.normalized_max(n, (n as f64).ln(), 1.0).unwrap();
            let mut rng = RngStream::substream(12, "coupling/gumbel", n);
            let table = skorohod_couple(&[m], &gumbel, &mut rng, 5000).unwrap();
            let mut d: Vec<f64> = table.rows.iter().map(|r| (r[0] - r[1]).abs()).collect();
            d.sort_by(f64::total_cmp);
            d[d.len() / 2]
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn coupled_rows_share_one_uniform() {
    let laws = [
        ScalarLaw::exponential(1.0).unwrap(),
        ScalarLaw::exponential(2.0).unwrap(),
    ];
    let mut rng = RngStream::new(5);
    let table = skorohod_couple(&laws, &ScalarLaw::standard_uniform(), &mut rng, 200).unwrap();
    for r in &table.rows {
        // the rate-2 quantile is half the rate-1 quantile at the same level
        assert!((r[0] - 2.0 * r[1]).abs() <= 1e-12 * r[0].max(1.0));
        assert!((r[0] - (-(1.0 - r[2]).ln())).abs() <= 1e-12 * r[0].max(1.0));
    }
    assert_eq!(table.headers.len(), 3);
}
