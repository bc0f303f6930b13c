mod common;

use iph::families::{
    erlang_oracle, mixture_density, mixture_transformed, ErlangFamily, Moment, SeriesConfig, Transform,
    TransformedPH,
};
use iph::ks::ks_test;
use iph::phcore::{erlang_rep, ErlangSpec, PHDist};
use iph::{Error, Parallelism};

const EULER: f64 = 0.577_215_664_901_532_9;

fn er(n: usize, l: f64) -> PHDist {
    erlang_rep(ErlangSpec { n, lambda: l }).unwrap()
}

fn families(base: &PHDist) -> Vec<TransformedPH> {
    vec![
        TransformedPH::log_ph(base.clone()).unwrap(),
        TransformedPH::new(base.clone(), Transform::ParetoExp { beta: 2.5 }).unwrap(),
        TransformedPH::new(base.clone(), Transform::Power { beta: 0.7 }).unwrap(),
        TransformedPH::new(base.clone(), Transform::Power { beta: 2.0 }).unwrap(),
        TransformedPH::new(base.clone(), Transform::NegLogAffine { mu: 1.0, sigma: 0.5 }).unwrap(),
        TransformedPH::new(base.clone(), Transform::ShiftedPower { mu: 0.0, sigma: 1.0, xi: 0.4 }).unwrap(),
        TransformedPH::new(base.clone(), Transform::ShiftedPower { mu: 0.5, sigma: 2.0, xi: -0.3 }).unwrap(),
    ]
}

/// Points spread over the bulk of the law, from its quantiles.
fn grid(d: &TransformedPH, n: usize) -> Vec<f64> {
    (1..n).map(|k| d.quantile(k as f64 / n as f64).unwrap()).collect()
}

#[test]
fn density_is_derivative_of_survival() {
    for d in families(&er(3, 2.0)) {
        for y in grid(&d, 40) {
            let h = 1e-5 * y.abs().max(1e-2);
            let fd = (d.sf(y - h).unwrap() - d.sf(y + h).unwrap()) / (2.0 * h);
            let f = d.pdf(y).unwrap();
            assert!(common::close(fd, f, 1e-4, 1e-10), "{:?} at {y}: {fd} vs {f}", d.transform());
        }
    }
}

#[test]
fn density_integrates_to_one() {
    for d in families(&er(2, 1.5)) {
        let lo = d.quantile(1e-12).unwrap();
        let hi = d.quantile(1.0 - 1e-10).unwrap();
        let mass = common::quad(&|y| d.pdf(y).unwrap(), lo, hi, 1e-10);
        assert!((mass - 1.0).abs() < 1e-6, "{:?}: {mass}", d.transform());
    }
}

#[test]
fn inverse_transform_round_trip() {
    for d in families(&er(2, 1.0)) {
        let t = d.transform();
        for y in grid(&d, 30) {
            let back = t.g(t.g_inv(y, d.mu()), d.mu());
            assert!(common::close(back, y, 1e-9, 1e-12), "{t:?} at {y}");
        }
    }
}

#[test]
fn log_erlang_tail_sum_form() {
    for (n, l) in [(1, 0.5), (3, 1.0), (4, 3.0)] {
        let d = TransformedPH::log_ph(er(n, l)).unwrap();
        for k in 0..50 {
            let y = 0.4 * k as f64;
            let lg = (1.0f64 + y).ln();
            let sum: f64 = (0..n).map(|j| l.powi(j as i32) * lg.powi(j as i32) / common::factorial(j)).sum();
            let want = (1.0 + y).powf(-l) * sum;
            assert!(common::close(d.sf(y).unwrap(), want, 1e-12, 1e-300));
        }
    }
}

#[test]
fn me_example_special_points() {
    let t = nalgebra::DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -101.0, -103.0, -3.0]);
    let base = PHDist::matrix_exponential(vec![101.0, 0.0, 0.0], t, vec![0.0, 0.0, 1.0]).unwrap();
    let d = TransformedPH::from_parts(base, Transform::ParetoExp { beta: 1.0 }, 1.0, 0.0).unwrap();
    assert!(d.pdf(0.0).unwrap().abs() < 1e-14);
    let y = (std::f64::consts::PI / 10.0).exp() - 1.0;
    let want = 101.0 / 50.0 * (-std::f64::consts::PI / 5.0).exp();
    assert!(common::close(d.pdf(y).unwrap(), want, 1e-10, 0.0));
}

#[test]
fn erlang_oracles_agree_with_matrix_path() {
    let fams = [
        (ErlangFamily::Pareto, None),
        (ErlangFamily::Weibull { beta: 1.3 }, Some(Transform::Power { beta: 1.3 })),
        (ErlangFamily::Gumbel { mu: 0.2, sigma: 0.8 }, Some(Transform::NegLogAffine { mu: 0.2, sigma: 0.8 })),
        (
            ErlangFamily::Gev { mu: 0.1, sigma: 1.2, xi: 0.3 },
            Some(Transform::ShiftedPower { mu: 0.1, sigma: 1.2, xi: 0.3 }),
        ),
    ];
    for (fam, tr) in fams {
        for n in 1..=4 {
            let base = er(n, 2.0);
            let d = match tr {
                None => TransformedPH::log_ph(base).unwrap(),
                Some(t) => TransformedPH::new(base, t).unwrap(),
            };
            for y in grid(&d, 25) {
                let want = erlang_oracle(fam, n, 2.0, y).unwrap();
                assert!(common::close(d.pdf(y).unwrap(), want, 1e-10, 1e-300), "{fam:?} n={n} y={y}");
            }
        }
    }
    assert!(erlang_oracle(ErlangFamily::Gumbel { mu: 0.0, sigma: -1.0 }, 1, 1.0, 0.0).is_err());
}

#[test]
fn conditional_excess_ratio_and_composition() {
    let d = TransformedPH::log_ph(er(2, 2.0)).unwrap();
    let c = d.mp_conditional_excess(1.0).unwrap();
    let s1 = d.sf(1.0).unwrap();
    for k in 0..40 {
        let y = 0.3 * k as f64;
        assert!(common::close(c.sf(y).unwrap(), d.sf(1.0 + y).unwrap() / s1, 1e-10, 1e-15));
    }
    let twice = d.mp_conditional_excess(0.7).unwrap().mp_conditional_excess(1.8).unwrap();
    let once = d.mp_conditional_excess(2.5).unwrap();
    for k in 0..40 {
        let y = 0.5 * k as f64;
        assert!(common::close(twice.sf(y).unwrap(), once.sf(y).unwrap(), 1e-9, 1e-15));
    }
    let same = d.mp_conditional_excess(0.0).unwrap();
    assert_eq!(same, d);
}

#[test]
fn excess_needs_unshifted_pareto() {
    let w = TransformedPH::new(er(2, 1.0), Transform::Power { beta: 2.0 }).unwrap();
    assert!(w.mp_conditional_excess(1.0).is_err());
    let s = TransformedPH::with_shift(er(2, 1.0), Transform::ParetoExp { beta: 1.0 }, 0.5).unwrap();
    assert!(matches!(s.mp_conditional_excess(1.0), Err(Error::Unsupported(_))));
}

#[test]
fn pareto_laplace_against_quadrature() {
    let d = TransformedPH::log_ph(er(2, 3.0)).unwrap();
    for s in [0.5, 1.0, 2.0] {
        // integrate in the base scale: E e^{-s(e^X - 1)}
        let q = common::half_line(&|x: f64| (-s * x.exp_m1()).exp() * common::erlang_pdf(2, 3.0, x), 2.0, 1e-13);
        assert!(common::close(d.mp_laplace(s).unwrap(), q, 1e-6, 0.0), "s = {s}");
    }
    let unit = TransformedPH::log_ph(PHDist::exponential(1.0).unwrap()).unwrap();
    assert!((unit.mp_laplace(1e-4).unwrap() - 1.0).abs() < 1e-3);
    assert!(unit.mp_laplace(0.0).is_err());
    // large argument, deep in the underflow-prone regime
    let v = d.mp_laplace(500.0).unwrap();
    let q = common::half_line(&|x: f64| (-500.0 * x.exp_m1()).exp() * common::erlang_pdf(2, 3.0, x), 1e-3, 1e-16);
    assert!(common::close(v, q, 1e-5, 1e-300), "{v} vs {q}");
}

#[test]
fn shifted_fractional_moment() {
    let d = TransformedPH::log_ph(er(3, 2.0)).unwrap();
    for a in [0.5, 1.0, 1.9] {
        let q = common::half_line(&|x: f64| 4.0 * x * x * ((a - 2.0) * x).exp(), 2.0, 1e-12);
        let m = d.mp_shifted_frac_moment(a).unwrap();
        assert!(common::close(m, q, 1e-6, 0.0), "α = {a}: {m} vs {q}");
    }
    assert!((d.mp_shifted_frac_moment(1e-8).unwrap() - 1.0).abs() < 1e-6);
    assert!(matches!(d.mp_shifted_frac_moment(2.0), Err(Error::Divergent(_))));
    assert!(matches!(d.mp_shifted_frac_moment(2.5), Err(Error::Divergent(_))));
}

#[test]
fn weibull_moments_and_mgf() {
    let d = TransformedPH::new(er(2, 1.0), Transform::Power { beta: 1.5 }).unwrap();
    let q = common::half_line(&|x: f64| x.powf(2.0 / 1.5) * common::erlang_pdf(2, 1.0, x), 3.0, 1e-12);
    assert!(common::close(d.mw_moment(2.0).unwrap(), q, 1e-6, 0.0));
    assert!(common::close(d.mw_moment(1.5).unwrap(), 2.0, 1e-12, 0.0));

    let d = TransformedPH::new(PHDist::exponential(1.0).unwrap(), Transform::Power { beta: 2.0 }).unwrap();
    let q = common::half_line(&|x: f64| (0.5 * x.sqrt()).exp() * (-x).exp(), 3.0, 1e-12);
    let m = d.mw_mgf(0.5, SeriesConfig::default()).unwrap();
    assert!(m.converged);
    assert!(common::close(m.value, q, 1e-5, 0.0));
    let tight = SeriesConfig {
        rel_tol: 1e-14,
        max_terms: 3,
    };
    assert!(matches!(d.mw_mgf(0.5, tight), Err(Error::NonConvergence { .. })));
}

#[test]
fn gumbel_moments() {
    let d = TransformedPH::new(er(2, 1.0), Transform::NegLogAffine { mu: 0.0, sigma: 1.0 }).unwrap();
    assert!(common::close(d.ep_mean().unwrap(), EULER - 1.0, 1e-12, 1e-15));
    let shifted = TransformedPH::new(er(2, 1.0), Transform::NegLogAffine { mu: 3.0, sigma: 1.0 }).unwrap();
    assert!((shifted.ep_mean().unwrap() - d.ep_mean().unwrap() - 3.0).abs() < 1e-12);

    let d = TransformedPH::new(er(2, 2.0), Transform::NegLogAffine { mu: 0.0, sigma: 0.5 }).unwrap();
    let q = common::half_line(&|x: f64| x.powf(0.5) * common::erlang_pdf(2, 2.0, x), 2.0, 1e-12);
    assert!(common::close(d.ep_laplace(1.0).unwrap(), q, 1e-5, 0.0));
}

#[test]
fn gev_mean() {
    let d = TransformedPH::new(er(2, 1.0), Transform::ShiftedPower { mu: 0.0, sigma: 1.0, xi: 0.5 }).unwrap();
    let q = common::half_line(&|x: f64| (x.powf(-0.5) - 1.0) / 0.5 * common::erlang_pdf(2, 1.0, x), 3.0, 1e-12);
    assert!(common::close(d.sp_mean().unwrap(), q, 1e-5, 0.0));
    let e = TransformedPH::new(PHDist::exponential(1.0).unwrap(), Transform::ShiftedPower { mu: 1.0, sigma: 2.0, xi: 0.25 })
        .unwrap();
    let want = 1.0 + 2.0 / 0.25 * (statrs::function::gamma::gamma(0.75) - 1.0);
    assert!(common::close(e.sp_mean().unwrap(), want, 1e-12, 0.0));
}

#[test]
fn general_mean_handles_shift_and_divergence() {
    let heavy = TransformedPH::log_ph(er(1, 0.8)).unwrap();
    assert_eq!(heavy.mean().unwrap(), Moment::Infinite);
    let w = TransformedPH::with_shift(er(2, 1.0), Transform::Power { beta: 2.0 }, 0.5).unwrap();
    let q = common::half_line(&|x: f64| (x + 0.5).sqrt() * common::erlang_pdf(2, 1.0, x), 3.0, 1e-12);
    match w.mean().unwrap() {
        Moment::Finite(m) => assert!(common::close(m, q, 1e-8, 0.0)),
        Moment::Infinite => panic!("finite mean reported infinite"),
    }
}

#[test]
fn mixture_equals_block_construction() {
    let a = TransformedPH::log_ph(er(1, 1.0)).unwrap();
    let b = TransformedPH::log_ph(er(2, 3.0)).unwrap();
    let w = [0.4, 0.6];
    let joint = mixture_transformed(&w, &[a.clone(), b.clone()]).unwrap();
    for k in 0..200 {
        let y = 0.1 * k as f64;
        let m = mixture_density(&w, &[a.clone(), b.clone()], y).unwrap();
        assert!(common::close(joint.pdf(y).unwrap(), m, 1e-10, 1e-300), "y = {y}");
    }
    assert!(common::close(mixture_density(&[1.0], std::slice::from_ref(&a), 2.0).unwrap(), a.pdf(2.0).unwrap(), 0.0, 0.0));
}

#[test]
fn regular_variation_of_pareto_tail() {
    // Er_3(1.5): sf ~ c y^{-1.5} (log y)^2
    let d = TransformedPH::log_ph(er(3, 1.5)).unwrap();
    let ratio = |y: f64| y.powf(1.5) * d.sf(y).unwrap() / y.ln().powi(2);
    let vals: Vec<f64> = [1e3, 1e4, 1e5, 1e6].iter().map(|&y| ratio(y)).collect();
    for v in &vals {
        assert!(*v > 0.1 && *v < 10.0, "{vals:?}");
    }
}

#[test]
fn samples_follow_each_family() {
    let base = er(3, 2.0);
    for d in families(&base) {
        let xs = d.sample_seeded(42, 20_000, Parallelism::Deterministic).unwrap();
        let ks = ks_test(&xs, |y| d.cdf(y).unwrap(), 0.01);
        assert!(ks.passed(), "{:?}: {ks:?}", d.transform());
    }
}

#[test]
fn decreasing_transforms_reverse_the_draws() {
    let base = er(2, 1.0);
    let xs = base.sample_seeded(5, 100, Parallelism::Sequential).unwrap();
    let g = TransformedPH::new(base, Transform::NegLogAffine { mu: 0.0, sigma: 1.0 }).unwrap();
    let ys = g.sample_seeded(5, 100, Parallelism::Sequential).unwrap();
    for i in 0..99 {
        for j in i + 1..100 {
            if xs[i] < xs[j] {
                assert!(ys[i] > ys[j]);
            }
        }
    }
}

#[test]
fn rate_function_matches_transform() {
    let d = TransformedPH::log_ph(er(2, 1.5)).unwrap();
    let iph_d = iph::iph::IPHDist::new(d.base().clone(), d.rate_function().unwrap()).unwrap();
    for y in [0.1, 1.0, 10.0, 100.0] {
        assert!(common::close(iph_d.sf(y).unwrap(), d.sf(y).unwrap(), 1e-12, 0.0));
        assert!(common::close(iph_d.pdf(y).unwrap(), d.pdf(y).unwrap(), 1e-12, 0.0));
    }
    let g = TransformedPH::new(er(2, 1.5), Transform::NegLogAffine { mu: 0.0, sigma: 1.0 }).unwrap();
    assert!(g.rate_function().is_err());
}

#[test]
fn rejects_invalid_parameters() {
    let b = er(1, 1.0);
    assert!(TransformedPH::new(b.clone(), Transform::Power { beta: 0.0 }).is_err());
    assert!(TransformedPH::new(b.clone(), Transform::NegLogAffine { mu: 0.0, sigma: -1.0 }).is_err());
    assert!(TransformedPH::new(b.clone(), Transform::ShiftedPower { mu: 0.0, sigma: 1.0, xi: 0.0 }).is_err());
    assert!(TransformedPH::with_shift(b, Transform::Power { beta: 1.0 }, -1.0).is_err());
}
