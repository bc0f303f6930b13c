use iph::emfit::{e_step, em_step, ph_loglik};
use iph::families::{Transform, TransformedPH};
use iph::matfun::mat_exp;
use iph::phcore::{ph_new, PHDist};
use iph::Parallelism;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random Markovian PH law of order 1..=4 with all exit rates positive.
fn ph_strategy() -> impl Strategy<Value = PHDist> {
    (1usize..=4)
        .prop_flat_map(|p| {
            (
                prop::collection::vec(0.01f64..1.0, p),
                prop::collection::vec(0.0f64..2.0, p * p),
                prop::collection::vec(0.05f64..2.0, p),
            )
        })
        .prop_map(|(w, off, exit)| {
            let p = w.len();
            let s: f64 = w.iter().sum();
            let pi: Vec<f64> = w.iter().map(|v| v / s).collect();
            let mut t = DMatrix::zeros(p, p);
            for i in 0..p {
                let mut out = exit[i];
                for j in 0..p {
                    if i != j {
                        t[(i, j)] = off[i * p + j];
                        out += off[i * p + j];
                    }
                }
                t[(i, i)] = -out;
            }
            ph_new(pi, t, true).unwrap()
        })
}

fn transform_strategy() -> impl Strategy<Value = Transform> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|beta| Transform::ParetoExp { beta }),
        (0.3f64..4.0).prop_map(|beta| Transform::Power { beta }),
        (-3.0f64..3.0, 0.1f64..3.0).prop_map(|(mu, sigma)| Transform::NegLogAffine { mu, sigma }),
        (-3.0f64..3.0, 0.1f64..3.0, prop_oneof![-0.9f64..-0.05, 0.05f64..0.9])
            .prop_map(|(mu, sigma, xi)| Transform::ShiftedPower { mu, sigma, xi }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_matrix_is_substochastic(d in ph_strategy(), x in 0.0f64..20.0) {
        let e = mat_exp(&(d.t() * x)).unwrap();
        for i in 0..d.dim() {
            let mut row = 0.0;
            for j in 0..d.dim() {
                prop_assert!(e[(i, j)] >= -1e-14);
                row += e[(i, j)];
            }
            prop_assert!(row <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn semigroup_property(d in ph_strategy(), s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let a = mat_exp(&(d.t() * s)).unwrap() * mat_exp(&(d.t() * t)).unwrap();
        let b = mat_exp(&(d.t() * (s + t))).unwrap();
        prop_assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn survival_is_monotone_and_bounded(d in ph_strategy(), mut xs in prop::collection::vec(0.0f64..30.0, 2..12)) {
        xs.sort_by(f64::total_cmp);
        let mut last = 1.0;
        for x in xs {
            let s = d.sf(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= last + 1e-14);
            prop_assert!(d.pdf(x).unwrap() >= 0.0);
            last = s;
        }
    }

    #[test]
    fn quantile_round_trip(d in ph_strategy(), p in 0.001f64..0.999) {
        let q = d.quantile(p).unwrap();
        prop_assert!((d.cdf(q).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn transformed_survival_plus_cdf_is_one(d in ph_strategy(), tr in transform_strategy(), p in 0.01f64..0.99) {
        let m = TransformedPH::new(d, tr).unwrap();
        let y = m.quantile(p).unwrap();
        prop_assert!((m.sf(y).unwrap() + m.cdf(y).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((m.cdf(y).unwrap() - p).abs() < 1e-8);
        let t = m.transform();
        let back = t.g(t.g_inv(y, m.mu()), m.mu());
        prop_assert!((back - y).abs() <= 1e-9 * y.abs().max(1.0));
    }

    #[test]
    fn estep_conserves_mass(d in ph_strategy(), data in prop::collection::vec(0.01f64..10.0, 1..8)) {
        let s = e_step(&d, &data, Parallelism::Sequential).unwrap();
        let total: f64 = data.iter().sum();
        prop_assert!((s.sojourn.sum() - total).abs() < 1e-8 * total.max(1.0));
        prop_assert!((s.exits.sum() - data.len() as f64).abs() < 1e-8 * data.len() as f64);
        prop_assert!((s.starts.sum() - data.len() as f64).abs() < 1e-8 * data.len() as f64);
    }

    #[test]
    fn em_step_never_decreases_loglik(d in ph_strategy(), data in prop::collection::vec(0.01f64..10.0, 3..20)) {
        let before = ph_loglik(&d, &data).unwrap();
        let next = em_step(&d, &data).unwrap();
        let after = ph_loglik(&next, &data).unwrap();
        prop_assert!(after >= before - 1e-10 * before.abs().max(1.0), "{before} -> {after}");
    }

    #[test]
    fn seeded_sampling_ignores_parallelism(d in ph_strategy(), seed in any::<u64>()) {
        let a = d.sample_seeded(seed, 5000, Parallelism::Sequential).unwrap();
        let b = d.sample_seeded(seed, 5000, Parallelism::Unordered).unwrap();
        prop_assert_eq!(a, b);
    }
}
