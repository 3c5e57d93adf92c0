use proptest::prelude::*;

use gdalab::harness::{verify_inequalities, ExperimentConfig};
use gdalab::theory::{gen_bound, min_second_difference, optimal_t, BoundConstants};

fn constants() -> impl Strategy<Value = BoundConstants> {
    (prop::array::uniform6(0.1f64..3.0), 0.01f64..0.5, 1u32..4).prop_map(|(c, delta, num_layers)| BoundConstants {
        c,
        delta,
        num_layers,
        ..Default::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn total_increases_with_shift_and_source_error(
        k in constants(),
        eps0 in 0.0f64..1.0,
        t in 1.0f64..500.0,
        n in 1.0f64..1e5,
        d in 0.0f64..2.0,
        bump in 1e-6f64..1.0,
    ) {
        let base = gen_bound(&k, eps0, t, n, d).unwrap().total;
        prop_assert!(gen_bound(&k, eps0, t, n, d + bump).unwrap().total > base);
        prop_assert!(gen_bound(&k, eps0 + bump, t, n, d).unwrap().total > base);
    }

    #[test]
    fn report_total_is_recomputable(k in constants(), eps0 in 0.0f64..1.0, t in 1.0f64..500.0, n in 1.0f64..1e5, d in 0.0f64..2.0) {
        let r = gen_bound(&k, eps0, t, n, d).unwrap();
        prop_assert_eq!(r.total, r.recompute_total());
    }

    #[test]
    fn total_is_convex_in_t_once_n_clears_the_complexity_kink(
        eps0 in 0.0f64..1.0,
        n in 54.0f64..1e5,
        d in 1e-4f64..1.0,
    ) {
        let k = BoundConstants::default();
        prop_assert!(min_second_difference(&k, eps0, n, d, 1.0, 200.0, 398).unwrap() > 0.0);
    }

    #[test]
    fn stationary_branch_falls_with_step_size_and_samples(
        dm in 1e-4f64..5.0,
        n in 1.0f64..1e5,
        up in 1.001f64..10.0,
        scale in 0.1f64..100.0,
    ) {
        let s = |dm: f64, n: f64| optimal_t(dm, n, 1.0, scale).unwrap().stationary_branch;
        prop_assert!(s(dm * up, n) < s(dm, n));
        prop_assert!(s(dm, n * up) < s(dm, n));
    }

    #[test]
    fn t_star_is_the_larger_branch(dm in 1e-3f64..5.0, n in 1.0f64..1e4, l in 0.0f64..10.0) {
        let r = optimal_t(dm, n, l, 1.0).unwrap();
        prop_assert_eq!(r.t_star, r.length_branch.max(r.stationary_branch));
        prop_assert!(r.t_star_int >= 1);
    }
}

#[test]
fn small_sample_totals_bend_the_wrong_way() {
    // ln^2(x)/sqrt(x) is concave for x = nT between roughly 4 and 53
    let k = BoundConstants::default();
    assert!(min_second_difference(&k, 0.1, 20.0, 1e-3, 1.0, 200.0, 1990).unwrap() < 0.0);
    assert!(min_second_difference(&k, 0.1, 60.0, 1e-3, 1.0, 200.0, 1990).unwrap() > 0.0);
}

#[test]
fn lemma_and_discrepancy_batteries_hold() {
    let mut cfg = ExperimentConfig::default();
    cfg.verify.lemma_trials = 300;
    cfg.verify.identical_trials = 0;
    cfg.verify.disc_trials = 6;
    cfg.verify.stability_seeds = 0;
    let report = verify_inequalities(&cfg, 0).unwrap();
    for name in ["lemma-w1", "p-monotonicity", "disc"] {
        let b = report.battery(name).unwrap();
        assert!(b.trials > 0 && b.ok(), "{b:?}");
    }
    let (w1, w2) = (report.battery("lemma-w1").unwrap(), report.battery("lemma-w2").unwrap());
    assert!(w2.passed >= w1.passed);
}
