use std::f64::consts::PI;

use conformal_sphere::field::expr::parse_field;
use conformal_sphere::report::CheckRecord;
use conformal_sphere::scenarios::ScenarioSpec;
use conformal_sphere::sequence::{chebyshev_volume_bound, select_tau};
use conformal_sphere::sphere::{
    derive_seed, dot, geodesic_distance_unchecked, norm, product_rule_sampling, uniform_sphere_sampling,
};
use conformal_sphere::truncation::truncate;
use conformal_sphere::ScalarField;
use proptest::prelude::*;

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let r = norm(&v);
    (r > 1e-3).then(|| v.iter().map(|x| x / r).collect())
}

fn point4() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4).prop_filter_map("near zero", unit)
}

fn affine(a: f64, b: f64, v: Vec<f64>) -> ScalarField {
    ScalarField::new(3, "affine", move |p| a + b * dot(p, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesic_distance_is_a_metric(x in point4(), y in point4(), z in point4()) {
        let dxy = geodesic_distance_unchecked(&x, &y);
        prop_assert!((0.0..=PI).contains(&dxy));
        prop_assert!((dxy - geodesic_distance_unchecked(&y, &x)).abs() < 1e-14);
        let via = geodesic_distance_unchecked(&x, &z) + geodesic_distance_unchecked(&z, &y);
        prop_assert!(dxy <= via + 1e-12);
    }

    #[test]
    fn truncation_is_idempotent_and_monotone(
        a in 0.5f64..2.0,
        b in 0.0f64..0.45,
        v in point4(),
        k1 in 0.6f64..2.5,
        dk in 0.0f64..1.0,
        p in point4(),
    ) {
        let u = affine(a, b, v);
        let t1 = truncate(&u, k1).unwrap();
        let t2 = truncate(&u, k1 + dk).unwrap();
        let again = t1.retruncate(k1).unwrap();
        prop_assert_eq!(again.eval(&p), t1.eval(&p));
        prop_assert!(t1.eval(&p) <= t2.eval(&p));
        prop_assert!(t1.eval(&p) <= u.eval(&p) && t1.eval(&p) <= k1);
        prop_assert_eq!(t1.eval(&p), u.eval(&p).min(k1));
    }

    #[test]
    fn chebyshev_bound_dominates_bad_volume(b in 0.1f64..2.0, v in point4(), tau in 0.05f64..1.5) {
        let s = product_rule_sampling(3, 8).unwrap();
        let w = ScalarField::new(3, "w", move |p| b * (1.0 - dot(p, &v)).powi(2));
        let (measured, bound) = chebyshev_volume_bound(&w, tau, &s).unwrap();
        prop_assert!(measured <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn selected_level_lies_in_bracket(b in 0.2f64..2.0, v in point4(), cj in 0.05f64..3.0) {
        let s = product_rule_sampling(3, 12).unwrap();
        let w = ScalarField::new(3, "w", move |p| b * (1.0 - dot(p, &v)));
        let sel = select_tau(&w, cj, &s, 1e-3).unwrap();
        let root = cj.sqrt();
        prop_assert!(sel.tau >= 0.5 * root - 1e-12 && sel.tau <= root + 1e-12);
        prop_assert!(sel.perimeters.iter().all(|q| *q >= sel.perimeter - 1e-12));
    }

    #[test]
    fn uniform_sampling_is_seeded(seed in any::<u64>(), n in 2usize..6) {
        let a = uniform_sphere_sampling(n, 64, seed).unwrap();
        let b = uniform_sphere_sampling(n, 64, seed).unwrap();
        prop_assert_eq!(a.raw_points(), b.raw_points());
        for p in a.points() {
            prop_assert!((norm(p) - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(derive_seed(seed, &[1, 2]), derive_seed(seed, &[1, 2]));
        prop_assert_ne!(derive_seed(seed, &[1]), derive_seed(seed, &[2]));
    }

    #[test]
    fn inequality_verdicts_follow_slack(lhs in -10.0f64..10.0, rhs in -10.0f64..10.0, tol in 0.0f64..1.0) {
        let le = CheckRecord::le("c", "a <= b", 3, lhs, rhs, tol);
        prop_assert!((le.slack - (rhs - lhs)).abs() < 1e-12);
        prop_assert_eq!(le.passed(), lhs <= rhs + tol);
        let ge = CheckRecord::ge("c", "a >= b", 3, lhs, rhs, tol);
        prop_assert_eq!(ge.passed(), lhs >= rhs - tol);
        let forced = le.clone().fail_with("forced");
        prop_assert!(!forced.with_tolerance(1e9).passed());
    }

    #[test]
    fn parsed_expressions_evaluate(a in -3.0f64..3.0, b in 0.1f64..2.0, p in point4()) {
        let f = parse_field(&format!("{a} * x1 + exp({b} * x2) - x3 * x4"), 3).unwrap();
        let expect = a * p[0] + (b * p[1]).exp() - p[2] * p[3];
        prop_assert!((f.eval(&p) - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn scenario_specs_round_trip(n in 3usize..7, lambda in 1.0f64..8.0, length in 1usize..6, seed in any::<u64>()) {
        let mut spec = ScenarioSpec::new("bubble", n);
        spec.lambda = Some(lambda);
        spec.length = Some(length);
        spec.seed = seed;
        let back = ScenarioSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, spec);
    }
}
