//! Library values checked against independent closed forms.

use std::f64::consts::PI;

use conformal_sphere::conformal::{curvature_report, total_scalar_curvature, volume};
use conformal_sphere::field::{integrate, laplace_beltrami, spherical_mean};
use conformal_sphere::mean::{elementary_ratio_high, elementary_ratio_low};
use conformal_sphere::quad1d::{gauss_integrate, sin_power_integral};
use conformal_sphere::scenarios::{bubble_scenario, round_scenario};
use conformal_sphere::sequence::perimeter_estimate;
use conformal_sphere::sphere::{
    ball_volume, basis, geodesic_distance, geodesic_sphere_rule, product_rule_sampling, sphere_volume_constant,
    uniform_sphere_sampling,
};
use conformal_sphere::{RadialGrid, ScalarField};
use statrs::function::gamma::gamma;

fn omega_gamma(n: usize) -> f64 {
    let k = (n + 1) as f64 / 2.0;
    2.0 * PI.powf(k) / gamma(k)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn sphere_volume_matches_gamma_formula() {
    for n in 0..=12 {
        assert!(rel(sphere_volume_constant(n), omega_gamma(n)) < 1e-13, "n={n}");
    }
}

#[test]
fn ball_volume_matches_independent_integral() {
    for n in 2..=6 {
        let omega = omega_gamma(n - 1);
        for r in [0.1, 0.7, 1.5, 2.9] {
            // Midpoint rule, written out independently of the library's quadrature.
            let m = 200_000;
            let h = r / m as f64;
            let integral: f64 = (0..m)
                .map(|i| ((i as f64 + 0.5) * h).sin().powi(n as i32 - 1))
                .sum::<f64>()
                * h;
            let lib = ball_volume(n, r).unwrap();
            assert!(rel(lib, omega * integral) < 1e-8, "n={n} r={r}");
        }
        assert!(rel(ball_volume(n, PI).unwrap(), omega_gamma(n)) < 1e-12);
    }
}

#[test]
fn geodesic_distance_matches_arccos() {
    let a = [0.6, 0.8, 0.0, 0.0];
    let b = [0.0, 0.6, 0.8, 0.0];
    let d = geodesic_distance(&a, &b).unwrap();
    assert!((d - (0.48f64).acos()).abs() < 1e-14);
    assert!((geodesic_distance(&basis(4, 0), &basis(4, 1)).unwrap() - PI / 2.0).abs() < 1e-15);
}

#[test]
fn product_rule_integrates_even_monomials() {
    // ∫ x₁² = ω_n/(n+1), ∫ x₁⁴ = 3ω_n/((n+1)(n+3)).
    for n in 2..=4 {
        let s = product_rule_sampling(n, 16).unwrap();
        let w = omega_gamma(n);
        let nf = n as f64;
        let x2 = integrate(&ScalarField::coordinate(n, 0).powf(2.0), &s).unwrap();
        let x4 = integrate(&ScalarField::coordinate(n, 1).powf(4.0), &s).unwrap();
        // Gauss–Legendre runs in the angles, so these are not exact.
        assert!(rel(x2, w / (nf + 1.0)) < 1e-9, "n={n}");
        assert!(rel(x4, 3.0 * w / ((nf + 1.0) * (nf + 3.0))) < 1e-9, "n={n}");
    }
}

#[test]
fn gauss_rule_and_sine_powers() {
    assert!((gauss_integrate(|x| x.powi(7), 0.0, 2.0, 4) - 32.0).abs() < 1e-12);
    // ∫₀^π sin³ = 4/3
    assert!((sin_power_integral(3, PI) - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn laplacian_of_squared_coordinate() {
    // Δ(x₁²) = 2(1 − x₁²) − 2n x₁² on Sⁿ.
    let n = 3;
    let f = ScalarField::coordinate(n, 0).powf(2.0).without_gradient();
    let probes = uniform_sphere_sampling(n, 50, 11).unwrap();
    for p in probes.points() {
        let x = p[0];
        let exact = 2.0 * (1.0 - x * x) - 2.0 * n as f64 * x * x;
        let got = laplace_beltrami(&f, p, 1e-3).unwrap();
        assert!((got - exact).abs() < 1e-5, "{got} vs {exact}");
    }
    let at_pole = laplace_beltrami(&f, &basis(4, 0), 1e-3).unwrap();
    assert!((at_pole + 6.0).abs() < 1e-5);
}

#[test]
fn spherical_mean_of_coordinate_is_cosine() {
    let u = ScalarField::coordinate(3, 0);
    for r in [0.2, 1.0, 2.5] {
        let cap = geodesic_sphere_rule(&basis(4, 0), r, 8).unwrap();
        assert!((spherical_mean(&u, &cap).unwrap() - r.cos()).abs() < 1e-12);
    }
}

#[test]
fn round_factor_curvature_volume_and_total() {
    let n = 3;
    let c = 0.3f64;
    let cf = round_scenario(n, c).unwrap();
    let s = product_rule_sampling(n, 16).unwrap();
    let w = omega_gamma(n);
    assert!(rel(volume(&cf, &s), (3.0 * c).exp() * w) < 1e-12);
    let probes = uniform_sphere_sampling(n, 100, 3).unwrap();
    let rep = curvature_report(&cf, &probes, 1e-3).unwrap();
    let sc = 6.0 * (-2.0 * c).exp();
    assert!(rel(rep.min, sc) < 1e-6 && rel(rep.max, sc) < 1e-6);
    let t = total_scalar_curvature(&cf, &s, 1e-3).unwrap();
    assert!(rel(t.lhs, sc * (3.0 * c).exp() * w) < 1e-6);
}

#[test]
fn bubble_volume_is_conformally_invariant() {
    // The pullback of the round metric has the round volume for every λ.
    let pole: Vec<f64> = basis(4, 0).iter().map(|v| -v).collect();
    let s = product_rule_sampling(3, 48).unwrap();
    for lambda in [1.0, 1.5, 2.0] {
        let cf = bubble_scenario(3, lambda, &pole).unwrap();
        assert!(rel(volume(&cf, &s), 2.0 * PI * PI) < 1e-6, "lambda={lambda}");
    }
}

#[test]
fn level_set_perimeters() {
    // {⟨x, v⟩ = 1 − τ} has (n−1)-measure ω_{n−1} (1 − (1−τ)²)^{(n−1)/2}.
    // v is kept off the coordinate axes so the band is not aligned with
    // the product rule's polar angle.
    let s = product_rule_sampling(3, 64).unwrap();
    let v = [0.2, 0.4, 0.8, 0.4];
    let w = ScalarField::new(3, "1 - <x,v>", move |p| {
        1.0 - p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
    });
    for tau in [0.5, 1.0, 1.5] {
        let t: f64 = 1.0 - tau;
        let exact = omega_gamma(2) * (1.0 - t * t);
        let est = perimeter_estimate(&w, tau, 0.05, &s, 1e-3).unwrap();
        assert!(rel(est, exact) < 0.05, "tau={tau}: {est} vs {exact}");
    }
}

#[test]
fn elementary_ratios_stay_below_their_bounds() {
    let grid = RadialGrid::interior(200).unwrap();
    for n in 3..=4 {
        let scan = elementary_ratio_low(n, &grid).unwrap();
        assert!(scan.record.passed());
        assert!(scan.max_ratio <= scan.bound + 1e-9);
    }
    for n in 3..=6 {
        let scan = elementary_ratio_high(n, &grid).unwrap();
        assert!(scan.max_ratio <= (PI / 2.0).powf((n as f64 - 1.0) / n as f64) + 1e-9);
    }
}
