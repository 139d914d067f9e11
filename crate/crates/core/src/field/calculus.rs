//! Finite-difference calculus, quadrature, spherical means and ball
//! averages.
//!
//! Derivatives use the degree-0 homogeneous extension F(y) = f(y/|y|):
//! its ambient gradient at a unit vector is the intrinsic gradient, and its
//! ambient Laplacian there is the Laplace–Beltrami operator.
//!
//! Every reduction over sample points is split into fixed-size chunks that
//! are summed independently and then combined in order, so results do not
//! depend on the number of worker threads.

use rayon::prelude::*;

use super::{project_tangent, ScalarField, TangentVector};
use crate::error::{invalid, Error, Result};
use crate::quad1d::gauss_legendre_on;
use crate::sphere::{
    check_unit, derive_seed, geodesic_sphere_rule, geodesic_sphere_sampling, point_key, CapSampling, SphereSampling,
};
use crate::tolerances;

const CHUNK: usize = 1024;

/// Order-fixed sum of a slice.
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.chunks(CHUNK).map(|c| c.iter().sum::<f64>()).sum()
}

/// Σ weightᵢ · g(pᵢ), evaluated in parallel with a deterministic merge.
pub fn quadrature(sampling: &SphereSampling, g: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    quadrature_multi::<1>(sampling, |p| [g(p)])[0]
}

/// Several weighted sums in one pass over the points.
pub fn quadrature_multi<const K: usize>(sampling: &SphereSampling, g: impl Fn(&[f64]) -> [f64; K] + Sync) -> [f64; K] {
    let dim = sampling.ambient();
    let partials: Vec<[f64; K]> = sampling
        .raw_points()
        .par_chunks(CHUNK * dim)
        .zip(sampling.weights().par_chunks(CHUNK))
        .map(|(pts, ws)| {
            let mut acc = [0.0; K];
            for (p, w) in pts.chunks_exact(dim).zip(ws) {
                let v = g(p);
                for k in 0..K {
                    acc[k] += w * v[k];
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; K];
    for part in partials {
        for k in 0..K {
            total[k] += part[k];
        }
    }
    total
}

/// Evaluates `g` at every sample point, in sample order.
pub fn map_points<T: Send>(sampling: &SphereSampling, g: impl Fn(&[f64]) -> T + Sync + Send) -> Vec<T> {
    let dim = sampling.ambient();
    sampling.raw_points().par_chunks_exact(dim).map(g).collect()
}

pub(crate) fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= tolerances::MAX_STEP) {
        return Err(Error::OutOfRange {
            name: "h",
            value: h,
            range: format!("(0, {}]", tolerances::MAX_STEP),
        });
    }
    Ok(())
}

#[inline]
fn extension(field: &ScalarField, y: &mut [f64]) -> f64 {
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    y.iter_mut().for_each(|v| *v /= r);
    field.eval(y)
}

/// Central-difference intrinsic gradient written into `out` (no checks).
pub fn fd_gradient_into(field: &ScalarField, p: &[f64], h: f64, out: &mut [f64]) {
    let mut y = p.to_vec();
    for k in 0..p.len() {
        y.copy_from_slice(p);
        y[k] += h;
        let fp = extension(field, &mut y);
        y.copy_from_slice(p);
        y[k] -= h;
        let fm = extension(field, &mut y);
        out[k] = (fp - fm) / (2.0 * h);
    }
    project_tangent(p, out);
}

/// Intrinsic gradient preferring the closed form when the field has one.
pub fn gradient_into(field: &ScalarField, p: &[f64], h: f64, out: &mut [f64]) {
    if field.closed_form_gradient(p, out) {
        project_tangent(p, out);
    } else {
        fd_gradient_into(field, p, h, out);
    }
}

/// |∇f|² at p, closed form when available.
pub fn gradient_norm_sq(field: &ScalarField, p: &[f64], h: f64) -> f64 {
    let mut g = vec![0.0; p.len()];
    gradient_into(field, p, h, &mut g);
    g.iter().map(|v| v * v).sum()
}

/// ⟨∇a, ∇b⟩ at p.
pub fn gradient_pairing(a: &ScalarField, b: &ScalarField, p: &[f64], h: f64) -> f64 {
    let mut ga = vec![0.0; p.len()];
    let mut gb = vec![0.0; p.len()];
    gradient_into(a, p, h, &mut ga);
    gradient_into(b, p, h, &mut gb);
    ga.iter().zip(&gb).map(|(x, y)| x * y).sum()
}

/// Ambient second-difference Laplacian of the extension (no checks).
pub fn laplacian_at(field: &ScalarField, p: &[f64], h: f64) -> f64 {
    let mut y = p.to_vec();
    let f0 = field.eval(p);
    let mut acc = 0.0;
    for k in 0..p.len() {
        y.copy_from_slice(p);
        y[k] += h;
        let fp = extension(field, &mut y);
        y.copy_from_slice(p);
        y[k] -= h;
        let fm = extension(field, &mut y);
        acc += fp + fm - 2.0 * f0;
    }
    acc / (h * h)
}

fn check_args(field: &ScalarField, p: &[f64], h: f64) -> Result<()> {
    field.check_point(p)?;
    check_step(h)
}

/// Finite-difference intrinsic gradient at p with step h ∈ (0, 1e−2].
pub fn intrinsic_gradient(field: &ScalarField, p: &[f64], h: f64) -> Result<TangentVector> {
    check_args(field, p, h)?;
    let mut out = vec![0.0; p.len()];
    fd_gradient_into(field, p, h, &mut out);
    Ok(TangentVector {
        base: p.to_vec(),
        components: out,
    })
}

/// Intrinsic gradient using the closed form when present, else finite
/// differences.
pub fn gradient(field: &ScalarField, p: &[f64], h: f64) -> Result<TangentVector> {
    check_args(field, p, h)?;
    let mut out = vec![0.0; p.len()];
    gradient_into(field, p, h, &mut out);
    Ok(TangentVector {
        base: p.to_vec(),
        components: out,
    })
}

/// Laplace–Beltrami operator at p by second differences of the extension.
pub fn laplace_beltrami(field: &ScalarField, p: &[f64], h: f64) -> Result<f64> {
    check_args(field, p, h)?;
    Ok(laplacian_at(field, p, h))
}

fn check_sampling(field: &ScalarField, sampling: &SphereSampling) -> Result<()> {
    if field.dimension() != sampling.dimension() {
        return Err(Error::DimensionMismatch {
            expected: sampling.dimension(),
            got: field.dimension(),
        });
    }
    Ok(())
}

/// Σ weightᵢ · f(pᵢ).
pub fn integrate(field: &ScalarField, sampling: &SphereSampling) -> Result<f64> {
    check_sampling(field, sampling)?;
    Ok(quadrature(sampling, |p| field.eval(p)))
}

/// (∫|f|^p)^{1/p} for p ≥ 1.
pub fn lp_norm(field: &ScalarField, sampling: &SphereSampling, p: f64) -> Result<f64> {
    check_sampling(field, sampling)?;
    if !(p >= 1.0) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "[1, inf)".into(),
        });
    }
    Ok(quadrature(sampling, |x| field.eval(x).abs().powf(p)).powf(1.0 / p))
}

/// ∫|∇f|².
pub fn dirichlet_energy(field: &ScalarField, sampling: &SphereSampling, h: f64) -> Result<f64> {
    check_sampling(field, sampling)?;
    check_step(h)?;
    Ok(quadrature(sampling, |p| gradient_norm_sq(field, p, h)))
}

/// Weighted average of the field over a geodesic sphere.
pub fn spherical_mean(field: &ScalarField, cap: &CapSampling) -> Result<f64> {
    Ok(spherical_mean_with_error(field, cap)?.0)
}

/// Spherical mean together with its standard error. The error is the
/// sample standard deviation over √count for random caps and zero for
/// deterministic rules.
pub fn spherical_mean_with_error(field: &ScalarField, cap: &CapSampling) -> Result<(f64, f64)> {
    if cap.is_empty() {
        return Err(Error::Empty("cap"));
    }
    if cap.center().len() != field.ambient() {
        return Err(Error::DimensionMismatch {
            expected: field.ambient(),
            got: cap.center().len(),
        });
    }
    let values: Vec<f64> = cap.points().map(|p| field.eval(p)).collect();
    Ok(weighted_mean_and_error(&values, cap.weights(), cap.is_random()))
}

pub(crate) fn weighted_mean_and_error(values: &[f64], weights: &[f64], random: bool) -> (f64, f64) {
    let wsum: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / wsum;
    if !random || values.len() < 2 {
        return (mean, 0.0);
    }
    let m = values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// How geodesic spheres are discretized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CapRule {
    /// `count` i.i.d. directions; the seed for a cap is derived from
    /// (seed, salt).
    MonteCarlo { count: usize, seed: u64 },
    /// Product rule on the tangent unit sphere.
    Deterministic { resolution: usize },
}

impl CapRule {
    /// The cap ∂B_r(x); `salt` selects the random stream.
    pub fn cap(&self, x: &[f64], r: f64, salt: u64) -> Result<CapSampling> {
        match *self {
            CapRule::MonteCarlo { count, seed } => geodesic_sphere_sampling(x, r, count, derive_seed(seed, &[salt])),
            CapRule::Deterministic { resolution } => geodesic_sphere_rule(x, r, resolution),
        }
    }

    /// Salt tied to a (center, radius) pair.
    pub fn salt(x: &[f64], r: f64) -> u64 {
        derive_seed(point_key(x), &[r.to_bits()])
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            CapRule::MonteCarlo { seed, .. } => Some(*seed),
            CapRule::Deterministic { .. } => None,
        }
    }
}

/// Polar decomposition of a geodesic ball: Gauss–Legendre nodes in the
/// radius, a cap rule on each geodesic sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarRule {
    pub radial_nodes: usize,
    pub cap: CapRule,
}

fn check_ball_args(x: &[f64], r: f64, rule: &PolarRule) -> Result<()> {
    check_unit(x, "center")?;
    if !(r > 0.0 && r <= std::f64::consts::PI) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "(0, pi]".into(),
        });
    }
    if rule.radial_nodes == 0 {
        return invalid("polar rule needs radial nodes");
    }
    Ok(())
}

/// Per radial node: (radial weight × cap measure, cap mean of g, cap
/// standard error).
fn polar_nodes(
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    r: f64,
    rule: &PolarRule,
) -> Result<Vec<(f64, f64, f64)>> {
    check_ball_args(x, r, rule)?;
    let (s, w) = gauss_legendre_on(rule.radial_nodes, 0.0, r);
    s.par_iter()
        .zip(w.par_iter())
        .enumerate()
        .map(|(k, (s, w))| {
            let cap = rule
                .cap
                .cap(x, *s, derive_seed(point_key(x), &[r.to_bits(), k as u64]))?;
            let values: Vec<f64> = cap.points().map(g).collect();
            let (mean, se) = weighted_mean_and_error(&values, cap.weights(), cap.is_random());
            Ok((w * cap.total_weight(), mean, se))
        })
        .collect()
}

/// (∫_{B_r(x)} g, Vol(B_r(x))) on the same polar nodes.
pub fn ball_integral_and_volume(
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    r: f64,
    rule: &PolarRule,
) -> Result<(f64, f64)> {
    let nodes = polar_nodes(g, x, r, rule)?;
    Ok(nodes
        .iter()
        .fold((0.0, 0.0), |acc, (m, mean, _)| (acc.0 + m * mean, acc.1 + m)))
}

/// ⨍_{B_r(x)} g with its standard error (zero for deterministic caps).
/// Caps at different radial nodes are independent, so their variances add.
pub fn ball_average_with_error(
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    r: f64,
    rule: &PolarRule,
) -> Result<(f64, f64)> {
    let nodes = polar_nodes(g, x, r, rule)?;
    let volume: f64 = nodes.iter().map(|n| n.0).sum();
    let integral: f64 = nodes.iter().map(|(m, mean, _)| m * mean).sum();
    let var: f64 = nodes.iter().map(|(m, _, se)| (m * se).powi(2)).sum();
    Ok((integral / volume, var.sqrt() / volume))
}

/// ∫_{B_r(x)} f dV by polar decomposition.
pub fn ball_integral(field: &ScalarField, x: &[f64], r: f64, rule: &PolarRule) -> Result<f64> {
    field.check_point(x)?;
    Ok(ball_integral_and_volume(&|p| field.eval(p), x, r, rule)?.0)
}

/// Ball average with the polar rule; the normalizing volume comes from the
/// same nodes, so constants are reproduced exactly.
pub fn ball_average_with(field: &ScalarField, x: &[f64], r: f64, rule: &PolarRule) -> Result<f64> {
    field.check_point(x)?;
    if !(r > 0.0 && r < std::f64::consts::FRAC_PI_2) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "(0, pi/2)".into(),
        });
    }
    let (integral, volume) = ball_integral_and_volume(&|p| field.eval(p), x, r, rule)?;
    Ok(integral / volume)
}

/// ⨍_{B_r(x)} f dV with `radial_steps` radial nodes and `cap_count`
/// Monte-Carlo points per geodesic sphere.
pub fn ball_average(
    field: &ScalarField,
    x: &[f64],
    r: f64,
    radial_steps: usize,
    cap_count: usize,
    seed: u64,
) -> Result<f64> {
    let rule = PolarRule {
        radial_nodes: radial_steps,
        cap: CapRule::MonteCarlo { count: cap_count, seed },
    };
    ball_average_with(field, x, r, &rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{basis, product_rule_sampling, uniform_sphere_sampling};
    use std::f64::consts::PI;

    #[test]
    fn constant_has_zero_derivatives() {
        let f = ScalarField::constant(3, 2.5).without_gradient();
        let p = [0.5, 0.5, 0.5, 0.5];
        let g = intrinsic_gradient(&f, &p, 1e-3).unwrap();
        assert!(g.norm() < 1e-12);
        assert!(laplace_beltrami(&f, &p, 1e-3).unwrap().abs() < 1e-9);
    }

    #[test]
    fn gradient_of_coordinate_at_maximum_vanishes() {
        let f = ScalarField::coordinate(3, 0);
        let g = intrinsic_gradient(&f, &basis(4, 0), 1e-3).unwrap();
        assert!(g.norm() < 1e-6);
        let g = intrinsic_gradient(&f, &basis(4, 1), 1e-3).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-6);
        assert!((g.components[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn laplacian_of_squared_coordinate_at_pole() {
        let x = ScalarField::coordinate(3, 0);
        let f = x.mul(&x).unwrap();
        // x1² − 1/4 is a degree-2 harmonic on S³ (eigenvalue −8), so
        // Δ(x1²) = −8(x1² − 1/4) = −6 at e1.
        let v = laplace_beltrami(&f, &basis(4, 0), 1e-3).unwrap();
        assert!((v + 6.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn step_and_point_are_validated() {
        let f = ScalarField::coordinate(2, 0);
        assert!(laplace_beltrami(&f, &[1.0, 0.0, 0.0], 0.1).is_err());
        assert!(laplace_beltrami(&f, &[1.0, 1.0, 0.0], 1e-3).is_err());
    }

    #[test]
    fn integrals_on_rules() {
        let s = product_rule_sampling(3, 16).unwrap();
        let one = ScalarField::constant(3, 1.0);
        assert!((integrate(&one, &s).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        let x1 = ScalarField::coordinate(3, 0);
        assert!(integrate(&x1, &s).unwrap().abs() < 1e-10);
        let s = uniform_sphere_sampling(2, 100_000, 1).unwrap();
        let x1 = ScalarField::coordinate(2, 0);
        let v = integrate(&x1.mul(&x1).unwrap(), &s).unwrap();
        assert!((v / (4.0 * PI / 3.0) - 1.0).abs() < 0.01);
        assert!(lp_norm(&x1, &s, 0.5).is_err());
    }

    #[test]
    fn spherical_mean_of_coordinate_about_its_pole() {
        let x1 = ScalarField::coordinate(3, 0);
        let cap = geodesic_sphere_sampling(&basis(4, 0), 0.7, 500, 3).unwrap();
        let m = spherical_mean(&x1, &cap).unwrap();
        assert!((m - 0.7f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn ball_average_reproduces_constants() {
        let c = ScalarField::constant(3, 4.25);
        let v = ball_average(&c, &basis(4, 0), 0.8, 16, 64, 9).unwrap();
        assert!((v - 4.25).abs() < 1e-12);
        assert!(ball_average(&c, &basis(4, 0), 1.7, 16, 64, 9).is_err());
    }

    #[test]
    fn reductions_do_not_depend_on_thread_count() {
        let s = uniform_sphere_sampling(3, 50_000, 4).unwrap();
        let f = ScalarField::coordinate(3, 1).exp();
        let a = integrate(&f, &s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| integrate(&f, &s).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
