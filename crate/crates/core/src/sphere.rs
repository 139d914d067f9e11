//! Point sets, quadrature rules, and geodesic primitives on the unit round
//! sphere Sⁿ ⊂ ℝⁿ⁺¹.
//!
//! Points are stored as unit vectors in the ambient space. A sampling is a
//! flat buffer of `count * (n + 1)` coordinates plus one weight per point.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad1d::{adaptive_simpson, gauss_legendre_on};
use crate::tolerances;

/// Volume of the unit round sphere Sⁿ, ω_n = 2π^{(n+1)/2} / Γ((n+1)/2).
///
/// Evaluated through the recurrence ω_n = ω_{n−2}·2π/(n−1), which is exact
/// to a few ulps and avoids a Gamma implementation. ω_0 = 2 counts the two
/// points of S⁰.
pub fn sphere_volume_constant(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => sphere_volume_constant(n - 2) * 2.0 * PI / (n as f64 - 1.0),
    }
}

/// Volume of the geodesic ball of radius `r` in Sⁿ.
pub fn ball_volume(n: usize, r: f64) -> Result<f64> {
    if n == 0 {
        return invalid("ball_volume needs n >= 1");
    }
    if !(0.0..=PI).contains(&r) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "[0, pi]".into(),
        });
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let k = (n - 1) as i32;
    let radial = adaptive_simpson(
        |s| s.sin().powi(k),
        0.0,
        r,
        tolerances::BALL_VOLUME_ABS / sphere_volume_constant(n - 1),
    );
    Ok(sphere_volume_constant(n - 1) * radial)
}

/// Euclidean inner product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn check_unit(x: &[f64], what: &str) -> Result<()> {
    let r = norm(x);
    if !r.is_finite() || (r - 1.0).abs() > tolerances::UNIT_NORM_INPUT {
        return invalid(format!("{what} must be a unit vector (|x| = {r})"));
    }
    Ok(())
}

/// The i-th standard basis vector of ℝ^dim (zero-based).
pub fn basis(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

/// Geodesic distance between two unit vectors, in [0, π].
pub fn geodesic_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    check_unit(x, "x")?;
    check_unit(y, "y")?;
    Ok(geodesic_distance_unchecked(x, y))
}

/// Geodesic distance without input validation.
///
/// Uses atan2(|y − ⟨x,y⟩x|, ⟨x,y⟩), which stays accurate near 0 and π
/// where the clamped arccos loses half its digits.
#[inline]
pub fn geodesic_distance_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let c = dot(x, y).clamp(-1.0, 1.0);
    let s2: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let t = yi - c * xi;
            t * t
        })
        .sum();
    s2.sqrt().atan2(c)
}

/// Orthonormal basis of the tangent hyperplane x^⊥, obtained by
/// Gram–Schmidt against the standard basis.
pub fn tangent_frame(x: &[f64]) -> Vec<Vec<f64>> {
    let dim = x.len();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    // Process basis vectors least aligned with x first for stability.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()));
    for &i in &order {
        if frame.len() == dim - 1 {
            break;
        }
        let mut v = basis(dim, i);
        for _ in 0..2 {
            let c = dot(&v, x);
            v.iter_mut().zip(x).for_each(|(vi, xi)| *vi -= c * xi);
            for e in &frame {
                let c = dot(&v, e);
                v.iter_mut().zip(e).for_each(|(vi, ei)| *vi -= c * ei);
            }
        }
        let r = norm(&v);
        if r > 1e-8 {
            v.iter_mut().for_each(|vi| *vi /= r);
            frame.push(v);
        }
    }
    frame
}

/// Mixes a base seed with extra integers into a new 64-bit seed
/// (splitmix64 finalizer).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z = splitmix(z ^ p.wrapping_mul(0xD1B5_4A32_D192_ED03));
    }
    splitmix(z)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed component for a point: hashes its coordinate bits.
pub fn point_key(x: &[f64]) -> u64 {
    x.iter()
        .fold(0xA076_1D64_78BD_642F, |acc, v| splitmix(acc ^ v.to_bits()))
}

/// How a sampling was produced. Serialized inline in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplingKind {
    /// I.i.d. uniform points with equal weights ω_n / count.
    MonteCarlo { count: usize, seed: u64 },
    /// Gauss–Legendre in each polar angle, uniform in azimuth.
    ProductRule { resolution: usize },
    /// Geodesic polar coordinates about `center`: composite Gauss–Legendre
    /// in the radius with the given breakpoints, product rule on the unit
    /// tangent sphere.
    Polar {
        center: Vec<f64>,
        breakpoints: Vec<f64>,
        nodes_per_panel: usize,
        tangent_resolution: usize,
    },
}

/// Serializable description of a sampling: `{dimension, kind, ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub dimension: usize,
    #[serde(flatten)]
    pub kind: SamplingKind,
}

impl SamplingSpec {
    pub fn build(&self) -> Result<SphereSampling> {
        let n = self.dimension;
        match &self.kind {
            SamplingKind::MonteCarlo { count, seed } => uniform_sphere_sampling(n, *count, *seed),
            SamplingKind::ProductRule { resolution } => product_rule_sampling(n, *resolution),
            SamplingKind::Polar {
                center,
                breakpoints,
                nodes_per_panel,
                tangent_resolution,
            } => polar_sampling(center, breakpoints, *nodes_per_panel, *tangent_resolution),
        }
    }
}

/// A finite weighted point set on Sⁿ approximating the round volume measure.
#[derive(Clone, Debug)]
pub struct SphereSampling {
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    kind: SamplingKind,
}

impl SphereSampling {
    /// Assembles a sampling from raw parts, validating every invariant.
    pub fn from_parts(n: usize, points: Vec<f64>, weights: Vec<f64>, kind: SamplingKind) -> Result<Self> {
        let dim = n + 1;
        if points.len() != weights.len() * dim {
            return invalid("points and weights disagree in count");
        }
        for (i, p) in points.chunks_exact(dim).enumerate() {
            if (norm(p) - 1.0).abs() > tolerances::UNIT_NORM {
                return invalid(format!("point {i} is not a unit vector"));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return invalid(format!("non-positive weight {w}"));
        }
        Ok(Self {
            n,
            points,
            weights,
            kind,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Ambient dimension n + 1.
    pub fn ambient(&self) -> usize {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.n + 1;
        &self.points[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.points.chunks_exact(self.n + 1)
    }

    /// Flat coordinate buffer (stride n + 1).
    pub fn raw_points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        crate::field::calculus::ordered_sum(&self.weights)
    }

    pub fn kind(&self) -> &SamplingKind {
        &self.kind
    }

    pub fn spec(&self) -> SamplingSpec {
        SamplingSpec {
            dimension: self.n,
            kind: self.kind.clone(),
        }
    }

    /// Writes `x1,...,x{n+1},weight` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_filtered(out, |_| true)
    }

    /// Writes only the points whose index passes `keep`.
    pub fn write_csv_filtered<W: Write>(&self, out: W, keep: impl Fn(usize) -> bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..=self.n).map(|i| format!("x{}", i + 1)).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for i in (0..self.len()).filter(|i| keep(*i)) {
            let mut row: Vec<String> = self.point(i).iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", self.weights[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform Monte-Carlo sampling of Sⁿ from normalized Gaussian vectors.
pub fn uniform_sphere_sampling(n: usize, count: usize, seed: u64) -> Result<SphereSampling> {
    if n < 2 {
        return invalid("uniform sampling needs n >= 2");
    }
    if count == 0 {
        return invalid("uniform sampling needs count >= 1");
    }
    let dim = n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count * dim);
    for _ in 0..count {
        push_gaussian_direction(&mut rng, dim, &mut points);
    }
    let w = sphere_volume_constant(n) / count as f64;
    SphereSampling::from_parts(n, points, vec![w; count], SamplingKind::MonteCarlo { count, seed })
}

fn push_gaussian_direction(rng: &mut ChaCha8Rng, dim: usize, out: &mut Vec<f64>) {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let r = norm(&g);
        if r > 1e-12 {
            out.extend(g.iter().map(|v| v / r));
            return;
        }
    }
}

/// Angular nodes of the deterministic product rule on Sᵏ, as
/// (unit vector, weight) pairs in ℝᵏ⁺¹.
///
/// Hyperspherical angles θ₁..θ_{k−1} use `resolution` Gauss–Legendre nodes
/// on [0, π]; the azimuth uses 2·resolution equispaced midpoint nodes. The
/// first coordinate is cos θ₁.
fn product_nodes(k: usize, resolution: usize) -> (Vec<f64>, Vec<f64>) {
    let dim = k + 1;
    let (theta, theta_w) = gauss_legendre_on(resolution, 0.0, PI);
    let az_count = 2 * resolution;
    let az_w = PI / resolution as f64;
    let polar_levels = k - 1;
    let total = resolution.pow(polar_levels as u32) * az_count;
    let mut points = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; polar_levels];
    loop {
        let mut coords = vec![0.0; dim];
        let mut sin_prod = 1.0;
        let mut weight = az_w;
        for (level, &j) in idx.iter().enumerate() {
            let t = theta[j];
            coords[level] = sin_prod * t.cos();
            // volume element sin^{k-1-level}(θ)
            weight *= theta_w[j] * t.sin().powi((k - 1 - level) as i32);
            sin_prod *= t.sin();
        }
        for a in 0..az_count {
            let phi = (a as f64 + 0.5) * az_w;
            let mut p = coords.clone();
            p[dim - 2] = sin_prod * phi.cos();
            p[dim - 1] = sin_prod * phi.sin();
            let r = norm(&p);
            points.extend(p.iter().map(|v| v / r));
            weights.push(weight);
        }
        // odometer over the polar indices
        let mut level = polar_levels;
        loop {
            if level == 0 {
                return (points, weights);
            }
            level -= 1;
            idx[level] += 1;
            if idx[level] < resolution {
                break;
            }
            idx[level] = 0;
        }
    }
}

/// Deterministic product rule on Sⁿ for 1 ≤ n ≤ 4.
pub fn product_rule_sampling(n: usize, resolution: usize) -> Result<SphereSampling> {
    if !(1..=4).contains(&n) {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the product rule is available for n <= 4".into(),
        });
    }
    if resolution < 2 {
        return invalid("product rule resolution must be >= 2");
    }
    let (points, weights) = product_nodes(n, resolution);
    SphereSampling::from_parts(n, points, weights, SamplingKind::ProductRule { resolution })
}

/// Node budget for global product rules chosen by default.
pub const GLOBAL_NODE_BUDGET: usize = 1 << 17;

/// Node budget for the tangent rule of default polar samplings.
pub const TANGENT_NODE_BUDGET: usize = 1 << 11;

/// Largest resolution ≤ `requested` whose product rule on S^k (2·res^k
/// nodes) fits the budget; never below 4.
pub fn fit_resolution(requested: usize, k: usize, budget: usize) -> usize {
    let mut r = requested;
    while r > 4 && 2 * r.pow(k as u32) > budget {
        r -= 1;
    }
    r
}

/// Polar rule about `center`: the radius s ∈ [0, π] is split at
/// `breakpoints` into panels, each with `nodes_per_panel` Gauss–Legendre
/// nodes, and every radial node carries a product rule on the unit tangent
/// sphere Sⁿ⁻¹ with weight factor sinⁿ⁻¹ s.
///
/// Resolves radial structure at scales far below what a global rule can,
/// which is what shrinking spikes need.
pub fn polar_sampling(
    center: &[f64],
    breakpoints: &[f64],
    nodes_per_panel: usize,
    tangent_resolution: usize,
) -> Result<SphereSampling> {
    check_unit(center, "center")?;
    let n = center.len() - 1;
    if !(2..=5).contains(&n) {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "polar rules use a tangent product rule and need 2 <= n <= 5".into(),
        });
    }
    if nodes_per_panel == 0 {
        return invalid("polar rule needs at least one node per panel");
    }
    let mut edges: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > 0.0 && *b < PI).collect();
    edges.push(0.0);
    edges.push(PI);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let (dirs, dir_w) = if n - 1 == 1 {
        circle_nodes(tangent_resolution)
    } else {
        product_nodes(n - 1, tangent_resolution.max(2))
    };
    let frame = tangent_frame(center);
    let tangent: Vec<Vec<f64>> = dirs
        .chunks_exact(n)
        .map(|v| {
            let mut t = vec![0.0; n + 1];
            for (c, e) in v.iter().zip(&frame) {
                t.iter_mut().zip(e).for_each(|(ti, ei)| *ti += c * ei);
            }
            t
        })
        .collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for pair in edges.windows(2) {
        let (s, sw) = gauss_legendre_on(nodes_per_panel, pair[0], pair[1]);
        for (s, sw) in s.iter().zip(&sw) {
            let (sin, cos) = s.sin_cos();
            let radial_w = sw * sin.powi((n - 1) as i32);
            for (t, tw) in tangent.iter().zip(&dir_w) {
                let mut p: Vec<f64> = center.iter().zip(t).map(|(c, t)| cos * c + sin * t).collect();
                let r = norm(&p);
                p.iter_mut().for_each(|v| *v /= r);
                points.extend(p);
                weights.push(radial_w * tw);
            }
        }
    }
    SphereSampling::from_parts(
        n,
        points,
        weights,
        SamplingKind::Polar {
            center: center.to_vec(),
            breakpoints: edges[1..edges.len() - 1].to_vec(),
            nodes_per_panel,
            tangent_resolution,
        },
    )
}

fn circle_nodes(resolution: usize) -> (Vec<f64>, Vec<f64>) {
    let m = 2 * resolution.max(1);
    let w = 2.0 * PI / m as f64;
    let mut pts = Vec::with_capacity(2 * m);
    for a in 0..m {
        let phi = (a as f64 + 0.5) * w;
        pts.push(phi.cos());
        pts.push(phi.sin());
    }
    (pts, vec![w; m])
}

/// Points on the geodesic sphere ∂B_r(x) with weights for its induced
/// measure dσ.
#[derive(Clone, Debug)]
pub struct CapSampling {
    center: Vec<f64>,
    radius: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
    frame: Vec<Vec<f64>>,
    /// True when the directions are i.i.d. (weights are equal and the
    /// sample variance estimates the error of the mean).
    random: bool,
}

impl CapSampling {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.center.len();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.points.chunks_exact(self.center.len())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    pub fn is_random(&self) -> bool {
        self.random
    }
}

/// Unit directions in the tangent hyperplane at x used to place cap points.
/// Shared by Monte-Carlo and deterministic caps.
fn cap_from_directions(x: &[f64], r: f64, dirs: &[f64], dir_w: &[f64], random: bool) -> CapSampling {
    let dim = x.len();
    let n = dim - 1;
    let frame = tangent_frame(x);
    let (sin, cos) = r.sin_cos();
    let scale = sphere_volume_constant(n - 1) * sin.powi((n - 1) as i32) / dir_w.iter().sum::<f64>();
    let mut points = Vec::with_capacity(dir_w.len() * dim);
    for v in dirs.chunks_exact(n) {
        let mut p: Vec<f64> = x.iter().map(|c| cos * c).collect();
        for (c, e) in v.iter().zip(&frame) {
            p.iter_mut().zip(e).for_each(|(pi, ei)| *pi += sin * c * ei);
        }
        let len = norm(&p);
        points.extend(p.iter().map(|v| v / len));
    }
    CapSampling {
        center: x.to_vec(),
        radius: r,
        points,
        weights: dir_w.iter().map(|w| w * scale).collect(),
        frame,
        random,
    }
}

fn check_cap_args(x: &[f64], r: f64) -> Result<()> {
    check_unit(x, "center")?;
    if x.len() < 3 {
        return invalid("geodesic spheres need n >= 2");
    }
    if !(r > 0.0 && r < PI) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "(0, pi)".into(),
        });
    }
    Ok(())
}

/// Monte-Carlo sampling of ∂B_r(x): points cos(r)·x + sin(r)·v with v
/// uniform on the unit sphere of x^⊥, equal weights ω_{n−1} sinⁿ⁻¹(r)/count.
pub fn geodesic_sphere_sampling(x: &[f64], r: f64, count: usize, seed: u64) -> Result<CapSampling> {
    check_cap_args(x, r)?;
    if count == 0 {
        return invalid("cap sampling needs count >= 1");
    }
    let n = x.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(count * n);
    for _ in 0..count {
        push_gaussian_direction(&mut rng, n, &mut dirs);
    }
    Ok(cap_from_directions(x, r, &dirs, &vec![1.0; count], true))
}

/// Deterministic sampling of ∂B_r(x) using the product rule on the tangent
/// unit sphere Sⁿ⁻¹ (2 ≤ n ≤ 5).
pub fn geodesic_sphere_rule(x: &[f64], r: f64, resolution: usize) -> Result<CapSampling> {
    check_cap_args(x, r)?;
    let n = x.len() - 1;
    let (dirs, w) = match n {
        2 => circle_nodes(resolution),
        3..=5 => product_nodes(n - 1, resolution.max(2)),
        _ => {
            return Err(Error::UnsupportedDimension {
                n,
                reason: "deterministic cap rules need n <= 5".into(),
            })
        }
    };
    Ok(cap_from_directions(x, r, &dirs, &w, false))
}

/// Strictly increasing radii inside (0, π/2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radii: Vec<f64>,
}

impl RadialGrid {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Empty("radial grid"));
        }
        if radii.iter().any(|r| !(*r > 0.0 && *r < PI / 2.0)) {
            return invalid("radial grid radii must lie in (0, pi/2)");
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("radial grid radii must be strictly increasing");
        }
        Ok(Self { radii })
    }

    /// `count` equispaced radii from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(vec![lo]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        Self::new((0..count).map(|i| lo + step * i as f64).collect())
    }

    /// `count` interior radii (k/(count+1))·π/2, k = 1..=count.
    pub fn interior(count: usize) -> Result<Self> {
        let step = PI / 2.0 / (count + 1) as f64;
        Self::new((1..=count).map(|k| step * k as f64).collect())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_constants_low_dimensions() {
        assert!((sphere_volume_constant(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_volume_constant(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_volume_constant(3) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn distances_of_basis_vectors() {
        let e1 = basis(3, 0);
        let e2 = basis(3, 1);
        let m1: Vec<f64> = e1.iter().map(|v| -v).collect();
        assert_eq!(geodesic_distance(&e1, &e1).unwrap(), 0.0);
        assert!((geodesic_distance(&e1, &m1).unwrap() - PI).abs() < 1e-15);
        assert!((geodesic_distance(&e1, &e2).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(geodesic_distance(&[2.0, 0.0, 0.0], &e1).is_err());
    }

    #[test]
    fn tangent_frame_is_orthonormal() {
        let x = [0.6, 0.0, 0.8, 0.0];
        let f = tangent_frame(&x);
        assert_eq!(f.len(), 3);
        for (i, a) in f.iter().enumerate() {
            assert!(dot(a, &x).abs() < 1e-14);
            for (j, b) in f.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn small_monte_carlo_sampling() {
        let s = uniform_sphere_sampling(3, 4, 7).unwrap();
        assert_eq!(s.len(), 4);
        for w in s.weights() {
            assert!((w - 2.0 * PI * PI / 4.0).abs() < 1e-15);
        }
        assert!(uniform_sphere_sampling(1, 4, 7).is_err());
        assert!(uniform_sphere_sampling(3, 0, 7).is_err());
    }

    #[test]
    fn product_rule_weights_sum_to_sphere_volume() {
        for n in 1..=4 {
            let s = product_rule_sampling(n, 16).unwrap();
            assert!((s.total_weight() - sphere_volume_constant(n)).abs() < 1e-12, "n={n}");
        }
        assert!(product_rule_sampling(5, 8).is_err());
    }

    #[test]
    fn polar_rule_weights_sum_to_sphere_volume() {
        let c = [0.0, 0.0, 1.0, 0.0];
        let s = polar_sampling(&c, &[0.01, 0.1], 12, 8).unwrap();
        assert!((s.total_weight() - sphere_volume_constant(3)).abs() < 1e-10);
    }

    #[test]
    fn equator_cap_is_orthogonal_to_center() {
        let x = basis(4, 0);
        let cap = geodesic_sphere_sampling(&x, PI / 2.0, 3, 11).unwrap();
        for p in cap.points() {
            assert!(p[0].abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_spec_round_trips_through_json() {
        let s = uniform_sphere_sampling(3, 10, 5).unwrap();
        let json = serde_json::to_string(&s.spec()).unwrap();
        assert_eq!(json, r#"{"dimension":3,"kind":"monte-carlo","count":10,"seed":5}"#);
        let back: SamplingSpec = serde_json::from_str(&json).unwrap();
        let rebuilt = back.build().unwrap();
        assert_eq!(rebuilt.raw_points(), s.raw_points());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let s = product_rule_sampling(2, 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1,x2,x3,weight");
        assert_eq!(lines.count(), s.len());
    }

    #[test]
    fn radial_grid_validation() {
        assert!(RadialGrid::new(vec![0.1, 0.2]).is_ok());
        assert!(RadialGrid::new(vec![0.2, 0.1]).is_err());
        assert!(RadialGrid::new(vec![0.0, 0.1]).is_err());
        assert!(RadialGrid::new(vec![0.1, 1.6]).is_err());
    }
}
