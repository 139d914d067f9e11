//! Conformal metrics g = e^{2f} g_{Sⁿ}: scalar curvature, volumes, the
//! total scalar curvature identity, integral gradient bounds, weak
//! positive-scalar-curvature residuals and uniform-integrability audits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::calculus::{
    ball_integral_and_volume, check_step, gradient_norm_sq, gradient_pairing, laplacian_at, map_points, quadrature,
    quadrature_multi, CapRule, PolarRule,
};
use crate::field::ScalarField;
use crate::report::CheckRecord;
use crate::sphere::{
    ball_volume, basis, derive_seed, fit_resolution, geodesic_distance_unchecked, polar_sampling,
    sphere_volume_constant, uniform_sphere_sampling, SamplingKind, SphereSampling, TANGENT_NODE_BUDGET,
};
use crate::tolerances;

pub const ANCHOR_SCALAR_CURVATURE: &str = "Sc_g = e^{-2f}(n(n-1) - 2(n-1) Lap f - (n-2)(n-1)|grad f|^2)";
pub const ANCHOR_GRADIENT_L2: &str = "int |grad f|^2 <= n omega_n/(n-2) when Sc_g >= 0";
pub const ANCHOR_WEIGHTED_GRADIENT: &str =
    "int e^{pf}|grad f|^2 <= n V^{p/n} omega_n^{(n-p)/n}/(n-2-2p), p in [0,(n-2)/2)";
pub const ANCHOR_W1Q: &str = "int |grad e^{(n-2)f/2}|^q <= C(n,V,q), q in [1, 4n/(3n-2))";
pub const ANCHOR_TOTAL_SCALAR: &str = "int Sc_g dV_g = int n(n-1) e^{(n-2)f} + 4(n-1)/(n-2) |grad e^{(n-2)f/2}|^2";
pub const ANCHOR_WEAK_PSC: &str = "-int <grad phi, grad u> <= n(n-2)/4 int u phi for phi >= 0";
pub const ANCHOR_UNIFORM_INTEGRABILITY: &str = "Vol_g(U) <= Lambda Vol(U)^alpha";

/// The pair (f, u = e^{(n−2)f/2}) defining g = e^{2f} g_{Sⁿ}, n ≥ 3.
#[derive(Clone, Debug)]
pub struct ConformalFactor {
    n: usize,
    f: ScalarField,
    u: ScalarField,
}

impl ConformalFactor {
    pub fn new(f: ScalarField) -> Result<Self> {
        let n = f.dimension();
        if n < 3 {
            return Err(Error::UnsupportedDimension {
                n,
                reason: "conformal factors need n >= 3".into(),
            });
        }
        let k = (n as f64 - 2.0) / 2.0;
        let u = f.map(
            format!("exp({k} * ({}))", f.label()),
            move |v| (k * v).exp(),
            move |v| k * (k * v).exp(),
        );
        Ok(Self { n, f, u })
    }

    /// Builds the factor from u > 0 via f = (2/(n−2)) ln u.
    pub fn from_u(u: ScalarField) -> Result<Self> {
        let n = u.dimension();
        if n < 3 {
            return Err(Error::UnsupportedDimension {
                n,
                reason: "conformal factors need n >= 3".into(),
            });
        }
        let k = 2.0 / (n as f64 - 2.0);
        let f = u.map(format!("{k} * log({})", u.label()), move |v| k * v.ln(), move |v| k / v);
        Ok(Self { n, f, u })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    /// The factor for f + c.
    pub fn shifted(&self, c: f64) -> Self {
        Self::new(self.f.offset(c)).expect("dimension already validated")
    }

    /// Checks u = e^{(n−2)f/2} and u > 0 at every sample point.
    pub fn check_invariants(&self, sampling: &SphereSampling) -> Result<()> {
        let k = (self.n as f64 - 2.0) / 2.0;
        for p in sampling.points() {
            let (f, u) = (self.f.eval(p), self.u.eval(p));
            if !(u > 0.0) || (u - (k * f).exp()).abs() > tolerances::UNIT_NORM * u.abs().max(1.0) {
                return invalid(format!("u and f disagree at a sample point (f={f}, u={u})"));
            }
        }
        Ok(())
    }
}

/// Hypothesis constants: two-sided volume bound V, uniform-integrability
/// pair (Λ, α), optional total scalar curvature bound R₀.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisBounds {
    pub volume: f64,
    pub ui_lambda: f64,
    pub ui_alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_curvature: Option<f64>,
}

impl HypothesisBounds {
    pub fn new(volume: f64, ui_lambda: f64, ui_alpha: f64, total_curvature: Option<f64>) -> Result<Self> {
        if !(volume > 0.0) {
            return invalid("V must be positive");
        }
        if !(ui_lambda > 0.0) {
            return invalid("Lambda must be positive");
        }
        if !(ui_alpha > 0.0 && ui_alpha < 1.0) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: ui_alpha,
                range: "(0, 1)".into(),
            });
        }
        if let Some(r) = total_curvature {
            if !(r > 0.0) {
                return invalid("R0 must be positive");
            }
        }
        Ok(Self {
            volume,
            ui_lambda,
            ui_alpha,
            total_curvature,
        })
    }

    /// V = 2·max(Vol, 1/Vol) over the given volumes, Λ = 2ω_n^{1−α}, α = 1/2.
    pub fn covering(n: usize, volumes: &[f64]) -> Result<Self> {
        let v = volumes.iter().fold(1.0f64, |acc, v| acc.max(*v).max(1.0 / v));
        let alpha = 0.5;
        Self::new(2.0 * v, 2.0 * sphere_volume_constant(n).powf(1.0 - alpha), alpha, None)
    }

    pub fn with_total_curvature(mut self, r0: f64) -> Result<Self> {
        self.total_curvature = Some(r0);
        Self::new(self.volume, self.ui_lambda, self.ui_alpha, self.total_curvature)
    }
}

/// Pointwise Sc_g together with the magnitude of the differenced terms.
pub(crate) fn scalar_curvature_parts(cf: &ConformalFactor, p: &[f64], h: f64) -> (f64, f64) {
    let n = cf.n as f64;
    let lap = laplacian_at(&cf.f, p, h);
    let grad2 = gradient_norm_sq(&cf.f, p, h);
    let scale = (-2.0 * cf.f.eval(p)).exp();
    let sc = scale * (n * (n - 1.0) - 2.0 * (n - 1.0) * lap - (n - 2.0) * (n - 1.0) * grad2);
    let magnitude = scale * (n * (n - 1.0) + 2.0 * (n - 1.0) * lap.abs() + (n - 2.0) * (n - 1.0) * grad2);
    (sc, magnitude)
}

/// Sc_g at p, with Δf by finite differences.
pub fn scalar_curvature(cf: &ConformalFactor, p: &[f64], h: f64) -> Result<f64> {
    cf.f.check_point(p)?;
    check_step(h)?;
    Ok(scalar_curvature_parts(cf, p, h).0)
}

/// Sc_g over a probe set.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    pub probes: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// min over probes of Sc + tolerance_i (≥ 0 iff nonnegative within tolerance).
    pub min_slack: f64,
    pub relative_tolerance: f64,
    pub nonnegative: bool,
}

/// Evaluates Sc_g at every probe. Each value is judged nonnegative up to
/// `FD_TERM_REL` times the magnitude of its differenced terms.
pub fn curvature_report(cf: &ConformalFactor, probes: &SphereSampling, h: f64) -> Result<CurvatureReport> {
    check_step(h)?;
    if probes.dimension() != cf.n {
        return Err(Error::DimensionMismatch {
            expected: cf.n,
            got: probes.dimension(),
        });
    }
    let parts = map_points(probes, |p| scalar_curvature_parts(cf, p, h));
    let rel = tolerances::FD_TERM_REL;
    let values: Vec<f64> = parts.iter().map(|(s, _)| *s).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_slack = parts.iter().map(|(s, m)| s + rel * m).fold(f64::INFINITY, f64::min);
    Ok(CurvatureReport {
        probes: values.len(),
        values,
        min,
        max,
        min_slack,
        relative_tolerance: rel,
        nonnegative: min_slack >= 0.0,
    })
}

/// Vol_g(Sⁿ) = ∫ e^{nf} dV.
pub fn volume(cf: &ConformalFactor, sampling: &SphereSampling) -> f64 {
    let n = cf.n as f64;
    quadrature(sampling, |p| (n * cf.f.eval(p)).exp())
}

/// ∫ 1_U e^{nf} dV for an indicator field with values in {0, 1}.
pub fn region_volume(cf: &ConformalFactor, region: &ScalarField, sampling: &SphereSampling) -> Result<f64> {
    let n = cf.n as f64;
    let values = map_points(sampling, |p| region.eval(p));
    if let Some(v) = values.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return invalid(format!("region indicator takes the value {v}"));
    }
    let mask_sum = quadrature_multi::<1>(sampling, |p| {
        if region.eval(p) == 1.0 {
            [(n * cf.f.eval(p)).exp()]
        } else {
            [0.0]
        }
    });
    Ok(mask_sum[0])
}

/// Both sides of the total scalar curvature identity.
#[derive(Clone, Debug, Serialize)]
pub struct TotalScalarCurvature {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_discrepancy: f64,
}

/// lhs = ∫ Sc_g e^{nf} dV with Sc_g from finite differences;
/// rhs = ∫ n(n−1)e^{(n−2)f} + (4(n−1)/(n−2))|∇u|² dV with ∇u computed
/// separately. The two agree only through integration by parts.
pub fn total_scalar_curvature(cf: &ConformalFactor, sampling: &SphereSampling, h: f64) -> Result<TotalScalarCurvature> {
    check_step(h)?;
    let n = cf.n as f64;
    let [lhs, rhs] = quadrature_multi::<2>(sampling, |p| {
        let f = cf.f.eval(p);
        let (sc, _) = scalar_curvature_parts(cf, p, h);
        let l = sc * (n * f).exp();
        let r = n * (n - 1.0) * ((n - 2.0) * f).exp() + 4.0 * (n - 1.0) / (n - 2.0) * gradient_norm_sq(&cf.u, p, h);
        [l, r]
    });
    Ok(TotalScalarCurvature {
        lhs,
        rhs,
        relative_discrepancy: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE),
    })
}

/// (n(n−2)/4)∫uφ + ∫⟨∇φ,∇u⟩; the weak inequality holds iff this is ≥ −tol.
pub fn weak_psc_residual(u: &ScalarField, phi: &ScalarField, sampling: &SphereSampling, h: f64) -> Result<f64> {
    u.ensure_same_dimension(phi)?;
    check_step(h)?;
    let n = u.dimension() as f64;
    let negative = map_points(sampling, |p| phi.eval(p) < 0.0);
    if negative.iter().any(|b| *b) {
        return invalid("test function is negative at a sample point");
    }
    let c = n * (n - 2.0) / 4.0;
    Ok(quadrature(sampling, |p| {
        c * u.eval(p) * phi.eval(p) + gradient_pairing(phi, u, p, h)
    }))
}

/// Nonnegative test functions: radial bumps (1 − (d/ρ)²)₊³ centered at
/// ±e_k and at `extra_centers`, for each radius, followed by the constant 1.
pub fn bump_family(n: usize, radii: &[f64], extra_centers: &[Vec<f64>]) -> Vec<ScalarField> {
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for k in 0..=n {
        let e = basis(n + 1, k);
        centers.push(e.iter().map(|v| -v).collect());
        centers.push(e);
    }
    centers.extend(extra_centers.iter().cloned());
    let mut family = Vec::with_capacity(centers.len() * radii.len() + 1);
    for c in &centers {
        for &r in radii {
            family.push(ScalarField::bump(c, r));
        }
    }
    family.push(ScalarField::constant(n, 1.0));
    family
}

/// Sampling for integrals against `phi`: a polar rule fitted to its
/// declared support when it has one (2 ≤ n ≤ 5), else `fallback`. The
/// breakpoints of a polar `fallback` about the same center are kept so its
/// radial structure stays resolved.
pub fn test_sampling(phi: &ScalarField, fallback: &SphereSampling) -> Result<SphereSampling> {
    let n = phi.dimension();
    let Some((center, rho)) = phi.support() else {
        return Ok(fallback.clone());
    };
    if !(2..=5).contains(&n) {
        return Ok(fallback.clone());
    }
    let mut breaks = vec![0.5 * rho, rho];
    let mut tangent = fit_resolution(16, n - 1, TANGENT_NODE_BUDGET);
    if let SamplingKind::Polar {
        center: c,
        breakpoints,
        tangent_resolution,
        ..
    } = fallback.kind()
    {
        if geodesic_distance_unchecked(c, center) < tolerances::GEOMETRIC {
            breaks.extend(breakpoints.iter().copied().filter(|b| *b < rho));
            tangent = tangent.max(*tangent_resolution);
        }
    }
    polar_sampling(center, &breaks, 8, tangent)
}

/// Default radii of the bump family.
pub const BUMP_RADII: [f64; 3] = [0.5, 1.0, 1.5];

/// ∫|∇f|² against n ω_n/(n−2).
pub fn gradient_l2_bound_check(cf: &ConformalFactor, sampling: &SphereSampling, h: f64) -> Result<CheckRecord> {
    check_step(h)?;
    let n = cf.n;
    let lhs = quadrature(sampling, |p| gradient_norm_sq(&cf.f, p, h));
    let rhs = n as f64 * sphere_volume_constant(n) / (n as f64 - 2.0);
    Ok(
        CheckRecord::le("gradient-l2-bound", ANCHOR_GRADIENT_L2, n, lhs, rhs, 0.0)
            .param("h", h)
            .sampled(sampling),
    )
}

/// ∫e^{pf}|∇f|² against n V^{p/n} ω_n^{(n−p)/n}/(n−2−2p).
pub fn weighted_gradient_bound_check(
    cf: &ConformalFactor,
    p: f64,
    bounds: &HypothesisBounds,
    sampling: &SphereSampling,
    h: f64,
) -> Result<CheckRecord> {
    check_step(h)?;
    let n = cf.n as f64;
    if !(p >= 0.0 && p < (n - 2.0) / 2.0) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: format!("[0, {})", (n - 2.0) / 2.0),
        });
    }
    let lhs = quadrature(sampling, |x| (p * cf.f.eval(x)).exp() * gradient_norm_sq(&cf.f, x, h));
    let rhs = weighted_gradient_bound(cf.n, p, bounds.volume);
    Ok(
        CheckRecord::le("weighted-gradient-bound", ANCHOR_WEIGHTED_GRADIENT, cf.n, lhs, rhs, 0.0)
            .param("p", p)
            .param("V", bounds.volume)
            .param("h", h)
            .sampled(sampling),
    )
}

pub(crate) fn weighted_gradient_bound(n: usize, p: f64, v: f64) -> f64 {
    let w = sphere_volume_constant(n);
    let nf = n as f64;
    nf * v.powf(p / nf) * w.powf((nf - p) / nf) / (nf - 2.0 - 2.0 * p)
}

/// Measured Hölder factors and their bounds for the W^{1,q} estimate.
#[derive(Clone, Debug, Serialize)]
pub struct W1qReport {
    pub q: f64,
    /// None on the direct range q ≤ n/(n−1).
    pub theta: Option<f64>,
    pub lhs: f64,
    /// ((n−2)/2)^q from ∇u = ((n−2)/2) u ∇f.
    pub chain_factor: f64,
    pub first_factor: f64,
    pub first_factor_bound: f64,
    pub second_factor: f64,
    pub second_factor_bound: f64,
    pub bound: f64,
    pub record: CheckRecord,
}

/// ∫|∇u|^q against the constant assembled from the Hölder splitting.
///
/// For q ≤ n/(n−1): (∫|∇f|²)^{q/2} (∫e^{sf})^{(2−q)/2} with s = q(n−2)/(2−q),
/// bounded by (nω_n/(n−2))^{q/2}(V^{s/n}ω_n^{1−s/n})^{(2−q)/2}.
/// For n/(n−1) < q < 4n/(3n−2): θ solves q = 2n/(n + (n−2)(1−θ)) and the
/// factors are (∫e^{nf})^{(2−q)/2} ≤ V^{(2−q)/2} and
/// (∫e^{θ(n−2)f}|∇f|²)^{q/2}, bounded by the weighted gradient estimate
/// with p = θ(n−2).
pub fn w1q_bound_check(
    cf: &ConformalFactor,
    q: f64,
    bounds: &HypothesisBounds,
    sampling: &SphereSampling,
    h: f64,
) -> Result<W1qReport> {
    check_step(h)?;
    let n = cf.n;
    let nf = n as f64;
    let q_direct = nf / (nf - 1.0);
    let q_max = 4.0 * nf / (3.0 * nf - 2.0);
    if !(q >= 1.0 && q < q_max) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            range: format!("[1, {q_max})"),
        });
    }
    let w = sphere_volume_constant(n);
    let v = bounds.volume;
    let k = (nf - 2.0) / 2.0;
    let chain = k.powf(q);
    let lhs = quadrature(sampling, |p| gradient_norm_sq(&cf.u, p, h).powf(q / 2.0));
    let (theta, a, a_bound, b, b_bound) = if q <= q_direct {
        let s = q * (nf - 2.0) / (2.0 - q);
        let [g2, es] = quadrature_multi::<2>(sampling, |p| [gradient_norm_sq(&cf.f, p, h), (s * cf.f.eval(p)).exp()]);
        let a = g2.powf(q / 2.0);
        let a_bound = (nf * w / (nf - 2.0)).powf(q / 2.0);
        let b = es.powf((2.0 - q) / 2.0);
        let b_bound = (v.powf(s / nf) * w.powf(1.0 - s / nf)).powf((2.0 - q) / 2.0);
        (None, a, a_bound, b, b_bound)
    } else {
        let theta = 1.0 - (2.0 * nf / q - nf) / (nf - 2.0);
        let pw = theta * (nf - 2.0);
        let [en, weighted] = quadrature_multi::<2>(sampling, |p| {
            let f = cf.f.eval(p);
            [(nf * f).exp(), (pw * f).exp() * gradient_norm_sq(&cf.f, p, h)]
        });
        let a = en.powf((2.0 - q) / 2.0);
        let a_bound = v.powf((2.0 - q) / 2.0);
        let b = weighted.powf(q / 2.0);
        let b_bound = weighted_gradient_bound(n, pw, v).powf(q / 2.0);
        (Some(theta), a, a_bound, b, b_bound)
    };
    let bound = chain * a_bound * b_bound;
    let mut record = CheckRecord::le("w1q-bound", ANCHOR_W1Q, n, lhs, bound, 0.0)
        .param("q", q)
        .param("V", v)
        .param("h", h)
        .param("holder_product", chain * a * b)
        .param("first_factor", a)
        .param("first_factor_bound", a_bound)
        .param("second_factor", b)
        .param("second_factor_bound", b_bound)
        .sampled(sampling);
    if let Some(t) = theta {
        record = record.param("theta", t);
    }
    Ok(W1qReport {
        q,
        theta,
        lhs,
        chain_factor: chain,
        first_factor: a,
        first_factor_bound: a_bound,
        second_factor: b,
        second_factor_bound: b_bound,
        bound,
        record,
    })
}

/// A geodesic ball used as a proxy set in the uniform-integrability audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapProbe {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Random centers plus `extra_centers`, each with radii π·2^{−k}
/// (k = 0..levels) capped at π.
pub fn cap_probe_family(
    n: usize,
    random_centers: usize,
    seed: u64,
    levels: usize,
    extra_centers: &[Vec<f64>],
) -> Result<Vec<CapProbe>> {
    let mut centers: Vec<Vec<f64>> = extra_centers.to_vec();
    if random_centers > 0 {
        let s = uniform_sphere_sampling(n, random_centers, derive_seed(seed, &[0xCA9]))?;
        centers.extend(s.points().map(|p| p.to_vec()));
    }
    let mut probes = Vec::new();
    for c in centers {
        for k in 0..levels {
            probes.push(CapProbe {
                center: c.clone(),
                radius: std::f64::consts::PI * 0.5f64.powi(k as i32),
            });
        }
    }
    Ok(probes)
}

#[derive(Clone, Debug, Serialize)]
pub struct UiProbeResult {
    pub center: Vec<f64>,
    pub radius: f64,
    pub volume_g: f64,
    pub volume_round: f64,
    pub ratio: f64,
}

/// Worst-case Vol_g(B)/Vol(B)^α over a cap family.
#[derive(Clone, Debug, Serialize)]
pub struct UiAudit {
    pub lambda: f64,
    pub alpha: f64,
    pub worst_ratio: f64,
    pub worst_radius: Option<f64>,
    pub passed: bool,
    pub probes: Vec<UiProbeResult>,
}

impl UiAudit {
    pub fn record(&self, n: usize) -> CheckRecord {
        let r = CheckRecord::le(
            "uniform-integrability",
            ANCHOR_UNIFORM_INTEGRABILITY,
            n,
            self.worst_ratio,
            self.lambda,
            tolerances::UI_RATIO_REL * self.lambda,
        )
        .param("alpha", self.alpha)
        .param("probes", self.probes.len() as f64);
        match self.worst_radius {
            Some(rad) => r.param("worst_radius", rad),
            None => r,
        }
    }
}

/// Polar rule used for cap volumes: deterministic caps where available.
pub fn default_cap_volume_rule(n: usize, seed: u64) -> PolarRule {
    PolarRule {
        radial_nodes: 32,
        cap: if n <= 5 {
            CapRule::Deterministic { resolution: 12 }
        } else {
            CapRule::MonteCarlo { count: 4096, seed }
        },
    }
}

/// Audits Vol_g(B_r(x)) ≤ Λ Vol(B_r(x))^α over the probes. Vol_g(B) is the
/// exact round volume times the polar-rule average of e^{nf} over B. An
/// empty probe list passes vacuously.
pub fn uniform_integrability_audit(
    cf: &ConformalFactor,
    bounds: &HypothesisBounds,
    probes: &[CapProbe],
    rule: &PolarRule,
) -> Result<UiAudit> {
    let n = cf.n;
    let nf = n as f64;
    let alpha = bounds.ui_alpha;
    let results: Vec<Result<UiProbeResult>> = probes
        .par_iter()
        .map(|probe| {
            cf.f.check_point(&probe.center)?;
            let round = ball_volume(n, probe.radius)?;
            let (integral, nodes_volume) =
                ball_integral_and_volume(&|p| (nf * cf.f.eval(p)).exp(), &probe.center, probe.radius, rule)?;
            let volume_g = round * integral / nodes_volume;
            Ok(UiProbeResult {
                center: probe.center.clone(),
                radius: probe.radius,
                volume_g,
                volume_round: round,
                ratio: volume_g / round.powf(alpha),
            })
        })
        .collect();
    let probes: Vec<UiProbeResult> = results.into_iter().collect::<Result<_>>()?;
    let worst = probes.iter().enumerate().max_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio));
    let (worst_ratio, worst_radius) = worst.map(|(_, r)| (r.ratio, Some(r.radius))).unwrap_or((0.0, None));
    Ok(UiAudit {
        lambda: bounds.ui_lambda,
        alpha,
        worst_ratio,
        worst_radius,
        passed: worst_ratio <= bounds.ui_lambda * (1.0 + tolerances::UI_RATIO_REL),
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::product_rule_sampling;
    use std::f64::consts::PI;

    #[test]
    fn round_metric_curvature() {
        let cf = ConformalFactor::new(ScalarField::constant(3, 0.0)).unwrap();
        let p = [0.5, 0.5, 0.5, 0.5];
        assert!((scalar_curvature(&cf, &p, 1e-3).unwrap() - 6.0).abs() < 1e-9);
        let cf = ConformalFactor::new(ScalarField::constant(3, 2f64.ln())).unwrap();
        assert!((scalar_curvature(&cf, &p, 1e-3).unwrap() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_low_dimensions() {
        assert!(ConformalFactor::new(ScalarField::constant(2, 0.0)).is_err());
    }

    #[test]
    fn from_u_inverts_new() {
        let cf = ConformalFactor::new(ScalarField::coordinate(5, 1).scale(0.3)).unwrap();
        let back = ConformalFactor::from_u(cf.u().clone()).unwrap();
        let p = [0.0, 0.6, 0.8, 0.0, 0.0, 0.0];
        assert!((back.f().eval(&p) - 0.18).abs() < 1e-14);
    }

    #[test]
    fn constant_shift_volume() {
        let s = product_rule_sampling(3, 16).unwrap();
        let cf = ConformalFactor::new(ScalarField::constant(3, -1.0)).unwrap();
        assert!((volume(&cf, &s) - (-3.0f64).exp() * 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn region_indicator_must_be_binary() {
        let s = product_rule_sampling(3, 4).unwrap();
        let cf = ConformalFactor::new(ScalarField::constant(3, 0.0)).unwrap();
        assert!(region_volume(&cf, &ScalarField::constant(3, 0.5), &s).is_err());
        assert_eq!(region_volume(&cf, &ScalarField::constant(3, 0.0), &s).unwrap(), 0.0);
    }

    #[test]
    fn negative_test_function_is_rejected() {
        let s = product_rule_sampling(3, 4).unwrap();
        let u = ScalarField::constant(3, 1.0);
        assert!(weak_psc_residual(&u, &ScalarField::coordinate(3, 0), &s, 1e-3).is_err());
    }

    #[test]
    fn weighted_bound_rejects_large_exponent() {
        let s = product_rule_sampling(3, 4).unwrap();
        let cf = ConformalFactor::new(ScalarField::constant(3, 0.0)).unwrap();
        let b = HypothesisBounds::covering(3, &[2.0 * PI * PI]).unwrap();
        assert!(weighted_gradient_bound_check(&cf, 0.5, &b, &s, 1e-3).is_err());
        assert!(w1q_bound_check(&cf, 1.8, &b, &s, 1e-3).is_err());
    }

    #[test]
    fn empty_audit_passes() {
        let cf = ConformalFactor::new(ScalarField::constant(3, 0.0)).unwrap();
        let b = HypothesisBounds::covering(3, &[1.0]).unwrap();
        let a = uniform_integrability_audit(&cf, &b, &[], &default_cap_volume_rule(3, 0)).unwrap();
        assert!(a.passed);
    }

    #[test]
    fn hypothesis_bounds_validation() {
        assert!(HypothesisBounds::new(1.0, 1.0, 1.0, None).is_err());
        assert!(HypothesisBounds::new(-1.0, 1.0, 0.5, None).is_err());
        assert!(HypothesisBounds::new(1.0, 1.0, 0.5, Some(0.0)).is_err());
    }
}
