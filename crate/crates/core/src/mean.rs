//! Spherical means φ(r) = ⨍_{∂B_r(x)} u dσ and drifted ball averages.
//!
//! Under Δu ≤ (n(n−2)/4)u the mean of u (n ∈ {3,4}) or of u^{2/(n−2)}
//! (n ≥ 4) grows at most linearly in r, with a slope fixed by the
//! L^{2n/(n−2)} norm of u. Under Δf ≤ n/2 the same holds for f with the
//! dimensional slope C(n). Subtracting the slope gives non-increasing
//! spherical means and ball averages; the checks here measure that.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::calculus::{
    ball_average_with_error, ball_integral_and_volume, check_step, laplacian_at, lp_norm, map_points,
    spherical_mean_with_error, CapRule, PolarRule,
};
use crate::field::ScalarField;
use crate::quad1d::sin_power_integral;
use crate::report::{CheckRecord, Series, SeriesKind};
use crate::sphere::{
    check_unit, geodesic_distance_unchecked, product_rule_sampling, sphere_volume_constant, uniform_sphere_sampling,
    RadialGrid, SphereSampling,
};
use crate::tolerances;

pub const ANCHOR_PHI_DERIVATIVE: &str = "phi'(r) = int_{B_r} Lap u / (omega_{n-1} sin^{n-1} r)";
pub const ANCHOR_RATIO_LOW: &str = "(int_0^r sin^{n-1})^{(n+2)/(2n)} / sin^{n-1} r <= (pi/2)^{(n+2)/(2n)}, n in {3,4}";
pub const ANCHOR_RATIO_HIGH: &str = "(int_0^r sin^{n-1})^{(n-1)/n} / sin^{n-1} r <= (pi/2)^{(n-1)/n}";
pub const ANCHOR_SPHERICAL_MONOTONE: &str = "r -> avg_{dB_r(x)}(v - K r) non-increasing";
pub const ANCHOR_POINTWISE: &str = "v(x) >= avg_{dB_r(x)} v - K r";
pub const ANCHOR_BALL_MONOTONE: &str = "avg_{B_r1(x)}(v - K d_x) <= avg_{B_r0(x)}(v - K d_x), r0 < r1";
pub const ANCHOR_BALL_CENTER: &str = "avg_{B_r(x)}(v - K d_x) <= v(x)";
pub const ANCHOR_SUPERHARMONIC_POWER: &str = "Lap u <= C u implies Lap u^a <= a C u^a, a in (0,1)";
pub const ANCHOR_LOWER_SEMICONTINUITY: &str = "v(x) = sup_s avg_{B_s(x)}(v - K d_x)";

/// Drift constants of the mean inequalities on Sⁿ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftConstants {
    pub n: usize,
    /// ω_{n−1}, the volume of the unit (n−1)-sphere.
    pub omega_boundary: f64,
    /// (n(n−2)/4)(π/2)^{(n+2)/(2n)} ω_{n−1}^{(2−n)/(2n)}: slope for u, n ∈ {3,4}.
    pub c_low: f64,
    /// (n/2)(π/2)^{n−1} ω_{n−1}^{−1/n}: slope for u^{2/(n−2)}.
    pub c_high: f64,
    /// C(n) = (n/2)∫₀^{π/2} sinⁿ⁻¹: slope for f.
    pub c_log: f64,
}

pub fn constants(n: usize) -> Result<DriftConstants> {
    if n < 3 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "drift constants need n >= 3".into(),
        });
    }
    let nf = n as f64;
    let w = sphere_volume_constant(n - 1);
    Ok(DriftConstants {
        n,
        omega_boundary: w,
        c_low: nf * (nf - 2.0) / 4.0 * FRAC_PI_2.powf((nf + 2.0) / (2.0 * nf)) * w.powf((2.0 - nf) / (2.0 * nf)),
        c_high: nf / 2.0 * FRAC_PI_2.powi(n as i32 - 1) * w.powf(-1.0 / nf),
        c_log: nf / 2.0 * sin_power_integral(n as u32 - 1, FRAC_PI_2),
    })
}

/// (∫₀^r sinⁿ⁻¹ s ds)^exponent / sinⁿ⁻¹ r.
pub fn elementary_ratio(n: usize, exponent: f64, r: f64) -> f64 {
    let k = n as u32 - 1;
    sin_power_integral(k, r).powf(exponent) / r.sin().powi(k as i32)
}

/// Maximum of an elementary ratio over a radial grid.
#[derive(Clone, Debug, Serialize)]
pub struct RatioScan {
    pub n: usize,
    pub exponent: f64,
    pub bound: f64,
    pub max_ratio: f64,
    pub argmax: f64,
    pub record: CheckRecord,
}

fn ratio_scan(n: usize, exponent: f64, grid: &RadialGrid, check: &str, anchor: &str) -> RatioScan {
    let bound = FRAC_PI_2.powf(exponent);
    let ratios: Vec<f64> = grid.radii().iter().map(|r| elementary_ratio(n, exponent, *r)).collect();
    let (i, max_ratio) = ratios
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("radial grids are non-empty");
    let argmax = grid.radii()[i];
    let record = CheckRecord::le(check, anchor, n, max_ratio, bound, tolerances::ELEMENTARY)
        .param("exponent", exponent)
        .param("argmax", argmax)
        .param("grid_points", grid.len() as f64);
    RatioScan {
        n,
        exponent,
        bound,
        max_ratio,
        argmax,
        record,
    }
}

/// Scans (∫₀^r sinⁿ⁻¹)^{(n+2)/(2n)}/sinⁿ⁻¹r ≤ (π/2)^{(n+2)/(2n)}. For n ≥ 5
/// the ratio blows up like r^{(4−n)/2} at the origin, so only n ∈ {3,4} is
/// accepted.
pub fn elementary_ratio_low(n: usize, grid: &RadialGrid) -> Result<RatioScan> {
    if !(3..=4).contains(&n) {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the (n+2)/(2n) ratio is unbounded near r = 0 unless n is 3 or 4".into(),
        });
    }
    let nf = n as f64;
    Ok(ratio_scan(
        n,
        (nf + 2.0) / (2.0 * nf),
        grid,
        "elementary-ratio-low",
        ANCHOR_RATIO_LOW,
    ))
}

/// Scans (∫₀^r sinⁿ⁻¹)^{(n−1)/n}/sinⁿ⁻¹r ≤ (π/2)^{(n−1)/n}.
pub fn elementary_ratio_high(n: usize, grid: &RadialGrid) -> Result<RatioScan> {
    if n < 2 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the ratio needs n >= 2".into(),
        });
    }
    let nf = n as f64;
    Ok(ratio_scan(
        n,
        (nf - 1.0) / nf,
        grid,
        "elementary-ratio-high",
        ANCHOR_RATIO_HIGH,
    ))
}

/// Which function the monotone means are taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanTarget {
    /// u itself, slope c_low‖u‖_{2n/(n−2)}; n ∈ {3,4}.
    U,
    /// u^{2/(n−2)}, slope c_high‖u‖_{2n/(n−2)}^{2/(n−2)}; n ≥ 4.
    PowerU,
    /// f = (2/(n−2)) ln u, slope C(n); any n ≥ 3.
    F,
}

impl MeanTarget {
    /// The variant used when none is forced: u for n ≤ 4, u^{2/(n−2)} above.
    pub fn for_dimension(n: usize) -> Self {
        if n <= 4 {
            MeanTarget::U
        } else {
            MeanTarget::PowerU
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MeanTarget::U => "u",
            MeanTarget::PowerU => "u-power",
            MeanTarget::F => "f",
        }
    }

    pub fn check_dimension(&self, n: usize) -> Result<()> {
        let reason = match self {
            MeanTarget::U if !(3..=4).contains(&n) => "the mean inequality for u itself needs n in {3, 4}",
            MeanTarget::PowerU if n < 4 => "u^{2/(n-2)} needs n >= 4 (exponent at most 1)",
            MeanTarget::F if n < 3 => "f needs n >= 3",
            _ => return Ok(()),
        };
        Err(Error::UnsupportedDimension {
            n,
            reason: reason.into(),
        })
    }

    /// The averaged field built from u.
    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        let n = u.dimension() as f64;
        match self {
            MeanTarget::U => u.clone(),
            MeanTarget::PowerU => u.powf(2.0 / (n - 2.0)),
            MeanTarget::F => u.ln().scale(2.0 / (n - 2.0)),
        }
    }
}

/// Quadrature choices shared by the mean checks.
#[derive(Clone, Debug)]
pub struct MeanSettings {
    /// Rule for individual geodesic spheres.
    pub cap: CapRule,
    /// Rule for geodesic balls.
    pub polar: PolarRule,
    /// Sampling used for the global L^{2n/(n−2)} norm of u.
    pub norm_sampling: SphereSampling,
    /// Finite-difference step for Laplacians.
    pub h: f64,
}

impl MeanSettings {
    /// Deterministic caps for n ≤ 5, Monte-Carlo caps seeded from `seed`
    /// above; product-rule norms for n ≤ 4.
    pub fn default_for(n: usize, seed: u64) -> Result<Self> {
        let cap = if n <= 5 {
            CapRule::Deterministic { resolution: 16 }
        } else {
            CapRule::MonteCarlo { count: 4096, seed }
        };
        let norm_sampling = if n <= 4 {
            product_rule_sampling(n, 32)?
        } else {
            uniform_sphere_sampling(n, 100_000, seed)?
        };
        Ok(Self {
            cap,
            polar: PolarRule { radial_nodes: 24, cap },
            norm_sampling,
            h: tolerances::DEFAULT_STEP,
        })
    }
}

/// Norm entering the slope (None for f) and the smallest admissible drift.
pub fn required_drift(target: MeanTarget, u: &ScalarField, settings: &MeanSettings) -> Result<(Option<f64>, f64)> {
    let n = u.dimension();
    target.check_dimension(n)?;
    let c = constants(n)?;
    let nf = n as f64;
    Ok(match target {
        MeanTarget::U => {
            let norm = lp_norm(u, &settings.norm_sampling, 2.0 * nf / (nf - 2.0))?;
            (Some(norm), c.c_low * norm)
        }
        MeanTarget::PowerU => {
            let norm = lp_norm(u, &settings.norm_sampling, 2.0 * nf / (nf - 2.0))?;
            (Some(norm), c.c_high * norm.powf(2.0 / (nf - 2.0)))
        }
        MeanTarget::F => (None, c.c_log),
    })
}

fn resolve_drift(k: Option<f64>, required: f64) -> Result<f64> {
    match k {
        None => Ok(required),
        Some(k) if k >= required * (1.0 - 1e-12) => Ok(k),
        Some(k) => Err(Error::Hypothesis(format!(
            "drift constant K = {k} is below the required {required}"
        ))),
    }
}

/// φ(rᵢ) on a radial grid together with the drifted values φ(rᵢ) − K rᵢ.
#[derive(Clone, Debug, Serialize)]
pub struct SphericalMeanProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Cap standard errors (zero for deterministic caps).
    pub standard_errors: Vec<f64>,
    pub drift: f64,
    pub drifted: Vec<f64>,
}

impl SphericalMeanProfile {
    pub fn with_drift(mut self, k: f64) -> Self {
        self.drift = k;
        self.drifted = self.radii.iter().zip(&self.values).map(|(r, v)| v - k * r).collect();
        self
    }

    pub fn series(&self, name: &str) -> Series {
        Series::new(name, SeriesKind::PhiProfile, "r", self.radii.clone())
            .curve("phi", self.values.clone())
            .curve("phi - K r", self.drifted.clone())
    }

    /// CSV with columns r, phi, phi_drifted, stderr.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "phi", "phi_drifted", "stderr"])?;
        for i in 0..self.radii.len() {
            w.write_record([
                format!("{:.12e}", self.radii[i]),
                format!("{:.12e}", self.values[i]),
                format!("{:.12e}", self.drifted[i]),
                format!("{:.6e}", self.standard_errors[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// φ on the grid with Monte-Carlo caps of `cap_count` points.
pub fn phi_profile(
    u: &ScalarField,
    x: &[f64],
    grid: &RadialGrid,
    cap_count: usize,
    seed: u64,
) -> Result<SphericalMeanProfile> {
    phi_profile_with(u, x, grid, &CapRule::MonteCarlo { count: cap_count, seed })
}

/// φ on the grid. Each radius gets its own cap stream, salted by (x, r).
pub fn phi_profile_with(u: &ScalarField, x: &[f64], grid: &RadialGrid, rule: &CapRule) -> Result<SphericalMeanProfile> {
    u.check_point(x)?;
    let results: Vec<Result<(f64, f64)>> = grid
        .radii()
        .par_iter()
        .map(|r| spherical_mean_with_error(u, &rule.cap(x, *r, CapRule::salt(x, *r))?))
        .collect();
    let (values, standard_errors): (Vec<f64>, Vec<f64>) =
        results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return invalid(format!("spherical mean is not finite ({v})"));
    }
    Ok(SphericalMeanProfile {
        center: x.to_vec(),
        radii: grid.radii().to_vec(),
        drifted: values.clone(),
        values,
        standard_errors,
        drift: 0.0,
    })
}

/// Both sides of φ′(r) = ∫_{B_r}Δu / (ω_{n−1} sinⁿ⁻¹ r).
#[derive(Clone, Debug, Serialize)]
pub struct DerivativeIdentity {
    pub r: f64,
    pub step: f64,
    /// (φ(r+step) − φ(r−step)) / (2 step), both caps on one random stream.
    pub finite_difference: f64,
    pub ball_side: f64,
    pub relative_discrepancy: f64,
    pub record: CheckRecord,
}

pub fn phi_derivative_identity_check(
    u: &ScalarField,
    x: &[f64],
    r: f64,
    step: f64,
    settings: &MeanSettings,
    rel_tol: f64,
) -> Result<DerivativeIdentity> {
    u.check_point(x)?;
    check_step(settings.h)?;
    if !(r > 0.0 && r < FRAC_PI_2) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "(0, pi/2)".into(),
        });
    }
    if !(step > 0.0 && step < r) {
        return Err(Error::OutOfRange {
            name: "step",
            value: step,
            range: format!("(0, {r})"),
        });
    }
    let n = u.dimension();
    let salt = CapRule::salt(x, r);
    let (hi, _) = spherical_mean_with_error(u, &settings.cap.cap(x, r + step, salt)?)?;
    let (lo, _) = spherical_mean_with_error(u, &settings.cap.cap(x, r - step, salt)?)?;
    let finite_difference = (hi - lo) / (2.0 * step);
    let (integral, _) = ball_integral_and_volume(&|p| laplacian_at(u, p, settings.h), x, r, &settings.polar)?;
    let ball_side = integral / (sphere_volume_constant(n - 1) * r.sin().powi(n as i32 - 1));
    let relative_discrepancy = (finite_difference - ball_side).abs() / ball_side.abs().max(f64::MIN_POSITIVE);
    let record = CheckRecord::approx(
        "phi-derivative-identity",
        ANCHOR_PHI_DERIVATIVE,
        n,
        finite_difference,
        ball_side,
        rel_tol,
        1e-9,
    )
    .param("r", r)
    .param("step", step)
    .param("h", settings.h);
    Ok(DerivativeIdentity {
        r,
        step,
        finite_difference,
        ball_side,
        relative_discrepancy,
        record,
    })
}

fn pair_tolerance(se_a: f64, se_b: f64, scale: f64) -> f64 {
    (tolerances::CAP_STDERR_FACTOR * se_a.hypot(se_b)).max(tolerances::MONOTONE_FLOOR * scale.max(1.0))
}

/// Drifted spherical-mean profile checked for upticks between every pair
/// of radii.
#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub target: MeanTarget,
    pub norm: Option<f64>,
    pub required_drift: f64,
    pub drift: f64,
    pub profile: SphericalMeanProfile,
    /// max over i < j of drifted[j] − drifted[i].
    pub max_uptick: f64,
    /// max over i < j of the uptick minus its pair tolerance.
    pub max_excess: f64,
    pub record: CheckRecord,
}

/// Checks that r ↦ ⨍_{∂B_r(x)}(v − K r) is non-increasing, where v is the
/// target built from u. Refuses to run when K is below the slope the
/// hypothesis requires. `target` defaults to the dimension's variant.
pub fn spherical_mean_monotonicity_check(
    u: &ScalarField,
    k: Option<f64>,
    x: &[f64],
    grid: &RadialGrid,
    target: Option<MeanTarget>,
    settings: &MeanSettings,
) -> Result<MonotonicityReport> {
    let n = u.dimension();
    let target = target.unwrap_or(MeanTarget::for_dimension(n));
    let (norm, required) = required_drift(target, u, settings)?;
    let drift = resolve_drift(k, required)?;
    let v = target.apply(u);
    let profile = phi_profile_with(&v, x, grid, &settings.cap)?.with_drift(drift);
    let m = profile.radii.len();
    let mut max_uptick = f64::NEG_INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            let up = profile.drifted[j] - profile.drifted[i];
            let scale = profile.values[i].abs().max(profile.values[j].abs());
            let tol = pair_tolerance(profile.standard_errors[i], profile.standard_errors[j], scale);
            max_uptick = max_uptick.max(up);
            max_excess = max_excess.max(up - tol);
        }
    }
    if m < 2 {
        max_uptick = 0.0;
        max_excess = 0.0;
    }
    let mut record = CheckRecord::le(
        "spherical-mean-monotone",
        ANCHOR_SPHERICAL_MONOTONE,
        n,
        max_excess,
        0.0,
        0.0,
    )
    .param("K", drift)
    .param("required_K", required)
    .param("max_uptick", max_uptick)
    .param("radii", m as f64)
    .note(format!("target {}", target.as_str()));
    if let Some(norm) = norm {
        record = record.param("norm", norm);
    }
    if let Some(seed) = settings.cap.seed() {
        record = record.seed(seed);
    }
    Ok(MonotonicityReport {
        target,
        norm,
        required_drift: required,
        drift,
        profile,
        max_uptick,
        max_excess,
        record,
    })
}

/// v(x) ≥ ⨍_{∂B_r(x)} v − K r with K the required slope of the target.
pub fn pointwise_lower_bound_check(
    u: &ScalarField,
    x: &[f64],
    r: f64,
    target: Option<MeanTarget>,
    settings: &MeanSettings,
) -> Result<CheckRecord> {
    u.check_point(x)?;
    let n = u.dimension();
    let target = target.unwrap_or(MeanTarget::for_dimension(n));
    let (norm, required) = required_drift(target, u, settings)?;
    if !(r > 0.0 && r < FRAC_PI_2) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "(0, pi/2)".into(),
        });
    }
    let v = target.apply(u);
    let (mean, se) = spherical_mean_with_error(&v, &settings.cap.cap(x, r, CapRule::salt(x, r))?)?;
    let center = v.eval(x);
    let tol = pair_tolerance(se, 0.0, center.abs().max(mean.abs()));
    let mut record = CheckRecord::ge(
        "pointwise-lower-bound",
        ANCHOR_POINTWISE,
        n,
        center,
        mean - required * r,
        tol,
    )
    .param("r", r)
    .param("K", required)
    .param("mean", mean)
    .note(format!("target {}", target.as_str()));
    if let Some(norm) = norm {
        record = record.param("norm", norm);
    }
    Ok(record)
}

/// Drifted ball averages at two radii and at the center.
#[derive(Clone, Debug, Serialize)]
pub struct BallMonotonicity {
    pub target: MeanTarget,
    pub drift: f64,
    pub required_drift: f64,
    pub r0: f64,
    pub r1: f64,
    /// ⨍_{B_r0}(v − K d_x).
    pub average_r0: f64,
    /// ⨍_{B_r1}(v − K d_x).
    pub average_r1: f64,
    pub center_value: f64,
    /// Ordered pair, then the r₁ average against v(x).
    pub records: Vec<CheckRecord>,
}

/// ⨍_{B_r1(x)}(v − K d_x) ≤ ⨍_{B_r0(x)}(v − K d_x) and ≤ v(x), where d_x is
/// the geodesic distance to x.
pub fn ball_average_monotonicity_check(
    u: &ScalarField,
    target: Option<MeanTarget>,
    k: Option<f64>,
    x: &[f64],
    r0: f64,
    r1: f64,
    settings: &MeanSettings,
) -> Result<BallMonotonicity> {
    u.check_point(x)?;
    if !(r0 > 0.0 && r0 < r1 && r1 < FRAC_PI_2) {
        return invalid(format!("need 0 < r0 < r1 < pi/2, got r0 = {r0}, r1 = {r1}"));
    }
    let n = u.dimension();
    let target = target.unwrap_or(MeanTarget::for_dimension(n));
    let (_, required) = required_drift(target, u, settings)?;
    let drift = resolve_drift(k, required)?;
    let v = target.apply(u);
    let g = |p: &[f64]| v.eval(p) - drift * geodesic_distance_unchecked(p, x);
    let (a0, e0) = ball_average_with_error(&g, x, r0, &settings.polar)?;
    let (a1, e1) = ball_average_with_error(&g, x, r1, &settings.polar)?;
    let center_value = v.eval(x);
    let scale = a0.abs().max(a1.abs()).max(center_value.abs());
    let label = format!("target {}", target.as_str());
    let pair = CheckRecord::le(
        "ball-average-monotone",
        ANCHOR_BALL_MONOTONE,
        n,
        a1,
        a0,
        pair_tolerance(e0, e1, scale),
    )
    .param("r0", r0)
    .param("r1", r1)
    .param("K", drift)
    .param("required_K", required)
    .note(label.clone());
    let center = CheckRecord::le(
        "ball-average-center",
        ANCHOR_BALL_CENTER,
        n,
        a1,
        center_value,
        pair_tolerance(e1, 0.0, scale),
    )
    .param("r", r1)
    .param("K", drift)
    .note(label);
    Ok(BallMonotonicity {
        target,
        drift,
        required_drift: required,
        r0,
        r1,
        average_r0: a0,
        average_r1: a1,
        center_value,
        records: vec![pair, center],
    })
}

/// Δu ≤ Cu at the probes implies Δu^α ≤ αCu^α there. The hypothesis is
/// verified first; a probe where it fails (beyond finite-difference
/// tolerance), or where u ≤ 0, is an error.
pub fn superharmonic_power_check(
    u: &ScalarField,
    c: f64,
    alpha: f64,
    probes: &SphereSampling,
    h: f64,
) -> Result<CheckRecord> {
    check_step(h)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "(0, 1)".into(),
        });
    }
    if probes.dimension() != u.dimension() {
        return Err(Error::DimensionMismatch {
            expected: u.dimension(),
            got: probes.dimension(),
        });
    }
    let v = u.powf(alpha);
    let rel = tolerances::FD_TERM_REL;
    let rows = map_points(probes, |p| {
        let up = u.eval(p);
        let lu = laplacian_at(u, p, h);
        let vp = v.eval(p);
        let lv = laplacian_at(&v, p, h);
        (
            up,
            lu - c * up,
            rel * (lu.abs() + c.abs() * up.abs()),
            lv - alpha * c * vp,
            rel * (lv.abs() + (alpha * c * vp).abs()),
        )
    });
    for (i, (up, hyp, hyp_tol, _, _)) in rows.iter().enumerate() {
        if !(*up > 0.0) {
            return Err(Error::Hypothesis(format!("u = {up} is not positive at probe {i}")));
        }
        if *hyp > *hyp_tol {
            return Err(Error::Hypothesis(format!(
                "Lap u - C u = {hyp} > 0 at probe {i}; the hypothesis does not hold"
            )));
        }
    }
    let max_excess = rows.iter().map(|r| r.3 - r.4).fold(f64::NEG_INFINITY, f64::max);
    let max_raw = rows.iter().map(|r| r.3).fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckRecord::le(
        "superharmonic-power",
        ANCHOR_SUPERHARMONIC_POWER,
        u.dimension(),
        max_excess,
        0.0,
        0.0,
    )
    .param("C", c)
    .param("alpha", alpha)
    .param("h", h)
    .param("max_lap_v_minus_bound", max_raw)
    .sampled(probes))
}

/// Drifted ball averages of v about x along shrinking radii.
#[derive(Clone, Debug, Serialize)]
pub struct SemicontinuityProbe {
    pub radii: Vec<f64>,
    pub averages: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub supremum: f64,
    pub center_value: f64,
    /// The averages do not decrease as the radius shrinks; every average
    /// stays below v(x).
    pub records: Vec<CheckRecord>,
}

/// Evaluates s ↦ ⨍_{B_s(x)}(v − K d_x) along strictly decreasing radii. The
/// supremum over s is the lower semicontinuous representative of v at x.
pub fn lower_semicontinuity_probe(
    v: &ScalarField,
    x: &[f64],
    k: f64,
    radii: &[f64],
    rule: &PolarRule,
) -> Result<SemicontinuityProbe> {
    v.check_point(x)?;
    check_unit(x, "center")?;
    if radii.is_empty() {
        return Err(Error::Empty("radii"));
    }
    if radii.iter().any(|s| !(*s > 0.0 && *s < FRAC_PI_2)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("radii must be strictly decreasing inside (0, pi/2)");
    }
    if !(k >= 0.0) {
        return Err(Error::OutOfRange {
            name: "K",
            value: k,
            range: "[0, inf)".into(),
        });
    }
    let g = |p: &[f64]| v.eval(p) - k * geodesic_distance_unchecked(p, x);
    let parts: Vec<(f64, f64)> = radii
        .iter()
        .map(|s| ball_average_with_error(&g, x, *s, rule))
        .collect::<Result<_>>()?;
    let (averages, standard_errors): (Vec<f64>, Vec<f64>) = parts.into_iter().unzip();
    let center_value = v.eval(x);
    let supremum = averages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = averages.iter().fold(center_value.abs(), |m, a| m.max(a.abs()));
    let mut excess = f64::NEG_INFINITY;
    for i in 0..averages.len() {
        for j in i + 1..averages.len() {
            // j has the smaller radius, so its average should not be lower.
            let drop = averages[i] - averages[j];
            excess = excess.max(drop - pair_tolerance(standard_errors[i], standard_errors[j], scale));
        }
    }
    if averages.len() < 2 {
        excess = 0.0;
    }
    let worst_se = standard_errors.iter().copied().fold(0.0, f64::max);
    let n = v.dimension();
    let records = vec![
        CheckRecord::le(
            "shrinking-average-monotone",
            ANCHOR_LOWER_SEMICONTINUITY,
            n,
            excess,
            0.0,
            0.0,
        )
        .param("K", k)
        .param("radii", radii.len() as f64),
        CheckRecord::le(
            "shrinking-average-below-center",
            ANCHOR_BALL_CENTER,
            n,
            supremum,
            center_value,
            pair_tolerance(worst_se, 0.0, scale),
        )
        .param("K", k)
        .param("gap", center_value - supremum),
    ];
    Ok(SemicontinuityProbe {
        radii: radii.to_vec(),
        averages,
        standard_errors,
        supremum,
        center_value,
        records,
    })
}

/// Geometric radii π/4 · 2^{−k}, k = 0..count.
pub fn shrinking_radii(count: usize) -> Vec<f64> {
    (0..count).map(|k| PI / 4.0 * 0.5f64.powi(k as i32)).collect()
}
