//! Truncations ū^K = min(u, K) of supersolutions Δu ≤ Cu, essential
//! infima, and the lower bounds that follow along a converging sequence.

use serde::{Deserialize, Serialize};

use crate::conformal::{uniform_integrability_audit, CapProbe, ConformalFactor, HypothesisBounds, UiAudit};
use crate::error::{invalid, Error, Result};
use crate::field::calculus::{
    check_step, gradient_norm_sq, gradient_pairing, laplacian_at, map_points, quadrature, quadrature_multi, PolarRule,
};
use crate::field::ScalarField;
use crate::mean::{constants, MeanTarget};
use crate::quad1d::{sin_power_integral, weighted_sin_power_integral};
use crate::report::CheckRecord;
use crate::sphere::{ball_volume, sphere_volume_constant, RadialGrid, SamplingKind, SphereSampling};
use crate::tolerances;

pub const ANCHOR_LOG_GRADIENT: &str = "int |grad ln u|^2 <= C omega_n when Lap u <= C u";
pub const ANCHOR_TRUNCATION_W12: &str = "||min(u,K)||_{W^{1,2}} <= K sqrt((1+C) omega_n)";
pub const ANCHOR_TRUNCATION_WEAK: &str = "-int <grad phi, grad min(u,K)> <= C int phi min(u,K), phi >= 0";
pub const ANCHOR_POWER_L1: &str =
    "||u_j - u_inf||_1 >= e^k ||u_j^{2/(n-2)} - u_inf^{2/(n-2)}||_1, k = min((n-3)/2, (n-4)/(n-2)) branch";
pub const ANCHOR_CONSTRUCTIVE: &str =
    "v_i(x) >= e - ||v_i - v_inf||_1/Vol(B_r) - c V^a int_0^r s sin^{n-1} / int_0^r sin^{n-1}";
pub const ANCHOR_UNIFORM_FLOOR: &str = "v_i >= e/4 for all i >= i0";
pub const ANCHOR_DICHOTOMY: &str = "ess inf u_inf > 0 or u_inf = 0 a.e.";
pub const ANCHOR_VOLUME_LOWER: &str = "Vol_g(S^n) >= 1/V";
pub const ANCHOR_F_MEAN: &str = "avg f <= (1/n) ln(V/omega_n)";
pub const ANCHOR_F_FLOOR: &str = "f >= ln(e_inf/4)/(n-2)";
pub const ANCHOR_POINCARE: &str = "int |f - avg f|^2 <= (1/n) int |grad f|^2";
pub const ANCHOR_F_MOMENT: &str = "int f^2 <= 2 omega_n (1/(n-2) + max(avg f bounds)^2)";

/// Largest Δu − Cu over the points, each judged up to `FD_TERM_REL` times
/// the size of its terms; returns the index of the first violation.
fn first_supersolution_violation(u: &ScalarField, c: f64, sampling: &SphereSampling, h: f64) -> Option<(usize, f64)> {
    let rel = tolerances::FD_TERM_REL;
    let rows = map_points(sampling, |p| {
        let lu = laplacian_at(u, p, h);
        let cu = c * u.eval(p);
        (lu - cu, rel * (lu.abs() + cu.abs()) + 1e-12)
    });
    rows.iter()
        .enumerate()
        .find(|(_, (d, tol))| d > tol)
        .map(|(i, (d, _))| (i, *d))
}

fn require_supersolution(u: &ScalarField, c: f64, sampling: &SphereSampling, h: f64) -> Result<()> {
    if let Some((i, d)) = first_supersolution_violation(u, c, sampling, h) {
        return Err(Error::Hypothesis(format!(
            "Lap u - C u = {d:.3e} > 0 at sample {i} (C = {c})"
        )));
    }
    Ok(())
}

fn require_positive(u: &ScalarField, sampling: &SphereSampling) -> Result<()> {
    let values = map_points(sampling, |p| u.eval(p));
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Hypothesis(format!("u = {v} is not positive at sample {i}")));
    }
    Ok(())
}

/// ‖∇ ln u‖_{L²} ≤ √(C ω_n) for positive u with Δu ≤ Cu (checked on the
/// sampling points first).
pub fn log_gradient_bound_check(u: &ScalarField, c: f64, sampling: &SphereSampling, h: f64) -> Result<CheckRecord> {
    check_step(h)?;
    if !(c > 0.0) {
        return invalid("C must be positive");
    }
    require_positive(u, sampling)?;
    require_supersolution(u, c, sampling, h)?;
    let n = u.dimension();
    let integral = quadrature(sampling, |p| gradient_norm_sq(u, p, h) / u.eval(p).powi(2));
    Ok(CheckRecord::le(
        "log-gradient-bound",
        ANCHOR_LOG_GRADIENT,
        n,
        integral.sqrt(),
        (c * sphere_volume_constant(n)).sqrt(),
        0.0,
    )
    .param("C", c)
    .param("h", h)
    .sampled(sampling))
}

/// Factor of the band half-width: a point is in the kink band when
/// |u − K| < BAND_STEPS · h · |∇u|, i.e. within about BAND_STEPS finite
/// difference steps of the level set.
pub const BAND_STEPS: f64 = 5.0;

/// ū^K = min(u, K) for a positive u and a level K > 0.
#[derive(Clone, Debug)]
pub struct TruncatedFactor {
    source: ScalarField,
    level: f64,
    field: ScalarField,
}

/// Where a point sits relative to the kink of a truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
    Band,
}

impl TruncatedFactor {
    pub fn source(&self) -> &ScalarField {
        &self.source
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.field.eval(p)
    }

    /// Classifies p with band half-width BAND_STEPS·h·|∇u(p)|.
    pub fn side(&self, p: &[f64], h: f64) -> Side {
        let u = self.source.eval(p);
        let delta = BAND_STEPS * h * gradient_norm_sq(&self.source, p, h).sqrt();
        if u < self.level - delta {
            Side::Below
        } else if u > self.level + delta {
            Side::Above
        } else {
            Side::Band
        }
    }

    /// Truncates again at another level: min(min(u, K), K′) = min(u, min(K, K′)).
    pub fn retruncate(&self, level: f64) -> Result<Self> {
        truncate(&self.source, self.level.min(level))
    }
}

pub fn truncate(u: &ScalarField, level: f64) -> Result<TruncatedFactor> {
    if !(level > 0.0) {
        return Err(Error::OutOfRange {
            name: "K",
            value: level,
            range: "(0, inf)".into(),
        });
    }
    let field = u
        .min(&ScalarField::constant(u.dimension(), level))?
        .with_label(format!("min({}, {level})", u.label()));
    Ok(TruncatedFactor {
        source: u.clone(),
        level,
        field,
    })
}

/// Outcome of the regular-value scan.
#[derive(Clone, Debug, Serialize)]
pub struct RegularValue {
    pub level: f64,
    pub target: f64,
    /// Candidates tried before acceptance, including the accepted one.
    pub attempts: usize,
    /// Smallest |∇u| over band samples of all fields (None: empty bands).
    pub min_gradient: Option<f64>,
    pub floor: f64,
}

/// Relative step of the level scan.
pub const LEVEL_STEP: f64 = 1e-3;

/// Finds K near `target` that every field crosses transversally: at all
/// samples with |u − K| < LEVEL_STEP·max(|K|, 1)/2 the gradient norm exceeds
/// 1e−2·max(|K|, 1). Candidates K_target(1 + kε) for k = 0, 1, −1, 2, …
/// (additive steps when the target is 0); non-positive levels are skipped.
/// Fails when nothing within ±10% qualifies.
pub fn regular_value_select(
    us: &[ScalarField],
    target: f64,
    sampling: &SphereSampling,
    h: f64,
) -> Result<RegularValue> {
    check_step(h)?;
    if us.is_empty() {
        return Err(Error::Empty("field list"));
    }
    let rows: Vec<Vec<(f64, f64)>> = us
        .iter()
        .map(|u| map_points(sampling, |p| (u.eval(p), gradient_norm_sq(u, p, h).sqrt())))
        .collect();
    let scale = target.abs().max(1.0);
    let window = 0.1 * scale;
    let max_k = (window / (LEVEL_STEP * scale)).round() as i64;
    let mut attempts = 0;
    for step in 0..=2 * max_k {
        let k = if step % 2 == 1 { (step + 1) / 2 } else { -(step / 2) };
        let level = if target == 0.0 {
            LEVEL_STEP * k as f64
        } else {
            target * (1.0 + LEVEL_STEP * k as f64)
        };
        if level <= 0.0 {
            continue;
        }
        attempts += 1;
        let band = 0.5 * LEVEL_STEP * level.abs().max(1.0);
        let floor = 1e-2 * level.abs().max(1.0);
        let min_gradient = rows
            .iter()
            .flatten()
            .filter(|(v, _)| (v - level).abs() < band)
            .map(|(_, g)| *g)
            .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
        if min_gradient.is_none_or(|g| g > floor) {
            return Ok(RegularValue {
                level,
                target,
                attempts,
                min_gradient,
                floor,
            });
        }
    }
    Err(Error::SelectionFailure { target, window: 0.1 })
}

/// Residual of the weak inequality for a truncation.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationResidual {
    /// C∫φū^K + ∫⟨∇φ, ∇ū^K⟩ with the kink band left out of the gradient term.
    pub residual: f64,
    /// Round measure of the band samples.
    pub excluded_measure: f64,
    pub record: CheckRecord,
}

/// Tests −∫⟨∇φ,∇ū^K⟩ ≤ C∫φū^K for φ ≥ 0. ∇ū^K is ∇u below the band, 0
/// above it.
pub fn truncation_weak_inequality_check(
    t: &TruncatedFactor,
    phi: &ScalarField,
    c: f64,
    sampling: &SphereSampling,
    h: f64,
) -> Result<TruncationResidual> {
    check_step(h)?;
    t.source.ensure_same_dimension(phi)?;
    let values = map_points(sampling, |p| phi.eval(p));
    if let Some(v) = values.iter().find(|v| **v < 0.0) {
        return invalid(format!("test function takes the negative value {v}"));
    }
    let [zero_order, pairing, excluded] = quadrature_multi::<3>(sampling, |p| {
        let z = c * phi.eval(p) * t.eval(p);
        match t.side(p, h) {
            Side::Below => [z, gradient_pairing(phi, &t.source, p, h), 0.0],
            Side::Above => [z, 0.0, 0.0],
            Side::Band => [z, 0.0, 1.0],
        }
    });
    let residual = zero_order + pairing;
    let record = CheckRecord::ge(
        "truncation-weak-inequality",
        ANCHOR_TRUNCATION_WEAK,
        t.source.dimension(),
        residual,
        0.0,
        tolerances::WEAK_RESIDUAL,
    )
    .param("K", t.level)
    .param("C", c)
    .param("excluded_measure", excluded)
    .note(format!("test function {}", phi.label()))
    .sampled(sampling);
    Ok(TruncationResidual {
        residual,
        excluded_measure: excluded,
        record,
    })
}

/// ‖ū^K‖_{W^{1,2}} ≤ K√((1+C)ω_n), with the hypothesis Δu ≤ Cu checked on
/// the sampling points and the kink band excluded from ∫|∇ū^K|².
pub fn truncation_w12_check(t: &TruncatedFactor, c: f64, sampling: &SphereSampling, h: f64) -> Result<CheckRecord> {
    check_step(h)?;
    require_positive(&t.source, sampling)?;
    require_supersolution(&t.source, c, sampling, h)?;
    let [l2, dirichlet, excluded] = quadrature_multi::<3>(sampling, |p| {
        let v = t.eval(p);
        match t.side(p, h) {
            Side::Below => [v * v, gradient_norm_sq(&t.source, p, h), 0.0],
            Side::Above => [v * v, 0.0, 0.0],
            Side::Band => [v * v, 0.0, 1.0],
        }
    });
    let n = t.source.dimension();
    Ok(CheckRecord::le(
        "truncation-w12-bound",
        ANCHOR_TRUNCATION_W12,
        n,
        (l2 + dirichlet).sqrt(),
        t.level * ((1.0 + c) * sphere_volume_constant(n)).sqrt(),
        0.0,
    )
    .param("K", t.level)
    .param("C", c)
    .param("excluded_measure", excluded)
    .sampled(sampling))
}

/// Low weighted quantile of a field standing in for its essential infimum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfimumEstimate {
    pub quantile: f64,
    pub estimate: f64,
    /// Smallest sampled value; estimate − minimum is the sampling allowance.
    pub minimum: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Estimates on {x₁ ≥ 0} and {x₁ < 0}.
    pub hemispheres: [f64; 2],
}

fn weighted_quantile(mut rows: Vec<(f64, f64)>, q: f64) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = rows.iter().map(|r| r.1).sum();
    let mut acc = 0.0;
    for (v, w) in &rows {
        acc += w;
        if acc >= q * total {
            return *v;
        }
    }
    rows.last().map(|r| r.0).unwrap_or(f64::NAN)
}

/// The weighted q-quantile of the sampled values, q ∈ (0, 0.01].
pub fn essential_infimum(field: &ScalarField, sampling: &SphereSampling, q: f64) -> Result<InfimumEstimate> {
    if !(q > 0.0 && q <= 0.01) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            range: "(0, 0.01]".into(),
        });
    }
    if field.dimension() != sampling.dimension() {
        return Err(Error::DimensionMismatch {
            expected: sampling.dimension(),
            got: field.dimension(),
        });
    }
    if sampling.is_empty() {
        return Err(Error::Empty("sampling"));
    }
    let values = map_points(sampling, |p| (field.eval(p), p[0] >= 0.0));
    let rows: Vec<(f64, f64)> = values
        .iter()
        .zip(sampling.weights())
        .map(|((v, _), w)| (*v, *w))
        .collect();
    let split = |upper: bool| {
        weighted_quantile(
            values
                .iter()
                .zip(sampling.weights())
                .filter(|((_, u), _)| *u == upper)
                .map(|((v, _), w)| (*v, *w))
                .collect(),
            q,
        )
    };
    let minimum = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let seed = match sampling.kind() {
        SamplingKind::MonteCarlo { seed, .. } => Some(*seed),
        _ => None,
    };
    Ok(InfimumEstimate {
        quantile: q,
        estimate: weighted_quantile(rows, q),
        minimum,
        samples: sampling.len(),
        seed,
        hemispheres: [split(true), split(false)],
    })
}

/// Exponent k with ‖u_j − u_∞‖₁ ≥ e^k ‖u_j^{2/(n−2)} − u_∞^{2/(n−2)}‖₁ for
/// u_∞ ≥ e: (n−3)/2 when e ≤ 1, (n−4)/(n−2) when e > 1.
pub fn power_transfer_exponent(n: usize, e_inf: f64) -> f64 {
    let nf = n as f64;
    if e_inf <= 1.0 {
        (nf - 3.0) / 2.0
    } else {
        (nf - 4.0) / (nf - 2.0)
    }
}

/// Compares the L¹ distance of u_j, u_∞ with that of their 2/(n−2) powers
/// (n ≥ 5). e_inf must not exceed the sampled minimum of u_∞.
pub fn power_l1_transfer_check(
    u_j: &ScalarField,
    u_inf: &ScalarField,
    e_inf: f64,
    sampling: &SphereSampling,
) -> Result<CheckRecord> {
    u_j.ensure_same_dimension(u_inf)?;
    let n = u_j.dimension();
    if n < 5 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the power transfer is used for n >= 5".into(),
        });
    }
    if !(e_inf > 0.0) {
        return invalid("e_inf must be positive");
    }
    let min_inf = map_points(sampling, |p| u_inf.eval(p))
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if e_inf > min_inf * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!(
            "e_inf = {e_inf} exceeds the sampled minimum {min_inf} of the limit"
        )));
    }
    let a = 2.0 / (n as f64 - 2.0);
    let [direct, powered] = quadrature_multi::<2>(sampling, |p| {
        let (x, y) = (u_j.eval(p), u_inf.eval(p));
        [(x - y).abs(), (x.powf(a) - y.powf(a)).abs()]
    });
    let k = power_transfer_exponent(n, e_inf);
    let factor = e_inf.powf(k);
    let tol = tolerances::QUADRATURE_REL * direct.abs().max(factor * powered).max(f64::MIN_POSITIVE);
    Ok(
        CheckRecord::ge("power-l1-transfer", ANCHOR_POWER_L1, n, direct, factor * powered, tol)
            .param("e_inf", e_inf)
            .param("exponent", k)
            .param("power_distance", powered)
            .sampled(sampling),
    )
}

/// ∫₀^r s sinⁿ⁻¹ s ds / ∫₀^r sinⁿ⁻¹ s ds: the mean geodesic radius of B_r.
pub fn drift_ratio(n: usize, r: f64) -> f64 {
    let k = n as u32 - 1;
    weighted_sin_power_integral(k, r) / sin_power_integral(k, r)
}

/// The three terms of the constructive lower bound at one radius, in the
/// units of the averaged target (u for n ≤ 4, u^{2/(n−2)} above).
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundTerms {
    pub r1: f64,
    pub floor: f64,
    /// ‖v_i − v_∞‖₁ / Vol(B_r1).
    pub l1_term: f64,
    /// c V^a ∫s sinⁿ⁻¹ / ∫sinⁿ⁻¹ on [0, r1].
    pub drift_term: f64,
    pub bound: f64,
}

/// Slope constant times V^a for the target of dimension n: c_low V^{(n−2)/(2n)}
/// for u, c_high V^{1/n} for u^{2/(n−2)}.
pub fn lower_bound_drift(n: usize, v: f64) -> Result<f64> {
    let c = constants(n)?;
    let nf = n as f64;
    Ok(match MeanTarget::for_dimension(n) {
        MeanTarget::U => c.c_low * v.powf((nf - 2.0) / (2.0 * nf)),
        _ => c.c_high * v.powf(1.0 / nf),
    })
}

pub fn lower_bound_terms(n: usize, floor: f64, l1_distance: f64, v: f64, r1: f64) -> Result<LowerBoundTerms> {
    if !(r1 > 0.0 && r1 < std::f64::consts::FRAC_PI_2) {
        return Err(Error::OutOfRange {
            name: "r1",
            value: r1,
            range: "(0, pi/2)".into(),
        });
    }
    let l1_term = l1_distance / ball_volume(n, r1)?;
    let drift_term = lower_bound_drift(n, v)? * drift_ratio(n, r1);
    Ok(LowerBoundTerms {
        r1,
        floor,
        l1_term,
        drift_term,
        bound: floor - l1_term - drift_term,
    })
}

/// Constructive lower bound for one element of a sequence.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundEntry {
    /// One-based position in the sequence.
    pub index: usize,
    pub l1_distance: f64,
    /// Terms at the r1 maximizing the bound over the grid.
    pub terms: LowerBoundTerms,
    /// Smallest sampled value of the target v_i.
    pub sampled_min: f64,
}

/// Constructive bounds along a sequence and the first index from which the
/// bound stays above a quarter of the floor.
#[derive(Clone, Debug, Serialize)]
pub struct ConstructiveLowerBound {
    pub target: MeanTarget,
    /// e_∞ (ess inf of u_∞) and its value in target units.
    pub e_inf: f64,
    pub floor: f64,
    pub volume_bound: f64,
    pub entries: Vec<LowerBoundEntry>,
    /// First index i₀ with bound ≥ floor/4 for every i ≥ i₀.
    pub i0: Option<usize>,
    pub records: Vec<CheckRecord>,
}

/// Runs the constructive lower bound on each u_i. The L¹ distance, floor
/// and sampled minima are taken for v = u (n ≤ 4) or v = u^{2/(n−2)}
/// (n ≥ 5); r1 is chosen on `radii` to maximize the bound.
pub fn constructive_lower_bound(
    us: &[ScalarField],
    u_inf: &ScalarField,
    e_inf: f64,
    bounds: &HypothesisBounds,
    radii: &RadialGrid,
    sampling: &SphereSampling,
) -> Result<ConstructiveLowerBound> {
    if us.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    if !(e_inf > 0.0) {
        return invalid("e_inf must be positive");
    }
    let n = u_inf.dimension();
    let target = MeanTarget::for_dimension(n);
    let power = match target {
        MeanTarget::U => 1.0,
        _ => 2.0 / (n as f64 - 2.0),
    };
    let floor = e_inf.powf(power);
    let mut entries = Vec::with_capacity(us.len());
    for (i, u) in us.iter().enumerate() {
        u.ensure_same_dimension(u_inf)?;
        let [l1] = quadrature_multi::<1>(
            sampling,
            |p| [(u.eval(p).powf(power) - u_inf.eval(p).powf(power)).abs()],
        );
        let mut best: Option<LowerBoundTerms> = None;
        for r in radii.radii() {
            let t = lower_bound_terms(n, floor, l1, bounds.volume, *r)?;
            if best.as_ref().is_none_or(|b| t.bound > b.bound) {
                best = Some(t);
            }
        }
        let sampled_min = map_points(sampling, |p| u.eval(p).powf(power))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        entries.push(LowerBoundEntry {
            index: i + 1,
            l1_distance: l1,
            terms: best.expect("radial grids are non-empty"),
            sampled_min,
        });
    }
    let quarter = floor / 4.0;
    let i0 = (0..entries.len())
        .find(|&s| entries[s..].iter().all(|e| e.terms.bound >= quarter))
        .map(|s| entries[s].index);
    let mut records = Vec::new();
    for e in &entries {
        let tol = tolerances::QUADRATURE_REL * floor.abs().max(1.0);
        records.push(
            CheckRecord::ge(
                "constructive-lower-bound",
                ANCHOR_CONSTRUCTIVE,
                n,
                e.sampled_min,
                e.terms.bound,
                tol,
            )
            .param("index", e.index as f64)
            .param("r1", e.terms.r1)
            .param("floor", e.terms.floor)
            .param("l1_term", e.terms.l1_term)
            .param("drift_term", e.terms.drift_term)
            .param("V", bounds.volume),
        );
    }
    match i0 {
        Some(start) => {
            let tail_min = entries[start - 1..]
                .iter()
                .map(|e| e.sampled_min)
                .fold(f64::INFINITY, f64::min);
            records.push(
                CheckRecord::ge("uniform-floor", ANCHOR_UNIFORM_FLOOR, n, tail_min, quarter, 0.0)
                    .param("i0", start as f64)
                    .param("e_inf", e_inf),
            );
        }
        // The floor is only promised eventually; a short prefix is inconclusive.
        None => records.push(
            CheckRecord::flag("uniform-floor", ANCHOR_UNIFORM_FLOOR, n, true)
                .param("e_inf", e_inf)
                .note("inconclusive: the bound does not reach floor/4 on this prefix"),
        ),
    }
    Ok(ConstructiveLowerBound {
        target,
        e_inf,
        floor,
        volume_bound: bounds.volume,
        entries,
        i0,
        records,
    })
}

/// Outcome of the dichotomy for a candidate limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    PositiveInfimum,
    CollapseToZero,
    /// Neither branch is visible at this resolution.
    Indeterminate,
}

/// Per-element evidence for the dichotomy.
#[derive(Clone, Debug, Serialize)]
pub struct DichotomyStep {
    pub index: usize,
    pub essential_infimum: f64,
    pub volume: f64,
    pub l2_distance: f64,
    /// Vol_g < 1/V.
    pub volume_violation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<UiAudit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DichotomyReport {
    pub classification: Dichotomy,
    pub limit_infimum: InfimumEstimate,
    pub limit_l2_norm: f64,
    pub steps: Vec<DichotomyStep>,
    pub records: Vec<CheckRecord>,
}

/// Threshold below which the limit counts as zero, relative to max(1, sup u_j).
pub const COLLAPSE_REL: f64 = 1e-8;

/// Classifies a candidate limit of positive u_j: positive essential
/// infimum, or zero almost everywhere. Evidence: infimum, volume and L²
/// distance trajectories, the volume lower bound 1/V, and an
/// uniform-integrability audit per element when `probes` is non-empty.
pub fn dichotomy_experiment(
    us: &[ScalarField],
    u_inf: &ScalarField,
    bounds: &HypothesisBounds,
    sampling: &SphereSampling,
    probes: &[CapProbe],
    rule: &PolarRule,
) -> Result<DichotomyReport> {
    if us.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    let n = u_inf.dimension();
    let q = tolerances::ESSINF_QUANTILE;
    let exponent = 2.0 * n as f64 / (n as f64 - 2.0);
    let mut steps = Vec::with_capacity(us.len());
    let mut scale = 1.0f64;
    for (i, u) in us.iter().enumerate() {
        u.ensure_same_dimension(u_inf)?;
        let inf = essential_infimum(u, sampling, q)?;
        let [volume, dist2] = quadrature_multi::<2>(sampling, |p| {
            let v = u.eval(p);
            [v.abs().powf(exponent), (v - u_inf.eval(p)).powi(2)]
        });
        scale = scale.max(map_points(sampling, |p| u.eval(p)).into_iter().fold(0.0, f64::max));
        let audit = if probes.is_empty() {
            None
        } else {
            let cf = ConformalFactor::from_u(u.clone())?;
            Some(uniform_integrability_audit(&cf, bounds, probes, rule)?)
        };
        steps.push(DichotomyStep {
            index: i + 1,
            essential_infimum: inf.estimate,
            volume,
            l2_distance: dist2.sqrt(),
            volume_violation: volume < 1.0 / bounds.volume,
            audit,
        });
    }
    let limit_infimum = essential_infimum(u_inf, sampling, q)?;
    let limit_l2_norm = quadrature(sampling, |p| u_inf.eval(p).powi(2)).sqrt();
    let zero = COLLAPSE_REL * scale;
    let classification = if limit_infimum.estimate > zero {
        Dichotomy::PositiveInfimum
    } else if limit_l2_norm <= zero * sampling.total_weight().sqrt() {
        Dichotomy::CollapseToZero
    } else {
        Dichotomy::Indeterminate
    };
    let mut records = vec![CheckRecord::flag(
        "dichotomy",
        ANCHOR_DICHOTOMY,
        n,
        classification != Dichotomy::Indeterminate,
    )
    .param("limit_infimum", limit_infimum.estimate)
    .param("limit_l2_norm", limit_l2_norm)
    .note(format!(
        "classification {}",
        match classification {
            Dichotomy::PositiveInfimum => "positive-infimum",
            Dichotomy::CollapseToZero => "collapse-to-zero",
            Dichotomy::Indeterminate => "indeterminate",
        }
    ))
    .sampled(sampling)];
    for s in &steps {
        records.push(
            CheckRecord::ge(
                "volume-lower-bound",
                ANCHOR_VOLUME_LOWER,
                n,
                s.volume,
                1.0 / bounds.volume,
                0.0,
            )
            .param("index", s.index as f64)
            .param("essential_infimum", s.essential_infimum)
            .param("l2_distance", s.l2_distance),
        );
        if let Some(a) = &s.audit {
            records.push(a.record(n).param("index", s.index as f64));
        }
    }
    Ok(DichotomyReport {
        classification,
        limit_infimum,
        limit_l2_norm,
        steps,
        records,
    })
}

/// Mean, floor, Poincaré and second-moment checks for one f_i.
#[derive(Clone, Debug, Serialize)]
pub struct FMomentEntry {
    pub index: usize,
    pub mean: f64,
    pub minimum: f64,
    pub oscillation: f64,
    pub dirichlet: f64,
    pub second_moment: f64,
    pub bound: f64,
}

/// Bounds ∫f_i² for the given (already positivity-certified) elements
/// through mean bounds, the floor ln(e_∞/4)/(n−2), and the Poincaré
/// inequality with constant 1/n. `first_index` is the one-based position
/// of the first element.
pub fn f_moment_bound_check(
    fs: &[ConformalFactor],
    first_index: usize,
    e_inf: f64,
    v: f64,
    sampling: &SphereSampling,
    h: f64,
) -> Result<(Vec<FMomentEntry>, Vec<CheckRecord>)> {
    check_step(h)?;
    if fs.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    if !(e_inf > 0.0 && v > 0.0) {
        return invalid("e_inf and V must be positive");
    }
    let n = fs[0].dimension();
    let nf = n as f64;
    let omega = sphere_volume_constant(n);
    let upper = (v / omega).ln() / nf;
    let floor = (e_inf / 4.0).ln() / (nf - 2.0);
    let m = upper.abs().max(floor.abs());
    let bound = 2.0 * omega * (1.0 / (nf - 2.0) + m * m);
    let total = sampling.total_weight();
    let mut entries = Vec::new();
    let mut records = Vec::new();
    for (k, cf) in fs.iter().enumerate() {
        let f = cf.f();
        let [integral, square, dirichlet] = quadrature_multi::<3>(sampling, |p| {
            let x = f.eval(p);
            [x, x * x, gradient_norm_sq(f, p, h)]
        });
        let mean = integral / total;
        let oscillation = quadrature(sampling, |p| (f.eval(p) - mean).powi(2));
        let minimum = map_points(sampling, |p| f.eval(p))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let index = first_index + k;
        let tol = tolerances::QUADRATURE_REL * mean.abs().max(1.0);
        records.push(CheckRecord::le("f-mean-upper", ANCHOR_F_MEAN, n, mean, upper, tol).param("index", index as f64));
        records.push(CheckRecord::ge("f-floor", ANCHOR_F_FLOOR, n, minimum, floor, 0.0).param("index", index as f64));
        records.push(
            CheckRecord::le("poincare", ANCHOR_POINCARE, n, oscillation, dirichlet / nf, tol)
                .param("index", index as f64),
        );
        records.push(
            CheckRecord::le("f-second-moment", ANCHOR_F_MOMENT, n, square, bound, 0.0)
                .param("index", index as f64)
                .param("e_inf", e_inf)
                .param("V", v),
        );
        entries.push(FMomentEntry {
            index,
            mean,
            minimum,
            oscillation,
            dirichlet,
            second_moment: square,
            bound,
        });
    }
    Ok((entries, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{basis, product_rule_sampling, uniform_sphere_sampling};
    use std::f64::consts::PI;

    fn affine() -> ScalarField {
        ScalarField::coordinate(3, 0).scale(0.5).offset(1.0)
    }

    #[test]
    fn truncation_levels() {
        let t = truncate(&affine(), 1.2).unwrap();
        let mut p = basis(4, 0);
        assert_eq!(t.eval(&p), 1.2);
        p = basis(4, 1);
        assert_eq!(t.eval(&p), 1.0);
        assert!(truncate(&affine(), 0.0).is_err());
        let again = t.retruncate(1.2).unwrap();
        assert_eq!(again.level(), 1.2);
    }

    #[test]
    fn regular_values() {
        let s = product_rule_sampling(3, 16).unwrap();
        let consts = [ScalarField::constant(3, 1.0), ScalarField::constant(3, 2.0)];
        assert_eq!(regular_value_select(&consts, 3.0, &s, 1e-3).unwrap().level, 3.0);
        let x1 = [ScalarField::coordinate(3, 0)];
        assert_eq!(regular_value_select(&x1, 0.5, &s, 1e-3).unwrap().level, 0.5);
        let sq = [ScalarField::coordinate(3, 0).powf(2.0)];
        let k = regular_value_select(&sq, 0.0, &s, 1e-3).unwrap();
        assert!(k.level > 0.0);
    }

    #[test]
    fn weak_inequality_with_constant_test_function() {
        let s = product_rule_sampling(3, 16).unwrap();
        let t = truncate(&ScalarField::constant(3, 5.0), 3.0).unwrap();
        let r = truncation_weak_inequality_check(&t, &ScalarField::constant(3, 1.0), 0.75, &s, 1e-3).unwrap();
        assert!((r.residual - 3.0 * 0.75 * 2.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn infimum_of_affine_field() {
        let s = uniform_sphere_sampling(3, 200_000, 9).unwrap();
        let e = essential_infimum(&affine(), &s, 1e-4).unwrap();
        assert!(e.estimate >= e.minimum);
        assert!((e.estimate - 0.5).abs() < 0.02, "{}", e.estimate);
        assert!(e.hemispheres[0] > 0.99);
        assert!(essential_infimum(&affine(), &s, 0.5).is_err());
    }

    #[test]
    fn power_exponent_branches() {
        assert_eq!(power_transfer_exponent(5, 0.5), 1.0);
        assert!((power_transfer_exponent(5, 16.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn drift_ratio_vanishes_at_origin() {
        let r = 1e-3;
        assert!((drift_ratio(3, r) / r - 0.75).abs() < 1e-5);
        assert!(drift_ratio(3, 0.5) < drift_ratio(3, 0.6));
    }

    #[test]
    fn log_gradient_needs_supersolution() {
        let s = product_rule_sampling(3, 12).unwrap();
        assert!(matches!(
            log_gradient_bound_check(&affine(), 0.75, &s, 1e-3),
            Err(Error::Hypothesis(_))
        ));
        assert!(log_gradient_bound_check(&affine(), 3.0, &s, 1e-3).unwrap().passed());
    }
}
