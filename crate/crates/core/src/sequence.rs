//! Finite prefixes of conformal sequences: convergence trajectories and
//! the good/bad set decomposition driven by the coarea formula.
//!
//! For w = |f_j − f_∞|² (or |u_j − u_∞|²) the band integral
//! ∫ 1_{τ₁<w≤τ₂} |∇w| equals ∫_{τ₁}^{τ₂} H^{n−1}({w = τ}) dτ, and is bounded
//! by C(j) = 2‖f_j − f_∞‖₂ (∫|∇f_j|² + |∇f_∞|²)^{1/2}. Scanning the bracket
//! [√C(j)/2, √C(j)] therefore finds a level with perimeter ≤ 2√C(j); the bad
//! set Z_j = {w > τ_j} then has small round volume by Chebyshev.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{total_scalar_curvature, weak_psc_residual, ConformalFactor, HypothesisBounds, ANCHOR_WEAK_PSC};
use crate::error::{invalid, Error, Result};
use crate::field::calculus::{check_step, gradient_norm_sq, gradient_pairing, map_points, quadrature_multi};
use crate::field::ScalarField;
use crate::report::{CheckRecord, Series, SeriesKind};
use crate::sphere::SphereSampling;
use crate::tolerances;

pub const ANCHOR_CJ: &str = "C(j) = 2 ||f_j - f_inf||_2 (int |grad f_j|^2 + |grad f_inf|^2)^{1/2}";
pub const ANCHOR_COAREA: &str = "int_{t1}^{t2} H^{n-1}({w = t}) dt = int 1_{t1 < w <= t2} |grad w|";
pub const ANCHOR_PERIMETER: &str = "H^{n-1}({w = tau_j}) <= 2 sqrt(C(j)), tau_j in [sqrt(C(j))/2, sqrt(C(j))]";
pub const ANCHOR_CHEBYSHEV: &str = "Vol({w >= tau}) <= (1/tau) int w";
pub const ANCHOR_GOOD_SET: &str = "w <= tau_j on S^n \\ Z_j";
pub const ANCHOR_BAD_SET_UI: &str = "Vol_{g_j}(Z_j) <= Lambda Vol(Z_j)^alpha";
pub const ANCHOR_TOTAL_CURVATURE_GATE: &str = "int Sc_{g_j} dV_{g_j} <= R_0";
pub const ANCHOR_LP_DECAY: &str = "||v_j - v_inf||_p non-increasing in j";
pub const ANCHOR_WEAK_PAIRING: &str = "int <grad(u_j - u_inf), grad phi> -> 0 on a finite test family";
pub const ANCHOR_BAD_SET_VOLUME: &str = "Vol(Z_j) <= C' C(j), Vol(Z_j) non-increasing";

/// Conformal factors f_1, f_2, … with a candidate limit, the hypothesis
/// constants, and the sampling shared by every quadrature.
#[derive(Clone, Debug)]
pub struct FactorSequence {
    factors: Vec<ConformalFactor>,
    limit: ConformalFactor,
    bounds: HypothesisBounds,
    sampling: SphereSampling,
    seed: u64,
}

impl FactorSequence {
    pub fn new(
        factors: Vec<ConformalFactor>,
        limit: ConformalFactor,
        bounds: HypothesisBounds,
        sampling: SphereSampling,
        seed: u64,
    ) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Empty("factor sequence"));
        }
        let n = limit.dimension();
        for f in &factors {
            if f.dimension() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: f.dimension(),
                });
            }
        }
        if sampling.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sampling.dimension(),
            });
        }
        Ok(Self {
            factors,
            limit,
            bounds,
            sampling,
            seed,
        })
    }

    pub fn dimension(&self) -> usize {
        self.limit.dimension()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[ConformalFactor] {
        &self.factors
    }

    /// The j-th factor, one-based.
    pub fn get(&self, j: usize) -> Result<&ConformalFactor> {
        if j == 0 || j > self.factors.len() {
            return Err(Error::OutOfRange {
                name: "j",
                value: j as f64,
                range: format!("1..={}", self.factors.len()),
            });
        }
        Ok(&self.factors[j - 1])
    }

    pub fn limit(&self) -> &ConformalFactor {
        &self.limit
    }

    pub fn bounds(&self) -> &HypothesisBounds {
        &self.bounds
    }

    pub fn with_bounds(mut self, bounds: HypothesisBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn sampling(&self) -> &SphereSampling {
        &self.sampling
    }

    pub fn with_sampling(mut self, sampling: SphereSampling) -> Result<Self> {
        if sampling.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: sampling.dimension(),
            });
        }
        self.sampling = sampling;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Which difference drives the decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// w = |f_j − f_∞|².
    FBased,
    /// w = |u_j − u_∞|², gated on the total scalar curvature bound R₀.
    UBased,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::FBased => "f-based",
            Variant::UBased => "u-based",
        }
    }

    fn pick<'a>(&self, cf: &'a ConformalFactor) -> &'a ScalarField {
        match self {
            Variant::FBased => cf.f(),
            Variant::UBased => cf.u(),
        }
    }
}

/// L^p distances ‖v_j − v_∞‖_p along the sequence for v = f or u.
#[derive(Clone, Debug, Serialize)]
pub struct LpTrajectory {
    pub field: String,
    pub p: f64,
    pub distances: Vec<f64>,
    /// d_{j+1}/d_j.
    pub ratios: Vec<f64>,
    /// p < 2n/(n−2), the range in which convergence is guaranteed.
    pub guaranteed: bool,
}

/// ∫⟨∇(u_j − u_∞), ∇φ⟩ along the sequence for one test function.
#[derive(Clone, Debug, Serialize)]
pub struct PairingTrajectory {
    pub test_function: String,
    pub pairings: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub trajectories: Vec<LpTrajectory>,
    pub pairings: Vec<PairingTrajectory>,
    pub records: Vec<CheckRecord>,
}

impl ConvergenceReport {
    /// Distances against the one-based index, one curve per trajectory.
    pub fn series(&self, name: &str) -> Series {
        let len = self.trajectories.first().map_or(0, |t| t.distances.len());
        let mut s = Series::new(
            name,
            SeriesKind::Convergence,
            "j",
            (1..=len).map(|j| j as f64).collect(),
        )
        .log_scale();
        for t in &self.trajectories {
            s = s.curve(format!("{} L{}", t.field, t.p), t.distances.clone());
        }
        s
    }
}

/// L^p distances of f_j and u_j to the limit for each exponent, and weak
/// pairings of u_j − u_∞ against the test functions. Decay is checked
/// pairwise (d_{j+1} ≤ d_j up to quadrature tolerance); weak pairings are
/// only certified on the given finite family.
pub fn convergence_report(
    seq: &FactorSequence,
    exponents: &[f64],
    tests: &[ScalarField],
    h: f64,
) -> Result<ConvergenceReport> {
    check_step(h)?;
    if let Some(p) = exponents.iter().find(|p| !(**p >= 1.0)) {
        return Err(Error::OutOfRange {
            name: "p",
            value: *p,
            range: "[1, inf)".into(),
        });
    }
    let n = seq.dimension();
    let critical = 2.0 * n as f64 / (n as f64 - 2.0);
    let s = seq.sampling();
    let limit = seq.limit();
    let mut trajectories = Vec::new();
    let mut records = Vec::new();
    for variant in [Variant::FBased, Variant::UBased] {
        let name = if variant == Variant::FBased { "f" } else { "u" };
        let lim = variant.pick(limit);
        for &p in exponents {
            let distances: Vec<f64> = seq
                .factors()
                .par_iter()
                .map(|cf| {
                    let v = variant.pick(cf);
                    let [d] = quadrature_multi::<1>(s, |x| [(v.eval(x) - lim.eval(x)).abs().powf(p)]);
                    d.powf(1.0 / p)
                })
                .collect();
            let ratios: Vec<f64> = distances.windows(2).map(|w| w[1] / w[0]).collect();
            let worst = distances
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            let scale = distances.iter().copied().fold(0.0, f64::max);
            let guaranteed = p < critical;
            let mut rec = CheckRecord::le(
                "lp-distance-decay",
                ANCHOR_LP_DECAY,
                n,
                if distances.len() < 2 { 0.0 } else { worst },
                0.0,
                tolerances::QUADRATURE_REL * scale.max(f64::MIN_POSITIVE),
            )
            .param("p", p)
            .note(format!("field {name}"))
            .sampled(s);
            if !guaranteed {
                rec = rec.note("exponent at or above 2n/(n-2): outside the guaranteed range");
            }
            records.push(rec);
            trajectories.push(LpTrajectory {
                field: name.into(),
                p,
                distances,
                ratios,
                guaranteed,
            });
        }
    }
    let mut pairings = Vec::new();
    for phi in tests {
        phi.ensure_same_dimension(limit.u())?;
        let values: Vec<f64> = seq
            .factors()
            .par_iter()
            .map(|cf| {
                let [a] = quadrature_multi::<1>(s, |x| {
                    [gradient_pairing(cf.u(), phi, x, h) - gradient_pairing(limit.u(), phi, x, h)]
                });
                a
            })
            .collect();
        let first = values.first().map_or(0.0, |v| v.abs());
        let last = values.last().map_or(0.0, |v| v.abs());
        records.push(
            CheckRecord::le(
                "weak-pairing-decay",
                ANCHOR_WEAK_PAIRING,
                n,
                last,
                first,
                tolerances::QUADRATURE_REL * first.max(1e-300),
            )
            .note(format!(
                "finite-family weak-pairing decay; test function {}",
                phi.label()
            )),
        );
        pairings.push(PairingTrajectory {
            test_function: phi.label().to_string(),
            pairings: values,
        });
    }
    Ok(ConvergenceReport {
        trajectories,
        pairings,
        records,
    })
}

/// C(j) = 2‖v_j − v_∞‖₂ (∫|∇v_j|² + |∇v_∞|²)^{1/2}.
pub fn cj_bound(v_j: &ScalarField, v_inf: &ScalarField, sampling: &SphereSampling, h: f64) -> Result<f64> {
    v_j.ensure_same_dimension(v_inf)?;
    check_step(h)?;
    let [d2, g2] = quadrature_multi::<2>(sampling, |p| {
        [
            (v_j.eval(p) - v_inf.eval(p)).powi(2),
            gradient_norm_sq(v_j, p, h) + gradient_norm_sq(v_inf, p, h),
        ]
    });
    Ok(2.0 * d2.sqrt() * g2.sqrt())
}

/// (w, |∇w|) at each sample.
fn level_rows(w: &ScalarField, sampling: &SphereSampling, h: f64) -> Vec<(f64, f64)> {
    map_points(sampling, |p| (w.eval(p), gradient_norm_sq(w, p, h).sqrt()))
}

fn band_from_rows(rows: &[(f64, f64)], weights: &[f64], t1: f64, t2: f64) -> f64 {
    rows.iter()
        .zip(weights)
        .filter(|((v, _), _)| *v > t1 && *v <= t2)
        .map(|((_, g), w)| g * w)
        .sum()
}

/// ∫ 1_{τ₁<w≤τ₂} |∇w| dV.
pub fn level_band_coarea(w: &ScalarField, t1: f64, t2: f64, sampling: &SphereSampling, h: f64) -> Result<f64> {
    check_step(h)?;
    if !(t1 < t2) {
        return invalid(format!("band needs t1 < t2, got ({t1}, {t2})"));
    }
    Ok(band_from_rows(&level_rows(w, sampling, h), sampling.weights(), t1, t2))
}

/// H^{n−1}({w = τ}) ≈ ∫ 1_{τ−δ<w≤τ+δ}|∇w| / (2δ).
pub fn perimeter_estimate(w: &ScalarField, tau: f64, delta: f64, sampling: &SphereSampling, h: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return invalid("delta must be positive");
    }
    Ok(level_band_coarea(w, tau - delta, tau + delta, sampling, h)? / (2.0 * delta))
}

/// Number of bands tiling the τ bracket.
pub const TAU_BANDS: usize = 16;

/// Outcome of the τ scan.
#[derive(Clone, Debug, Serialize)]
pub struct TauSelection {
    pub tau: f64,
    pub perimeter: f64,
    pub candidates: Vec<f64>,
    pub perimeters: Vec<f64>,
    pub half_width: f64,
    pub degenerate: bool,
}

fn select_tau_rows(rows: &[(f64, f64)], weights: &[f64], cj: f64, bands: usize) -> TauSelection {
    if cj == 0.0 {
        return TauSelection {
            tau: 0.0,
            perimeter: 0.0,
            candidates: Vec::new(),
            perimeters: Vec::new(),
            half_width: 0.0,
            degenerate: true,
        };
    }
    let eps = cj.sqrt();
    let width = eps / (2.0 * bands as f64);
    let delta = width / 2.0;
    let candidates: Vec<f64> = (0..bands).map(|k| eps / 2.0 + (k as f64 + 0.5) * width).collect();
    let perimeters: Vec<f64> = candidates
        .iter()
        .map(|t| band_from_rows(rows, weights, t - delta, t + delta) / (2.0 * delta))
        .collect();
    let (k, perimeter) = perimeters
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one band");
    TauSelection {
        tau: candidates[k],
        perimeter,
        candidates,
        perimeters,
        half_width: delta,
        degenerate: false,
    }
}

/// Tiles [√C/2, √C] with TAU_BANDS bands and picks the centre of the band
/// with the smallest perimeter estimate. Since the bands cover the bracket,
/// the minimum is at most the mean, which the coarea bound caps at 2√C.
/// C = 0 is the degenerate case: τ = 0 and an empty bad set.
pub fn select_tau(w: &ScalarField, cj: f64, sampling: &SphereSampling, h: f64) -> Result<TauSelection> {
    check_step(h)?;
    if !(cj >= 0.0) {
        return invalid("C(j) must be nonnegative");
    }
    Ok(select_tau_rows(
        &level_rows(w, sampling, h),
        sampling.weights(),
        cj,
        TAU_BANDS,
    ))
}

/// (Vol{w ≥ τ}, (1/τ)∫w).
pub fn chebyshev_volume_bound(w: &ScalarField, tau: f64, sampling: &SphereSampling) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return invalid("tau must be positive");
    }
    let [measured, integral] = quadrature_multi::<2>(sampling, |p| {
        let v = w.eval(p);
        [if v >= tau { 1.0 } else { 0.0 }, v]
    });
    Ok((measured, integral / tau))
}

/// Good/bad set decomposition at one index.
#[derive(Clone, Debug, Serialize)]
pub struct SingularSetReport {
    pub j: usize,
    pub variant: Variant,
    pub cj: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub perimeter: f64,
    pub selection: TauSelection,
    /// Round volume of Z_j = {w > τ_j}.
    pub bad_volume: f64,
    /// Vol_{g_j}(Z_j).
    pub bad_volume_g: f64,
    /// Vol_{g_j}(Sⁿ ∖ Z_j).
    pub good_volume_g: f64,
    /// Vol_{g_j}(Sⁿ).
    pub total_volume_g: f64,
    /// ∫w, the numerator of the Chebyshev bound.
    pub w_integral: f64,
    /// max of w over good-set samples.
    pub good_sup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_curvature: Option<f64>,
    #[serde(skip)]
    pub bad_mask: Vec<bool>,
    pub records: Vec<CheckRecord>,
}

impl SingularSetReport {
    /// The τ scan with the bracket ends and the chosen level marked.
    pub fn tau_series(&self, name: &str) -> Series {
        let s = &self.selection;
        Series::new(name, SeriesKind::TauScan, "tau", s.candidates.clone())
            .curve("perimeter", s.perimeters.clone())
            .curve("2 sqrt(C(j))", vec![2.0 * self.epsilon; s.candidates.len()])
            .marker("sqrt(C)/2", self.epsilon / 2.0)
            .marker("sqrt(C)", self.epsilon)
            .marker("tau_j", self.tau)
    }

    /// CSV of the bad-set sample points.
    pub fn write_mask_csv<W: Write>(&self, sampling: &SphereSampling, out: W) -> Result<()> {
        if self.bad_mask.len() != sampling.len() {
            return invalid("mask and sampling sizes differ");
        }
        sampling.write_csv_filtered(out, |i| self.bad_mask[i])
    }
}

/// Decomposes Sⁿ for the j-th element (one-based). The u-based variant
/// needs R₀ in the sequence bounds and checks the total scalar curvature
/// of g_j against it before anything else.
pub fn singular_set_decompose(seq: &FactorSequence, j: usize, variant: Variant, h: f64) -> Result<SingularSetReport> {
    check_step(h)?;
    let cf = seq.get(j)?;
    let n = seq.dimension();
    let s = seq.sampling();
    let bounds = seq.bounds();
    let mut records = Vec::new();
    let mut total_curvature = None;
    if variant == Variant::UBased {
        let r0 = bounds.total_curvature.ok_or(Error::MissingTotalCurvatureBound)?;
        let tsc = total_scalar_curvature(cf, s, h)?;
        let value = tsc.lhs.max(tsc.rhs);
        let tol = tolerances::TOTAL_SCALAR_REL * r0;
        if value > r0 + tol {
            return Err(Error::Hypothesis(format!(
                "total scalar curvature {value} of element {j} exceeds R0 = {r0}"
            )));
        }
        total_curvature = Some(value);
        records.push(
            CheckRecord::le("total-curvature-gate", ANCHOR_TOTAL_CURVATURE_GATE, n, value, r0, tol)
                .param("j", j as f64)
                .param("lhs", tsc.lhs)
                .param("rhs", tsc.rhs),
        );
    }
    let v_j = variant.pick(cf);
    let v_inf = variant.pick(seq.limit());
    let cj = cj_bound(v_j, v_inf, s, h)?;
    let w = v_j.squared_difference(v_inf)?;
    let rows = level_rows(&w, s, h);
    let weights = s.weights();
    let selection = select_tau_rows(&rows, weights, cj, TAU_BANDS);
    let tau = selection.tau;
    let nf = n as f64;
    let gj_density = map_points(s, |p| (nf * cf.f().eval(p)).exp());
    let bad_mask: Vec<bool> = rows.iter().map(|(v, _)| *v > tau).collect();
    let mut bad_volume = 0.0;
    let mut bad_volume_g = 0.0;
    let mut good_volume_g = 0.0;
    let mut w_integral = 0.0;
    let mut good_sup = 0.0f64;
    for (i, ((v, _), wt)) in rows.iter().zip(weights).enumerate() {
        w_integral += v * wt;
        if bad_mask[i] {
            bad_volume += wt;
            bad_volume_g += gj_density[i] * wt;
        } else {
            good_volume_g += gj_density[i] * wt;
            good_sup = good_sup.max(*v);
        }
    }
    let eps = cj.sqrt();
    let tag = format!("variant {}", variant.as_str());
    if !selection.degenerate {
        records.push(
            CheckRecord::flag("tau-bracket", ANCHOR_PERIMETER, n, tau >= eps / 2.0 && tau <= eps)
                .param("j", j as f64)
                .param("tau", tau)
                .param("sqrt_cj", eps),
        );
        records.push(
            CheckRecord::le(
                "perimeter-bound",
                ANCHOR_PERIMETER,
                n,
                selection.perimeter,
                2.0 * eps,
                tolerances::PERIMETER_REL * 2.0 * eps,
            )
            .param("j", j as f64)
            .param("cj", cj)
            .param("delta", selection.half_width)
            .note(tag.clone()),
        );
        let (measured, bound) = (bad_volume, w_integral / tau);
        records.push(
            CheckRecord::le("chebyshev-volume", ANCHOR_CHEBYSHEV, n, measured, bound, 0.0)
                .param("j", j as f64)
                .param("tau", tau),
        );
    }
    records.push(
        CheckRecord::le("good-set-sup", ANCHOR_GOOD_SET, n, good_sup, tau, 0.0)
            .param("j", j as f64)
            .note(tag.clone()),
    );
    let ui_rhs = bounds.ui_lambda * bad_volume.powf(bounds.ui_alpha);
    records.push(
        CheckRecord::le(
            "bad-set-uniform-integrability",
            ANCHOR_BAD_SET_UI,
            n,
            bad_volume_g,
            ui_rhs,
            tolerances::UI_RATIO_REL * bounds.ui_lambda,
        )
        .param("j", j as f64)
        .param("alpha", bounds.ui_alpha)
        .note(tag),
    );
    for r in &mut records {
        *r = r.clone().sampled(s);
    }
    Ok(SingularSetReport {
        j,
        variant,
        cj,
        epsilon: eps,
        tau,
        perimeter: selection.perimeter,
        selection,
        bad_volume,
        bad_volume_g,
        good_volume_g,
        total_volume_g: bad_volume_g + good_volume_g,
        w_integral,
        good_sup,
        total_curvature,
        bad_mask,
        records,
    })
}

/// Reports for every index plus the sequence-level checks: Vol(Z_j)
/// non-increasing and Vol(Z_j) ≤ C′C(j) with C′ = max_j (∫w_j/τ_j)/C(j).
pub fn singular_set_sequence(
    seq: &FactorSequence,
    variant: Variant,
    h: f64,
) -> Result<(Vec<SingularSetReport>, Vec<CheckRecord>)> {
    let reports: Vec<SingularSetReport> = (1..=seq.len())
        .into_par_iter()
        .map(|j| singular_set_decompose(seq, j, variant, h))
        .collect::<Result<_>>()?;
    let n = seq.dimension();
    let mut records = Vec::new();
    let c_prime = reports
        .iter()
        .filter(|r| r.cj > 0.0 && r.tau > 0.0)
        .map(|r| r.w_integral / r.tau / r.cj)
        .fold(0.0, f64::max);
    for r in &reports {
        records.push(
            CheckRecord::le(
                "bad-set-volume",
                ANCHOR_BAD_SET_VOLUME,
                n,
                r.bad_volume,
                c_prime * r.cj,
                0.0,
            )
            .param("j", r.j as f64)
            .param("c_prime", c_prime)
            .note(format!("variant {}", variant.as_str())),
        );
    }
    let total = seq.sampling().total_weight();
    let worst = reports
        .windows(2)
        .map(|w| w[1].bad_volume - w[0].bad_volume)
        .fold(f64::NEG_INFINITY, f64::max);
    records.push(
        CheckRecord::le(
            "bad-set-volume-monotone",
            ANCHOR_BAD_SET_VOLUME,
            n,
            if reports.len() < 2 { 0.0 } else { worst },
            0.0,
            tolerances::QUADRATURE_REL * total,
        )
        .note(format!("variant {}", variant.as_str())),
    );
    Ok((reports, records))
}

/// The weak inequality −∫⟨∇φ,∇u_∞⟩ ≤ (n(n−2)/4)∫φu_∞ for each test function.
pub fn limit_weak_psc_check(
    u_inf: &ScalarField,
    tests: &[ScalarField],
    sampling: &SphereSampling,
    h: f64,
) -> Result<Vec<CheckRecord>> {
    let n = u_inf.dimension();
    tests
        .iter()
        .map(|phi| {
            let r = weak_psc_residual(u_inf, phi, sampling, h)?;
            Ok(
                CheckRecord::ge("limit-weak-psc", ANCHOR_WEAK_PSC, n, r, 0.0, tolerances::WEAK_RESIDUAL)
                    .note(format!("test function {}", phi.label()))
                    .sampled(sampling),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::product_rule_sampling;
    use std::f64::consts::PI;

    #[test]
    fn equator_perimeter_on_three_sphere() {
        let s = product_rule_sampling(3, 48).unwrap();
        let w = ScalarField::coordinate(3, 0).scale(-1.0).offset(1.0);
        let est = perimeter_estimate(&w, 1.0, 0.1, &s, 1e-3).unwrap();
        assert!((est / (4.0 * PI) - 1.0).abs() < 0.05, "{est}");
    }

    #[test]
    fn constant_levels_have_no_perimeter() {
        let s = product_rule_sampling(3, 8).unwrap();
        let w = ScalarField::constant(3, 2.0);
        assert_eq!(perimeter_estimate(&w, 1.0, 0.1, &s, 1e-3).unwrap(), 0.0);
        let sel = select_tau(&ScalarField::constant(3, 0.0), 0.0, &s, 1e-3).unwrap();
        assert!(sel.degenerate && sel.tau == 0.0);
    }

    #[test]
    fn chebyshev_for_constants() {
        let s = product_rule_sampling(3, 16).unwrap();
        let w = ScalarField::constant(3, 2.0);
        let (m, b) = chebyshev_volume_bound(&w, 1.0, &s).unwrap();
        assert!(m <= b);
        let (m, _) = chebyshev_volume_bound(&w, 3.0, &s).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn cj_vanishes_on_equal_fields() {
        let s = product_rule_sampling(3, 8).unwrap();
        let f = ScalarField::coordinate(3, 1);
        assert_eq!(cj_bound(&f, &f, &s, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn selected_tau_stays_in_bracket() {
        let s = product_rule_sampling(3, 24).unwrap();
        let w = ScalarField::coordinate(3, 0).scale(-1.0).offset(1.0);
        let sel = select_tau(&w, 1.0, &s, 1e-3).unwrap();
        assert!(sel.tau >= 0.5 && sel.tau <= 1.0);
        // Level areas 4π(1 − (1 − τ)²) shrink away from the equator.
        assert!(sel.tau < 0.6);
    }
}
