//! Closed-form conformal families with known ground truth, and a registry
//! that selects them by name.
//!
//! | family         | f_j                                   | limit   |
//! |----------------|---------------------------------------|---------|
//! | `round`        | c                                     | c       |
//! | `bubble`       | ln(2λ_j / ((1+s) + λ_j²(1−s))), s = ⟨p, −P⟩, λ_j = λ^j | none |
//! | `perturbation` | f_∞ + a_j ψ                           | f_∞     |
//! | `spike`        | f_∞ + h_j χ(d(p, x₀)/w_j)             | f_∞     |
//! | `collapse`     | u_j ≡ 1/j                             | none    |
//!
//! Indices j are one-based throughout.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conformal::{ConformalFactor, HypothesisBounds};
use crate::error::{invalid, Error, Result};
use crate::field::expr::parse_field;
use crate::field::ScalarField;
use crate::sequence::FactorSequence;
use crate::sphere::{
    basis, check_unit, dot, fit_resolution, geodesic_distance_unchecked, polar_sampling, product_rule_sampling,
    sphere_volume_constant, uniform_sphere_sampling, SphereSampling, GLOBAL_NODE_BUDGET, TANGENT_NODE_BUDGET,
};

/// Scenario description as read from a TOML or JSON file. Unset parameters
/// take the family defaults; [`ScenarioFamily::resolve`] fills them in.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Constant value of the round factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Bubble dilation parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Bubble projection pole P, or spike center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// f_∞ as a field expression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<String>,
    /// Perturbation direction ψ as a field expression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
}

impl ScenarioSpec {
    pub fn new(name: &str, n: usize) -> Self {
        Self {
            name: name.into(),
            n,
            ..Default::default()
        }
    }

    /// Reads a scenario description from `.toml` or `.json` (by extension).
    /// A TOML file may hold it at top level or under a `[scenario]` table.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_str(&text)?),
            Some("toml") => Self::from_toml(&text),
            _ => Err(Error::Config(format!(
                "unrecognized scenario file extension: {}",
                path.display()
            ))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrapped {
            scenario: ScenarioSpec,
        }
        if let Ok(w) = toml::from_str::<Wrapped>(text) {
            return Ok(w.scenario);
        }
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn check_length(&self, name: &'static str, list: &Option<Vec<f64>>) -> Result<()> {
        if let (Some(j), Some(v)) = (self.length, list) {
            if j != v.len() {
                return invalid(format!("length {j} disagrees with {} {name}", v.len()));
            }
        }
        Ok(())
    }

    fn length_or(&self, default: usize) -> Result<usize> {
        let j = self.length.unwrap_or(default);
        if j == 0 {
            return invalid("sequence length must be >= 1");
        }
        Ok(j)
    }

    fn center_or(&self, default: Vec<f64>) -> Result<Vec<f64>> {
        let c = self.center.clone().unwrap_or(default);
        if c.len() != self.n + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n + 1,
                got: c.len(),
            });
        }
        check_unit(&c, "center")?;
        Ok(c)
    }
}

/// A built scenario: the factors f_1, …, f_J, the candidate limit when the
/// family has one, and the fully resolved spec.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub factors: Vec<ConformalFactor>,
    pub limit: Option<ConformalFactor>,
    /// Where the family concentrates; used for probes and polar rules.
    pub focus: Vec<f64>,
    /// Radii below which the factors vary; empty for globally smooth
    /// families.
    pub scales: Vec<f64>,
    /// Candidate limit of u_j, which may vanish where no limiting metric
    /// exists.
    pub u_limit: Option<ScalarField>,
    /// Closed-form values per element, where the family has them.
    pub expected: Vec<Expected>,
}

/// Exact scalar curvature (constant) and volume of one element.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Expected {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
}

impl Expected {
    /// f ≡ c: Sc = n(n−1)e^{−2c}, Vol = e^{nc}ω_n.
    pub fn constant(n: usize, c: f64) -> Self {
        let nf = n as f64;
        Self {
            curvature: Some(nf * (nf - 1.0) * (-2.0 * c).exp()),
            volume: Some((nf * c).exp() * sphere_volume_constant(n)),
        }
    }
}

impl Scenario {
    pub fn dimension(&self) -> usize {
        self.spec.n
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// The first factor; the single factor of one-element scenarios.
    pub fn first(&self) -> &ConformalFactor {
        &self.factors[0]
    }

    /// A rule resolving the family: polar about the focus when the factors
    /// have small scales (n ≤ 5), else the product rule (n ≤ 4), else
    /// Monte Carlo with `fallback_count` points. Product-rule resolutions
    /// are lowered to stay within a fixed node budget in higher dimensions.
    pub fn default_sampling(&self, resolution: usize, fallback_count: usize) -> Result<SphereSampling> {
        let n = self.dimension();
        if !self.scales.is_empty() && n <= 5 {
            let mut breaks: Vec<f64> = Vec::new();
            for s in &self.scales {
                breaks.extend([0.5 * s, *s, 2.0 * s]);
            }
            breaks.push(PI / 2.0);
            let tangent = fit_resolution((resolution / 2).max(4), n - 1, TANGENT_NODE_BUDGET);
            return polar_sampling(&self.focus, &breaks, 8, tangent);
        }
        if n <= 4 {
            return product_rule_sampling(n, fit_resolution(resolution, n, GLOBAL_NODE_BUDGET));
        }
        uniform_sphere_sampling(n, fallback_count, self.spec.seed)
    }

    /// The sequence with its candidate limit; fails for families without one.
    pub fn sequence(&self, bounds: HypothesisBounds, sampling: SphereSampling) -> Result<FactorSequence> {
        let limit = self
            .limit
            .clone()
            .ok_or_else(|| Error::InvalidArgument(format!("scenario '{}' has no candidate limit", self.spec.name)))?;
        FactorSequence::new(self.factors.clone(), limit, bounds, sampling, self.spec.seed)
    }
}

/// A named family of conformal factors.
pub trait ScenarioFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// Fills unset parameters with the family defaults and validates.
    fn resolve(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec>;
    /// Builds from a resolved spec.
    fn construct(&self, spec: &ScenarioSpec) -> Result<Scenario>;

    fn build(&self, spec: &ScenarioSpec) -> Result<Scenario> {
        if spec.n < 3 {
            return Err(Error::UnsupportedDimension {
                n: spec.n,
                reason: "scenarios need n >= 3".into(),
            });
        }
        let resolved = self.resolve(spec)?;
        self.construct(&resolved)
    }
}

/// Name → family lookup.
pub struct ScenarioRegistry {
    families: BTreeMap<&'static str, Box<dyn ScenarioFamily>>,
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Round));
        r.register(Box::new(Bubble));
        r.register(Box::new(Perturbation));
        r.register(Box::new(Spike));
        r.register(Box::new(Collapse));
        r
    }
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self {
            families: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, family: Box<dyn ScenarioFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ScenarioFamily> {
        self.families
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "scenario",
                name: name.into(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.families.keys().copied()
    }

    pub fn build(&self, spec: &ScenarioSpec) -> Result<Scenario> {
        self.get(&spec.name)?.build(spec)
    }
}

fn parse_or(src: &Option<String>, default: &str, n: usize) -> Result<ScalarField> {
    parse_field(src.as_deref().unwrap_or(default), n)
}

/// f ≡ c.
pub fn round_scenario(n: usize, c: f64) -> Result<ConformalFactor> {
    ConformalFactor::new(ScalarField::constant(n, c))
}

/// The Möbius bubble with dilation λ ≥ 1 about the projection pole P:
/// e^f = 2λ / ((1+s) + λ²(1−s)) with s = ⟨p, −P⟩. Volume concentrates at
/// −P as λ grows; λ = 1 gives f ≡ 0.
pub fn bubble_scenario(n: usize, lambda: f64, pole: &[f64]) -> Result<ConformalFactor> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            range: "[1, inf)".into(),
        });
    }
    if pole.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: pole.len(),
        });
    }
    check_unit(pole, "pole")?;
    let c: Vec<f64> = pole.iter().map(|v| -v).collect();
    let c2 = c.clone();
    let l2 = lambda * lambda;
    let log2l = (2.0 * lambda).ln();
    let f = ScalarField::new(n, format!("bubble(lambda={lambda})"), move |p| {
        let s = dot(p, &c);
        log2l - ((1.0 + l2) + (1.0 - l2) * s).ln()
    })
    .with_gradient(move |p, out| {
        // ∇s = c − s p
        let s = dot(p, &c2);
        let k = -(1.0 - l2) / ((1.0 + l2) + (1.0 - l2) * s);
        out.iter_mut()
            .zip(p.iter().zip(&c2))
            .for_each(|(o, (pk, ck))| *o = k * (ck - s * pk));
    });
    ConformalFactor::new(f)
}

/// f_j = f_∞ + a_j ψ.
pub fn perturbation_scenario(
    f_inf: &ScalarField,
    psi: &ScalarField,
    amplitudes: &[f64],
) -> Result<(Vec<ConformalFactor>, ConformalFactor)> {
    f_inf.ensure_same_dimension(psi)?;
    if amplitudes.is_empty() {
        return Err(Error::Empty("amplitudes"));
    }
    if amplitudes.windows(2).any(|w| w[1].abs() > w[0].abs()) {
        return invalid("amplitudes must be non-increasing in magnitude");
    }
    let factors = amplitudes
        .iter()
        .map(|a| ConformalFactor::new(f_inf.add(&psi.scale(*a))?))
        .collect::<Result<_>>()?;
    Ok((factors, ConformalFactor::new(f_inf.clone())?))
}

/// χ(s) = exp(1 − 1/(1 − s²)) for |s| < 1, else 0; χ(0) = 1.
pub fn spike_profile(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// h χ(d(p, x₀)/w) with closed-form gradient.
pub fn spike_field(center: &[f64], height: f64, width: f64) -> Result<ScalarField> {
    check_unit(center, "center")?;
    if !(width > 0.0) {
        return invalid("spike width must be positive");
    }
    let n = center.len() - 1;
    let (c, c2) = (center.to_vec(), center.to_vec());
    Ok(ScalarField::new(n, format!("spike(h={height}, w={width})"), move |p| {
        height * spike_profile(geodesic_distance_unchecked(p, &c) / width)
    })
    .with_gradient(move |p, out| {
        let d = geodesic_distance_unchecked(p, &c2);
        let s = d / width;
        if s >= 1.0 {
            out.fill(0.0);
            return;
        }
        // χ'(s) = −2s χ(s)/(1−s²)², ∇d = −(x₀ − ⟨x₀,p⟩p)/sin d
        let cos = dot(p, &c2);
        let ratio = if d < 1e-8 { 1.0 } else { d / d.sin() };
        let k = height * spike_profile(s) * 2.0 / (width * width * (1.0 - s * s).powi(2)) * ratio;
        out.iter_mut()
            .zip(p.iter().zip(&c2))
            .for_each(|(o, (pk, ck))| *o = k * (ck - cos * pk));
    }))
}

/// f_j = f_∞ + h_j χ(d(p, x₀)/w_j).
pub fn spike_scenario(
    f_inf: &ScalarField,
    center: &[f64],
    heights: &[f64],
    widths: &[f64],
) -> Result<(Vec<ConformalFactor>, ConformalFactor)> {
    if heights.len() != widths.len() {
        return invalid("heights and widths differ in length");
    }
    if widths.is_empty() {
        return Err(Error::Empty("widths"));
    }
    if widths.iter().any(|w| !(*w > 0.0 && *w <= PI)) {
        return invalid("spike widths must lie in (0, pi]");
    }
    if widths.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("spike widths must be strictly decreasing");
    }
    let factors = heights
        .iter()
        .zip(widths)
        .map(|(h, w)| ConformalFactor::new(f_inf.add(&spike_field(center, *h, *w)?)?))
        .collect::<Result<_>>()?;
    Ok((factors, ConformalFactor::new(f_inf.clone())?))
}

pub struct Round;

impl ScenarioFamily for Round {
    fn name(&self) -> &'static str {
        "round"
    }

    fn summary(&self) -> &'static str {
        "constant factor f = c"
    }

    fn resolve(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec> {
        let mut r = ScenarioSpec::new(self.name(), spec.n);
        r.seed = spec.seed;
        r.length = Some(spec.length_or(1)?);
        r.c = Some(spec.c.unwrap_or(0.0));
        Ok(r)
    }

    fn construct(&self, spec: &ScenarioSpec) -> Result<Scenario> {
        let c = spec.c.unwrap_or(0.0);
        let cf = round_scenario(spec.n, c)?;
        let j = spec.length.unwrap_or(1);
        Ok(Scenario {
            factors: vec![cf.clone(); j],
            u_limit: Some(cf.u().clone()),
            limit: Some(cf),
            focus: basis(spec.n + 1, 0),
            scales: Vec::new(),
            expected: vec![Expected::constant(spec.n, c); j],
            spec: spec.clone(),
        })
    }
}

pub struct Bubble;

impl Bubble {
    /// λ_j = λ^j.
    pub fn lambdas(spec: &ScenarioSpec) -> Vec<f64> {
        let l = spec.lambda.unwrap_or(2.0);
        (1..=spec.length.unwrap_or(1)).map(|j| l.powi(j as i32)).collect()
    }
}

impl ScenarioFamily for Bubble {
    fn name(&self) -> &'static str {
        "bubble"
    }

    fn summary(&self) -> &'static str {
        "Moebius bubbles with dilations lambda^j concentrating at the antipode of the pole"
    }

    fn resolve(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec> {
        let mut r = ScenarioSpec::new(self.name(), spec.n);
        r.seed = spec.seed;
        r.length = Some(spec.length_or(1)?);
        let lambda = spec.lambda.unwrap_or(2.0);
        if !(lambda >= 1.0) {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: lambda,
                range: "[1, inf)".into(),
            });
        }
        r.lambda = Some(lambda);
        let mut pole = basis(spec.n + 1, 0);
        pole[0] = -1.0;
        r.center = Some(spec.center_or(pole)?);
        Ok(r)
    }

    fn construct(&self, spec: &ScenarioSpec) -> Result<Scenario> {
        let pole = spec.center.clone().expect("resolved");
        let lambdas = Self::lambdas(spec);
        let factors = lambdas
            .iter()
            .map(|l| bubble_scenario(spec.n, *l, &pole))
            .collect::<Result<_>>()?;
        // Half of the bubble's volume lies within 2 atan(1/λ) of −P.
        let scales = lambdas
            .iter()
            .filter(|l| **l > 1.0)
            .map(|l| 2.0 * (1.0 / l).atan())
            .collect();
        let n = spec.n as f64;
        let exact = Expected {
            curvature: Some(n * (n - 1.0)),
            volume: Some(sphere_volume_constant(spec.n)),
        };
        Ok(Scenario {
            factors,
            limit: None,
            u_limit: None,
            focus: pole.iter().map(|v| -v).collect(),
            scales,
            expected: vec![exact; lambdas.len()],
            spec: spec.clone(),
        })
    }
}

pub struct Perturbation;

impl ScenarioFamily for Perturbation {
    fn name(&self) -> &'static str {
        "perturbation"
    }

    fn summary(&self) -> &'static str {
        "f_j = f_inf + a_j psi with a_j = 2^-j by default"
    }

    fn resolve(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec> {
        spec.check_length("amplitudes", &spec.amplitudes)?;
        let mut r = ScenarioSpec::new(self.name(), spec.n);
        r.seed = spec.seed;
        let amplitudes = match &spec.amplitudes {
            Some(a) => a.clone(),
            None => (1..=spec.length_or(8)?).map(|j| 0.5f64.powi(j as i32)).collect(),
        };
        if amplitudes.is_empty() {
            return Err(Error::Empty("amplitudes"));
        }
        r.length = Some(amplitudes.len());
        r.amplitudes = Some(amplitudes);
        r.limit = Some(spec.limit.clone().unwrap_or_else(|| "0".into()));
        r.direction = Some(spec.direction.clone().unwrap_or_else(|| "x1".into()));
        Ok(r)
    }

    fn construct(&self, spec: &ScenarioSpec) -> Result<Scenario> {
        let f_inf = parse_or(&spec.limit, "0", spec.n)?;
        let psi = parse_or(&spec.direction, "x1", spec.n)?;
        let (factors, limit) = perturbation_scenario(&f_inf, &psi, spec.amplitudes.as_deref().unwrap_or(&[]))?;
        Ok(Scenario {
            expected: vec![Expected::default(); factors.len()],
            factors,
            u_limit: Some(limit.u().clone()),
            limit: Some(limit),
            focus: basis(spec.n + 1, 0),
            scales: Vec::new(),
            spec: spec.clone(),
        })
    }
}

pub struct Spike;

impl ScenarioFamily for Spike {
    fn name(&self) -> &'static str {
        "spike"
    }

    fn summary(&self) -> &'static str {
        "f_j = f_inf + h_j chi(d(x, x0)/w_j) with h_j = 1, w_j = 4^-j by default"
    }

    fn resolve(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec> {
        spec.check_length("heights", &spec.heights)?;
        spec.check_length("widths", &spec.widths)?;
        let mut r = ScenarioSpec::new(self.name(), spec.n);
        r.seed = spec.seed;
        let j = match (&spec.heights, &spec.widths) {
            (Some(h), _) => h.len(),
            (None, Some(w)) => w.len(),
            (None, None) => spec.length_or(5)?,
        };
        let widths = spec
            .widths
            .clone()
            .unwrap_or_else(|| (1..=j).map(|k| 0.25f64.powi(k as i32)).collect());
        let heights = spec.heights.clone().unwrap_or_else(|| vec![1.0; j]);
        if widths.len() != heights.len() {
            return invalid("heights and widths differ in length");
        }
        r.length = Some(j);
        r.heights = Some(heights);
        r.widths = Some(widths);
        r.center = Some(spec.center_or(basis(spec.n + 1, 0))?);
        r.limit = Some(spec.limit.clone().unwrap_or_else(|| "0".into()));
        Ok(r)
    }

    fn construct(&self, spec: &ScenarioSpec) -> Result<Scenario> {
        let f_inf = parse_or(&spec.limit, "0", spec.n)?;
        let center = spec.center.clone().expect("resolved");
        let widths = spec.widths.clone().unwrap_or_default();
        let (factors, limit) = spike_scenario(&f_inf, &center, spec.heights.as_deref().unwrap_or(&[]), &widths)?;
        Ok(Scenario {
            expected: vec![Expected::default(); factors.len()],
            factors,
            u_limit: Some(limit.u().clone()),
            limit: Some(limit),
            focus: center,
            scales: widths,
            spec: spec.clone(),
        })
    }
}

/// Constant factors with u_j ≡ 1/j; volumes collapse to zero.
pub struct Collapse;

impl ScenarioFamily for Collapse {
    fn name(&self) -> &'static str {
        "collapse"
    }

    fn summary(&self) -> &'static str {
        "constant factors with u_j = 1/j (volume collapse)"
    }

    fn resolve(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec> {
        let mut r = ScenarioSpec::new(self.name(), spec.n);
        r.seed = spec.seed;
        r.length = Some(spec.length_or(6)?);
        Ok(r)
    }

    fn construct(&self, spec: &ScenarioSpec) -> Result<Scenario> {
        let n = spec.n;
        let len = spec.length.unwrap_or(6);
        let factors = (1..=len)
            .map(|j| ConformalFactor::from_u(ScalarField::constant(n, 1.0 / j as f64)))
            .collect::<Result<_>>()?;
        let k = 2.0 / (n as f64 - 2.0);
        Ok(Scenario {
            factors,
            limit: None,
            u_limit: Some(ScalarField::constant(n, 0.0)),
            focus: basis(n + 1, 0),
            scales: Vec::new(),
            expected: (1..=len).map(|j| Expected::constant(n, -k * (j as f64).ln())).collect(),
            spec: spec.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::volume;
    use crate::field::calculus::{fd_gradient_into, gradient_into};
    use crate::sphere::sphere_volume_constant;

    fn close_grad(f: &ScalarField, p: &[f64]) {
        let mut a = vec![0.0; p.len()];
        let mut b = vec![0.0; p.len()];
        gradient_into(f, p, 1e-4, &mut a);
        fd_gradient_into(f, p, 1e-4, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-5 * (1.0 + x.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn bubble_gradient_matches_differences() {
        let cf = bubble_scenario(3, 3.0, &[-1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = [0.3, 0.5, -0.1, (1.0f64 - 0.35).sqrt()];
        close_grad(cf.f(), &p);
        assert!((cf.f().eval(&[1.0, 0.0, 0.0, 0.0]) - 3.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn unit_lambda_is_round() {
        let cf = bubble_scenario(4, 1.0, &basis(5, 2)).unwrap();
        assert!(cf.f().eval(&basis(5, 0)).abs() < 1e-15);
    }

    #[test]
    fn spike_gradient_and_support() {
        let c = basis(4, 0);
        let f = spike_field(&c, 1.0, 0.5).unwrap();
        let d: f64 = 0.3;
        let p = [d.cos(), d.sin() * 0.6, d.sin() * 0.8, 0.0];
        close_grad(&f, &p);
        assert_eq!(f.eval(&c), 1.0);
        assert_eq!(f.eval(&basis(4, 1)), 0.0);
    }

    #[test]
    fn registry_defaults() {
        let reg = ScenarioRegistry::default();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(names, ["bubble", "collapse", "perturbation", "round", "spike"]);
        let s = reg.build(&ScenarioSpec::new("spike", 3)).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.spec.widths.as_ref().unwrap()[4], 0.25f64.powi(5));
        let p = reg.build(&ScenarioSpec::new("perturbation", 3)).unwrap();
        assert_eq!(p.len(), 8);
        assert!(matches!(
            reg.build(&ScenarioSpec::new("torus", 3)),
            Err(Error::Unknown { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        let reg = ScenarioRegistry::default();
        let mut s = ScenarioSpec::new("bubble", 3);
        s.lambda = Some(0.5);
        assert!(reg.build(&s).is_err());
        let mut s = ScenarioSpec::new("spike", 3);
        s.widths = Some(vec![0.1, 0.2]);
        assert!(reg.build(&s).is_err());
        let mut s = ScenarioSpec::new("perturbation", 3);
        s.length = Some(0);
        assert!(reg.build(&s).is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let text = "[scenario]\nname = \"perturbation\"\nn = 3\nlimit = \"0.1 * x2\"\namplitudes = [0.5, 0.25]\n";
        let spec = ScenarioSpec::from_toml(text).unwrap();
        assert_eq!(spec.amplitudes, Some(vec![0.5, 0.25]));
        let back = ScenarioSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn bubble_volume_on_default_rule() {
        let reg = ScenarioRegistry::default();
        let mut spec = ScenarioSpec::new("bubble", 3);
        spec.lambda = Some(4.0);
        let s = reg.build(&spec).unwrap();
        let rule = s.default_sampling(32, 10_000).unwrap();
        let v = volume(s.first(), &rule);
        assert!((v / sphere_volume_constant(3) - 1.0).abs() < 1e-4, "{v}");
    }
}
