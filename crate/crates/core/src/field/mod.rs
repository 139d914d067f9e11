//! Scalar fields on Sⁿ and their intrinsic calculus.

pub mod calculus;
pub mod expr;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{check_unit, dot, geodesic_distance_unchecked};

pub use calculus::{
    ball_average, ball_average_with, ball_average_with_error, ball_integral, dirichlet_energy, gradient, integrate,
    intrinsic_gradient, laplace_beltrami, lp_norm, spherical_mean, spherical_mean_with_error, CapRule, PolarRule,
};

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
/// Writes the intrinsic (tangent) gradient at `p` into `out`.
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Regularity class of a field, used to relax derivative tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Smooth,
    PiecewiseSmooth,
}

/// A real-valued function on Sⁿ, evaluable at any unit vector of ℝⁿ⁺¹.
///
/// Cloning is cheap (the evaluators are shared). An optional closed-form
/// gradient is carried through arithmetic so composite fields keep exact
/// first derivatives when every ingredient has one.
#[derive(Clone)]
pub struct ScalarField {
    n: usize,
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
    smoothness: Smoothness,
    label: String,
    support: Option<Arc<(Vec<f64>, f64)>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("smoothness", &self.smoothness)
            .field("closed_form_gradient", &self.grad.is_some())
            .finish()
    }
}

/// A tangent vector at a point of Sⁿ, stored in ambient coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        dot(&self.components, &self.components).sqrt()
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        dot(&self.components, &other.components)
    }
}

/// Removes the component of `v` along the unit vector `p`.
#[inline]
pub(crate) fn project_tangent(p: &[f64], v: &mut [f64]) {
    let c = dot(p, v);
    v.iter_mut().zip(p).for_each(|(vi, pi)| *vi -= c * pi);
}

impl ScalarField {
    /// Wraps an arbitrary evaluator. `n` is the sphere dimension.
    pub fn new(n: usize, label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            n,
            eval: Arc::new(eval),
            grad: None,
            smoothness: Smoothness::Smooth,
            label: label.into(),
            support: None,
        }
    }

    /// Attaches a closed-form intrinsic gradient. The closure receives a
    /// unit vector and writes a tangent vector of length n + 1.
    pub fn with_gradient(mut self, grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Declares that the field vanishes outside the closed geodesic ball
    /// B_radius(center). Derived fields do not inherit it.
    pub fn with_support(mut self, center: &[f64], radius: f64) -> Self {
        self.support = Some(Arc::new((center.to_vec(), radius)));
        self
    }

    /// Center and radius of a declared compact support.
    pub fn support(&self) -> Option<(&[f64], f64)> {
        self.support.as_deref().map(|(c, r)| (c.as_slice(), *r))
    }

    /// Drops the closed-form gradient so derivatives fall back to finite
    /// differences.
    pub fn without_gradient(mut self) -> Self {
        self.grad = None;
        self
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn ambient(&self) -> usize {
        self.n + 1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn has_closed_form_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// Evaluates at a unit vector without validation.
    #[inline]
    pub fn eval(&self, p: &[f64]) -> f64 {
        (self.eval)(p)
    }

    /// Evaluates after checking the argument is a unit vector of the right
    /// length.
    pub fn eval_checked(&self, p: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        Ok(self.eval(p))
    }

    pub(crate) fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n + 1,
                got: p.len(),
            });
        }
        check_unit(p, "p")
    }

    /// Closed-form gradient at `p`, if the field carries one.
    pub fn closed_form_gradient(&self, p: &[f64], out: &mut [f64]) -> bool {
        match &self.grad {
            Some(g) => {
                g(p, out);
                true
            }
            None => false,
        }
    }

    pub(crate) fn ensure_same_dimension(&self, other: &ScalarField) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }

    /// f ≡ c.
    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(n, format!("{c}"), move |_| c).with_gradient(|_, out| out.fill(0.0))
    }

    /// The ambient coordinate x_{i} restricted to the sphere (zero-based i).
    pub fn coordinate(n: usize, i: usize) -> Self {
        assert!(i <= n, "coordinate index out of range");
        Self::new(n, format!("x{}", i + 1), move |p| p[i]).with_gradient(move |p, out| {
            // ∇x_i = e_i − x_i p
            out.iter_mut().zip(p).for_each(|(o, pk)| *o = -p[i] * pk);
            out[i] += 1.0;
        })
    }

    /// Geodesic distance to a fixed unit vector.
    pub fn distance_to(center: &[f64]) -> Self {
        let c = center.to_vec();
        let c2 = c.clone();
        let n = c.len() - 1;
        Self::new(n, "dist", move |p| geodesic_distance_unchecked(p, &c))
            .with_gradient(move |p, out| distance_gradient(p, &c2, out))
            .with_smoothness(Smoothness::PiecewiseSmooth)
    }

    /// Radial bump (1 − (d(p, x₀)/ρ)²)₊³, nonnegative and C² with support
    /// in the closed ball of radius ρ.
    pub fn bump(center: &[f64], rho: f64) -> Self {
        let c = center.to_vec();
        let c2 = c.clone();
        let n = c.len() - 1;
        Self::new(n, format!("bump(rho={rho})"), move |p| {
            let d = geodesic_distance_unchecked(p, &c);
            let t = 1.0 - (d / rho).powi(2);
            if t > 0.0 {
                t * t * t
            } else {
                0.0
            }
        })
        .with_gradient(move |p, out| {
            let d = geodesic_distance_unchecked(p, &c2);
            let t = 1.0 - (d / rho).powi(2);
            if t <= 0.0 {
                out.fill(0.0);
                return;
            }
            // ∇(d²) = 2d∇d = −2 (d/sin d)(x₀ − ⟨x₀,p⟩p)
            let cos = dot(p, &c2);
            let ratio = if d < 1e-8 { 1.0 } else { d / d.sin() };
            let k = 3.0 * t * t * (-1.0 / (rho * rho)) * (-2.0 * ratio);
            out.iter_mut()
                .zip(p.iter().zip(&c2))
                .for_each(|(o, (pk, ck))| *o = k * (ck - cos * pk));
        })
        .with_support(center, rho)
    }

    /// Pointwise image under a smooth scalar map `g` with derivative `dg`.
    pub fn map(
        &self,
        label: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dg: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let inner = self.clone();
        let mut out = Self::new(self.n, label, move |p| g(inner.eval(p))).with_smoothness(self.smoothness);
        if self.grad.is_some() {
            let inner = self.clone();
            out = out.with_gradient(move |p, o| {
                inner.closed_form_gradient(p, o);
                let s = dg(inner.eval(p));
                o.iter_mut().for_each(|v| *v *= s);
            });
        }
        out
    }

    /// Pointwise combination h(a, b) with partial derivatives (∂₁h, ∂₂h).
    fn combine(
        &self,
        other: &ScalarField,
        label: String,
        h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dh: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Result<Self> {
        self.ensure_same_dimension(other)?;
        let (a, b) = (self.clone(), other.clone());
        let smooth = if self.smoothness == Smoothness::Smooth && other.smoothness == Smoothness::Smooth {
            Smoothness::Smooth
        } else {
            Smoothness::PiecewiseSmooth
        };
        let mut out = Self::new(self.n, label, move |p| h(a.eval(p), b.eval(p))).with_smoothness(smooth);
        if self.grad.is_some() && other.grad.is_some() {
            let (a, b) = (self.clone(), other.clone());
            out = out.with_gradient(move |p, o| {
                let mut gb = vec![0.0; o.len()];
                a.closed_form_gradient(p, o);
                b.closed_form_gradient(p, &mut gb);
                let (da, db) = dh(a.eval(p), b.eval(p));
                o.iter_mut().zip(&gb).for_each(|(x, y)| *x = da * *x + db * y);
            });
        }
        Ok(out)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        let label = format!("({} + {})", self.label, other.label);
        self.combine(other, label, |a, b| a + b, |_, _| (1.0, 1.0))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        let label = format!("({} - {})", self.label, other.label);
        self.combine(other, label, |a, b| a - b, |_, _| (1.0, -1.0))
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        let label = format!("({} * {})", self.label, other.label);
        self.combine(other, label, |a, b| a * b, |a, b| (b, a))
    }

    pub fn min(&self, other: &ScalarField) -> Result<Self> {
        let label = format!("min({}, {})", self.label, other.label);
        let f = self.combine(
            other,
            label,
            f64::min,
            |a, b| if a <= b { (1.0, 0.0) } else { (0.0, 1.0) },
        )?;
        Ok(f.with_smoothness(Smoothness::PiecewiseSmooth))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(format!("{c} * {}", self.label), move |v| c * v, move |_| c)
    }

    pub fn offset(&self, c: f64) -> Self {
        self.map(format!("{} + {c}", self.label), move |v| v + c, |_| 1.0)
    }

    pub fn exp(&self) -> Self {
        self.map(format!("exp({})", self.label), f64::exp, f64::exp)
    }

    pub fn ln(&self) -> Self {
        self.map(format!("log({})", self.label), f64::ln, |v| 1.0 / v)
    }

    pub fn powf(&self, e: f64) -> Self {
        self.map(
            format!("pow({}, {e})", self.label),
            move |v| v.powf(e),
            move |v| e * v.powf(e - 1.0),
        )
    }

    /// |self − other|².
    pub fn squared_difference(&self, other: &ScalarField) -> Result<Self> {
        let d = self.sub(other)?;
        Ok(d.mul(&d)?.with_label(format!("|{} - {}|^2", self.label, other.label)))
    }
}

/// ∇d(·, c) at p: −(c − ⟨c,p⟩p)/|c − ⟨c,p⟩p|, zero at p = ±c.
pub(crate) fn distance_gradient(p: &[f64], c: &[f64], out: &mut [f64]) {
    let cos = dot(p, c);
    out.iter_mut()
        .zip(p.iter().zip(c))
        .for_each(|(o, (pk, ck))| *o = -(ck - cos * pk));
    let r = dot(out, out).sqrt();
    if r < 1e-300 {
        out.fill(0.0);
    } else {
        out.iter_mut().for_each(|v| *v /= r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::basis;

    #[test]
    fn coordinate_gradient_is_tangent() {
        let f = ScalarField::coordinate(3, 0);
        let p = [0.5, 0.5, 0.5, 0.5];
        let mut g = [0.0; 4];
        assert!(f.closed_form_gradient(&p, &mut g));
        assert!(dot(&g, &p).abs() < 1e-15);
        let norm2 = dot(&g, &g);
        assert!((norm2 - (1.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn product_gradient_follows_leibniz_rule() {
        let x = ScalarField::coordinate(2, 0);
        let y = ScalarField::coordinate(2, 1);
        let xy = x.mul(&y).unwrap();
        let p = [0.6, 0.0, 0.8];
        let mut g = [0.0; 3];
        xy.closed_form_gradient(&p, &mut g);
        // ∇(xy) = y∇x + x∇y = 0·∇x + 0.6·(e2 − 0·p) = 0.6 e2
        assert!((g[1] - 0.6).abs() < 1e-15);
        assert!(g[0].abs() < 1e-15 && g[2].abs() < 1e-15);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let c = basis(4, 0);
        let b = ScalarField::bump(&c, 0.5);
        assert_eq!(b.eval(&basis(4, 1)), 0.0);
        assert_eq!(b.eval(&c), 1.0);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let a = ScalarField::constant(2, 1.0);
        let b = ScalarField::constant(3, 1.0);
        assert!(a.add(&b).is_err());
    }
}
