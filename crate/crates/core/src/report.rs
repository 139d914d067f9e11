//! Check records, plot series, and their CSV/SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{SamplingKind, SamplingSpec, SphereSampling};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// How lhs and rhs are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "~=")]
    Approx,
}

/// One verified inequality or identity.
///
/// `slack` is positive when the relation holds strictly: rhs − lhs for
/// `<=`, lhs − rhs for `>=`, and tolerance − |lhs − rhs| for `~=`. The
/// verdict is pass iff slack ≥ −tolerance for the inequalities and
/// slack ≥ 0 for approximate equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub anchor: String,
    pub n: usize,
    pub parameters: BTreeMap<String, f64>,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sampling: Option<SamplingSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
    /// Set by `fail_with`; tolerance overrides cannot clear it.
    #[serde(skip)]
    forced: bool,
}

impl CheckRecord {
    fn base(check: &str, anchor: &str, n: usize, lhs: f64, relation: Relation, rhs: f64, tolerance: f64) -> Self {
        let slack = match relation {
            Relation::Le => rhs - lhs,
            Relation::Ge => lhs - rhs,
            Relation::Approx => tolerance - (lhs - rhs).abs(),
        };
        let ok = match relation {
            Relation::Approx => slack >= 0.0,
            _ => slack >= -tolerance,
        };
        Self {
            check: check.into(),
            anchor: anchor.into(),
            n,
            parameters: BTreeMap::new(),
            lhs,
            relation,
            rhs,
            slack,
            tolerance,
            verdict: Verdict::from_bool(ok && slack.is_finite()),
            sampling: None,
            seed: None,
            notes: Vec::new(),
            forced: false,
        }
    }

    /// lhs ≤ rhs up to the absolute tolerance.
    pub fn le(check: &str, anchor: &str, n: usize, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::base(check, anchor, n, lhs, Relation::Le, rhs, tolerance)
    }

    /// lhs ≥ rhs up to the absolute tolerance.
    pub fn ge(check: &str, anchor: &str, n: usize, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::base(check, anchor, n, lhs, Relation::Ge, rhs, tolerance)
    }

    /// |lhs − rhs| ≤ rel·max(|rhs|, floor).
    pub fn approx(check: &str, anchor: &str, n: usize, lhs: f64, rhs: f64, rel: f64, floor: f64) -> Self {
        let tol = rel * rhs.abs().max(floor);
        Self::base(check, anchor, n, lhs, Relation::Approx, rhs, tol)
    }

    /// A boolean outcome recorded as 1 ≥ 1 (pass) or 0 ≥ 1 (fail).
    pub fn flag(check: &str, anchor: &str, n: usize, ok: bool) -> Self {
        Self::base(check, anchor, n, if ok { 1.0 } else { 0.0 }, Relation::Ge, 1.0, 0.0)
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.into(), value);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Records the sampling descriptor, and its seed when it has one.
    pub fn sampled(mut self, sampling: &SphereSampling) -> Self {
        let spec = sampling.spec();
        if let SamplingKind::MonteCarlo { seed, .. } = spec.kind {
            self.seed = Some(seed);
        }
        self.sampling = Some(spec);
        self
    }

    /// Forces a failing verdict (used when a precondition is violated).
    pub fn fail_with(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::Fail;
        self.forced = true;
        self.notes.push(why.into());
        self
    }

    /// Re-judges the record under a different absolute tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        let rejudged = Self::base(
            &self.check,
            &self.anchor,
            self.n,
            self.lhs,
            self.relation,
            self.rhs,
            tolerance,
        );
        self.slack = rejudged.slack;
        self.tolerance = tolerance;
        if !self.forced {
            self.verdict = rejudged.verdict;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    PhiProfile,
    TauScan,
    Convergence,
}

impl SeriesKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "phi-profile" => Ok(Self::PhiProfile),
            "tau-scan" => Ok(Self::TauScan),
            "convergence" => Ok(Self::Convergence),
            _ => Err(Error::Unknown {
                kind: "plot kind",
                name: s.into(),
            }),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PhiProfile => "phi-profile",
            Self::TauScan => "tau-scan",
            Self::Convergence => "convergence",
        }
    }
}

/// A vertical marker on a plot (e.g. the ends of a τ bracket).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub x: f64,
}

/// A family of curves y_k(x) sharing one abscissa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub kind: SeriesKind,
    pub x_label: String,
    pub x: Vec<f64>,
    pub curves: Vec<Curve>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub markers: Vec<Marker>,
    /// Plot the ordinate on a log scale.
    #[serde(default)]
    pub log_y: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, kind: SeriesKind, x_label: impl Into<String>, x: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind,
            x_label: x_label.into(),
            x,
            curves: Vec::new(),
            markers: Vec::new(),
            log_y: false,
        }
    }

    pub fn curve(mut self, label: impl Into<String>, y: Vec<f64>) -> Self {
        debug_assert_eq!(y.len(), self.x.len());
        self.curves.push(Curve { label: label.into(), y });
        self
    }

    pub fn marker(mut self, label: impl Into<String>, x: f64) -> Self {
        self.markers.push(Marker { label: label.into(), x });
        self
    }

    pub fn log_scale(mut self) -> Self {
        self.log_y = true;
        self
    }

    /// CSV with the abscissa first and one column per curve.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.x_label.clone()];
        header.extend(self.curves.iter().map(|c| c.label.clone()));
        w.write_record(&header)?;
        for (i, x) in self.x.iter().enumerate() {
            let mut row = vec![format!("{x:.12e}")];
            row.extend(self.curves.iter().map(|c| format!("{:.12e}", c.y[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Renders a static line plot.
    pub fn to_svg(&self) -> Result<String> {
        if self.x.is_empty() || self.curves.is_empty() {
            return Err(Error::Empty("series"));
        }
        let (width, height) = (640.0, 400.0);
        let (left, right, top, bottom) = (70.0, 20.0, 30.0, 50.0);
        // Log scale needs a positive value; all-zero curves fall back to linear.
        let log_y = self.log_y && self.curves.iter().flat_map(|c| &c.y).any(|v| v.is_finite() && *v > 0.0);
        let transform = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
        let finite = |v: &f64| v.is_finite() && (!log_y || *v > 0.0);
        let (mut x0, mut x1) = min_max(self.x.iter().copied().chain(self.markers.iter().map(|m| m.x)));
        let (mut y0, mut y1) = min_max(
            self.curves
                .iter()
                .flat_map(|c| c.y.iter().copied().filter(finite).map(transform)),
        );
        if !(y0.is_finite() && y1.is_finite()) {
            return Err(Error::Empty("finite values in series"));
        }
        widen(&mut x0, &mut x1);
        widen(&mut y0, &mut y1);
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * (width - left - right);
        let sy = |y: f64| height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom);
        let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            width / 2.0,
            escape(&self.name)
        );
        let _ = writeln!(
            s,
            r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
            l = left,
            t = top,
            b = height - bottom,
            r = width - right
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let ylabel = if log_y {
                format!("1e{fy:.1}")
            } else {
                format!("{fy:.3}")
            };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
                sx(fx),
                height - bottom + 16.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylabel}</text>"#,
                left - 6.0,
                sy(fy) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            width / 2.0,
            height - 12.0,
            escape(&self.x_label)
        );
        for m in &self.markers {
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{b}" stroke="gray" stroke-dasharray="4 3"/><text x="{x:.2}" y="{ty}" text-anchor="middle" fill="gray">{}</text>"#,
                escape(&m.label),
                x = sx(m.x),
                t = top,
                b = height - bottom,
                ty = top - 4.0
            );
        }
        for (i, c) in self.curves.iter().enumerate() {
            let color = palette[i % palette.len()];
            let mut d = String::new();
            let mut pen_down = false;
            for (x, y) in self.x.iter().zip(&c.y) {
                if finite(y) {
                    let _ = write!(
                        d,
                        "{}{:.2} {:.2} ",
                        if pen_down { "L" } else { "M" },
                        sx(*x),
                        sy(transform(*y))
                    );
                    pen_down = true;
                } else {
                    pen_down = false;
                }
            }
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                d.trim_end()
            );
            let ly = top + 14.0 * (i as f64 + 1.0);
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                width - right - 150.0,
                width - right - 130.0,
                width - right - 125.0,
                ly + 4.0,
                escape(&c.label)
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn widen(lo: &mut f64, hi: &mut f64) {
    if *hi - *lo < 1e-12 * (1.0 + lo.abs()) {
        *lo -= 0.5;
        *hi += 0.5;
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inequality_slack_and_verdicts() {
        let r = CheckRecord::le("c", "a", 3, 1.0, 2.0, 0.0);
        assert_eq!(r.slack, 1.0);
        assert!(r.passed());
        let r = CheckRecord::ge("c", "a", 3, 1.0, 1.0 + 1e-12, 1e-9);
        assert!(r.passed());
        let r = CheckRecord::approx("c", "a", 3, 1.02, 1.0, 0.01, 1e-300);
        assert!(!r.passed());
        assert!(!CheckRecord::le("c", "a", 3, f64::NAN, 1.0, 0.0).passed());
    }

    #[test]
    fn record_serializes_relation_symbols() {
        let r = CheckRecord::le("c", "a", 3, 1.0, 2.0, 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains(r#""relation":"<=""#));
        assert!(json.contains(r#""verdict":"pass""#));
    }

    #[test]
    fn svg_contains_one_path_per_curve() {
        let s = Series::new("cos", SeriesKind::PhiProfile, "r", vec![0.1, 0.2, 0.3])
            .curve("phi", vec![0.99, 0.98, 0.95])
            .curve("drifted", vec![0.9, 0.8, 0.7])
            .marker("r0", 0.15);
        let svg = s.to_svg().unwrap();
        assert_eq!(svg.matches("<path d=\"M").count(), 3);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn empty_series_is_an_error() {
        let s = Series::new("e", SeriesKind::TauScan, "tau", vec![]);
        assert!(s.to_svg().is_err());
    }
}
