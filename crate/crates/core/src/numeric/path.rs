//! Parametrized contours and integration along them.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::quad::{integrate, QuadOptions, QuadResult};
use crate::error::{Error, Result};

/// Which side of the saddle window a connector lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// Role of a segment inside a composite contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Vertical,
    Horizontal,
    HlArc,
    Descent(i64),
    Connector(i64),
    Delta(u8, Side),
    Generic,
}

/// A point-and-velocity map `t ↦ (γ(t), γ'(t))`.
pub type CurveFn = Arc<dyn Fn(f64) -> (Complex64, Complex64) + Send + Sync>;

/// Geometric description of a segment.
#[derive(Clone)]
pub enum Param {
    Line { a: Complex64, b: Complex64 },
    Arc { center: Complex64, radius: f64, theta0: f64, theta1: f64 },
    Curve { f: CurveFn, t0: f64, t1: f64 },
}

impl fmt::Debug for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Line { a, b } => write!(f, "Line({a} -> {b})"),
            Param::Arc { center, radius, theta0, theta1 } => {
                write!(f, "Arc(c={center}, r={radius}, {theta0}..{theta1})")
            }
            Param::Curve { t0, t1, .. } => write!(f, "Curve({t0}..{t1})"),
        }
    }
}

impl Param {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Param::Line { .. } => (0.0, 1.0),
            Param::Arc { theta0, theta1, .. } => (*theta0, *theta1),
            Param::Curve { t0, t1, .. } => (*t0, *t1),
        }
    }

    /// Point and derivative at parameter `t`.
    pub fn eval(&self, t: f64) -> (Complex64, Complex64) {
        match self {
            Param::Line { a, b } => (a + (b - a) * t, b - a),
            Param::Arc { center, radius, .. } => {
                let e = Complex64::from_polar(*radius, t);
                (center + e, Complex64::i() * e)
            }
            Param::Curve { f, .. } => f(t),
        }
    }

    pub fn start(&self) -> Complex64 {
        self.eval(self.domain().0).0
    }

    pub fn end(&self) -> Complex64 {
        self.eval(self.domain().1).0
    }

    pub fn reversed(&self) -> Param {
        match self {
            Param::Line { a, b } => Param::Line { a: *b, b: *a },
            Param::Arc { center, radius, theta0, theta1 } => {
                Param::Arc { center: *center, radius: *radius, theta0: *theta1, theta1: *theta0 }
            }
            Param::Curve { f, t0, t1 } => {
                let g = f.clone();
                let (a, b) = (*t0, *t1);
                Param::Curve {
                    f: Arc::new(move |t| {
                        let (z, dz) = g(a + b - t);
                        (z, -dz)
                    }),
                    t0: a,
                    t1: b,
                }
            }
        }
    }
}

/// One tagged piece of a contour.
#[derive(Debug, Clone)]
pub struct Segment {
    pub kind: SegmentKind,
    pub tag: String,
    pub param: Param,
}

impl Segment {
    pub fn line(kind: SegmentKind, tag: impl Into<String>, a: Complex64, b: Complex64) -> Self {
        Segment { kind, tag: tag.into(), param: Param::Line { a, b } }
    }
}

/// Ordered list of segments.
#[derive(Debug, Clone, Default)]
pub struct ContourPath {
    pub segments: Vec<Segment>,
}

impl ContourPath {
    pub fn new() -> Self {
        ContourPath { segments: Vec::new() }
    }

    pub fn push(&mut self, s: Segment) {
        self.segments.push(s);
    }

    pub fn start(&self) -> Option<Complex64> {
        self.segments.first().map(|s| s.param.start())
    }

    pub fn end(&self) -> Option<Complex64> {
        self.segments.last().map(|s| s.param.end())
    }

    /// Largest jump between consecutive segment endpoints.
    pub fn max_gap(&self) -> f64 {
        self.segments.windows(2).map(|w| (w[0].param.end() - w[1].param.start()).norm()).fold(0.0, f64::max)
    }

    pub fn is_continuous(&self, tol: f64) -> bool {
        self.max_gap() <= tol
    }

    pub fn reversed(&self) -> ContourPath {
        let segments =
            self.segments.iter().rev().map(|s| Segment { kind: s.kind, tag: s.tag.clone(), param: s.param.reversed() }).collect();
        ContourPath { segments }
    }

    pub fn concat(&self, other: &ContourPath) -> ContourPath {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        ContourPath { segments }
    }
}

/// Per-segment and total result of a path integral.
#[derive(Debug, Clone)]
pub struct PathIntegral {
    pub value: Complex64,
    pub error: f64,
    pub segments: Vec<(String, QuadResult)>,
}

/// `∫_path g(s) ds`, adaptive Gauss–Kronrod per segment.
pub fn integrate_path<G: Fn(Complex64) -> Complex64>(g: &G, path: &ContourPath, tol: f64) -> Result<PathIntegral> {
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut gross = 0.0;
    let mut segs = Vec::with_capacity(path.segments.len());
    for s in &path.segments {
        let (t0, t1) = s.param.domain();
        let h = |t: f64| {
            let (z, dz) = s.param.eval(t);
            g(z) * dz
        };
        let r = integrate(&h, t0, t1, QuadOptions::tol(tol));
        value += r.value;
        error += r.error;
        gross += r.value.norm();
        segs.push((s.tag.clone(), r));
    }
    if error > tol * (1.0 + gross) {
        return Err(Error::ToleranceNotMet { value: value.norm(), error });
    }
    Ok(PathIntegral { value, error, segments: segs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn residue_on_unit_circle() {
        let mut p = ContourPath::new();
        p.push(Segment {
            kind: SegmentKind::Generic,
            tag: "circle".into(),
            param: Param::Arc { center: Complex64::new(0.0, 0.0), radius: 1.0, theta0: 0.0, theta1: TAU },
        });
        let r = integrate_path(&|s: Complex64| 1.0 / s, &p, 1e-12).unwrap();
        assert!((r.value - Complex64::new(0.0, TAU)).norm() < 1e-10);
    }

    #[test]
    fn constant_on_diagonal() {
        let mut p = ContourPath::new();
        p.push(Segment::line(SegmentKind::Generic, "d", Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0)));
        let r = integrate_path(&|_s: Complex64| Complex64::new(1.0, 0.0), &p, 1e-12).unwrap();
        assert!((r.value - Complex64::new(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn curve_reversal_negates() {
        let f: CurveFn = Arc::new(|t: f64| (Complex64::new(t, t * t), Complex64::new(1.0, 2.0 * t)));
        let mut p = ContourPath::new();
        p.push(Segment { kind: SegmentKind::Generic, tag: "parabola".into(), param: Param::Curve { f, t0: 0.0, t1: 2.0 } });
        let g = |s: Complex64| s.sin() * s;
        let a = integrate_path(&g, &p, 1e-12).unwrap().value;
        let b = integrate_path(&g, &p.reversed(), 1e-12).unwrap().value;
        assert!((a + b).norm() < 1e-11);
        assert!(p.is_continuous(0.0));
    }
}
