//! Measures on `[1, ∞)`: atoms plus closed-form density segments, with CDFs
//! and Mellin–Stieltjes transforms. Lattice measures and the convolution
//! algebra live in [`grid`]; exact sparse atomic measures in [`atomic`].

pub mod atomic;
pub mod grid;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quad::{breakpoints, integrate_pieces, QuadOptions};

pub use atomic::{discrete_integers, AtomicMeasure, DiscreteSystem};
pub use grid::GridMeasure;

/// One oscillating chunk `R(u) = sin(τ log u)` on `(e^{log_lo}, e^{log_hi}]`.
///
/// The phases `τ·log_lo` and `τ·log_hi` are stored reduced mod 2π so the
/// chunk can be evaluated accurately even when `τ·log u` is huge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineChunk {
    pub tau: f64,
    pub log_lo: f64,
    pub log_hi: f64,
    pub phase_lo: f64,
    pub phase_hi: f64,
}

impl SineChunk {
    /// Chunk with phases computed in double precision.
    pub fn new(tau: f64, log_lo: f64, log_hi: f64) -> Self {
        SineChunk { tau, log_lo, log_hi, phase_lo: tau * log_lo, phase_hi: tau * log_hi }
    }

    /// `τ·t` mod 2π for `t` inside the chunk, referenced to the nearer endpoint.
    pub fn phase_at(&self, t: f64) -> f64 {
        if t - self.log_lo <= self.log_hi - t {
            self.phase_lo + self.tau * (t - self.log_lo)
        } else {
            self.phase_hi - self.tau * (self.log_hi - t)
        }
    }

    /// `R(e^t)` (zero outside the chunk).
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.log_lo || t > self.log_hi {
            0.0
        } else {
            self.phase_at(t).sin()
        }
    }

    /// Density of `dR` in the variable `t = log u`: `τ cos(τ t)`.
    pub fn log_density(&self, t: f64) -> f64 {
        self.tau * self.phase_at(t).cos()
    }

    /// `∫ u^{-s} dR(u)` over the part of the chunk below `log_cut`.
    pub fn mellin(&self, s: Complex64, log_cut: f64) -> Complex64 {
        let hi = self.log_hi.min(log_cut);
        if hi <= self.log_lo {
            return Complex64::new(0.0, 0.0);
        }
        let ph = if hi == self.log_hi { self.phase_hi } else { self.phase_at(hi) };
        let den = s * s + self.tau * self.tau;
        let prim = |t: f64, ph: f64| {
            let e = (-s * t).exp();
            e * (self.tau * ph.sin() - s * ph.cos()) * self.tau / den
        };
        prim(hi, ph) - prim(self.log_lo, self.phase_lo)
    }
}

/// Closed-form density `u ↦ density(u)` with its primitive.
#[derive(Clone)]
pub struct Analytic {
    pub name: String,
    pub density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Any primitive of `density` in `u`.
    pub primitive: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `(C, θ)` with `|density(u)| ≤ C u^{θ−1}`, used for tail bounds.
    pub growth: (f64, f64),
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Analytic({}, growth={:?})", self.name, self.growth)
    }
}

/// Density type of a segment.
#[derive(Debug, Clone)]
pub enum DensityKind {
    /// `(1 − 1/u)/log u`.
    RationalLog,
    /// `τ cos(τ log u)/u`.
    SineChunkDerivative(SineChunk),
    /// Sum of the two above on the chunk support.
    RationalLogPlusSine(SineChunk),
    /// Piecewise-linear density in `u` through the given nodes.
    UserTable {
        u: Vec<f64>,
        density: Vec<f64>,
    },
    Analytic(Analytic),
}

/// A density on `(e^{log_a}, e^{log_b}]`; `log_b` may be infinite.
#[derive(Debug, Clone)]
pub struct DensitySegment {
    pub log_a: f64,
    pub log_b: f64,
    pub kind: DensityKind,
}

/// `Ein(t) = ∫_0^t (e^v − 1)/v dv = Σ_{n≥1} t^n/(n·n!)`.
///
/// This is `∫_1^{e^t} (1 − 1/u)/log u du`.
pub fn ein(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut n = 1.0;
    loop {
        term *= t / n;
        let add = term / n;
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() && n > t.abs() {
            break;
        }
        n += 1.0;
    }
    sum
}

/// `(e^t − 1)/t`, the `dt`-density of `dP` in log coordinates.
pub fn rational_log_density_t(t: f64) -> f64 {
    if t.abs() < 1e-300 {
        1.0
    } else {
        t.exp_m1() / t
    }
}

/// `∫_A^∞ e^{−zt}(1 − e^{−t})/t dt` for `Re z ≥ 0`, `|z|` large, by repeated
/// integration by parts: `e^{−zA} Σ_n g^{(n)}(A)/z^{n+1}` with
/// `g(v) = (1 − e^{−v})/v`. Returns the sum and the last term used as
/// error estimate.
pub fn rational_log_tail_asymptotic(z: Complex64, a: f64) -> (Complex64, f64) {
    // g^{(n)}(A) = (−1)^n J_n, J_n = ∫_0^1 r^n e^{−Ar} dr
    let ea = (-a).exp();
    let mut j = if a > 0.0 { -(-a).exp_m1() / a } else { 1.0 };
    let mut sum = Complex64::new(0.0, 0.0);
    let mut zpow = z;
    let mut last = f64::INFINITY;
    for n in 0..60 {
        if n > 0 {
            j = (n as f64 * j - ea) / a;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * j / zpow;
        let mag = term.norm();
        if mag > last {
            break;
        }
        sum += term;
        last = mag;
        if mag <= 1e-18 * sum.norm() {
            break;
        }
        zpow *= z;
    }
    let pre = (-z * a).exp();
    (pre * sum, last * pre.norm())
}

/// Mellin transform with the bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MellinValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// A measure on `[1, ∞)`.
#[derive(Debug, Clone, Default)]
pub struct Measure {
    /// Sorted `(u, weight)` pairs.
    pub atoms: Vec<(f64, f64)>,
    /// Non-overlapping, sorted by `log_a`.
    pub segments: Vec<DensitySegment>,
    pub signed: bool,
}

impl Measure {
    pub fn zero() -> Self {
        Measure::default()
    }

    pub fn atomic(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let signed = atoms.iter().any(|a| a.1 < 0.0);
        for &(u, _) in &atoms {
            if !(u >= 1.0) {
                return Err(Error::Invalid(format!("atom at {u} below 1")));
            }
        }
        Ok(Measure { atoms, segments: Vec::new(), signed })
    }

    /// `dP = (1 − 1/u)/log u du` on `[1, ∞)`.
    pub fn rational_log() -> Self {
        Measure {
            atoms: Vec::new(),
            segments: vec![DensitySegment { log_a: 0.0, log_b: f64::INFINITY, kind: DensityKind::RationalLog }],
            signed: false,
        }
    }

    /// `dΠ_C = dP + Σ dR_k`, chunks sorted and disjoint.
    pub fn continuous_prime(chunks: &[SineChunk]) -> Result<Self> {
        let mut segs = Vec::new();
        let mut cur = 0.0;
        for c in chunks {
            if !(c.log_lo >= cur && c.log_hi > c.log_lo) {
                return Err(Error::Invalid("chunks must be sorted and disjoint".into()));
            }
            if c.log_lo > cur {
                segs.push(DensitySegment { log_a: cur, log_b: c.log_lo, kind: DensityKind::RationalLog });
            }
            segs.push(DensitySegment { log_a: c.log_lo, log_b: c.log_hi, kind: DensityKind::RationalLogPlusSine(*c) });
            cur = c.log_hi;
        }
        segs.push(DensitySegment { log_a: cur, log_b: f64::INFINITY, kind: DensityKind::RationalLog });
        Ok(Measure { atoms: Vec::new(), segments: segs, signed: false })
    }

    /// Signed measure `d/du[E(u)]` for a closed-form `E` with `E(1) = 0`.
    pub fn analytic(a: Analytic) -> Self {
        Measure {
            atoms: Vec::new(),
            segments: vec![DensitySegment { log_a: 0.0, log_b: f64::INFINITY, kind: DensityKind::Analytic(a) }],
            signed: true,
        }
    }

    /// Piecewise-linear density table in `u`.
    pub fn table(u: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if u.len() != density.len() || u.len() < 2 || u[0] < 1.0 || u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("table nodes must be increasing, ≥ 1, and match densities".into()));
        }
        let signed = density.iter().any(|&d| d < 0.0);
        let (la, lb) = (u[0].ln(), u[u.len() - 1].ln());
        Ok(Measure {
            atoms: Vec::new(),
            segments: vec![DensitySegment { log_a: la, log_b: lb, kind: DensityKind::UserTable { u, density } }],
            signed,
        })
    }

    /// Density of the measure with respect to `dt`, `t = log u`.
    pub fn log_density(&self, t: f64) -> f64 {
        for s in &self.segments {
            if t > s.log_a && t <= s.log_b {
                return segment_log_density(&s.kind, t);
            }
        }
        0.0
    }

    /// `μ([1, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        if !(x >= 1.0) {
            return 0.0;
        }
        let lx = x.ln();
        let mut total: f64 = self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum();
        for s in &self.segments {
            if s.log_a >= lx {
                break;
            }
            total += segment_mass(&s.kind, s.log_a, s.log_b.min(lx));
        }
        total
    }

    /// `∫_{1⁻}^{x_cut} u^{−s} dμ(u)`.
    pub fn mellin_stieltjes(&self, s: Complex64, x_cut: f64) -> Result<MellinValue> {
        let log_cut = if x_cut.is_infinite() { f64::INFINITY } else { x_cut.ln() };
        let mut value: Complex64 = self.atoms.iter().take_while(|a| a.0 <= x_cut).map(|&(u, w)| w * (-s * u.ln()).exp()).sum();
        let mut tail_bound = 0.0;
        for seg in &self.segments {
            if seg.log_a >= log_cut {
                break;
            }
            let hi = seg.log_b.min(log_cut);
            let (v, tb) = segment_mellin(&seg.kind, seg.log_a, hi, s)?;
            value += v;
            tail_bound += tb;
        }
        Ok(MellinValue { value, tail_bound })
    }

    /// Minimum of the density over sample points and, for chunks, the
    /// analytic lower bound `1/(2ν log τ) − τ^{−δ}` evaluated from the chunk
    /// geometry. Returns `(sampled_min, analytic_min)`.
    pub fn density_lower_bounds(&self, samples_per_segment: usize) -> (f64, f64) {
        let mut sampled = f64::INFINITY;
        let mut analytic = f64::INFINITY;
        for s in &self.segments {
            let b = if s.log_b.is_finite() { s.log_b } else { s.log_a + 50.0 };
            for i in 0..samples_per_segment {
                let t = s.log_a + (b - s.log_a) * (i as f64 + 0.5) / samples_per_segment as f64;
                // density in u: ρ̃(t)/u
                sampled = sampled.min(segment_log_density(&s.kind, t) * (-t).exp());
            }
            if let DensityKind::RationalLogPlusSine(c) = &s.kind {
                let lt = c.tau.ln();
                let nu = c.log_hi / lt;
                let delta = c.log_lo / lt - 1.0;
                analytic = analytic.min(1.0 / (2.0 * nu * lt) - c.tau.powf(-delta));
            }
        }
        (sampled, analytic)
    }
}

fn table_eval(u: &[f64], d: &[f64], x: f64) -> f64 {
    let i = match u.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(i) => return d[i],
        Err(i) => i,
    };
    if i == 0 || i == u.len() {
        return 0.0;
    }
    let w = (x - u[i - 1]) / (u[i] - u[i - 1]);
    d[i - 1] * (1.0 - w) + d[i] * w
}

/// Density in `t = log u`.
pub(crate) fn segment_log_density(kind: &DensityKind, t: f64) -> f64 {
    match kind {
        DensityKind::RationalLog => rational_log_density_t(t),
        DensityKind::SineChunkDerivative(c) => c.log_density(t),
        DensityKind::RationalLogPlusSine(c) => rational_log_density_t(t) + c.log_density(t),
        DensityKind::UserTable { u, density } => {
            let x = t.exp();
            table_eval(u, density, x) * x
        }
        DensityKind::Analytic(a) => {
            let x = t.exp();
            (a.density)(x) * x
        }
    }
}

/// Mass on `(e^a, e^b]`.
fn segment_mass(kind: &DensityKind, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let chunk = |c: &SineChunk| {
        let pb = if b == c.log_hi { c.phase_hi } else { c.phase_at(b) };
        let pa = if a == c.log_lo { c.phase_lo } else { c.phase_at(a) };
        pb.sin() - pa.sin()
    };
    match kind {
        DensityKind::RationalLog => ein(b) - ein(a),
        DensityKind::SineChunkDerivative(c) => chunk(c),
        DensityKind::RationalLogPlusSine(c) => ein(b) - ein(a) + chunk(c),
        DensityKind::UserTable { u, density } => {
            let (xa, xb) = (a.exp(), b.exp());
            let mut nodes = vec![xa];
            nodes.extend(u.iter().copied().filter(|&x| x > xa && x < xb));
            nodes.push(xb);
            nodes.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (table_eval(u, density, w[0]) + table_eval(u, density, w[1]))).sum()
        }
        DensityKind::Analytic(an) => (an.primitive)(b.exp()) - (an.primitive)(a.exp()),
    }
}

/// `∫_{e^a}^{e^b} u^{−s} dμ` for one segment, with a tail bound when `b = ∞`.
fn segment_mellin(kind: &DensityKind, a: f64, b: f64, s: Complex64) -> Result<(Complex64, f64)> {
    let rl = |a: f64, b: f64| -> Result<Complex64> {
        if b.is_infinite() {
            if s.re <= 1.0 {
                return Err(Error::DivergentTail(s.re));
            }
            let full = (s / (s - 1.0)).ln();
            Ok(full - rational_log_mellin_finite(s, 0.0, a))
        } else {
            Ok(rational_log_mellin_finite(s, a, b))
        }
    };
    match kind {
        DensityKind::RationalLog => Ok((rl(a, b)?, 0.0)),
        DensityKind::SineChunkDerivative(c) => Ok((c.mellin(s, b), 0.0)),
        DensityKind::RationalLogPlusSine(c) => Ok((rl(a, b)? + c.mellin(s, b), 0.0)),
        DensityKind::UserTable { .. } | DensityKind::Analytic(_) => {
            let (hi, tail) = if b.is_infinite() {
                let DensityKind::Analytic(an) = kind else { unreachable!() };
                let (c, theta) = an.growth;
                if s.re <= theta {
                    return Err(Error::DivergentTail(s.re));
                }
                // choose the cut so that C e^{(θ−σ)T}/(σ−θ) ≤ 1e-14
                let t_cut = (a + 1.0).max(((c / (s.re - theta)) / 1e-14).ln() / (s.re - theta));
                (t_cut, c * ((theta - s.re) * t_cut).exp() / (s.re - theta))
            } else {
                (b, 0.0)
            };
            let g = |t: f64| segment_log_density(kind, t) * (-s * t).exp();
            let step = (0.5 / (1.0 + s.im.abs())).max((hi - a) / 20_000.0).min(1.0);
            let pts = breakpoints(a, hi, step, &[]);
            let r = integrate_pieces(&g, &pts, QuadOptions::tol(1e-13)).checked()?;
            Ok((r.value, tail + r.error))
        }
    }
}

/// `∫_a^b e^{−st}(e^t − 1)/t dt` by quadrature.
pub fn rational_log_mellin_finite(s: Complex64, a: f64, b: f64) -> Complex64 {
    if b <= a {
        return Complex64::new(0.0, 0.0);
    }
    let g = |t: f64| (-s * t).exp() * rational_log_density_t(t);
    let step = (0.5 / (1.0 + s.im.abs())).max((b - a) / 50_000.0).min(1.0);
    let pts = breakpoints(a, b, step, &[]);
    integrate_pieces(&g, &pts, QuadOptions::tol(1e-14)).value
}
