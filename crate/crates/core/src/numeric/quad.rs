//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Settings for adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_depth: 30, max_intervals: 20_000 }
    }
}

impl QuadOptions {
    pub fn tol(tol: f64) -> Self {
        QuadOptions { abs_tol: tol, rel_tol: tol, ..Default::default() }
    }

    pub fn abs(abs_tol: f64) -> Self {
        QuadOptions { abs_tol, rel_tol: 0.0, ..Default::default() }
    }
}

/// Value, error estimate and bookkeeping of a quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evals: 0, converged: true }
    }

    pub fn combine(self, o: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + o.value,
            error: self.error + o.error,
            evals: self.evals + o.evals,
            converged: self.converged && o.converged,
        }
    }

    /// `Err(ToleranceNotMet)` unless converged.
    pub fn checked(self) -> Result<QuadResult> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::ToleranceNotMet { value: self.value.norm(), error: self.error })
        }
    }
}

/// One 15-point Kronrod rule with the QUADPACK error heuristic.
pub fn gk15<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, a: f64, b: f64) -> (Complex64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = fc.norm() * WGK[7];
    let mut fv1 = [Complex64::new(0.0, 0.0); 7];
    let mut fv2 = [Complex64::new(0.0, 0.0); 7];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += (f1 + f2) * WGK[j];
        resabs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            resg += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = (fc - mean).norm() * WGK[7];
    for j in 0..7 {
        resasc += ((fv1[j] - mean).norm() + (fv2[j] - mean).norm()) * WGK[j];
    }
    let value = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg) * h).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err, resabs)
}

struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    resabs: f64,
    depth: u32,
}

impl Piece {
    /// Error already at the rounding floor of the rule.
    fn roundoff_limited(&self) -> bool {
        self.err <= ROUNDOFF * self.resabs * 1.000001
    }
}

const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult::zero();
    }
    let (v, e, ra) = gk15(f, a, b);
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Piece> = Vec::new();
    heap.push(Piece { a, b, value: v, err: e, resabs: ra, depth: 0 });
    let mut total = v;
    let mut total_err = e;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= tol || heap.is_empty() || heap.len() + frozen.len() >= opts.max_intervals {
            break;
        }
        let p = heap.pop().expect("non-empty heap");
        if p.depth >= opts.max_depth || p.roundoff_limited() {
            frozen.push(p);
            continue;
        }
        let m = 0.5 * (p.a + p.b);
        if m == p.a || m == p.b {
            frozen.push(p);
            continue;
        }
        let (v1, e1, r1) = gk15(f, p.a, m);
        let (v2, e2, r2) = gk15(f, m, p.b);
        evals += 30;
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1, resabs: r1, depth: p.depth + 1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2, resabs: r2, depth: p.depth + 1 });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut floor = 0.0;
    let mut all_limited = true;
    for p in heap.iter().chain(frozen.iter()) {
        value += p.value;
        err += p.err;
        floor += ROUNDOFF * p.resabs;
        all_limited &= p.roundoff_limited();
    }
    let tol = opts.abs_tol.max(opts.rel_tol * value.norm());
    // a request below the rounding floor counts as met once every interval
    // is limited by rounding; the reported error stays honest
    let converged = err <= tol || (all_limited && err <= floor * 1.000001);
    QuadResult { value, error: err, evals, converged }
}

/// Real-valued convenience wrapper; returns the real part.
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    integrate(&|x| Complex64::new(f(x), 0.0), a, b, opts)
}

/// Integrate over consecutive pieces `[p_i, p_{i+1}]`, in parallel, each with
/// an absolute tolerance share proportional to its length.
pub fn integrate_pieces<F: Fn(f64) -> Complex64 + Sync + ?Sized>(f: &F, points: &[f64], opts: QuadOptions) -> QuadResult {
    if points.len() < 2 {
        return QuadResult::zero();
    }
    let span = (points[points.len() - 1] - points[0]).abs().max(f64::MIN_POSITIVE);
    points
        .par_windows(2)
        .map(|w| {
            let share = (w[1] - w[0]).abs() / span;
            let o = QuadOptions { abs_tol: opts.abs_tol * share, ..opts };
            integrate(f, w[0], w[1], o)
        })
        .reduce(QuadResult::zero, QuadResult::combine)
}

/// Breakpoints `a = p_0 < … < p_n = b` spaced at most `step` apart, merged with `extra`.
pub fn breakpoints(a: f64, b: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let n = (((b - a) / step).ceil() as usize).max(1);
    let mut pts: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    for &x in extra {
        if x > a && x < b {
            pts.push(x);
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    pts
}
