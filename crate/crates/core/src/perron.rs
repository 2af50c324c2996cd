//! Perron inversion for `∫_1^x N(u) du`, along a vertical line and along the
//! composite contour assembled from descent paths, connectors and the
//! Hilberdink–Lapidus curve.
//!
//! Upper-half-plane integrals are combined through `ζ(s̄) = conj ζ(s)`:
//! `(1/2πi)∫_{κ−i∞}^{κ+i∞} F ds = (1/π) Re ∫_0^∞ F(κ+it) dt`.

use std::f64::consts::{E, FRAC_PI_2, PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::path::{CurveFn, Param, Segment, SegmentKind, Side};
use crate::numeric::quad::{breakpoints, integrate_pieces, QuadOptions};
use crate::numeric::ScaledComplex;
use crate::saddle::{ContributionReport, DescentPath, SaddlePoint, SaddleProblem};
use crate::system::{ContinuousPrimeSystem, TermF64};
use crate::zeta::ZetaEvaluator;

/// Integrand source for the Perron formula.
#[derive(Debug, Clone)]
pub struct PerronProblem {
    zeta: ZetaEvaluator,
    terms: Vec<TermF64>,
    primes: Option<Vec<(f64, u32)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalOptions {
    /// Truncation height; grown by doubling from `max(10³, x)` when absent.
    pub t_cut: Option<f64>,
    /// Relative quadrature tolerance.
    pub tol: f64,
    /// Allowed tail bound relative to the main term.
    pub tail_tol: f64,
}

impl Default for VerticalOptions {
    fn default() -> Self {
        VerticalOptions { t_cut: None, tol: 1e-11, tail_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronResult {
    pub x: f64,
    pub kappa: f64,
    pub t_cut: f64,
    /// `(x² − 1)/2` for a continuous system, 0 for a finite Euler product.
    pub main_term: f64,
    /// `(1/π) Re ∫_0^{T} F dt` over the remaining integrand.
    pub contour_value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub total: f64,
}

impl PerronResult {
    pub fn uncertainty(&self) -> f64 {
        self.quad_error + self.tail_bound
    }
}

/// Two-sided tail constants of the term sum on `σ = κ`, `t ≥ T`.
#[derive(Debug, Clone, Copy)]
struct TailConstants {
    b1: f64,
    d1: f64,
    d2: f64,
    beta: f64,
    dbeta: f64,
}

impl PerronProblem {
    pub fn continuous(sys: &ContinuousPrimeSystem) -> Result<Self> {
        Ok(PerronProblem { zeta: ZetaEvaluator::new(sys)?, terms: sys.terms_f64(), primes: None })
    }

    pub fn discrete(primes: &[(f64, u32)]) -> Result<Self> {
        Ok(PerronProblem { zeta: ZetaEvaluator::discrete(primes)?, terms: Vec::new(), primes: Some(primes.to_vec()) })
    }

    pub fn zeta(&self) -> &ZetaEvaluator {
        &self.zeta
    }

    /// `|Σ(s)| ≤ Σ_k ½(|A_k| + |B_k|)(1/|s − iτ_k| + 1/|s + iτ_k|)`.
    pub fn term_sum_bound(&self, s: C) -> f64 {
        self.terms
            .iter()
            .map(|d| {
                let a = (d.log_tau - d.lambda * s.re).exp();
                let b = (d.log_tau - d.nu * d.log_tau * s.re).exp();
                let m = C::new(s.re, s.im - d.tau).norm();
                let p = C::new(s.re, s.im + d.tau).norm();
                0.5 * (a + b) * (1.0 / m + 1.0 / p)
            })
            .sum()
    }

    fn tail_constants(&self, kappa: f64, t: f64) -> TailConstants {
        let mut c = TailConstants { b1: 0.0, d1: 0.0, d2: 0.0, beta: 0.0, dbeta: 0.0 };
        for d in &self.terms {
            let (c1, c2) = (d.lambda, d.nu * d.log_tau);
            let a = (d.log_tau - c1 * kappa).exp();
            let b = (d.log_tau - c2 * kappa).exp();
            if 2.0 * d.tau <= t {
                c.b1 += 1.5 * (a + b);
                c.d1 += 1.5 * (c1 * a + c2 * b);
                c.d2 += 2.5 * (a + b);
            } else {
                c.beta += (a + b) / kappa;
                c.dbeta += (c1 * a + c2 * b) / kappa + (a + b) / (kappa * kappa);
            }
        }
        c
    }

    fn tail_bound(&self, x_ln: f64, kappa: f64, t: f64) -> f64 {
        let pref = ((kappa + 1.0) * x_ln).exp() / (PI * x_ln);
        match &self.primes {
            Some(ps) => {
                let z: f64 = ps.iter().map(|&(p, m)| -(m as f64) * (1.0 - p.powf(-kappa)).ln()).sum::<f64>().exp();
                let d: f64 = ps.iter().map(|&(p, m)| m as f64 * p.ln() * p.powf(-kappa) / (1.0 - p.powf(-kappa))).sum();
                let crude = ((kappa + 1.0) * x_ln).exp() * z / (PI * t);
                let ibp = pref * z * (2.0 / (t * t) + d / t + (2.0 * kappa + 1.0) / (3.0 * t.powi(3)));
                crude.min(ibp)
            }
            None => {
                if self.terms.is_empty() {
                    return 0.0;
                }
                let c = self.tail_constants(kappa, t);
                let bmax = c.b1 / t + c.beta;
                let g_t = bmax * bmax.exp() / (t * t);
                let dg = bmax.exp()
                    * (c.d1 / (2.0 * t * t)
                        + c.d2 / (3.0 * t.powi(3))
                        + c.dbeta / t
                        + 2.0 * c.b1 * (1.0 / (3.0 * t.powi(3)) + kappa / (4.0 * t.powi(4)))
                        + 2.0 * c.beta * (1.0 / (2.0 * t * t) + kappa / (3.0 * t.powi(3))));
                pref * (g_t + dg)
            }
        }
    }

    /// Integrand on `σ = κ` at height `t`: `x^{s+1}(e^Σ − 1)/((s−1)(s+1))`
    /// for a continuous system and `x^{s+1}ζ(s)/(s(s+1))` for a finite
    /// Euler product.
    fn vertical_integrand(&self, x_ln: f64, kappa: f64, t: f64) -> C {
        let s = C::new(kappa, t);
        let xs = (C::new(kappa + 1.0, t) * x_ln).exp();
        match &self.primes {
            Some(_) => {
                let z = self.zeta.zeta(s).unwrap_or(C::new(f64::NAN, 0.0));
                xs * z / (s * (s + 1.0))
            }
            None => {
                let sum = self.zeta.term_sum(s);
                let em1 = if sum.norm() < 1e-5 { sum * (1.0 + sum * (0.5 + sum / 6.0)) } else { sum.exp() - 1.0 };
                xs * em1 / ((s - 1.0) * (s + 1.0))
            }
        }
    }

    /// `∫_1^x N(u) du` by the vertical-line Perron formula at abscissa `κ > 1`.
    pub fn vertical(&self, x: f64, kappa: f64, opts: VerticalOptions) -> Result<PerronResult> {
        if !(kappa > 1.0) || !(x > 1.0) {
            return Err(Error::Invalid(format!("need κ > 1 and x > 1 (κ = {kappa}, x = {x})")));
        }
        let x_ln = x.ln();
        if (kappa + 1.0) * x_ln > 700.0 {
            return Err(Error::Invalid(format!("x^(κ+1) overflows for log x = {x_ln}")));
        }
        let main_term = if self.primes.is_some() { 0.0 } else { 0.5 * (x * x - 1.0) };
        let scale = if self.primes.is_some() { x * x / 2.0 } else { main_term.abs().max(1.0) };
        let mut t_cut = opts.t_cut.unwrap_or(1e3f64.max(x));
        let mut tail = self.tail_bound(x_ln, kappa, t_cut);
        if opts.t_cut.is_none() {
            let mut doublings = 0;
            while tail > opts.tail_tol * scale && doublings < 12 {
                t_cut *= 2.0;
                tail = self.tail_bound(x_ln, kappa, t_cut);
                doublings += 1;
            }
        }
        if tail > opts.tail_tol * scale {
            return Err(Error::TailTooLarge { bound: tail, tol: opts.tail_tol * scale });
        }
        let step = PI / x_ln;
        let mut extra: Vec<f64> = self.terms.iter().map(|d| d.tau).filter(|&t| t < t_cut).collect();
        extra.extend(self.terms.iter().flat_map(|d| [d.tau - 2.0, d.tau + 2.0]).filter(|&t| t > 0.0 && t < t_cut));
        let pts = breakpoints(0.0, t_cut, step.max(t_cut / 2e6), &extra);
        let f = |t: f64| self.vertical_integrand(x_ln, kappa, t);
        let r = integrate_pieces(&f, &pts, QuadOptions::tol(opts.tol));
        let contour_value = r.value.re / PI;
        Ok(PerronResult {
            x,
            kappa,
            t_cut,
            main_term,
            contour_value,
            quad_error: r.error / PI,
            tail_bound: tail,
            total: main_term + contour_value,
        })
    }
}

/// Settings of the composite contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeOptions {
    pub c_m: f64,
    /// Height up to which the upper part is integrated numerically; beyond it
    /// the remaining pieces are bounded in absolute value.
    pub t_cut: Option<f64>,
    pub tol: f64,
}

impl Default for CompositeOptions {
    fn default() -> Self {
        CompositeOptions { c_m: 0.01, t_cut: None, tol: 1e-10 }
    }
}

/// Ledger entry for one piece of the composite contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub tag: String,
    pub kind: SegmentKind,
    pub start: (f64, f64),
    pub end: (f64, f64),
    /// Whether the value was integrated (otherwise only bounded).
    pub numeric: bool,
    pub log10_abs: f64,
    pub phase: f64,
    /// `log10 ∫ |F| |ds|` or a certified upper bound for it.
    pub log10_abs_integral: f64,
    pub log10_error: f64,
    /// Asymptotic envelope of the segment, with unit implied constant.
    pub bound_log10_abs: f64,
    /// `log10 |segment| − log10 |saddle term at m = 0|`.
    pub gap_log10: f64,
    pub below_saddle: bool,
    pub within_envelope: bool,
}

/// Contour geometry in terms of heights and abscissae.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeGeometry {
    pub tau: f64,
    pub m_max: i64,
    pub sigma0: f64,
    pub sigma_prime: f64,
    pub c_doubleprime: f64,
    pub t1: (f64, f64),
    pub t2: (f64, f64),
    pub t3: (f64, f64),
    pub t_cut: f64,
    /// `T_2^±` moved outside `T_1^±` because `c″` was too small.
    pub t2_adjusted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeResult {
    pub k: usize,
    pub log_x: f64,
    pub geometry: CompositeGeometry,
    pub rho: f64,
    /// `log(ρx²/2)`.
    pub residue_ln: f64,
    pub segments: Vec<SegmentRecord>,
    pub saddles: ContributionReport,
    /// `(1/π) Im` of the summed numeric segments.
    pub remainder: ScaledComplex,
    /// Absolute uncertainty of the remainder: quadrature errors plus bounds
    /// on the pieces not integrated.
    pub remainder_uncertainty_ln: f64,
    /// Pointwise sign of `Re ½A_k/(s − iτ_k)` on `Δ_0^±` (all samples).
    pub delta0_negative: bool,
    pub closes: bool,
}

impl CompositeResult {
    /// `ρx²/2 + remainder` in `f64`, when representable.
    pub fn total(&self) -> f64 {
        self.residue_ln.exp() + self.remainder.to_complex().re
    }

    pub fn uncertainty(&self) -> f64 {
        self.remainder_uncertainty_ln.exp()
    }
}

/// `log F(s)` for the Perron integrand `x^{s+1} e^{Σ(s)}/((s−1)(s+1))`, with
/// the phase of `x^{it}` anchored at `τ_k` near it.
struct LogIntegrand<'a> {
    zeta: &'a ZetaEvaluator,
    log_x: f64,
    tau: f64,
    chi: f64,
}

impl LogIntegrand<'_> {
    fn eval(&self, s: C) -> C {
        let t = s.im;
        let phase = if (t - self.tau).abs() <= 0.5 * self.tau { self.chi + (t - self.tau) * self.log_x } else { t * self.log_x };
        let xs = C::new((s.re + 1.0) * self.log_x, phase);
        xs + self.zeta.term_sum(s) - (s - 1.0).ln() - (s + 1.0).ln()
    }
}

/// `σ` on the Hilberdink–Lapidus curve.
pub fn hl_sigma(t: f64) -> f64 {
    if t <= E.powf(E) {
        1.0 - 1.0 / E
    } else {
        let l = t.ln();
        1.0 - l.ln() / l
    }
}

fn hl_curve(t0: f64, t1: f64) -> Param {
    let f: CurveFn = Arc::new(|t: f64| {
        let ee = E.powf(E);
        let d = if t <= ee {
            0.0
        } else {
            let l = t.ln();
            -(1.0 - l.ln()) / (t * l * l)
        };
        (C::new(hl_sigma(t), t), C::new(d, 1.0))
    });
    Param::Curve { f, t0, t1 }
}

impl SaddleProblem {
    /// `c″` for the window `|t − τ| ≥ u_*`, from the measured
    /// `c′ = (1 − (1 + (u_*/σ_0)²)^{−1/2}) (log x/log log x)^{1/3}`.
    pub fn c_doubleprime_for(&self, sigma0: f64, u_star: f64) -> (f64, f64) {
        let (lx, llx) = (self.log_x, self.log_x.ln());
        let q = lx / llx;
        let c_prime = (1.0 - 1.0 / (1.0 + (u_star / sigma0).powi(2)).sqrt()) * q.cbrt();
        let peak = 0.5 * (self.log_tau - self.lambda * sigma0).exp() / sigma0;
        let lhs = peak * (1.0 - c_prime / q.cbrt());
        ((SQRT_2 * q.sqrt() - lhs) / q.powf(1.0 / 6.0), c_prime)
    }

    /// `c″` for the current `m_max` window, `u_* = (2π m_max + π/2)/Λ`.
    pub fn compute_c_doubleprime(&self, sigma0: f64) -> f64 {
        let u = (2.0 * PI * self.m_max() as f64 + FRAC_PI_2) / self.lambda;
        self.c_doubleprime_for(sigma0, u).0
    }
}

/// `log ∫ |F| |ds|` along the Hilberdink–Lapidus curve up to `t_max` for the
/// trivial system, `F = x^{s+1}/((s−1)(s+1))`.
pub fn k0_hl_abs_integral_ln(log_x: f64, t_max: f64) -> f64 {
    let ee = E.powf(E);
    let lref = 2.0 * log_x;
    let f = |t: f64| {
        let sg = hl_sigma(t);
        let s = C::new(sg, t);
        let d = if t <= ee { 0.0 } else { -(1.0 - t.ln().ln()) / (t * t.ln().powi(2)) };
        let v = ((sg + 1.0) * log_x - lref).exp() / ((s - 1.0).norm() * (s + 1.0).norm()) * (1.0 + d * d).sqrt();
        C::new(v, 0.0)
    };
    let mut pts = vec![0.0, ee.min(t_max)];
    let mut t = ee;
    while t * 10.0 < t_max {
        t *= 10.0;
        pts.push(t);
    }
    if t_max > ee {
        pts.push(t_max);
    }
    lref + integrate_pieces(&f, &pts, QuadOptions::tol(1e-12)).value.re.ln()
}

/// Least-squares slope of `log ∫_{Γ_HL} |F| |ds|` against `log x`.
pub fn k0_hl_exponent(log_xs: &[f64], t_max: f64) -> f64 {
    let ys: Vec<f64> = log_xs.iter().map(|&l| k0_hl_abs_integral_ln(l, t_max)).collect();
    let n = log_xs.len() as f64;
    let mx = log_xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = log_xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = log_xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

struct SegmentValue {
    value: ScaledComplex,
    error_ln: f64,
    abs_ln: f64,
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl PerronProblem {
    fn integrate_segment(&self, li: &LogIntegrand, param: &Param, tol: f64) -> SegmentValue {
        let (t0, t1) = param.domain();
        let n = 64;
        let mut lref = f64::NEG_INFINITY;
        for i in 0..=n {
            let (z, _) = param.eval(t0 + (t1 - t0) * i as f64 / n as f64);
            lref = lref.max(li.eval(z).re);
        }
        let (za, zb) = (param.start(), param.end());
        let span_t = (zb.im - za.im).abs().max((t1 - t0).abs() * if matches!(param, Param::Curve { .. }) { 1.0 } else { 0.0 });
        let pieces = ((span_t * li.log_x / PI).ceil() as usize).clamp(1, 4_000_000);
        let pts: Vec<f64> = (0..=pieces).map(|i| t0 + (t1 - t0) * i as f64 / pieces as f64).collect();
        let f = |t: f64| {
            let (z, dz) = param.eval(t);
            (li.eval(z) - lref).exp() * dz
        };
        let g = |t: f64| {
            let (z, dz) = param.eval(t);
            C::new((li.eval(z).re - lref).exp() * dz.norm(), 0.0)
        };
        let r = integrate_pieces(&f, &pts, QuadOptions::tol(tol));
        let a = integrate_pieces(&g, &pts, QuadOptions::tol(1e-8));
        SegmentValue {
            value: ScaledComplex::new(r.value, lref),
            error_ln: lref + r.error.max(1e-300).ln(),
            abs_ln: lref + a.value.re.abs().max(1e-300).ln(),
        }
    }

    /// Certified bound for `∫ |F| |ds|` along `σ(t) + it`, `t ∈ [T, ∞)`,
    /// using `|e^Σ| ≤ e^{|Σ|}` and `v = T/t`.
    fn abs_tail_bound(&self, log_x: f64, sigma: &(dyn Fn(f64) -> f64 + Sync), dsig: &(dyn Fn(f64) -> f64 + Sync), t0: f64) -> f64 {
        let lref = 2.0 * log_x - t0.ln();
        let f = |v: f64| {
            if v <= 0.0 {
                return C::new(1.0, 0.0);
            }
            let t = t0 / v;
            let s = C::new(sigma(t), t);
            let ln_abs = (s.re + 1.0) * log_x + self.term_sum_bound(s) - (s - 1.0).norm().ln() - (s + 1.0).norm().ln();
            let jac = (1.0 + dsig(t).powi(2)).sqrt() * t0 / (v * v);
            C::new((ln_abs - lref).exp() * jac, 0.0)
        };
        let mut pts = vec![0.0, 1.0];
        for d in &self.terms {
            if d.tau > t0 {
                let v = t0 / d.tau;
                pts.extend([v * 0.999, v, v * 1.001]);
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let r = integrate_pieces(&f, &pts, QuadOptions::tol(1e-8));
        lref + (r.value.re.abs() + r.error).ln() + 1e-6
    }

    /// Certified bound for `∫|F||ds|` on a horizontal segment at height `t`.
    fn abs_horizontal_bound(&self, log_x: f64, t: f64, s0: f64, s1: f64) -> f64 {
        let (lo, hi) = (s0.min(s1), s0.max(s1));
        let lref = (hi + 1.0) * log_x;
        let f = |sg: f64| {
            let s = C::new(sg, t);
            let ln_abs = (sg + 1.0) * log_x + self.term_sum_bound(s) - (s - 1.0).norm().ln() - (s + 1.0).norm().ln();
            C::new((ln_abs - lref).exp(), 0.0)
        };
        let r = integrate_pieces(&f, &[lo, hi], QuadOptions::tol(1e-10));
        lref + (r.value.re.abs() + r.error).max(1e-300).ln() + 1e-6
    }

    /// Perron integral for `x = x_k` over the composite contour.
    pub fn composite(&self, sys: &ContinuousPrimeSystem, k: usize, opts: CompositeOptions) -> Result<CompositeResult> {
        if self.primes.is_some() {
            return Err(Error::Invalid("composite contour needs a continuous system".into()));
        }
        let sp = SaddleProblem::new(sys, k)?.with_c_m(opts.c_m);
        let (tau, lx, lt) = (sp.tau, sp.log_x, sp.log_tau);
        let llx = lx.ln();
        let m_max = sp.m_max();
        let mut saddles: Vec<(SaddlePoint, DescentPath)> = Vec::new();
        for m in -m_max..=m_max {
            let s = sp.find_saddle(m)?;
            let p = sp.trace_descent(&s)?;
            saddles.push((s, p));
        }
        let s0 = saddles.iter().find(|x| x.0.m == 0).map(|x| x.0.clone()).expect("m = 0 traced");
        let sigma0 = s0.w.re;
        let contributions = sp.saddle_contribution(&saddles)?;
        let c2 = sp.compute_c_doubleprime(sigma0);
        let q = lx / llx;
        let (first, last) = (&saddles[0], &saddles[saddles.len() - 1]);
        let t1 = (tau + first.0.u_minus, tau + last.0.u_plus);
        let mut off = (0.5 * c2 * q.powf(1.0 / 6.0)).exp();
        let min_off = (t1.1 - tau).max(tau - t1.0) + FRAC_PI_2 / sp.lambda;
        let t2_adjusted = !(c2 > 0.0) || off < min_off;
        if t2_adjusted {
            off = min_off;
        }
        let t2 = (tau - off, tau + off);
        let sigma_prime = (1.0 - 0.5 * SQRT_2 * c2 / (lx.cbrt() * llx.powf(2.0 / 3.0))) / (1.0 + sp.delta);
        let t3 = (tau.powf(0.2), tau.powi(5));
        if !(t3.0 < t2.0) {
            return Err(Error::Invalid(format!("T_3^- = {} is not below T_2^- = {}", t3.0, t2.0)));
        }
        let t_cut = opts.t_cut.unwrap_or((20.0 * tau).max(1e4)).min(t3.1).max(t2.1 + 1.0);
        if t_cut * lx > 2e7 {
            return Err(Error::Invalid(format!("composite contour up to t = {t_cut:e} is too long to integrate")));
        }
        let geometry = CompositeGeometry { tau, m_max, sigma0, sigma_prime, c_doubleprime: c2, t1, t2, t3, t_cut, t2_adjusted };

        let li = LogIntegrand { zeta: &self.zeta, log_x: lx, tau, chi: sp.chi };
        let sig_m = first.1.sigma_minus;
        let sig_p = last.1.sigma_plus;
        let cc = |a: f64, b: f64| C::new(a, b);
        let mut segs: Vec<Segment> = Vec::new();
        segs.push(Segment { kind: SegmentKind::HlArc, tag: "hl-".into(), param: hl_curve(0.0, t3.0) });
        segs.push(Segment::line(SegmentKind::Delta(4, Side::Lower), "delta4-", cc(hl_sigma(t3.0), t3.0), cc(sigma_prime, t3.0)));
        segs.push(Segment::line(SegmentKind::Delta(3, Side::Lower), "delta3-", cc(sigma_prime, t3.0), cc(sigma_prime, t2.0)));
        segs.push(Segment::line(SegmentKind::Delta(2, Side::Lower), "delta2-", cc(sigma_prime, t2.0), cc(sigma0, t2.0)));
        segs.push(Segment::line(SegmentKind::Delta(1, Side::Lower), "delta1-", cc(sigma0, t2.0), cc(sigma0, t1.0)));
        segs.push(Segment::line(SegmentKind::Delta(0, Side::Lower), "delta0-", cc(sigma0, t1.0), cc(sig_m, t1.0)));
        let mut conn = Vec::new();
        for w in saddles.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let (ta, tb) = (tau + a.0.u_plus, tau + b.0.u_minus);
            let (sa, sb) = (a.1.sigma_plus, b.1.sigma_minus);
            conn.push(Segment::line(SegmentKind::Connector(a.0.m), format!("upsilon{}v", a.0.m), cc(sa, ta), cc(sa, tb)));
            conn.push(Segment::line(SegmentKind::Connector(a.0.m), format!("upsilon{}h", a.0.m), cc(sa, tb), cc(sb, tb)));
        }
        segs.extend(conn);
        segs.push(Segment::line(SegmentKind::Delta(0, Side::Upper), "delta0+", cc(sig_p, t1.1), cc(sigma0, t1.1)));
        segs.push(Segment::line(SegmentKind::Delta(1, Side::Upper), "delta1+", cc(sigma0, t1.1), cc(sigma0, t2.1)));
        segs.push(Segment::line(SegmentKind::Delta(2, Side::Upper), "delta2+", cc(sigma0, t2.1), cc(sigma_prime, t2.1)));
        let top_numeric = t_cut >= t3.1;
        segs.push(Segment::line(SegmentKind::Delta(3, Side::Upper), "delta3+", cc(sigma_prime, t2.1), cc(sigma_prime, t_cut)));
        if top_numeric {
            segs.push(Segment::line(SegmentKind::Delta(4, Side::Upper), "delta4+", cc(sigma_prime, t3.1), cc(hl_sigma(t3.1), t3.1)));
        }

        let values: Vec<(Segment, SegmentValue)> = {
            use rayon::prelude::*;
            segs.into_par_iter()
                .map(|s| {
                    let v = self.integrate_segment(&li, &s.param, opts.tol);
                    (s, v)
                })
                .collect()
        };

        let saddle0 = contributions.entries.iter().find(|e| e.m == 0).expect("m = 0 contribution");
        let saddle0_log10 = saddle0.r_ln / std::f64::consts::LN_10;
        let envelopes = Envelopes { lx, llx, lt, sigma0, c2, a: sp.a };
        let mut records = Vec::new();
        let mut total = ScaledComplex::zero();
        let mut unc_ln = f64::NEG_INFINITY;
        let mut ordered: Vec<(Segment, SegmentValue)> = values;
        // descent paths slot in between Δ_0^- and the first connector
        let pos = ordered.iter().position(|(s, _)| s.tag == "delta0-").unwrap() + 1;
        for (s, p) in saddles.iter().rev() {
            let e = contributions.entries.iter().find(|e| e.m == s.m).unwrap();
            let seg = Segment::line(
                SegmentKind::Descent(s.m),
                format!("gamma{}", s.m),
                cc(p.sigma_minus, tau + s.u_minus),
                cc(p.sigma_plus, tau + s.u_plus),
            );
            let err = e.r_ln + e.quad_error_rel.max(1e-300).ln();
            let abs = s.f_val.re + e.width.ln();
            ordered.insert(pos, (seg, SegmentValue { value: e.value, error_ln: err, abs_ln: abs }));
        }
        for (s, v) in &ordered {
            total = total + v.value;
            unc_ln = ln_add(unc_ln, v.error_ln);
            let log10 = v.value.ln_abs() / std::f64::consts::LN_10;
            let bound = envelopes.log10(&s.kind, &s.tag);
            let descent = matches!(s.kind, SegmentKind::Descent(_));
            records.push(SegmentRecord {
                tag: s.tag.clone(),
                kind: s.kind,
                start: (s.param.start().re, s.param.start().im),
                end: (s.param.end().re, s.param.end().im),
                numeric: true,
                log10_abs: log10,
                phase: v.value.arg(),
                log10_abs_integral: v.abs_ln / std::f64::consts::LN_10,
                log10_error: v.error_ln / std::f64::consts::LN_10,
                bound_log10_abs: bound,
                gap_log10: log10 - saddle0_log10,
                below_saddle: descent || log10 < saddle0_log10,
                within_envelope: descent || log10 <= bound,
            });
        }
        // pieces above t_cut, bounded in absolute value only
        let mut bounded: Vec<(String, SegmentKind, (f64, f64), (f64, f64), f64)> = Vec::new();
        if !top_numeric {
            let sp_c = sigma_prime;
            let b3 = self.abs_tail_bound(lx, &move |_| sp_c, &|_| 0.0, t_cut);
            // the vertical at σ′ beyond t_cut over-covers [t_cut, T_3^+]
            bounded.push(("delta3+tail".into(), SegmentKind::Delta(3, Side::Upper), (sigma_prime, t_cut), (sigma_prime, t3.1), b3));
            let b4 = self.abs_horizontal_bound(lx, t3.1, sigma_prime, hl_sigma(t3.1));
            bounded.push(("delta4+".into(), SegmentKind::Delta(4, Side::Upper), (sigma_prime, t3.1), (hl_sigma(t3.1), t3.1), b4));
        }
        let hl_from = t3.1;
        let dsig = |t: f64| {
            if t <= E.powf(E) {
                0.0
            } else {
                let l = t.ln();
                -(1.0 - l.ln()) / (t * l * l)
            }
        };
        let b_hl = self.abs_tail_bound(lx, &hl_sigma, &dsig, hl_from);
        bounded.push(("hl+".into(), SegmentKind::HlArc, (hl_sigma(hl_from), hl_from), (hl_sigma(hl_from), f64::INFINITY), b_hl));
        for (tag, kind, a, b, ln_b) in bounded {
            unc_ln = ln_add(unc_ln, ln_b);
            let log10 = ln_b / std::f64::consts::LN_10;
            let bound = envelopes.log10(&kind, &tag);
            records.push(SegmentRecord {
                tag,
                kind,
                start: a,
                end: b,
                numeric: false,
                log10_abs: log10,
                phase: f64::NAN,
                log10_abs_integral: log10,
                log10_error: log10,
                bound_log10_abs: bound,
                gap_log10: log10 - saddle0_log10,
                below_saddle: log10 < saddle0_log10,
                within_envelope: log10 <= bound,
            });
        }

        let mut delta0_negative = true;
        for &(t, lo, hi) in &[(t1.0, sig_m.min(sigma0), sig_m.max(sigma0)), (t1.1, sig_p.min(sigma0), sig_p.max(sigma0))] {
            for i in 0..=64 {
                let sg = lo + (hi - lo) * i as f64 / 64.0;
                let v = self.zeta.leading_piece(k, C::new(sg, t));
                if !(v.re < 0.0) {
                    delta0_negative = false;
                }
            }
        }

        let rho = self.zeta.residue_at_1()?.rho;
        let remainder = ScaledComplex::new(C::new(total.z.im / PI, 0.0), total.ln_scale);
        let closes = self.closure_gap(&ordered) < 1e-9 * (1.0 + tau);
        Ok(CompositeResult {
            k,
            log_x: lx,
            geometry,
            rho,
            residue_ln: rho.ln() + 2.0 * lx - 2f64.ln(),
            segments: records,
            saddles: contributions,
            remainder,
            remainder_uncertainty_ln: unc_ln - PI.ln(),
            delta0_negative,
            closes,
        })
    }

    fn closure_gap(&self, segs: &[(Segment, SegmentValue)]) -> f64 {
        segs.windows(2).map(|w| (w[0].0.param.end() - w[1].0.param.start()).norm()).fold(0.0, f64::max)
    }
}

/// Asymptotic envelopes of the remainder pieces with unit implied constants.
struct Envelopes {
    lx: f64,
    llx: f64,
    lt: f64,
    sigma0: f64,
    c2: f64,
    a: f64,
}

impl Envelopes {
    fn log10(&self, kind: &SegmentKind, tag: &str) -> f64 {
        let (lx, llx) = (self.lx, self.llx);
        let r = (lx * llx).sqrt();
        let q = lx / llx;
        let ln = match kind {
            SegmentKind::HlArc if tag.starts_with("hl-") => ln_add(2.0 * lx - 2.25 * SQRT_2 * r, (2.0 - 1.0 / E) * lx),
            SegmentKind::HlArc => 2.0 * lx - 2.5 * SQRT_2 * r,
            SegmentKind::Delta(4, Side::Lower) => 2.0 * lx - 2.25 * SQRT_2 * r,
            SegmentKind::Delta(4, Side::Upper) => 2.0 * lx - 5.0 * self.lt,
            SegmentKind::Delta(3, _) => 2.0 * lx - 0.5 * SQRT_2 * self.c2 * q.powf(2.0 / 3.0) + r,
            SegmentKind::Delta(2, _) => (1.0 + self.sigma0) * lx - SQRT_2 * r,
            SegmentKind::Delta(1, _) => {
                0.5 * self.c2 * q.powf(1.0 / 6.0) + (1.0 + self.sigma0) * lx - SQRT_2 * r + SQRT_2 * q.sqrt() - self.c2 * q.powf(1.0 / 6.0)
            }
            SegmentKind::Delta(0, _) => (1.0 + self.sigma0) * lx - SQRT_2 * r,
            SegmentKind::Connector(_) => 2.0 * lx - 2.0 * SQRT_2 * r - SQRT_2 * (self.a + 2f64.ln() + FRAC_PI_2.ln()) * q.sqrt() + q.cbrt(),
            _ => f64::INFINITY,
        };
        ln / std::f64::consts::LN_10
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::PrecisionContext;

    #[test]
    fn trivial_system_gives_half_x_squared() {
        let sys = ContinuousPrimeSystem::from_params(&[], PrecisionContext::default()).unwrap();
        let p = PerronProblem::continuous(&sys).unwrap();
        let r = p.vertical(10.0, 2.0, VerticalOptions::default()).unwrap();
        assert!((r.total - 49.5).abs() < 1e-10, "{}", r.total);
        assert_eq!(r.tail_bound, 0.0);
    }

    #[test]
    fn hl_curve_is_continuous() {
        let ee = E.powf(E);
        assert!((hl_sigma(ee * (1.0 + 1e-12)) - hl_sigma(ee)).abs() < 1e-10);
        assert!(hl_sigma(1e6) > hl_sigma(1e3));
    }

    #[test]
    fn ln_add_matches_direct() {
        assert!((ln_add(2f64.ln(), 3f64.ln()) - 5f64.ln()).abs() < 1e-15);
        assert_eq!(ln_add(f64::NEG_INFINITY, 1.0), 1.0);
    }
}
