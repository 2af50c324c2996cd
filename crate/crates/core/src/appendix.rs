//! Convolution powers of `dE/u`, where `dE = dΠ − dP`, by the Dirichlet
//! hyperbola method, and the reconstruction `N(x) = x Σ I_n/n!`.
//!
//! Everything is computed in `w = log u`, where `dE(u)/u` has density
//! `g(w) = E′(e^w)` and multiplicative convolution becomes additive. The
//! density profiles `D_n = g^{*n}` and the partial integrals
//! `P_n(w) = ∫_0^w D_n` live on a uniform grid; convolutions and integrals use
//! the end-corrected trapezoid rule, and every reported value is the
//! Richardson extrapolation of the grids `h` and `2h`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::grid::Convolver;
use crate::measure::{Analytic, GridMeasure, Measure};
use crate::numeric::{integrate_pieces, QuadOptions};

/// A signed deviation measure `dE` with `|E(x)| ≤ C_E x^θ`.
#[derive(Debug, Clone)]
pub struct DeviationMeasure {
    pub measure: Measure,
    pub theta: f64,
    pub c_e: f64,
}

impl DeviationMeasure {
    pub fn new(measure: Measure, theta: f64, c_e: f64) -> Result<Self> {
        if !(theta >= 0.0 && c_e >= 0.0) {
            return Err(Error::Invalid(format!("θ = {theta}, C_E = {c_e}")));
        }
        Ok(DeviationMeasure { measure, theta, c_e })
    }

    pub fn zero() -> Self {
        DeviationMeasure { measure: Measure::zero(), theta: 0.0, c_e: 0.0 }
    }

    /// `E(u) = u^θ sin(log u)`.
    pub fn toy(theta: f64) -> Self {
        let a = Analytic {
            name: format!("u^{theta} sin(log u)"),
            density: Arc::new(move |u: f64| u.powf(theta - 1.0) * (theta * u.ln().sin() + u.ln().cos())),
            primitive: Arc::new(move |u: f64| u.powf(theta) * u.ln().sin()),
            growth: ((1.0 + theta * theta).sqrt(), theta),
        };
        DeviationMeasure { measure: Measure::analytic(a), theta, c_e: 1.0 }
    }

    /// `E(x)`.
    pub fn e(&self, x: f64) -> f64 {
        self.measure.cdf(x)
    }

    /// `|E(e^w)| ≤ C_E e^{θw}` on `samples` points of `[0, log_max]`.
    pub fn growth_holds(&self, log_max: f64, samples: usize) -> bool {
        (0..=samples).all(|i| {
            let w = log_max * i as f64 / samples as f64;
            self.e(w.exp()).abs() <= self.c_e * (self.theta * w).exp() * (1.0 + 1e-12) + 1e-14
        })
    }

    /// Density of `dE(u)/u` in `w = log u`.
    pub fn g(&self, w: f64) -> f64 {
        // segments are open on the left; take the right limit at u = 1
        self.measure.log_density(w.max(f64::MIN_POSITIVE)) * (-w).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BValue {
    pub b: f64,
    pub quad_error: f64,
    /// `C_E X^{θ−1}/(1−θ)` at the cutoff `X`.
    pub tail_bound: f64,
    pub log_cutoff: f64,
}

/// `b = ∫_1^∞ u^{−2}E(u) du`, truncated where the tail bound is `tol/2`.
pub fn compute_b(de: &DeviationMeasure, tol: f64) -> Result<BValue> {
    if de.theta >= 1.0 {
        return Err(Error::TailDivergent(de.theta));
    }
    if de.c_e == 0.0 {
        return Ok(BValue { b: 0.0, quad_error: 0.0, tail_bound: 0.0, log_cutoff: 0.0 });
    }
    let one = 1.0 - de.theta;
    let lx = ((2.0 * de.c_e / (one * tol)).ln() / one).max(1.0);
    let mut points: Vec<f64> = (0..=lx.ceil() as usize).map(|i| (i as f64).min(lx)).collect();
    points.extend(de.measure.atoms.iter().map(|a| a.0.ln()).filter(|&w| w < lx));
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    let f = |w: f64| num_complex::Complex64::new((-w).exp() * de.e(w.exp()), 0.0);
    let q = integrate_pieces(&f, &points, QuadOptions { abs_tol: 0.25 * tol, rel_tol: 1e-14, ..Default::default() });
    if !q.converged {
        return Err(Error::ToleranceNotMet { value: q.value.re, error: q.error });
    }
    Ok(BValue { b: q.value.re, quad_error: q.error, tail_bound: de.c_e * (-one * lx).exp() / one, log_cutoff: lx })
}

/// Leading order `√(2(1−θ)) √(log x/log log x)`.
pub fn n_max_estimate(theta: f64, log_x: f64) -> Result<f64> {
    if !(log_x > std::f64::consts::E) {
        return Err(Error::Invalid(format!("need log x > e, got {log_x}")));
    }
    Ok((2.0 * (1.0 - theta)).max(0.0).sqrt() * (log_x / log_x.ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionOptions {
    /// Target grid step in `log u`.
    pub h: f64,
    pub max_n: usize,
}

impl Default for ConvolutionOptions {
    fn default() -> Self {
        ConvolutionOptions { h: 1e-3, max_n: 64 }
    }
}

fn trap(f: impl Fn(usize) -> f64, lo: usize, hi: usize, h: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let inner: f64 = (lo + 1..hi).map(&f).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

/// Density and partial-integral profiles on one grid.
struct Profiles {
    h: f64,
    g: Vec<f64>,
    /// `d[n] = g^{*n}` for `n ≥ 1`; `d[0]` is unused.
    d: Vec<Vec<f64>>,
    /// `p[n](w) = ∫_0^w d[n]`, with `p[0] ≡ 1`.
    p: Vec<Vec<f64>>,
    conv: Convolver,
    fg: Vec<num_complex::Complex64>,
}

impl Profiles {
    fn new(de: &DeviationMeasure, nodes: usize, h: f64) -> Self {
        let g: Vec<f64> = (0..nodes).map(|i| de.g(i as f64 * h)).collect();
        let conv = Convolver::new(nodes);
        let fg = conv.forward(&g);
        let mut s = Profiles { h, p: vec![vec![1.0; nodes]], d: vec![Vec::new()], g: g.clone(), conv, fg };
        s.push(g);
        s
    }

    fn push(&mut self, d: Vec<f64>) {
        let mut p = vec![0.0; d.len()];
        for i in 1..d.len() {
            p[i] = p[i - 1] + 0.5 * self.h * (d[i - 1] + d[i]);
        }
        self.d.push(d);
        self.p.push(p);
    }

    fn level(&self) -> usize {
        self.d.len() - 1
    }

    fn extend(&mut self) {
        let last = &self.d[self.level()];
        let raw = self.conv.apply(last, &self.fg);
        let (g0, d0) = (self.g[0], last[0]);
        let next: Vec<f64> = raw.iter().enumerate().map(|(i, &c)| self.h * (c - 0.5 * (g0 * last[i] + self.g[i] * d0))).collect();
        self.push(next);
    }

    fn extend_to(&mut self, n: usize) {
        while self.level() < n {
            self.extend();
        }
    }

    /// `(S_1, S_2, S_3)` for `I_n` at node `top` with the split at node `s`.
    fn hyperbola(&self, n: usize, top: usize, s: usize) -> (f64, f64, f64) {
        let (pm, p1, dm) = (&self.p[n - 1], &self.p[1], &self.d[n - 1]);
        let s1 = trap(|j| self.g[j] * pm[top - j], 0, s, self.h);
        let s2 = if n == 1 { p1[top] } else { trap(|j| dm[j] * p1[top - j], 0, top - s, self.h) };
        let s3 = p1[s] * pm[top - s];
        (s1, s2, s3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionLedger {
    pub n: usize,
    pub log_x: f64,
    /// `I_n = S_1 + S_2 − S_3`.
    pub value: f64,
    /// `log y = log x/n`.
    pub log_split: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    /// `I_n` read off the partial-integral profile.
    pub direct: f64,
    /// Richardson error estimate.
    pub error: f64,
    pub b_pow_n: Option<f64>,
    pub oracle: Option<f64>,
}

fn check_continuous(de: &DeviationMeasure) -> Result<()> {
    if de.measure.atoms.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid("convolution powers need an absolutely continuous deviation measure".into()))
    }
}

/// `I_n(x) = ∫_{1⁻}^x (dE/u)^{*n}` by the hyperbola split `y = x^{1/n}`.
pub fn convolution_power(de: &DeviationMeasure, n: usize, x: f64, opts: ConvolutionOptions) -> Result<ConvolutionLedger> {
    if n > opts.max_n {
        return Err(Error::DepthExceeded { n, max: opts.max_n });
    }
    if !(x > 1.0) {
        return Err(Error::Invalid(format!("need x > 1, got {x}")));
    }
    check_continuous(de)?;
    let log_x = x.ln();
    if n == 0 {
        return Ok(ConvolutionLedger {
            n,
            log_x,
            value: 1.0,
            log_split: log_x,
            s1: 0.0,
            s2: 1.0,
            s3: 0.0,
            direct: 1.0,
            error: 0.0,
            b_pow_n: None,
            oracle: None,
        });
    }
    // nodes per split are even so that the coarse grid shares the split
    let unit = 2 * n;
    let top = unit * ((log_x / (unit as f64 * opts.h)).ceil() as usize).max(1);
    let h = log_x / top as f64;
    let eval = |step: usize| {
        let t = top / step;
        let mut pr = Profiles::new(de, t + 1, h * step as f64);
        pr.extend_to(n - 1);
        let (s1, s2, s3) = pr.hyperbola(n, t, t / n);
        pr.extend_to(n);
        (s1, s2, s3, pr.p[n][t])
    };
    let (a1, a2, a3, ad) = eval(1);
    let (b1, b2, b3, bd) = eval(2);
    let rich = |f: f64, c: f64| (4.0 * f - c) / 3.0;
    let (s1, s2, s3) = (rich(a1, b1), rich(a2, b2), rich(a3, b3));
    let value = s1 + s2 - s3;
    let error = ((a1 + a2 - a3) - (b1 + b2 - b3)).abs() / 3.0;
    Ok(ConvolutionLedger {
        n,
        log_x,
        value,
        log_split: log_x / n as f64,
        s1,
        s2,
        s3,
        direct: rich(ad, bd),
        error,
        b_pow_n: None,
        oracle: None,
    })
}

/// `I_n(x)` from the brute-force log-grid convolution of `dE/u` with step `h`.
pub fn grid_oracle_power(de: &DeviationMeasure, n: usize, x: f64, h: f64) -> Result<f64> {
    let lx = x.ln();
    let base = GridMeasure::from_measure(&de.measure, h, lx + 2.0 * h)?;
    let masses = base.masses.iter().enumerate().map(|(j, m)| m * (-(j as f64) * h).exp()).collect();
    let mu = GridMeasure { masses, ..base };
    let mut acc = GridMeasure::delta_one(h, mu.log_max)?;
    for _ in 0..n {
        acc = acc.mconvolve(&mu)?;
    }
    Ok(acc.cdf_smooth(x))
}

/// `N(x)` of `dΠ = dP + dE` from the lattice exponential.
pub fn grid_oracle_count(de: &DeviationMeasure, x: f64, h: f64) -> Result<f64> {
    let lx = x.ln() + 2.0 * h;
    let p = GridMeasure::from_measure(&Measure::rational_log(), h, lx)?.exp_star(None)?;
    let e = GridMeasure::from_measure(&de.measure, h, lx)?.exp_star(None)?;
    Ok(p.mconvolve(&e)?.cdf_smooth(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub x: f64,
    /// `I_n(x)` for `n = 0, 1, …`.
    pub i_n: Vec<f64>,
    /// `Σ I_n/n!`.
    pub sum: f64,
    /// `x Σ I_n/n!`.
    pub count: f64,
    /// Bound for the dropped terms, from `|I_n| ≤ (∫|g|)^n`.
    pub series_tail: f64,
    pub grid_error: f64,
}

/// `N(x) = x Σ_n I_n(x)/n!`, summed until the remaining terms are below
/// `1e−12` of the partial sum and at least `2 n_max` terms are in.
pub fn reconstruct_n(de: &DeviationMeasure, x: f64, opts: ConvolutionOptions) -> Result<Reconstruction> {
    check_continuous(de)?;
    let log_x = x.ln();
    let top = 2 * ((log_x / (2.0 * opts.h)).ceil() as usize).max(1);
    let h = log_x / top as f64;
    let min_terms = n_max_estimate(de.theta.min(1.0), log_x.max(3.0)).map(|v| (2.0 * v).ceil() as usize).unwrap_or(2);
    let mut fine = Profiles::new(de, top + 1, h);
    let mut coarse = Profiles::new(de, top / 2 + 1, 2.0 * h);
    let mass = trap(|j| fine.g[j].abs(), 0, top, h);
    let mut i_n = vec![1.0];
    let mut sum = 1.0;
    let mut term_scale = 1.0;
    let mut grid_error = 0.0;
    let mut n = 0;
    loop {
        n += 1;
        if n > opts.max_n {
            return Err(Error::DepthExceeded { n, max: opts.max_n });
        }
        fine.extend_to(n);
        coarse.extend_to(n);
        let (a, b) = (fine.p[n][top], coarse.p[n][top / 2]);
        let v = (4.0 * a - b) / 3.0;
        term_scale /= n as f64;
        grid_error += term_scale * (a - b).abs() / 3.0;
        sum += v * term_scale;
        i_n.push(v);
        // Σ_{m>n} M^m/m! ≤ M^{n+1}/(n+1)! · e^M
        let tail = mass.powi(n as i32 + 1) * term_scale / (n + 1) as f64 * mass.exp();
        if n >= min_terms && tail <= 1e-12 * sum.abs().max(1e-300) {
            return Ok(Reconstruction { x, i_n, sum, count: x * sum, series_tail: x * tail, grid_error: x * grid_error });
        }
    }
}

/// Least-squares slope of `log|y|` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub theta: f64,
    pub b: BValue,
    pub rows: Vec<ConvolutionLedger>,
    pub reconstructions: Vec<Reconstruction>,
    /// Slope of `log|I_1(x) − b|` against `log x` over the grid.
    pub i1_slope: f64,
    pub n_max: Vec<(f64, f64)>,
}

/// Ledger of `I_n`, `n ≤ n_top`, and the reconstruction over an `x` grid.
pub fn appendix_report(de: &DeviationMeasure, xs: &[f64], n_top: usize, opts: ConvolutionOptions) -> Result<AppendixReport> {
    let b = compute_b(de, 1e-12)?;
    let mut rows = Vec::new();
    let mut slope_pts = Vec::new();
    for &x in xs {
        for n in 0..=n_top {
            let mut r = convolution_power(de, n, x, opts)?;
            r.b_pow_n = Some(b.b.powi(n as i32));
            if n == 1 {
                slope_pts.push((x, r.value - b.b));
            }
            rows.push(r);
        }
    }
    let reconstructions = xs.iter().map(|&x| reconstruct_n(de, x, opts)).collect::<Result<_>>()?;
    let n_max =
        xs.iter().filter(|x| x.ln() > std::f64::consts::E).map(|&x| Ok((x, n_max_estimate(de.theta, x.ln())?))).collect::<Result<_>>()?;
    Ok(AppendixReport { theta: de.theta, b, rows, reconstructions, i1_slope: loglog_slope(&slope_pts), n_max })
}

/// CSV with columns `n, x, I_n, b_pow_n, oracle`.
pub fn write_ledger_csv(path: &Path, rows: &[ConvolutionLedger]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "n,x,I_n,b_pow_n,oracle")?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
    for r in rows {
        writeln!(f, "{},{:.17e},{:.17e},{},{}", r.n, r.log_x.exp(), r.value, opt(r.b_pow_n), opt(r.oracle))?;
    }
    Ok(())
}
