//! Evaluation of `log ζ_C`, `ζ_C`, the primed sum, the residue at `s = 1`
//! and sampled boundedness certificates.
//!
//! Each term contributes `½(A_j − B_j)(1/(s − iτ_j) + 1/(s + iτ_j))` with
//! `A_j = τ_j^{1−(1+δ_j)s}` and `B_j = τ_j^{1−ν_j s}`. The oscillating factors
//! `τ_j^{−(1+δ_j)it}` are evaluated relative to an anchor `τ_k` whose phase
//! `(1+δ_j) log τ_j · τ_k mod 2π` is precomputed in high precision, so that
//! arguments near a huge `τ_k` keep full double accuracy.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::hp::{reduce_mod_2pi, Hp};
use crate::numeric::ScaledComplex;
use crate::system::ContinuousPrimeSystem;

/// What the evaluator sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ZetaMode {
    /// `log(s/(s−1)) + Σ_k …`.
    Full,
    /// As `Full` but without `½A_k/(s − iτ_k)`.
    Primed(usize),
    /// Finite Euler product over `(p, multiplicity)`.
    Discrete(Vec<(f64, u32)>),
}

/// Which part of term `k` to leave out of the sum over `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclude {
    None,
    /// Only `½A_k/(s − iτ_k)` (the primed sum).
    UpperA(usize),
    /// `½(A_k − B_k)/(s − iτ_k)`.
    Upper(usize),
}

#[derive(Debug, Clone)]
struct TermData {
    tau: f64,
    /// `τ = tau_hi + tau_lo` exactly to double-double accuracy.
    tau_lo: f64,
    log_tau: f64,
    /// `(1+δ) log τ`.
    c1: f64,
    /// `ν log τ`.
    c2: f64,
}

/// Immutable evaluator for a built system.
#[derive(Debug, Clone)]
pub struct ZetaEvaluator {
    terms: Vec<TermData>,
    /// `beta[k][j] = ((1+δ_j) log τ_j · τ_k mod 2π, ν_j log τ_j · τ_k mod 2π)`.
    beta: Vec<Vec<(f64, f64)>>,
    pub mode: ZetaMode,
    /// Highest term index included.
    pub max_index: usize,
    tail: f64,
}

/// Residue of `ζ_C` at 1 obtained two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidueValue {
    pub rho: f64,
    pub richardson: f64,
    pub circle: f64,
    /// `exp(Σ_k …)` evaluated at `s = 1` directly.
    pub closed_form: f64,
    pub relative_gap: f64,
}

/// Sampled region for the boundedness certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// `σ ≥ 1 − log log t/log t`, `e^e ≤ t ≤ t_max`.
    Hl { t_max: f64 },
    /// `σ ≥ 1/2`, `τ_k^{1/5} ≤ t ≤ τ_k^5`, with the upper `k`-term removed.
    Strip(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    pub sigma_step: f64,
    pub sigma_span: f64,
    pub t_samples: usize,
    /// Extra samples placed within `±peak_width/log τ_j` of each `τ_j`.
    pub peak_samples: usize,
    pub peak_width: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions { sigma_step: 1.0 / 256.0, sigma_span: 1.0, t_samples: 1000, peak_samples: 64, peak_width: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub region: Region,
    pub samples: usize,
    pub empirical_sup: f64,
    pub argmax: (f64, f64),
    pub envelope: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl ZetaEvaluator {
    /// All built terms, full sum.
    pub fn new(sys: &ContinuousPrimeSystem) -> Result<Self> {
        Self::with_mode(sys, ZetaMode::Full)
    }

    pub fn with_mode(sys: &ContinuousPrimeSystem, mode: ZetaMode) -> Result<Self> {
        if let ZetaMode::Primed(k) = mode {
            if k >= sys.terms.len() {
                return Err(Error::Invalid(format!("primed index {k} beyond K = {}", sys.terms.len())));
            }
        }
        let mut terms = Vec::with_capacity(sys.terms.len());
        let mut c1h = Vec::new();
        let mut c2h = Vec::new();
        for t in &sys.terms {
            let lt = t.log_tau();
            let c1 = t.lambda();
            let c2 = &t.nu * &lt;
            let hi = t.tau.to_f64();
            terms.push(TermData {
                tau: hi,
                tau_lo: (&t.tau - &Hp::from_f64(hi, t.prec())).to_f64(),
                log_tau: lt.to_f64(),
                c1: c1.to_f64(),
                c2: c2.to_f64(),
            });
            c1h.push(c1);
            c2h.push(c2);
        }
        let mut beta = Vec::with_capacity(terms.len());
        for tk in &sys.terms {
            let mut row = Vec::with_capacity(terms.len());
            for j in 0..terms.len() {
                let b1 = reduce_mod_2pi(&(&c1h[j] * &tk.tau))?.value;
                let b2 = reduce_mod_2pi(&(&c2h[j] * &tk.tau))?.value;
                row.push((b1, b2));
            }
            beta.push(row);
        }
        let max_index = terms.len().saturating_sub(1);
        Ok(ZetaEvaluator { terms, beta, mode, max_index, tail: 0.0 })
    }

    /// Finite Euler product `∏ (1 − p^{−s})^{−m}`.
    pub fn discrete(primes: &[(f64, u32)]) -> Result<Self> {
        if primes.iter().any(|&(p, _)| !(p > 1.0)) {
            return Err(Error::Invalid("discrete primes must exceed 1".into()));
        }
        Ok(ZetaEvaluator { terms: Vec::new(), beta: Vec::new(), mode: ZetaMode::Discrete(primes.to_vec()), max_index: 0, tail: 0.0 })
    }

    /// Keep only terms `j ≤ max_index`; the dropped terms are bounded by
    /// `Σ_{j > max_index} τ_j^{−1/2}`, which must not exceed `tol`.
    pub fn truncate(mut self, max_index: usize, tol: f64) -> Result<Self> {
        let tail: f64 = self.terms.iter().skip(max_index + 1).map(|t| t.tau.powf(-0.5)).sum();
        if tail > tol {
            return Err(Error::TailTooLarge { bound: tail, tol });
        }
        self.max_index = max_index.min(self.terms.len().saturating_sub(1));
        self.tail = tail;
        Ok(self)
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail
    }

    pub fn k_count(&self) -> usize {
        self.terms.len()
    }

    fn included(&self) -> usize {
        if self.terms.is_empty() {
            0
        } else {
            self.max_index + 1
        }
    }

    fn check_domain(s: Complex64) -> Result<()> {
        if !s.re.is_finite() || !s.im.is_finite() {
            return Err(Error::NonFinite { at: s.re });
        }
        if (s - 1.0).norm() == 0.0 {
            return Err(Error::PoleAt1);
        }
        if !(s.re > 0.0) {
            return Err(Error::Invalid(format!("σ = {} must be positive", s.re)));
        }
        Ok(())
    }

    /// Anchor for `t ≥ 0`: the term whose `τ` is within a factor 3/2, with
    /// `u = t − τ` in double-double accuracy.
    fn anchor(&self, t: f64) -> Option<(usize, f64)> {
        self.terms.iter().enumerate().find_map(
            |(k, d)| {
                if (t - d.tau).abs() <= 0.5 * d.tau {
                    Some((k, (t - d.tau) - d.tau_lo))
                } else {
                    None
                }
            },
        )
    }

    /// Term `j` at `s = σ + it`, `t ≥ 0`, anchored when possible.
    fn term_parts(&self, j: usize, sigma: f64, t: f64, anchor: Option<(usize, f64)>) -> (Complex64, Complex64, Complex64, Complex64) {
        let d = &self.terms[j];
        let (ph1, ph2, dm) = match anchor {
            Some((k, u)) => {
                let (b1, b2) = self.beta[k][j];
                let gap = if k == j { u } else { (self.terms[k].tau - d.tau) + (self.terms[k].tau_lo - d.tau_lo) + u };
                (b1 + d.c1 * u, b2 + d.c2 * u, gap)
            }
            None => (d.c1 * t, d.c2 * t, t - d.tau),
        };
        let a = Complex64::from_polar((d.log_tau - d.c1 * sigma).exp(), -ph1.rem_euclid(TAU));
        let b = Complex64::from_polar((d.log_tau - d.c2 * sigma).exp(), -ph2.rem_euclid(TAU));
        let minus = Complex64::new(sigma, dm);
        let plus = Complex64::new(sigma, t + d.tau);
        (a, b, minus, plus)
    }

    fn sum_parts(&self, sigma: f64, t: f64, anchor: Option<(usize, f64)>, ex: Exclude) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.included() {
            let (a, b, minus, plus) = self.term_parts(j, sigma, t, anchor);
            let upper = match ex {
                Exclude::UpperA(k) if k == j => -b / minus,
                Exclude::Upper(k) if k == j => Complex64::new(0.0, 0.0),
                _ => (a - b) / minus,
            };
            acc += 0.5 * (upper + (a - b) / plus);
        }
        acc
    }

    /// `Σ_j ½(A_j − B_j)(1/(s−iτ_j) + 1/(s+iτ_j))` with the given exclusion.
    pub fn term_sum_ex(&self, s: Complex64, ex: Exclude) -> Complex64 {
        let t = s.im.abs();
        let v = self.sum_parts(s.re, t, self.anchor(t), ex);
        if s.im < 0.0 {
            v.conj()
        } else {
            v
        }
    }

    pub fn term_sum(&self, s: Complex64) -> Complex64 {
        self.term_sum_ex(s, Exclude::None)
    }

    /// The sum over `k` without `½A_k/(s − iτ_k)`.
    pub fn primed_sum(&self, s: Complex64, k: usize) -> Complex64 {
        self.term_sum_ex(s, Exclude::UpperA(k))
    }

    /// Term sum at `s = iτ_k + w` with `w` given exactly; `τ_k + Im w ≥ 0`.
    pub fn term_sum_local(&self, k: usize, w: Complex64, ex: Exclude) -> Complex64 {
        let t = self.terms[k].tau + w.im;
        self.sum_parts(w.re, t, Some((k, w.im)), ex)
    }

    /// Single term `j` (both halves) at `s`.
    pub fn term_value(&self, j: usize, s: Complex64) -> Complex64 {
        let t = s.im.abs();
        let (a, b, minus, plus) = self.term_parts(j, s.re, t, self.anchor(t));
        let v = 0.5 * ((a - b) / minus + (a - b) / plus);
        if s.im < 0.0 {
            v.conj()
        } else {
            v
        }
    }

    /// Value and the dominant piece `½A_k/(s − iτ_k)` of term `k`.
    pub fn leading_piece(&self, k: usize, s: Complex64) -> Complex64 {
        let t = s.im.abs();
        let (a, _, minus, _) = self.term_parts(k, s.re, t, self.anchor(t));
        let v = 0.5 * a / minus;
        if s.im < 0.0 {
            v.conj()
        } else {
            v
        }
    }

    /// `log s − log(s−1)` with principal branches.
    fn log_ratio(s: Complex64) -> Result<Complex64> {
        if s.im == 0.0 && s.re > 0.0 && s.re < 1.0 {
            return Err(Error::BranchCut { re: s.re, im: s.im });
        }
        Ok(s.ln() - (s - 1.0).ln())
    }

    pub fn log_zeta(&self, s: Complex64) -> Result<Complex64> {
        Self::check_domain(s)?;
        match &self.mode {
            ZetaMode::Discrete(ps) => Ok(euler_log(ps, s)),
            ZetaMode::Full => Ok(Self::log_ratio(s)? + self.term_sum(s)),
            ZetaMode::Primed(k) => Ok(Self::log_ratio(s)? + self.primed_sum(s, *k)),
        }
    }

    /// `ζ(s)`, computed as `s/(s−1)·exp(Σ)` so that it is defined across
    /// the cut of the logarithm.
    pub fn zeta(&self, s: Complex64) -> Result<Complex64> {
        let z = self.zeta_scaled(s)?;
        let v = z.to_complex();
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite { at: s.im });
        }
        Ok(v)
    }

    pub fn zeta_scaled(&self, s: Complex64) -> Result<ScaledComplex> {
        Self::check_domain(s)?;
        let e = match &self.mode {
            ZetaMode::Discrete(ps) => return Ok(ScaledComplex::from_exp(euler_log(ps, s))),
            ZetaMode::Full => self.term_sum(s),
            ZetaMode::Primed(k) => self.primed_sum(s, *k),
        };
        Ok(ScaledComplex::from_exp(e).mul_complex(s / (s - 1.0)))
    }

    /// `res_{s=1} ζ_C`, by Richardson extrapolation of `(s−1)ζ(s)` and by a
    /// contour integral on `|s − 1| = 10^{−2}`.
    pub fn residue_at_1(&self) -> Result<ResidueValue> {
        if let ZetaMode::Discrete(_) = self.mode {
            return Err(Error::Invalid("a finite Euler product has no pole at 1".into()));
        }
        let g = |h: f64| -> Result<f64> { Ok((self.zeta(Complex64::new(1.0 + h, 0.0))? * h).re) };
        let hs = [1e-3, 1e-4, 1e-5];
        let vs = [g(hs[0])?, g(hs[1])?, g(hs[2])?];
        let richardson = neville_at_zero(&hs, &vs);
        let circle_n = |n: usize| -> Result<f64> {
            let r = 1e-2;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let e = Complex64::from_polar(r, TAU * i as f64 / n as f64);
                acc += self.zeta(1.0 + e)? * e;
            }
            Ok(acc.re / n as f64)
        };
        let circle = circle_n(256)?;
        let coarse = circle_n(128)?;
        let closed_form = self.term_sum(Complex64::new(1.0, 0.0)).exp().re;
        let relative_gap = (richardson - circle).abs() / circle.abs();
        if relative_gap > 1e-8 || (circle - coarse).abs() > 1e-10 * circle.abs() {
            return Err(Error::MethodsDisagree { a: richardson, b: circle });
        }
        Ok(ResidueValue { rho: circle, richardson, circle, closed_form, relative_gap })
    }

    /// Sampled supremum of the term sum over a region against the analytic
    /// envelope; passes when `sup ≤ 1.05·envelope`.
    pub fn ghl_bound_certificate(&self, region: Region, opts: CertificateOptions) -> Result<CertificateReport> {
        let n = self.included();
        let (t_lo, t_hi, ex, envelope) = match region {
            Region::Hl { t_max } => {
                let env: f64 = self.terms[..n].iter().map(|d| (1.0 / (d.tau * d.log_tau)).sqrt()).sum::<f64>() + 1.0;
                (std::f64::consts::E.exp(), t_max, Exclude::None, env)
            }
            Region::Strip(k) => {
                let d = self.terms.get(k).ok_or_else(|| Error::Invalid(format!("no term {k}")))?;
                let env: f64 = self.terms[..n].iter().map(|d| d.tau.powf(-1.0 / 3.0)).sum();
                (d.tau.powf(0.2), d.tau.powi(5), Exclude::Upper(k), env)
            }
        };
        if n == 0 {
            return Ok(CertificateReport { region, samples: 0, empirical_sup: 0.0, argmax: (0.0, 0.0), envelope, ratio: 0.0, pass: true });
        }
        if !(t_hi > t_lo) {
            return Err(Error::Invalid(format!("empty t-range [{t_lo}, {t_hi}]")));
        }
        let mut ts: Vec<f64> =
            (0..opts.t_samples).map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / (opts.t_samples.max(2) - 1) as f64)).collect();
        for d in &self.terms[..n] {
            for i in 0..opts.peak_samples {
                let off = opts.peak_width * (2.0 * i as f64 / (opts.peak_samples.max(2) - 1) as f64 - 1.0) / d.log_tau;
                let t = d.tau + off;
                if t >= t_lo && t <= t_hi {
                    ts.push(t);
                }
            }
        }
        let sigma_floor = |t: f64| match region {
            Region::Hl { .. } => 1.0 - t.ln().ln() / t.ln(),
            Region::Strip(_) => 0.5,
        };
        let steps = (opts.sigma_span / opts.sigma_step).round() as usize;
        let best = ts
            .par_iter()
            .map(|&t| {
                let s0 = sigma_floor(t);
                let mut loc = (0.0f64, (s0, t));
                for i in 0..=steps {
                    let sigma = s0 + i as f64 * opts.sigma_step;
                    let v = self.term_sum_ex(Complex64::new(sigma, t), ex).norm();
                    if v > loc.0 {
                        loc = (v, (sigma, t));
                    }
                }
                loc
            })
            .reduce(|| (0.0, (0.0, 0.0)), |a, b| if b.0 > a.0 { b } else { a });
        let samples = ts.len() * (steps + 1);
        let ratio = best.0 / envelope;
        Ok(CertificateReport { region, samples, empirical_sup: best.0, argmax: best.1, envelope, ratio, pass: ratio <= 1.05 })
    }

    /// `(σ, t, log ζ)` on a grid of points, for export.
    pub fn log_zeta_table(&self, points: &[Complex64]) -> Vec<(f64, f64, Result<Complex64>)> {
        points.par_iter().map(|&s| (s.re, s.im, self.log_zeta(s))).collect()
    }
}

/// `−Σ m log(1 − p^{−s})`.
pub fn euler_log(primes: &[(f64, u32)], s: Complex64) -> Complex64 {
    primes.iter().map(|&(p, m)| -(m as f64) * (1.0 - (-s * p.ln()).exp()).ln()).sum()
}

/// Value at 0 of the interpolating polynomial through `(x_i, y_i)`.
fn neville_at_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = x.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (x[i] * p[i + 1] - x[i + m] * p[i]) / (x[i] - x[i + m]);
        }
    }
    p[0]
}

/// CSV with columns `sigma,t,re_log_zeta,im_log_zeta`; failed points are
/// written as `NaN`.
pub fn write_log_zeta_csv(path: &Path, rows: &[(f64, f64, Result<Complex64>)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "sigma,t,re_log_zeta,im_log_zeta")?;
    for (s, t, v) in rows {
        let z = v.as_ref().copied().unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        writeln!(f, "{s:.17e},{t:.17e},{:.17e},{:.17e}", z.re, z.im)?;
    }
    Ok(())
}

/// Distance from `x` to `offset + 2πZ`.
pub fn dist_2pi(x: f64, offset: f64) -> f64 {
    let r = (x - offset).rem_euclid(TAU);
    r.min(TAU - r).min(PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::PrecisionContext;
    use crate::system::build_system;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn empty_system_is_rational() {
        let z = ZetaEvaluator::new(&ContinuousPrimeSystem::empty(PrecisionContext::default())).unwrap();
        assert!((z.log_zeta(c(2.0, 0.0)).unwrap() - c(2f64.ln(), 0.0)).norm() < 1e-15);
        assert!((z.zeta(c(3.0, 0.0)).unwrap() - c(1.5, 0.0)).norm() < 1e-15);
        let r = z.residue_at_1().unwrap();
        assert!((r.rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let z = ZetaEvaluator::new(&ContinuousPrimeSystem::empty(PrecisionContext::default())).unwrap();
        assert!(matches!(z.log_zeta(c(1.0, 0.0)), Err(Error::PoleAt1)));
        assert!(matches!(z.log_zeta(c(0.5, 0.0)), Err(Error::BranchCut { .. })));
        assert!(z.zeta(c(0.5, 0.0)).is_ok());
        assert!(z.log_zeta(c(-0.5, 3.0)).is_err());
    }

    #[test]
    fn neville_recovers_quadratic() {
        let x = [0.1, 0.2, 0.4];
        let y: Vec<f64> = x.iter().map(|t| 3.0 + 2.0 * t - t * t).collect();
        assert!((neville_at_zero(&x, &y) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn anchored_and_direct_agree_for_small_tau() {
        let (sys, _) = build_system(1, 3.0, true, PrecisionContext::default()).unwrap();
        let z = ZetaEvaluator::new(&sys).unwrap();
        let tau = z.terms[0].tau;
        let s = c(0.8, tau + 0.37);
        let anchored = z.term_sum(s);
        let direct = z.sum_parts(s.re, s.im, None, Exclude::None);
        assert!((anchored - direct).norm() < 1e-9 * anchored.norm(), "{anchored} vs {direct}");
        let local = z.term_sum_local(0, c(0.8, 0.37), Exclude::None);
        assert!((anchored - local).norm() < 1e-12 * anchored.norm());
    }

    #[test]
    fn discrete_mode_is_euler_product() {
        let z = ZetaEvaluator::discrete(&[(2.0, 1), (3.0, 1)]).unwrap();
        let v = z.zeta(c(2.0, 0.0)).unwrap().re;
        assert!((v - 1.0 / ((1.0 - 0.25) * (1.0 - 1.0 / 9.0))).abs() < 1e-14);
        assert!(z.residue_at_1().is_err());
    }

    #[test]
    fn truncation_tail() {
        let (sys, _) = build_system(2, 3.0, true, PrecisionContext::default()).unwrap();
        let z = ZetaEvaluator::new(&sys).unwrap();
        assert!(z.clone().truncate(0, 1e-12).is_err());
        let t = z.truncate(0, 1e-7).unwrap();
        assert!(t.tail_bound() > 0.0 && t.tail_bound() < 1e-7);
    }
}
