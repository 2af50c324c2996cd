//! Saddle points of the Perron exponent near `τ_k`, steepest-descent paths
//! through them, phase control and their contributions to the Perron integral.
//!
//! Everything is expressed in local coordinates `w = s − iτ_k`. With
//! `Λ = (1+δ) log τ`, `φ = Λτ mod 2π` and `χ = τ log x mod 2π` (both reduced
//! in high precision),
//!
//! `f_loc(w) = (1 + w) log x + iχ + ½ exp(log τ − Λw − iφ)/w`
//!
//! satisfies `e^{f(s)} = e^{f_loc(w)}` and `Im f(s) ≡ Im f_loc(w) (mod 2π)`.

use std::f64::consts::{FRAC_PI_2, LN_2, PI, TAU};
use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::hp::{reduce_mod_2pi, signed_dist_2pi, wrap_pi, Hp, HpComplex};
use crate::numeric::quad::{integrate_pieces, QuadOptions};
use crate::numeric::ScaledComplex;
use crate::system::ContinuousPrimeSystem;
use crate::zeta::{Exclude, ZetaEvaluator};

#[derive(Debug, Clone)]
struct HpConsts {
    lt: Hp,
    lambda: Hp,
    log_x: Hp,
    phi: Hp,
    chi: Hp,
}

/// The saddle-point problem attached to term `k` of a system.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    pub k: usize,
    pub even: bool,
    pub tau: f64,
    pub log_tau: f64,
    /// `(1+δ) log τ`.
    pub lambda: f64,
    pub log_x: f64,
    pub a: f64,
    pub delta: f64,
    /// `Λτ mod 2π` in `(−π, π]`.
    pub phi: f64,
    /// `τ log x mod 2π` in `(−π, π]`.
    pub chi: f64,
    /// Constant in `m_max = ⌊c_m (log x)^{1/3} (log log x)^{2/3}⌋`.
    pub c_m: f64,
    /// Half-width (in `θ`) of the region traced by continuation is `η/2`.
    pub eta: f64,
    pub theta_steps: usize,
    big_m: i128,
    hp: HpConsts,
    zeta: ZetaEvaluator,
}

/// A certified saddle point `s_m = iτ + w_m`.
#[derive(Debug, Clone)]
pub struct SaddlePoint {
    pub m: i64,
    pub w_hp: HpComplex,
    /// `σ_m + i(t_m − τ)`.
    pub w: C,
    pub f_val: C,
    pub f_second: C,
    /// `|f′(s_m)|/|f″(s_m)|` at working precision.
    pub newton_residual: f64,
    pub winding: i64,
    pub winding_ok: bool,
    /// Branch integer of the saddle equation for `t`.
    pub n_m: i128,
    /// `n_m − M` with `Λτ = 2πM + φ`.
    pub n_offset: i64,
    /// `t_m^± − τ`.
    pub u_minus: f64,
    pub u_plus: f64,
    pub used_fallback: bool,
}

/// Serializable view of a saddle point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSummary {
    pub m: i64,
    pub sigma: f64,
    pub t_minus_tau: f64,
    pub t: f64,
    pub f_re: f64,
    pub f_im: f64,
    pub f2_re: f64,
    pub f2_im: f64,
    pub newton_residual: f64,
    pub winding: i64,
    pub n_m: String,
    pub n_offset: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub theta: f64,
    pub sigma: f64,
    /// `t − τ`.
    pub u: f64,
    pub re_f: f64,
    pub im_f: f64,
    /// `|arg(e^{−iπ/2} γ′)|`.
    pub tangent_dev: f64,
}

/// A traced path of steepest descent from `t_m^−` to `t_m^+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentPath {
    pub m: i64,
    pub tau: f64,
    /// Sorted by `u`; includes the saddle itself.
    pub samples: Vec<PathSample>,
    pub saddle_index: usize,
    pub v_m: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub im_f_saddle: f64,
    pub max_im_drift: f64,
    pub re_f_monotone: bool,
    pub max_tangent_dev: f64,
}

impl DescentPath {
    pub fn im_f_ok(&self) -> bool {
        self.max_im_drift <= 1e-8 * self.im_f_saddle.abs() + 1e-12
    }

    pub fn tangent_ok(&self) -> bool {
        self.max_tangent_dev <= PI / 5.0
    }

    /// Both endpoints lie strictly between `σ = 1/2` and `σ = 1`.
    pub fn crosses_horizontal_edges(&self) -> bool {
        [self.sigma_minus, self.sigma_plus].iter().all(|&s| s > 0.5 && s < 1.0)
    }

    /// Columns `m,theta,sigma,t,re_f,im_f`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for s in &self.samples {
            writeln!(w, "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", self.m, s.theta, s.sigma, self.tau + s.u, s.re_f, s.im_f)?;
        }
        Ok(())
    }
}

pub fn write_paths_csv(path: &Path, paths: &[DescentPath]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "m,theta,sigma,t,re_f,im_f")?;
    for p in paths {
        p.write_csv(&mut f)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub m: i64,
    /// Distance of `Im f(s_m)` to the parity target.
    pub distance: f64,
    /// `|Im f(s_m) − main term|`.
    pub error_term: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub c_m: f64,
    pub m_max: i64,
    pub shrinks: usize,
    pub entries: Vec<PhaseEntry>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub m: i64,
    pub value: ScaledComplex,
    pub im_sign: i8,
    /// Deviation of the argument from `(−1)^{k+1}·π/2`.
    pub phi: f64,
    pub r_ln: f64,
    /// `∫ e^{Re(f − f(s_m))} |ds|` over the path.
    pub width: f64,
    /// `log(cos(2π/5) e^{Re f(s_m)} τ^{−2} width)`.
    pub lower_bound_ln: f64,
    /// `log(√(2π/|f″|) |g(s_m)| e^{Re f(s_m)})`.
    pub laplace_ln: f64,
    pub laplace_ratio: f64,
    pub quad_error_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionReport {
    pub k: usize,
    pub expected_sign: i8,
    pub entries: Vec<Contribution>,
    pub total: ScaledComplex,
    pub sign_ok: bool,
    pub phase_ok: bool,
    pub lower_bound_ok: bool,
    /// `width_0 · √(log x log τ)`.
    pub width_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModelReport {
    pub m: i64,
    /// `(r, ε(r))` with `ε` the relative deviation from the quadratic model.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of `ε` against `r log τ`.
    pub slope: f64,
    pub max_eps_inside: f64,
    pub pass: bool,
}

/// Asymptotic quantities measured against their expansions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub sigma0: f64,
    pub sigma0_approx: f64,
    /// `|σ_0 − approx| / (log log x/log x)`.
    pub sigma0_constant: f64,
    /// `f″(s_0)/(log x · Λ)`.
    pub f2_ratio: f64,
    pub f2_ratio_constant: f64,
    pub endpoint_approx: f64,
    pub endpoint_deviation: (f64, f64),
    /// `v_m/log x · (log τ)^{9/4}` per traced `m`.
    pub v_constants: Vec<(i64, f64)>,
}

impl SaddleProblem {
    pub fn new(sys: &ContinuousPrimeSystem, k: usize) -> Result<Self> {
        let term = sys.term(k).ok_or_else(|| Error::Invalid(format!("system has no term {k}")))?;
        let p = term.prec();
        let lt = term.log_tau();
        let lambda = term.lambda();
        let phi_r = reduce_mod_2pi(&(&lambda * &term.tau))?;
        let chi_r = reduce_mod_2pi(&(&term.tau * &term.log_x))?;
        let wrap_hp = |r: &Hp| if r.to_f64() > PI { r - &Hp::two_pi(p) } else { r.clone() };
        let phi = wrap_hp(&phi_r.hp);
        let chi = wrap_hp(&chi_r.hp);
        let big_m_hp = (&(&(&lambda * &term.tau) - &phi) / &Hp::two_pi(p)).round();
        let big_m = hp_to_i128(&big_m_hp);
        let tf = term.to_f64();
        let zeta = ZetaEvaluator::new(sys)?;
        Ok(SaddleProblem {
            k,
            even: term.even(),
            tau: tf.tau,
            log_tau: tf.log_tau,
            lambda: tf.lambda,
            log_x: tf.log_x,
            a: tf.a,
            delta: tf.delta,
            phi: phi.to_f64(),
            chi: chi.to_f64(),
            c_m: 0.01,
            eta: 0.1,
            theta_steps: 400,
            big_m,
            hp: HpConsts { lt, lambda, log_x: term.log_x.clone(), phi, chi },
            zeta,
        })
    }

    pub fn with_c_m(mut self, c_m: f64) -> Self {
        self.c_m = c_m;
        self
    }

    pub fn prec(&self) -> usize {
        self.hp.lt.prec()
    }

    fn llx(&self) -> f64 {
        self.log_x.ln()
    }

    /// `⌊c_m (log x)^{1/3} (log log x)^{2/3}⌋`.
    pub fn m_max(&self) -> i64 {
        (self.c_m * self.log_x.cbrt() * self.llx().powf(2.0 / 3.0)).floor() as i64
    }

    /// Largest `|m|` with `|m| < (log τ)^{3/4}`.
    pub fn m_study_max(&self) -> i64 {
        let b = self.log_tau.powf(0.75);
        let f = b.floor() as i64;
        if (f as f64) < b {
            f
        } else {
            f - 1
        }
    }

    /// `Λτ = 2πM + φ`.
    pub fn big_m(&self) -> i128 {
        self.big_m
    }

    /// `t_m^± − τ`.
    pub fn window(&self, m: i64) -> (f64, f64) {
        let c = TAU * m as f64;
        ((c - FRAC_PI_2) / self.lambda, (c + FRAC_PI_2) / self.lambda)
    }

    fn expo(&self, w: C) -> C {
        (C::new(self.log_tau, -self.phi) - w * self.lambda).exp()
    }

    fn check(w: C) -> Result<()> {
        if w.norm() == 0.0 {
            return Err(Error::PoleAtITau);
        }
        Ok(())
    }

    pub fn f_local(&self, w: C) -> Result<C> {
        Self::check(w)?;
        Ok((1.0 + w) * self.log_x + C::new(0.0, self.chi) + 0.5 * self.expo(w) / w)
    }

    pub fn f_prime_local(&self, w: C) -> Result<C> {
        Self::check(w)?;
        let iw = 1.0 / w;
        Ok(self.log_x - 0.5 * self.expo(w) * iw * (self.lambda + iw))
    }

    pub fn f_second_local(&self, w: C) -> Result<C> {
        Self::check(w)?;
        let iw = 1.0 / w;
        let q = self.lambda + iw;
        Ok(0.5 * self.expo(w) * iw * (q * q + iw * iw))
    }

    fn expo_hp(&self, w: &HpComplex) -> HpComplex {
        HpComplex::new(&self.hp.lt - &(&self.hp.lambda * &w.re), -&(&(&self.hp.lambda * &w.im) + &self.hp.phi)).exp()
    }

    fn f_hp(&self, w: &HpComplex) -> HpComplex {
        let p = self.prec();
        let lin = HpComplex::new(&(&Hp::one(p) + &w.re) * &self.hp.log_x, &(&w.im * &self.hp.log_x) + &self.hp.chi);
        let half = Hp::from_f64(0.5, p);
        lin.add(&self.expo_hp(w).div(w).scale(&half))
    }

    fn f_prime_hp(&self, w: &HpComplex) -> HpComplex {
        let p = self.prec();
        let iw = w.recip();
        let q = HpComplex::new(&self.hp.lambda + &iw.re, iw.im.clone());
        let t = self.expo_hp(w).mul(&iw).mul(&q).scale(&Hp::from_f64(0.5, p));
        HpComplex::from_real(self.hp.log_x.clone()).sub(&t)
    }

    fn f_second_hp(&self, w: &HpComplex) -> HpComplex {
        let p = self.prec();
        let iw = w.recip();
        let q = HpComplex::new(&self.hp.lambda + &iw.re, iw.im.clone());
        let inner = q.mul(&q).add(&iw.mul(&iw));
        self.expo_hp(w).mul(&iw).mul(&inner).scale(&Hp::from_f64(0.5, p))
    }

    /// Asymptotic seed for `w_m`.
    pub fn seed(&self, m: i64) -> C {
        let (lx, llx) = (self.log_x, self.llx());
        let r = (llx / lx).sqrt();
        let sigma = 1.0 - 2f64.sqrt() * r - 2f64.sqrt() * (self.a + LN_2) / (lx * llx).sqrt();
        let u = TAU * m as f64 / self.lambda * (1.0 - (1.0 + 2f64.sqrt() * r) / self.lambda);
        C::new(sigma, u)
    }

    /// `1 − √2√(llx/lx) − √2(a + log 2)/√(lx·llx)`.
    pub fn sigma_approx(&self) -> f64 {
        self.seed(0).re
    }

    fn newton_f64(&self, mut w: C, rect: (f64, f64, f64, f64)) -> Option<C> {
        for _ in 0..60 {
            let d = self.f_prime_local(w).ok()? / self.f_second_local(w).ok()?;
            w -= d;
            if !(w.re.is_finite() && w.im.is_finite()) || !inside(w, rect) {
                return None;
            }
            if d.norm() <= 1e-15 * (1.0 + w.norm()) {
                return Some(w);
            }
        }
        None
    }

    fn rect(&self, m: i64) -> (f64, f64, f64, f64) {
        let (lo, hi) = self.window(m);
        (0.5, 1.0, lo, hi)
    }

    /// Change of `arg f′` around a rectangle, counterclockwise, divided by 2π.
    pub fn winding_rect(&self, rect: (f64, f64, f64, f64)) -> Result<(i64, f64)> {
        let (s0, s1, u0, u1) = rect;
        let corners = [C::new(s1, u0), C::new(s1, u1), C::new(s0, u1), C::new(s0, u0), C::new(s1, u0)];
        let mut total = 0.0;
        for e in corners.windows(2) {
            total += self.arg_change(e[0], e[1], 64)?;
        }
        Ok(((total / TAU).round() as i64, total / TAU))
    }

    fn arg_change(&self, a: C, b: C, n: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut prev = self.f_prime_local(a)?;
        let mut pa = a;
        for i in 1..=n {
            let pb = a + (b - a) * (i as f64 / n as f64);
            let cur = self.f_prime_local(pb)?;
            total += self.arg_refine(pa, pb, prev, cur, 0)?;
            prev = cur;
            pa = pb;
        }
        Ok(total)
    }

    fn arg_refine(&self, a: C, b: C, fa: C, fb: C, depth: u32) -> Result<f64> {
        let d = (fb / fa).arg();
        if d.abs() < 0.3 || depth >= 40 {
            if fa.norm() == 0.0 || fb.norm() == 0.0 {
                return Err(Error::ConditionViolated("f′ vanishes on the rectangle boundary".into()));
            }
            return Ok(d);
        }
        let mid = 0.5 * (a + b);
        let fm = self.f_prime_local(mid)?;
        Ok(self.arg_refine(a, mid, fa, fm, depth + 1)? + self.arg_refine(mid, b, fm, fb, depth + 1)?)
    }

    /// Winding-guided subdivision of `V_m` down to a cell where Newton
    /// converges.
    fn quadtree(&self, m: i64) -> Result<C> {
        let full = self.rect(m);
        let mut cell = full;
        for _ in 0..40 {
            let (s0, s1, u0, u1) = cell;
            let (sm, um) = (0.5 * (s0 + s1), 0.5 * (u0 + u1));
            if let Some(w) = self.newton_f64(C::new(sm, um), full) {
                if inside(w, cell) {
                    return Ok(w);
                }
            }
            let quads = [(s0, sm, u0, um), (sm, s1, u0, um), (s0, sm, um, u1), (sm, s1, um, u1)];
            let mut next = None;
            for q in quads {
                if self.winding_rect(q).map(|w| w.0 == 1).unwrap_or(false) {
                    next = Some(q);
                    break;
                }
            }
            cell = next.ok_or(Error::NewtonFailed { m, reason: "no sub-cell with winding 1".into() })?;
        }
        Err(Error::NewtonFailed { m, reason: "subdivision exhausted".into() })
    }

    /// Locate and certify the saddle point in `V_m`.
    pub fn find_saddle(&self, m: i64) -> Result<SaddlePoint> {
        let rect = self.rect(m);
        let (w0, used_fallback) = match self.newton_f64(self.seed(m), rect) {
            Some(w) => (w, false),
            None => (self.quadtree(m)?, true),
        };
        let p = self.prec();
        let mut w = HpComplex::from_c64(w0, p);
        let mut residual = f64::INFINITY;
        for _ in 0..30 {
            let fp = self.f_prime_hp(&w);
            let fpp = self.f_second_hp(&w);
            residual = (&fp.abs() / &fpp.abs()).to_f64();
            if residual <= 1e-40 || residual == 0.0 {
                break;
            }
            w = w.sub(&fp.div(&fpp));
        }
        if !(residual <= 1e-25) {
            return Err(Error::NewtonFailed { m, reason: format!("residual {residual:e}") });
        }
        let wf = w.to_c64();
        if !inside(wf, rect) {
            return Err(Error::NewtonFailed { m, reason: "converged outside V_m".into() });
        }
        let (winding, _) = self.winding_rect(rect)?;
        if winding != 1 {
            return Err(Error::WindingNot1 { m, winding });
        }
        let q = self.lambda + 1.0 / wf;
        let n_offset = ((self.lambda * wf.im + self.phi - q.arg() + wf.arg()) / TAU).round() as i64;
        let (u_minus, u_plus) = self.window(m);
        Ok(SaddlePoint {
            m,
            f_val: self.f_hp(&w).to_c64(),
            f_second: self.f_second_hp(&w).to_c64(),
            w_hp: w,
            w: wf,
            newton_residual: residual,
            winding,
            winding_ok: true,
            n_m: self.big_m + n_offset as i128,
            n_offset,
            u_minus,
            u_plus,
            used_fallback,
        })
    }

    pub fn summary(&self, sp: &SaddlePoint) -> SaddleSummary {
        SaddleSummary {
            m: sp.m,
            sigma: sp.w.re,
            t_minus_tau: sp.w.im,
            t: self.tau + sp.w.im,
            f_re: sp.f_val.re,
            f_im: sp.f_val.im,
            f2_re: sp.f_second.re,
            f2_im: sp.f_second.im,
            newton_residual: sp.newton_residual,
            winding: sp.winding,
            n_m: sp.n_m.to_string(),
            n_offset: sp.n_offset,
        }
    }

    /// `Im[log x/(Λ + 1/w_m)]`.
    pub fn v_m(&self, sp: &SaddlePoint) -> f64 {
        (self.log_x / (self.lambda + 1.0 / sp.w)).im
    }

    fn im_f(&self, sigma: f64, u: f64) -> f64 {
        self.f_local(C::new(sigma, u)).map(|v| v.im).unwrap_or(f64::NAN)
    }

    /// Descent direction at the saddle with positive imaginary part.
    fn saddle_direction(f2: C) -> C {
        let d = C::from_polar(1.0, FRAC_PI_2 - 0.5 * f2.arg());
        if d.im < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Solve `Im f(σ + iu) = target` for `σ` by Newton from `guess`.
    fn newton_sigma(&self, u: f64, guess: f64, target: f64) -> Option<f64> {
        let mut s = guess;
        for _ in 0..40 {
            let w = C::new(s, u);
            let h = self.f_local(w).ok()?.im - target;
            let d = self.f_prime_local(w).ok()?.im;
            if d == 0.0 {
                return None;
            }
            let step = h / d;
            s -= step;
            if !s.is_finite() || (s - guess).abs() > 0.25 {
                return None;
            }
            if step.abs() <= 1e-15 {
                return Some(s);
            }
        }
        None
    }

    /// Scan `σ` downwards from 1 for a sign change of `Im f − target`, then
    /// bisect.
    fn bisect_sigma(&self, u: f64, target: f64) -> Option<f64> {
        let h = |s: f64| self.im_f(s, u) - target;
        for &(hi, lo) in &[(1.0, 0.5), (1.25, 0.3)] {
            let n = ((hi - lo) * 64.0f64).round() as usize;
            let mut a = hi;
            let mut ha = h(a);
            for i in 1..=n {
                let b = hi - (hi - lo) * i as f64 / n as f64;
                let hb = h(b);
                if ha == 0.0 {
                    return Some(a);
                }
                if ha.signum() != hb.signum() {
                    let (mut x0, mut x1, mut h0) = (b, a, hb);
                    for _ in 0..200 {
                        let mid = 0.5 * (x0 + x1);
                        if mid == x0 || mid == x1 {
                            break;
                        }
                        let hm = h(mid);
                        if hm.signum() == h0.signum() {
                            x0 = mid;
                            h0 = hm;
                        } else {
                            x1 = mid;
                        }
                    }
                    return Some(0.5 * (x0 + x1));
                }
                a = b;
                ha = hb;
            }
        }
        None
    }

    fn theta_of(&self, m: i64, u: f64) -> f64 {
        self.lambda * u - TAU * m as f64
    }

    /// Trace `Γ_m` over `θ ∈ [−π/2, π/2]`.
    pub fn trace_descent(&self, sp: &SaddlePoint) -> Result<DescentPath> {
        let m = sp.m;
        let target = sp.f_val.im;
        let n = self.theta_steps.max(8);
        let thetas: Vec<f64> = (0..=n).map(|i| -FRAC_PI_2 + PI * i as f64 / n as f64).collect();
        let us: Vec<f64> = thetas.iter().map(|th| (th + TAU * m as f64) / self.lambda).collect();
        let theta_m = self.theta_of(m, sp.w.im);
        let near = |th: f64| th.abs() <= 0.5 * self.eta || (th - theta_m) * th <= 0.0;
        // far samples: independent bisections
        let far: Vec<(usize, Option<f64>)> =
            us.par_iter().enumerate().filter(|(i, _)| !near(thetas[*i])).map(|(i, &u)| (i, self.bisect_sigma(u, target))).collect();
        let mut sigmas = vec![f64::NAN; us.len()];
        for (i, s) in far {
            sigmas[i] = s.ok_or(Error::PathLost { theta: thetas[i] })?;
        }
        // near samples: continuation outwards from the saddle
        let d0 = Self::saddle_direction(sp.f_second);
        let slope0 = d0.re / d0.im;
        for dir in [1.0, -1.0] {
            let mut idx: Vec<usize> = (0..us.len()).filter(|&i| near(thetas[i]) && (us[i] - sp.w.im) * dir > 0.0).collect();
            idx.sort_by(|&a, &b| ((us[a] - sp.w.im).abs()).partial_cmp(&(us[b] - sp.w.im).abs()).unwrap());
            let (mut s_prev, mut u_prev, mut slope) = (sp.w.re, sp.w.im, slope0);
            for i in idx {
                let u = us[i];
                let guess = s_prev + slope * (u - u_prev);
                let s = self
                    .newton_sigma(u, guess, target)
                    .or_else(|| self.bisect_sigma(u, target))
                    .ok_or(Error::PathLost { theta: thetas[i] })?;
                let fp = self.f_prime_local(C::new(s, u))?;
                slope = -fp.re / fp.im;
                s_prev = s;
                u_prev = u;
                sigmas[i] = s;
            }
        }
        let mut samples: Vec<PathSample> = Vec::with_capacity(us.len() + 1);
        for i in 0..us.len() {
            if (us[i] - sp.w.im).abs() < 1e-14 {
                continue;
            }
            samples.push(self.sample(thetas[i], sigmas[i], us[i], sp)?);
        }
        let saddle_sample = PathSample {
            theta: theta_m,
            sigma: sp.w.re,
            u: sp.w.im,
            re_f: sp.f_val.re,
            im_f: sp.f_val.im,
            tangent_dev: (d0.arg() - FRAC_PI_2).abs(),
        };
        samples.push(saddle_sample);
        samples.sort_by(|a, b| a.u.partial_cmp(&b.u).unwrap());
        let saddle_index = samples.iter().position(|s| s.u == sp.w.im).expect("saddle sample present");
        let max_im_drift = samples.iter().map(|s| (s.im_f - target).abs()).fold(0.0, f64::max);
        let mut re_f_monotone = true;
        for w in samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            // Re f increases up to the saddle and decreases after it
            if b.u <= sp.w.im && !(b.re_f > a.re_f) {
                re_f_monotone = false;
            }
            if a.u >= sp.w.im && !(b.re_f < a.re_f) {
                re_f_monotone = false;
            }
        }
        let max_tangent_dev = samples.iter().map(|s| s.tangent_dev).fold(0.0, f64::max);
        Ok(DescentPath {
            m,
            tau: self.tau,
            sigma_minus: samples[0].sigma,
            sigma_plus: samples[samples.len() - 1].sigma,
            samples,
            saddle_index,
            v_m: self.v_m(sp),
            im_f_saddle: target,
            max_im_drift,
            re_f_monotone,
            max_tangent_dev,
        })
    }

    fn sample(&self, theta: f64, sigma: f64, u: f64, sp: &SaddlePoint) -> Result<PathSample> {
        let w = C::new(sigma, u);
        let f = self.f_local(w)?;
        let fp = self.f_prime_local(w)?;
        // γ′ is a positive multiple of ∇Re f = conj f′ below the saddle and a
        // negative multiple above it
        let tangent = if u < sp.w.im { fp.conj() } else { -fp.conj() };
        let tangent_dev = wrap_pi(tangent.arg() - FRAC_PI_2).abs();
        Ok(PathSample { theta, sigma, u, re_f: f.re, im_f: f.im, tangent_dev })
    }

    /// `σ(u)` on the traced path, refined by Newton from the sampled curve.
    fn sigma_on_path(&self, path: &DescentPath, sp: &SaddlePoint, u: f64) -> f64 {
        let s = &path.samples;
        let i = s.partition_point(|p| p.u < u).clamp(1, s.len() - 1);
        let (a, b) = (s[i - 1], s[i]);
        let guess = a.sigma + (b.sigma - a.sigma) * (u - a.u) / (b.u - a.u);
        if (u - sp.w.im).abs() < 1e-13 {
            return sp.w.re;
        }
        self.newton_sigma(u, guess, sp.f_val.im).unwrap_or(guess)
    }

    /// `exp(Σ′)/((s−1)(s+1))` at `s = iτ + w`.
    pub fn g_local(&self, w: C) -> C {
        let sp = self.zeta.term_sum_local(self.k, w, Exclude::UpperA(self.k));
        let t = self.tau + w.im;
        let s_m1 = C::new(w.re - 1.0, t);
        let s_p1 = C::new(w.re + 1.0, t);
        sp.exp() / (s_m1 * s_p1)
    }

    /// Integral of `e^{f} g` over each traced path.
    pub fn saddle_contribution(&self, paths: &[(SaddlePoint, DescentPath)]) -> Result<ContributionReport> {
        let expected_sign: i8 = if self.even { -1 } else { 1 };
        let base = C::new(0.0, expected_sign as f64);
        let mut entries = Vec::new();
        let mut total = ScaledComplex::zero();
        for (sp, path) in paths {
            let d0 = Self::saddle_direction(sp.f_second);
            let slope0 = d0.re / d0.im;
            let point = |u: f64| -> (C, C) {
                let sigma = self.sigma_on_path(path, sp, u);
                let w = C::new(sigma, u);
                let fp = self.f_prime_local(w).unwrap_or(C::new(0.0, 0.0));
                let slope = if (u - sp.w.im).abs() < 1e-9 || fp.im == 0.0 { slope0 } else { -fp.re / fp.im };
                (w, C::new(slope, 1.0))
            };
            let integrand = |u: f64| -> C {
                let (w, ds) = point(u);
                let df = self.f_local(w).unwrap_or(C::new(f64::NEG_INFINITY, 0.0)) - sp.f_val;
                df.exp() * self.g_local(w) * ds
            };
            let width_fn = |u: f64| -> C {
                let (w, ds) = point(u);
                let df = self.f_local(w).map(|v| v.re).unwrap_or(f64::NEG_INFINITY) - sp.f_val.re;
                C::new(df.exp() * ds.norm(), 0.0)
            };
            let pts: Vec<f64> = {
                let mut v: Vec<f64> = path.samples.iter().step_by(8).map(|s| s.u).collect();
                v.push(path.samples[path.samples.len() - 1].u);
                v.push(sp.w.im);
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v.dedup();
                v
            };
            let opts = QuadOptions::tol(1e-10);
            let r = integrate_pieces(&integrand, &pts, opts);
            let wr = integrate_pieces(&width_fn, &pts, opts);
            let value = ScaledComplex::from_exp(sp.f_val).mul_complex(r.value);
            let r_ln = value.ln_abs();
            let phi = wrap_pi(value.arg() - base.arg());
            let im_sign = if value.z.im > 0.0 {
                1
            } else if value.z.im < 0.0 {
                -1
            } else {
                0
            };
            let width = wr.value.re;
            let lower_bound_ln = (2.0 * PI / 5.0).cos().ln() + sp.f_val.re - 2.0 * self.tau.ln() + width.ln();
            let g0 = self.g_local(sp.w);
            let laplace_ln = 0.5 * (TAU / sp.f_second.norm()).ln() + g0.norm().ln() + sp.f_val.re;
            entries.push(Contribution {
                m: sp.m,
                value,
                im_sign,
                phi,
                r_ln,
                width,
                lower_bound_ln,
                laplace_ln,
                laplace_ratio: (r_ln - laplace_ln).exp(),
                quad_error_rel: r.error / r.value.norm(),
            });
            total = total + value;
        }
        for e in &entries {
            if e.phi.abs() >= 2.0 * PI / 5.0 {
                return Err(Error::PhaseViolation { m: e.m, phi: e.phi });
            }
        }
        let sign_ok = entries.iter().all(|e| e.im_sign == expected_sign);
        let lower_bound_ok = entries.iter().all(|e| e.r_ln >= e.lower_bound_ln);
        let width_constant = entries.iter().find(|e| e.m == 0).map(|e| e.width * (self.log_x * self.log_tau).sqrt()).unwrap_or(f64::NAN);
        Ok(ContributionReport { k: self.k, expected_sign, entries, total, sign_ok, phase_ok: true, lower_bound_ok, width_constant })
    }

    /// Main term of `Im f(s_m)` modulo 2π, from the expansion of `t_m`.
    fn im_main_term(&self, m: i64) -> f64 {
        let r = (self.llx() / self.log_x).sqrt();
        let u = TAU * m as f64 / self.lambda * (1.0 - (1.0 + 2f64.sqrt() * r) / self.lambda);
        self.chi + self.log_x * u
    }

    /// Distance of `Im f(s_m)` to the parity target for `|m| ≤ m_max`,
    /// halving `c_m` while the error term at `|m| = m_max` exceeds π/16.
    pub fn phase_report(&self) -> Result<PhaseReport> {
        let mut c_m = self.c_m;
        let mut shrinks = 0;
        let p = self.prec();
        let offset = if self.even { Hp::zero(p) } else { Hp::pi(p) };
        loop {
            let prob = self.clone().with_c_m(c_m);
            let mm = prob.m_max();
            let ms: Vec<i64> = (-mm..=mm).collect();
            let entries: Vec<PhaseEntry> = ms
                .par_iter()
                .map(|&m| -> Result<PhaseEntry> {
                    let sp = prob.find_saddle(m)?;
                    let im = prob.f_hp(&sp.w_hp).im;
                    let distance = signed_dist_2pi(&im, &offset)?.abs();
                    let error_term = wrap_pi(sp.f_val.im - prob.im_main_term(m)).abs();
                    Ok(PhaseEntry { m, distance, error_term, pass: distance < PI / 8.0 })
                })
                .collect::<Result<_>>()?;
            let edge_bad = entries.iter().any(|e| e.m.abs() == mm && mm > 0 && e.error_term > PI / 16.0);
            if edge_bad && shrinks < 20 {
                c_m *= 0.5;
                shrinks += 1;
                continue;
            }
            let pass = entries.iter().all(|e| e.pass);
            return Ok(PhaseReport { c_m, m_max: mm, shrinks, entries, pass });
        }
    }

    /// Deviation of `f` from its quadratic model around `s_m`.
    pub fn quadratic_model(&self, sp: &SaddlePoint) -> Result<QuadraticModelReport> {
        let r_max = self.eta / self.log_tau;
        let mut samples = Vec::new();
        for j in 0..10 {
            let r = r_max * 2f64.powi(-j);
            let mut eps: f64 = 0.0;
            for i in 0..32 {
                let d = C::from_polar(r, TAU * i as f64 / 32.0);
                let wh = sp.w_hp.add(&HpComplex::from_c64(d, self.prec()));
                let df = self.f_hp(&wh).sub(&self.f_hp(&sp.w_hp)).to_c64();
                let model = 0.5 * sp.f_second * d * d;
                eps = eps.max((df - model).norm() / (0.5 * sp.f_second.norm() * r * r));
            }
            samples.push((r, eps));
        }
        let (num, den) = samples.iter().fold((0.0, 0.0), |(n, d), &(r, e)| {
            let x = r * self.log_tau;
            (n + x * e, d + x * x)
        });
        let max_eps_inside = samples.iter().map(|s| s.1).fold(0.0, f64::max);
        Ok(QuadraticModelReport { m: sp.m, samples, slope: num / den, max_eps_inside, pass: max_eps_inside < 0.05 })
    }

    pub fn asymptotics(&self, s0: &SaddlePoint, paths: &[DescentPath]) -> AsymptoticsReport {
        let (lx, llx) = (self.log_x, self.llx());
        let approx = self.sigma_approx();
        let f2_ratio = s0.f_second.re / (lx * self.lambda);
        let endpoint_approx = 1.0 - 2f64.sqrt() * (llx / lx).sqrt() - 2f64.sqrt() * (self.a + LN_2 + (PI / 2.0).ln()) / (lx * llx).sqrt();
        let p0 = paths.iter().find(|p| p.m == 0);
        let endpoint_deviation =
            p0.map(|p| (p.sigma_minus - endpoint_approx, p.sigma_plus - endpoint_approx)).unwrap_or((f64::NAN, f64::NAN));
        AsymptoticsReport {
            sigma0: s0.w.re,
            sigma0_approx: approx,
            sigma0_constant: (s0.w.re - approx).abs() / (llx / lx),
            f2_ratio,
            f2_ratio_constant: (f2_ratio - 1.0).abs() * self.log_tau,
            endpoint_approx,
            endpoint_deviation,
            v_constants: paths.iter().map(|p| (p.m, p.v_m.abs() / lx * self.log_tau.powf(2.25))).collect(),
        }
    }
}

fn inside(w: C, r: (f64, f64, f64, f64)) -> bool {
    w.re > r.0 && w.re < r.1 && w.im > r.2 && w.im < r.3
}

fn hp_to_i128(x: &Hp) -> i128 {
    let p = x.prec();
    let base = Hp::from_f64(2f64.powi(40), p);
    let q = (x / &base).floor();
    let r = x - &(&q * &base);
    (q.to_f64() as i128) * (1i128 << 40) + r.to_f64() as i128
}

/// `|1/θ − cot θ|` on `[−π/2, π/2]`, which stays below `2/π`.
pub fn cot_gap(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        return theta.abs() / 3.0;
    }
    (1.0 / theta - 1.0 / theta.tan()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::PrecisionContext;
    use crate::system::build_system;

    fn problem() -> SaddleProblem {
        let (sys, _) = build_system(1, 1e8, true, PrecisionContext::default()).unwrap();
        SaddleProblem::new(&sys, 0).unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = problem();
        let w = C::new(0.8, 0.03);
        let h = 1e-6 * (1.0 + w.norm());
        let fd = (p.f_local(w + h).unwrap() - p.f_local(w - h).unwrap()) / (2.0 * h);
        let an = p.f_prime_local(w).unwrap();
        assert!((fd - an).norm() < 1e-6 * an.norm().max(1.0), "{fd} vs {an}");
        let fd2 = (p.f_prime_local(w + h).unwrap() - p.f_prime_local(w - h).unwrap()) / (2.0 * h);
        let an2 = p.f_second_local(w).unwrap();
        assert!((fd2 - an2).norm() < 1e-6 * an2.norm());
    }

    #[test]
    fn large_sigma_limit() {
        let p = problem();
        let v = p.f_prime_local(C::new(40.0, 0.0)).unwrap();
        assert!((v - p.log_x).norm() < 1e-12);
        assert!(matches!(p.f_local(C::new(0.0, 0.0)), Err(Error::PoleAtITau)));
    }

    #[test]
    fn hp_and_f64_agree() {
        let p = problem();
        let w = C::new(0.7, -0.02);
        let wh = HpComplex::from_c64(w, p.prec());
        assert!((p.f_hp(&wh).to_c64() - p.f_local(w).unwrap()).norm() < 1e-11);
        assert!((p.f_prime_hp(&wh).to_c64() - p.f_prime_local(w).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn m_zero_saddle_on_line() {
        let p = problem();
        let s = p.find_saddle(0).unwrap();
        assert!(s.w.im.abs() < 1e-60, "{}", s.w.im);
        assert_eq!(s.n_offset, 0);
        assert!(s.newton_residual <= 1e-25);
    }

    #[test]
    fn cot_gap_bound() {
        for i in 0..=1000 {
            let th = -FRAC_PI_2 + PI * i as f64 / 1000.0;
            assert!(cot_gap(th) <= 2.0 / PI + 1e-12);
        }
    }

    #[test]
    fn hp_integer_conversion() {
        let x = Hp::parse("123456789012345678901234", 256).unwrap();
        assert_eq!(hp_to_i128(&x), 123456789012345678901234i128);
    }
}
