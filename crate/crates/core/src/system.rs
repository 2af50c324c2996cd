//! Construction and verification of the parameter sequences
//! `(τ_k, a_k, δ_k, ν_k, x_k)` of the continuous prime system.
//!
//! For each `k` the builder picks `log ξ_k`, perturbs it to `log x_k` so that
//! `τ_k log x_k` hits the parity target, sets `a_k = α + η_k` so that
//! `(1+δ_k)τ_k log τ_k ∈ 2πZ`, and chooses `ν_k ∈ [2, 3]` with
//! `ν_k τ_k log τ_k ∈ 2πZ`. All phase-critical arithmetic runs at the
//! configured binary precision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Measure, SineChunk};
use crate::numeric::hp::{reduce_mod_2pi, wrap_pi, Hp};
use crate::numeric::roots::{find_root_bracketed, find_root_bracketed_hp};
use crate::numeric::PrecisionContext;

/// `α = log 6 + 1/2`.
pub fn alpha_hp(p: usize) -> Hp {
    &Hp::from_i64(6, p).ln() + &Hp::from_f64(0.5, p)
}

/// `log τ` as a function of `y = log x`: `√(y log y / 2)`.
pub fn log_tau_of(y: &Hp) -> Hp {
    (y * &y.ln()).div_i64(2).sqrt()
}

/// `y·exp(√(y log y/2))`, i.e. `τ log x` as a function of `y = log x`.
pub fn g_phase(y: &Hp) -> Hp {
    y * &log_tau_of(y).exp()
}

/// Quantity whose distance to `Z` is controlled by property (d), written in
/// terms of `y = log x` and the shift `a`.
pub fn d_quantity(y: &Hp, a: &Hp) -> Hp {
    let p = y.prec();
    let lt = log_tau_of(y);
    let lam = &(&lt + &lt.ln()) + a; // (1+δ) log τ
    let corr = &Hp::one(p) + &(Hp::from_i64(2, p).sqrt() * (&y.ln() / y).sqrt());
    &(y / &lam) * &(&Hp::one(p) - &(&corr / &lam))
}

/// One term `k` of the system.
#[derive(Debug, Clone)]
pub struct SystemTerm {
    pub k: usize,
    pub tau: Hp,
    pub a: Hp,
    pub nu: Hp,
    pub log_x: Hp,
}

/// Double-precision view of a term, with the phases needed downstream
/// reduced in high precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermF64 {
    pub k: usize,
    pub tau: f64,
    pub log_tau: f64,
    pub a: f64,
    pub delta: f64,
    pub nu: f64,
    pub log_x: f64,
    /// `(1+δ) log τ`.
    pub lambda: f64,
    /// `τ log x` reduced to `(−π, π]`.
    pub chi: f64,
    pub even: bool,
}

impl SystemTerm {
    pub fn prec(&self) -> usize {
        self.tau.prec()
    }

    pub fn log_tau(&self) -> Hp {
        self.tau.ln()
    }

    /// `δ = (log log τ + a)/log τ`.
    pub fn delta(&self) -> Hp {
        let lt = self.log_tau();
        &(&lt.ln() + &self.a) / &lt
    }

    /// `(1+δ) log τ = log τ + log log τ + a`.
    pub fn lambda(&self) -> Hp {
        let lt = self.log_tau();
        &(&lt + &lt.ln()) + &self.a
    }

    pub fn even(&self) -> bool {
        self.k % 2 == 0
    }

    pub fn to_f64(&self) -> TermF64 {
        let chi = reduce_mod_2pi(&(&self.tau * &self.log_x)).map(|r| wrap_pi(r.value)).unwrap_or(f64::NAN);
        TermF64 {
            k: self.k,
            tau: self.tau.to_f64(),
            log_tau: self.log_tau().to_f64(),
            a: self.a.to_f64(),
            delta: self.delta().to_f64(),
            nu: self.nu.to_f64(),
            log_x: self.log_x.to_f64(),
            lambda: self.lambda().to_f64(),
            chi,
            even: self.even(),
        }
    }

    /// The oscillating chunk `sin(τ log u)` on `(τ^{1+δ}, τ^ν]` with endpoint
    /// phases reduced in high precision.
    pub fn chunk(&self) -> Result<SineChunk> {
        let lt = self.log_tau();
        let lo = self.lambda();
        let hi = &self.nu * &lt;
        let plo = reduce_mod_2pi(&(&lo * &self.tau))?;
        let phi = reduce_mod_2pi(&(&hi * &self.tau))?;
        Ok(SineChunk {
            tau: self.tau.to_f64(),
            log_lo: lo.to_f64(),
            log_hi: hi.to_f64(),
            phase_lo: wrap_pi(plo.value),
            phase_hi: wrap_pi(phi.value),
        })
    }
}

/// The sequences of the continuous prime system for `k < K`.
#[derive(Debug, Clone)]
pub struct ContinuousPrimeSystem {
    pub terms: Vec<SystemTerm>,
    pub alpha: Hp,
    pub precision: PrecisionContext,
    /// Whether `log τ_k = √(log x_k log log x_k/2)` was imposed (false for
    /// systems assembled from raw parameters).
    pub xk_relation: bool,
}

/// Per-term construction and verification data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub k: usize,
    pub tau: f64,
    pub log_x: f64,
    /// Distance of `(1+δ)τ log τ` to `2πZ`.
    pub residual_b1: f64,
    /// Distance of `ν τ log τ` to `2πZ`.
    pub residual_b2: f64,
    /// Distance of `τ log x` to its parity target.
    pub residual_c: f64,
    /// Threshold `2^{−(bits − log2|value| − 8)}` for (b), (c).
    pub residual_threshold: f64,
    pub d_distance: f64,
    pub d_bound: f64,
    /// `τ_k > (2τ_{k−1})^5` (vacuous for `k = 0`).
    pub property_a: bool,
    /// `|log τ − √(log x log log x/2)|` in ulps of `log τ`.
    pub xk_ulps: f64,
    pub delta: f64,
    pub nu: f64,
    pub a: f64,
    /// `log ξ_k` search interval `[lo, hi]`.
    pub xi_window: (f64, f64),
    pub epsilon: f64,
    pub eta: f64,
    pub bits: usize,
    pub attempts: usize,
    pub pass_a: bool,
    pub pass_b: bool,
    pub pass_c: bool,
    pub pass_d: bool,
}

/// Build or verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BuildReport {
    pub terms: Vec<TermReport>,
}

impl BuildReport {
    pub fn all_pass(&self) -> bool {
        self.terms.iter().all(|t| t.pass_a && t.pass_b && t.pass_c && t.pass_d)
    }
}

/// Options for [`build_system_with`].
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub k_count: usize,
    pub tau_floor: f64,
    pub relaxed: bool,
    pub ctx: PrecisionContext,
    /// Maximum number of integer targets tried for property (d) per term.
    pub max_attempts: usize,
}

impl BuildOptions {
    pub fn new(k_count: usize, tau_floor: f64, relaxed: bool, ctx: PrecisionContext) -> Self {
        BuildOptions { k_count, tau_floor, relaxed, ctx, max_attempts: 64 }
    }
}

/// Build `K` terms. `relaxed` picks the least admissible `log ξ_k` giving
/// `τ_k > T`; otherwise `log ξ_k > T²` is imposed literally.
pub fn build_system(k_count: usize, tau_floor: f64, relaxed: bool, ctx: PrecisionContext) -> Result<(ContinuousPrimeSystem, BuildReport)> {
    build_system_with(BuildOptions::new(k_count, tau_floor, relaxed, ctx))
}

pub fn build_system_with(opts: BuildOptions) -> Result<(ContinuousPrimeSystem, BuildReport)> {
    if !(opts.tau_floor >= 3.0) {
        return Err(Error::Invalid(format!("tau_floor {} must be at least 3", opts.tau_floor)));
    }
    let p = opts.ctx.bits;
    let alpha = alpha_hp(p);
    let mut terms: Vec<SystemTerm> = Vec::new();
    let mut builds = Vec::new();
    // ln T for the current term
    let mut ln_t = opts.tau_floor.ln();
    for k in 0..opts.k_count {
        let b = build_term(k, ln_t, &alpha, &opts)?;
        ln_t = 5.0 * (2f64.ln() + b.term.tau.ln().to_f64());
        builds.push((b.xi_window, b.epsilon, b.eta, b.attempts));
        terms.push(b.term);
    }
    let sys = ContinuousPrimeSystem { terms, alpha, precision: opts.ctx, xk_relation: true };
    let mut report = verify_properties(&sys);
    for (t, (w, e, h, att)) in report.terms.iter_mut().zip(builds) {
        t.xi_window = w;
        t.epsilon = e;
        t.eta = h;
        t.attempts = att;
    }
    Ok((sys, report))
}

struct TermBuild {
    term: SystemTerm,
    xi_window: (f64, f64),
    epsilon: f64,
    eta: f64,
    attempts: usize,
}

/// Least `y` with `y log y ≥ 2 c²`, i.e. `√(y log y/2) ≥ c`.
fn y_for_log_tau(c: f64) -> f64 {
    let target = 2.0 * c * c;
    let f = |y: f64| y * y.ln() - target;
    let mut hi = 3.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    find_root_bracketed(f, 1.5, hi, 1e-12 * hi).unwrap_or(hi)
}

fn build_term(k: usize, ln_t: f64, alpha: &Hp, opts: &BuildOptions) -> Result<TermBuild> {
    let p = opts.ctx.bits;
    let two_pi = Hp::two_pi(p);
    // δ < 1 for every admissible a ≤ α + 1: log τ − log log τ > α + 1
    let alpha1 = alpha.to_f64() + 1.0;
    let lt_floor = find_root_bracketed(|c: f64| c - c.ln() - alpha1, alpha1, 10.0 * alpha1 + 10.0, 1e-14)?;
    let y_floor = y_for_log_tau(lt_floor) * (1.0 + 1e-12);
    let y_min = if opts.relaxed { y_for_log_tau(ln_t) * (1.0 + 1e-12) } else { (ln_t * ln_t).exp() };
    let y_min = y_min.max(y_floor);
    // bits needed to resolve τ log x mod 2π at the smallest candidate
    let lt_min = (y_min * y_min.ln() / 2.0).sqrt();
    let required = PrecisionContext::bits_for(lt_min / 2f64.ln() + y_min.log2());
    if !y_min.is_finite() || required > p {
        return Err(Error::InsufficientPrecision { bits: p, required: if y_min.is_finite() { required } else { usize::MAX } });
    }
    let mut lo = Hp::from_f64(y_min, p);
    let offset = if k % 2 == 0 { Hp::zero(p) } else { Hp::pi(p) };
    let mut n = d_quantity(&lo, alpha).ceil();
    for attempt in 1..=opts.max_attempts {
        // step 1: log ξ with the (d) quantity equal to the integer n
        let target_n = n.clone();
        let fq = |y: &Hp| &d_quantity(y, alpha) - &target_n;
        let mut hi = lo.clone();
        while fq(&hi).is_negative() {
            hi = hi.mul_f64(1.05);
        }
        let tol = hi.mul_f64(2f64.powi(-60));
        let log_xi = find_root_bracketed_hp(fq, &lo, &hi, &tol)?;
        // step 2: ε, the least positive shift with τ log x on the parity target
        let g0 = g_phase(&log_xi);
        let m = (&(&g0 - &offset) / &two_pi).floor();
        let mut target = &(&(&m + &Hp::one(p)) * &two_pi) + &offset;
        if target <= g0 {
            target = &target + &two_pi;
        }
        let gap = &target - &g0;
        let ltx = log_tau_of(&log_xi);
        let lnx = log_xi.ln();
        let slope = &ltx.exp() * &(&Hp::one(p) + &(&(&log_xi * &(&lnx + &Hp::one(p))) / &ltx.mul_i64(4)));
        let seed = &gap / &slope;
        let fe = |e: &Hp| &g_phase(&(&log_xi + e)) - &target;
        let mut ehi = seed.mul_i64(2);
        while fe(&ehi).is_negative() {
            ehi = ehi.mul_i64(2);
        }
        let etol = log_xi.mul_f64(2f64.powi(-(p as i32 - 1)));
        let eps = find_root_bracketed_hp(fe, &Hp::zero(p), &ehi, &etol)?;
        let log_x = &log_xi + &eps;
        // step 3: η, the least positive shift of α giving (1+δ)τ log τ ∈ 2πZ
        let lt = log_tau_of(&log_x);
        let tau = lt.exp();
        let base = &tau * &(&(&lt + &lt.ln()) + alpha);
        let r = reduce_mod_2pi(&base)?;
        let eta = &(&two_pi - &r.hp) / &tau;
        let a = alpha + &eta;
        // step 4: ν = 2πn'/(τ log τ) with n' the least integer making ν ≥ 2
        let tl = &tau * &lt;
        let nn = (&tl / &Hp::pi(p)).ceil();
        let nu = &(&nn * &two_pi) / &tl;
        let term = SystemTerm { k, tau, a, nu, log_x };
        let dq = d_quantity(&term.log_x, &term.a).to_f64();
        let dist = (dq - dq.round()).abs();
        let bound = (1.0 / 32.0) * term.log_tau().to_f64().powf(-0.75);
        if dist < bound {
            return Ok(TermBuild {
                xi_window: (y_min, log_xi.to_f64()),
                epsilon: eps.to_f64(),
                eta: eta.to_f64(),
                attempts: attempt,
                term,
            });
        }
        lo = log_xi;
        n = &n + &Hp::one(p);
    }
    Err(Error::SearchFailed {
        lo: y_min,
        hi: lo.to_f64(),
        reason: format!("property (d) not met after {} integer targets", opts.max_attempts),
    })
}

/// Recompute every residual for `sys` with an evaluation order different
/// from the builder's and compare with the thresholds.
pub fn verify_properties(sys: &ContinuousPrimeSystem) -> BuildReport {
    let mut out = Vec::new();
    for (i, t) in sys.terms.iter().enumerate() {
        let p = t.prec();
        let two = Hp::from_i64(2, p);
        let lt = t.tau.ln();
        let llt = lt.ln();
        let delta = &(&llt + &t.a) / &lt;
        let one_plus = &Hp::one(p) + &delta;
        // (b): products formed as ((1+δ)·τ)·log τ and (ν·log τ)·τ
        let v1 = &(&one_plus * &t.tau) * &lt;
        let v2 = &(&t.nu * &lt) * &t.tau;
        let vc = &t.log_x * &t.tau;
        let dist = |v: &Hp, odd: bool| -> f64 {
            let shifted = if odd { v - &Hp::pi(p) } else { v.clone() };
            reduce_mod_2pi(&shifted).map(|r| wrap_pi(r.value).abs()).unwrap_or(f64::INFINITY)
        };
        let r1 = dist(&v1, false);
        let r2 = dist(&v2, false);
        let rc = dist(&vc, !t.even());
        let mag = v1.log2_abs().max(v2.log2_abs()).max(vc.log2_abs()) as f64;
        let thr = 2f64.powf(-(p as f64 - mag - 8.0));
        // (d)
        let lx = &t.log_x;
        let llx = lx.ln();
        let lam = &one_plus * &lt;
        let inner = &Hp::one(p) - &(&(&Hp::one(p) + &(&two.sqrt() * &(&llx / lx).sqrt())) / &lam);
        let q = &(lx / &lam) * &inner;
        let dd = (&q - &q.round()).abs().to_f64();
        let dbound = (1.0 / 32.0) * lt.to_f64().powf(-0.75);
        // (a)
        let pa = if i == 0 {
            true
        } else {
            let prev = &sys.terms[i - 1].tau;
            let lhs = prev.mul_i64(2).powi(5);
            t.tau > lhs
        };
        // relation between log τ and log x, in ulps of log τ
        let rel = (lx * &llx).div_i64(2).sqrt();
        let ulp = 2f64.powi(lt.log2_abs() as i32 - p as i32);
        let xk_ulps = (&lt - &rel).abs().to_f64() / ulp;
        let tf = t.to_f64();
        let in_range = tf.delta > 0.0
            && tf.delta < 1.0
            && tf.nu >= 2.0
            && tf.nu <= 3.0
            && (!sys.xk_relation || (tf.a >= (2.0 * tf.nu).ln() && tf.a >= 6f64.ln() && tf.a <= 6f64.ln() + 1.0));
        out.push(TermReport {
            k: t.k,
            tau: tf.tau,
            log_x: tf.log_x,
            residual_b1: r1,
            residual_b2: r2,
            residual_c: rc,
            residual_threshold: thr,
            d_distance: dd,
            d_bound: dbound,
            property_a: pa,
            xk_ulps,
            delta: tf.delta,
            nu: tf.nu,
            a: tf.a,
            xi_window: (f64::NAN, f64::NAN),
            epsilon: f64::NAN,
            eta: f64::NAN,
            bits: p,
            attempts: 0,
            pass_a: pa,
            pass_b: r1 <= thr && r2 <= thr && in_range,
            pass_c: rc <= thr && (!sys.xk_relation || xk_ulps <= 2.0),
            pass_d: dd < dbound,
        });
    }
    BuildReport { terms: out }
}

/// Comparison of the measured `ε_k`, `η_k` with the proof's order bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCheck {
    pub k: usize,
    pub epsilon: f64,
    pub epsilon_envelope: f64,
    pub epsilon_ratio: f64,
    pub eta: f64,
    pub eta_envelope: f64,
    pub eta_ratio: f64,
    pub nonnegative: bool,
    /// No admissible smaller value found on a 64-point refinement of `(0, ε)`
    /// and `(0, η)`.
    pub smallest_positive: bool,
    pub pass: bool,
}

/// Measure `ε_k / envelope` and `η_k / envelope` (pass line: 10).
///
/// Envelopes: `1/(√(log ξ log log ξ)·exp(√(log ξ log log ξ)/√2))` for `ε`,
/// `exp(−√(log x log log x)/√2)` for `η`.
pub fn epsilon_bound_check(sys: &ContinuousPrimeSystem) -> Vec<EpsilonCheck> {
    let mut out = Vec::new();
    for t in &sys.terms {
        let p = t.prec();
        let two_pi = Hp::two_pi(p);
        let lt = log_tau_of(&t.log_x);
        let tau = lt.exp();
        // recover ε from the parity target: the largest admissible y below log x
        // is log ξ, which we reconstruct by re-solving the (d) integer condition
        let lx = t.log_x.to_f64();
        let n = d_quantity(&t.log_x, &sys.alpha).round();
        let fq = |y: &Hp| &d_quantity(y, &sys.alpha) - &n;
        let lo = t.log_x.mul_f64(0.999);
        let tol = t.log_x.mul_f64(2f64.powi(-(p as i32 - 24)));
        let log_xi = match find_root_bracketed_hp(fq, &lo, &t.log_x, &tol) {
            Ok(v) => v,
            Err(_) => {
                out.push(EpsilonCheck {
                    k: t.k,
                    epsilon: f64::NAN,
                    epsilon_envelope: f64::NAN,
                    epsilon_ratio: f64::NAN,
                    eta: f64::NAN,
                    eta_envelope: f64::NAN,
                    eta_ratio: f64::NAN,
                    nonnegative: false,
                    smallest_positive: false,
                    pass: false,
                });
                continue;
            }
        };
        let eps = &t.log_x - &log_xi;
        let ly = log_xi.to_f64();
        let s = (ly * ly.ln()).sqrt();
        let eps_env = 1.0 / (s * (s / 2f64.sqrt()).exp());
        let eta = &t.a - &sys.alpha;
        let eta_env = (-(lx * lx.ln()).sqrt() / 2f64.sqrt()).exp();
        // refinement: τ log x must not hit the target strictly inside (0, ε)
        let target = g_phase(&t.log_x);
        let mut smallest = true;
        for i in 1..64 {
            let y = &log_xi + &eps.mul_f64(i as f64 / 64.0);
            if g_phase(&y) >= target {
                smallest = false;
            }
        }
        // the previous admissible value lies 2π below the target
        let prev = &target - &two_pi;
        if g_phase(&log_xi) < prev {
            smallest = false;
        }
        // η: the phase τ(log τ + log log τ + α + η) must not cross 2πZ before η
        let base = &tau * &(&(&lt + &lt.ln()) + &sys.alpha);
        let r0 = reduce_mod_2pi(&base).map(|r| r.value).unwrap_or(f64::NAN);
        for i in 1..64 {
            let inc = (&tau * &eta.mul_f64(i as f64 / 64.0)).to_f64();
            if r0 + inc >= std::f64::consts::TAU {
                smallest = false;
            }
        }
        let e = eps.to_f64();
        let h = eta.to_f64();
        let nonneg = e > 0.0 && h > 0.0;
        let er = e / eps_env;
        let hr = h / eta_env;
        out.push(EpsilonCheck {
            k: t.k,
            epsilon: e,
            epsilon_envelope: eps_env,
            epsilon_ratio: er,
            eta: h,
            eta_envelope: eta_env,
            eta_ratio: hr,
            nonnegative: nonneg,
            smallest_positive: smallest,
            pass: nonneg && smallest && er <= 10.0 && hr <= 10.0,
        });
    }
    out
}

impl ContinuousPrimeSystem {
    /// The system with no terms: `ζ = s/(s−1)`.
    pub fn empty(ctx: PrecisionContext) -> Self {
        ContinuousPrimeSystem { terms: Vec::new(), alpha: alpha_hp(ctx.bits), precision: ctx, xk_relation: true }
    }

    pub fn k_count(&self) -> usize {
        self.terms.len()
    }

    pub fn bits(&self) -> usize {
        self.precision.bits
    }

    pub fn term(&self, k: usize) -> Option<&SystemTerm> {
        self.terms.get(k)
    }

    pub fn terms_f64(&self) -> Vec<TermF64> {
        self.terms.iter().map(|t| t.to_f64()).collect()
    }

    pub fn chunks(&self) -> Result<Vec<SineChunk>> {
        self.terms.iter().map(|t| t.chunk()).collect()
    }

    /// `dΠ_C` as a measure.
    pub fn prime_measure(&self) -> Result<Measure> {
        Measure::continuous_prime(&self.chunks()?)
    }

    /// `Σ_j τ_j^{−1/2}`, the size of the primed sum away from each `τ_k`.
    pub fn tau_tail_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.tau.to_f64().powf(-0.5)).sum()
    }

    /// Terms assembled from raw `(τ, δ, ν, log x)` values, snapped so that
    /// properties (b) and (c) hold exactly: `δ` and `ν` move to the nearest
    /// admissible values and `log x` to the nearest parity target. The
    /// relation between `τ` and `x` is not imposed.
    pub fn from_params(params: &[(f64, f64, f64, f64)], ctx: PrecisionContext) -> Result<Self> {
        let p = ctx.bits;
        let two_pi = Hp::two_pi(p);
        let mut terms = Vec::new();
        for (k, &(tau, delta, nu, log_x)) in params.iter().enumerate() {
            if !(tau > 1.0 && delta > 0.0 && nu > 1.0 + delta && log_x > 0.0) {
                return Err(Error::Invalid(format!("term {k}: need τ > 1, δ > 0, ν > 1 + δ, log x > 0")));
            }
            let t = Hp::from_f64(tau, p);
            let lt = t.ln();
            let tl = &t * &lt;
            let n1 = (&(&tl * &Hp::from_f64(1.0 + delta, p)) / &two_pi).round();
            let one_plus = &(&n1 * &two_pi) / &tl;
            let a = &(&(&one_plus - &Hp::one(p)) * &lt) - &lt.ln();
            let n2 = (&(&tl * &Hp::from_f64(nu, p)) / &two_pi).round();
            let nu_h = &(&n2 * &two_pi) / &tl;
            let off = if k % 2 == 0 { Hp::zero(p) } else { Hp::pi(p) };
            let raw = &(&Hp::from_f64(log_x * tau, p) - &off) / &two_pi;
            let lx = &(&(&raw.round() * &two_pi) + &off) / &t;
            terms.push(SystemTerm { k, tau: t, a, nu: nu_h, log_x: lx });
        }
        Ok(ContinuousPrimeSystem { terms, alpha: alpha_hp(p), precision: ctx, xk_relation: false })
    }

    /// Text manifest with lossless decimal values.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# continuous prime system");
        let _ = writeln!(s, "bits = {}", self.bits());
        let _ = writeln!(s, "alpha = {}", self.alpha.to_decimal());
        let _ = writeln!(s, "xk_relation = {}", self.xk_relation);
        let _ = writeln!(s, "K = {}", self.terms.len());
        for t in &self.terms {
            let _ = writeln!(s, "\n[term {}]", t.k);
            let _ = writeln!(s, "tau = {}", t.tau.to_decimal());
            let _ = writeln!(s, "a = {}", t.a.to_decimal());
            let _ = writeln!(s, "nu = {}", t.nu.to_decimal());
            let _ = writeln!(s, "log_x = {}", t.log_x.to_decimal());
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut bits: Option<usize> = None;
        let mut xk_relation = true;
        let mut raw: Vec<(usize, Vec<(String, String)>)> = Vec::new();
        let mut k_decl: Option<usize> = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("[term").and_then(|r| r.strip_suffix(']')) {
                let k: usize = rest.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad section", ln + 1)))?;
                raw.push((k, Vec::new()));
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", ln + 1)))?;
            match raw.last_mut() {
                Some((_, kv)) => kv.push((key, val)),
                None => match key.as_str() {
                    "bits" => bits = Some(val.parse().map_err(|_| Error::Parse("bits".into()))?),
                    "xk_relation" => xk_relation = val == "true",
                    "K" => k_decl = Some(val.parse().map_err(|_| Error::Parse("K".into()))?),
                    "alpha" => {}
                    _ => return Err(Error::Parse(format!("line {}: unknown key {key}", ln + 1))),
                },
            }
        }
        let bits = bits.ok_or_else(|| Error::Parse("missing bits".into()))?;
        let mut terms = Vec::new();
        for (i, (k, kv)) in raw.into_iter().enumerate() {
            if k != i {
                return Err(Error::Parse(format!("term {k} out of order")));
            }
            let get = |name: &str| -> Result<Hp> {
                let v = kv.iter().find(|(a, _)| a == name).ok_or_else(|| Error::Parse(format!("term {k}: missing {name}")))?;
                Hp::parse(&v.1, bits)
            };
            terms.push(SystemTerm { k, tau: get("tau")?, a: get("a")?, nu: get("nu")?, log_x: get("log_x")? });
        }
        if let Some(kd) = k_decl {
            if kd != terms.len() {
                return Err(Error::Parse(format!("K = {kd} but {} terms present", terms.len())));
            }
        }
        Ok(ContinuousPrimeSystem { terms, alpha: alpha_hp(bits), precision: PrecisionContext::new(bits), xk_relation })
    }

    /// Copy with every stored value re-rounded to `bits`.
    pub fn with_bits(&self, bits: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| SystemTerm {
                k: t.k,
                tau: t.tau.with_prec(bits),
                a: t.a.with_prec(bits),
                nu: t.nu.with_prec(bits),
                log_x: t.log_x.with_prec(bits),
            })
            .collect();
        ContinuousPrimeSystem { terms, alpha: alpha_hp(bits), precision: PrecisionContext::new(bits), xk_relation: self.xk_relation }
    }
}
