//! Deterministic prime augmentation `p = (80/π)e^ε` and the phase of
//! `F(s) = log ζ_0(s) − log ζ_C(s) − m log(1 − p^{−s})`.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RandomDiscreteSystem, SamplingGrid};
use crate::error::{Error, Result};
use crate::measure::{DensityKind, Measure};
use crate::numeric::{find_root_bracketed, reduce_mod_2pi, wrap_pi, Hp};
use crate::saddle::DescentPath;
use crate::system::ContinuousPrimeSystem;

/// Width `π/80` of the arcs `S_m`.
pub const ARC: f64 = PI / 80.0;
/// Beyond this height the phases `t log v` are reduced in high precision and
/// the continuous Mellin part is replaced by its integration-by-parts bound.
const HP_HEIGHT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    /// `p` at full precision.
    pub p_decimal: String,
    pub p: f64,
    pub m_aug: u32,
}

/// Index `m ∈ [0, 160)` of the arc `[mπ/80 − π/160, mπ/80 + π/160) + 2πZ`.
pub fn arc_index(phase: f64) -> u32 {
    (((phase + 0.5 * ARC) / ARC).floor() as i64).rem_euclid(160) as u32
}

/// Root of `sin α/(1 − (π/80)cos α) = ratio` on the increasing branch
/// `[0, arccos(π/80)]`.
pub fn solve_alpha(ratio: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Invalid(format!("arc ratio {ratio} outside [0, 1]")));
    }
    let g = |a: f64| a.sin() / (1.0 - ARC * a.cos()) - ratio;
    let top = ARC.acos();
    if !(g(0.0) <= 0.0 && g(top) > 0.0) {
        return Err(Error::ConditionViolated("no sign change on [0, arccos(π/80)]".into()));
    }
    if ratio == 0.0 {
        return Ok(0.0);
    }
    find_root_bracketed(g, 0.0, top, 1e-15)
}

/// `|arctan u − u| < 3|u|³` on the given samples with `|u| < 1`.
pub fn arctan_cubic_bound_holds(samples: &[f64]) -> bool {
    samples.iter().filter(|u| u.abs() < 1.0).all(|&u| (u.atan() - u).abs() < 3.0 * u.abs().powi(3) || u == 0.0)
}

/// `|∫_1^Y u^{−1−it} dΠ_C(u)|` bounded by one integration by parts in `log u`.
fn continuous_part_bound(measure: &Measure, t: f64, log_y: f64) -> f64 {
    // e^{−v}(e^v − 1)/v is decreasing from 1: variation and endpoints ≤ 3
    let mut tv = 3.0;
    for seg in &measure.segments {
        match &seg.kind {
            DensityKind::RationalLog => {}
            DensityKind::RationalLogPlusSine(c) | DensityKind::SineChunkDerivative(c) => {
                if c.log_lo < log_y {
                    let len = c.log_hi.min(log_y) - c.log_lo;
                    tv += ((c.tau * c.tau + c.tau) * len + 2.0 * c.tau) * (-c.log_lo).exp();
                }
            }
            _ => return f64::INFINITY,
        }
    }
    tv / t.abs()
}

/// `log ζ_0(s) − log ζ_C(s)` truncated at `y_max`, with the augmentation
/// term, plus an error bound and the standard deviation of the random tail
/// beyond `y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffValue {
    pub value: C,
    pub error: f64,
    pub truncation_std: f64,
}

fn phases(points: &[f64], t: &Hp) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|&v| {
            let p = t.prec();
            reduce_mod_2pi(&(t * &Hp::from_f64(v, p).ln())).map(|r| r.value)
        })
        .collect()
}

fn euler_term(v: f64, sigma: f64, phase: f64) -> C {
    // −log(1 − v^{−σ}e^{−iφ})
    let z = C::from_polar(v.powf(-sigma), -phase);
    -(C::new(1.0, 0.0) - z).ln()
}

/// `log ζ_0(σ + it) − log ζ_C(σ + it)` for a sampled system, `t` given in
/// high precision.
pub fn log_zeta_difference(sys: &RandomDiscreteSystem, grid: &SamplingGrid, sigma: f64, t: &Hp) -> Result<DiffValue> {
    let tf = t.to_f64();
    let high = tf.abs() > HP_HEIGHT;
    let ph: Vec<f64> = if high { phases(&sys.primes, t)? } else { sys.primes.iter().map(|&v| tf * v.ln()).collect() };
    let mut value: C = sys.primes.par_iter().zip(ph.par_iter()).map(|(&v, &f)| euler_term(v, sigma, f)).sum();
    let mut error = 1e-15 * sys.primes.len() as f64;
    if let Some(a) = &sys.augmentation {
        let p = Hp::parse(&a.p_decimal, t.prec())?;
        let f = if high { reduce_mod_2pi(&(t * &p.ln()))?.value } else { tf * a.p.ln() };
        value += a.m_aug as f64 * euler_term(a.p, sigma, f);
    }
    let measure = grid.measure();
    let log_y = sys.y_max.ln();
    if high {
        error += continuous_part_bound(measure, tf, log_y);
        if sigma != 1.0 {
            return Err(Error::Invalid("high-height evaluation is implemented on σ = 1 only".into()));
        }
    } else {
        let m = measure.mellin_stieltjes(C::new(sigma, tf), sys.y_max)?;
        value -= m.value;
        error += m.tail_bound;
    }
    let truncation_std = if sigma > 0.5 {
        let e = 2.0 * sigma - 1.0;
        ((-e * log_y).exp() / (e * log_y)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(DiffValue { value, error, truncation_std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcAssignment {
    pub k: usize,
    pub even: bool,
    pub im_difference: f64,
    pub error: f64,
    pub arc: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCheck {
    pub k: usize,
    pub tau: f64,
    /// Target of `τ_k log p` modulo 2π.
    pub target: f64,
    /// `τ_k log p − target` wrapped to `(−π, π]`.
    pub residual: f64,
    /// `2π Σ_{n≥1} τ_k/τ_{k+n}` over the built terms plus reduction error.
    pub bound: f64,
    pub within: bool,
    /// `Im(−m log(1 − p^{−1−iτ_k}))`.
    pub im_added: f64,
    /// `−(arc of this parity)·π/80`.
    pub expected: f64,
    pub im_pass: bool,
    /// `d(Im F(1+iτ_k), 2πZ)`.
    pub f_distance: f64,
    pub f_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub assignments: Vec<ArcAssignment>,
    /// Most frequent arc over even and over odd `k`.
    pub m_arc: u32,
    pub l_arc: u32,
    /// True when the odd arc was the larger one and the roles were exchanged.
    pub swapped: bool,
    pub alpha: f64,
    pub augmentation: Option<Augmentation>,
    pub eps: Vec<f64>,
    pub targets: Vec<TargetCheck>,
    pub arctan_bound_ok: bool,
    pub pass: bool,
}

fn most_frequent(arcs: impl Iterator<Item = u32>) -> Option<u32> {
    let mut counts = [0usize; 160];
    let mut any = false;
    for a in arcs {
        counts[a as usize] += 1;
        any = true;
    }
    // ties go to the smaller arc
    any.then(|| (0..160).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap() as u32)
}

/// Classify `Im(log ζ_0 − log ζ_C)(1+iτ_k)` into arcs, pick the augmentation
/// prime and verify its phases.
pub fn augment(
    sample: &RandomDiscreteSystem,
    grid: &SamplingGrid,
    sys: &ContinuousPrimeSystem,
) -> Result<(RandomDiscreteSystem, AugmentReport)> {
    let prec = sys.precision.bits;
    let mut base = sample.clone();
    base.augmentation = None;
    let mut assignments = Vec::new();
    for term in &sys.terms {
        let d = log_zeta_difference(&base, grid, 1.0, &term.tau)?;
        assignments.push(ArcAssignment {
            k: term.k,
            even: term.k % 2 == 0,
            im_difference: d.value.im,
            error: d.error,
            arc: arc_index(d.value.im),
        });
    }
    let m_arc = most_frequent(assignments.iter().filter(|a| a.even).map(|a| a.arc)).unwrap_or(0);
    let l_arc = most_frequent(assignments.iter().filter(|a| !a.even).map(|a| a.arc)).unwrap_or(0);
    let swapped = l_arc > m_arc;
    let (big, small) = if swapped { (l_arc, m_arc) } else { (m_arc, l_arc) };
    let alpha = if big == 0 { 0.0 } else { solve_alpha(small as f64 / big as f64)? };
    // terms of the parity carrying the larger arc aim at π/2, the others at α
    let big_even = !swapped;

    let mut eps = Vec::new();
    let mut targets = Vec::new();
    let augmentation = if big == 0 {
        None
    } else {
        let l0 = (Hp::from_f64(80.0, prec) / Hp::pi(prec)).ln();
        let mut log_p = l0.clone();
        for term in &sys.terms {
            let goal = if (term.k % 2 == 0) == big_even { Hp::pi(prec).div_i64(2) } else { Hp::from_f64(alpha, prec) };
            let lam = reduce_mod_2pi(&(&goal - &(&term.tau * &log_p)))?;
            let e = &lam.hp / &term.tau;
            log_p = &log_p + &e;
            eps.push(e.to_f64());
        }
        let p = log_p.exp();
        Some(Augmentation { p_decimal: p.to_decimal(), p: p.to_f64(), m_aug: big })
    };

    let mut out = base.clone();
    out.augmentation = augmentation.clone();
    if let Some(a) = &augmentation {
        let p_hp = Hp::parse(&a.p_decimal, prec)?;
        let log_p = p_hp.ln();
        let taus: Vec<f64> = sys.terms.iter().map(|t| t.tau.to_f64()).collect();
        for (i, term) in sys.terms.iter().enumerate() {
            let toward_half_pi = (term.k % 2 == 0) == big_even;
            let target = if toward_half_pi { PI / 2.0 } else { alpha };
            let r = reduce_mod_2pi(&(&term.tau * &log_p))?;
            let residual = wrap_pi(r.value - target);
            let tail: f64 = taus[i + 1..].iter().map(|&t2| 2.0 * PI * taus[i] / t2).sum();
            let bound = tail + 1e-12;
            let added = a.m_aug as f64 * euler_term(a.p, 1.0, r.value);
            let arc = if toward_half_pi { big } else { small };
            let expected = -(arc as f64) * ARC;
            let f = log_zeta_difference(&out, grid, 1.0, &term.tau)?;
            let f_distance = wrap_pi(f.value.im).abs();
            targets.push(TargetCheck {
                k: term.k,
                tau: taus[i],
                target,
                residual,
                bound,
                within: residual.abs() <= 10.0 * bound,
                im_added: added.im,
                expected,
                im_pass: wrap_pi(added.im - expected).abs() < PI / 40.0,
                f_distance,
                f_pass: f_distance + f.error < 5.0 * PI / 160.0,
            });
        }
    }
    let samples: Vec<f64> = (1..=200).map(|i| i as f64 / 201.0).collect();
    let arctan_bound_ok = arctan_cubic_bound_holds(&samples);
    let pass = arctan_bound_ok && targets.iter().all(|t| t.within && t.im_pass && t.f_pass);
    let report = AugmentReport { assignments, m_arc, l_arc, swapped, alpha, augmentation, eps, targets, arctan_bound_ok, pass };
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FPhaseReport {
    pub k: usize,
    pub samples: usize,
    /// `d(Im F(1+iτ_k), 2πZ)`.
    pub at_one: f64,
    /// Largest `d(Im F(s), 2πZ)` along the path.
    pub max_distance: f64,
    /// Largest standard deviation of the truncated random tail over the
    /// samples with `σ > 1/2`.
    pub truncation_std_max: f64,
    /// Samples with `σ ≤ 1/2`, where the random tail has no finite variance.
    pub samples_below_half: usize,
    /// `max |F(s) − F(1+iτ_k)| / ((log log τ)^{1/3}/(log τ)^{1/12})`.
    pub integral_constant: f64,
    pub pass: bool,
}

/// Phase distance of `f` to `2πZ` at `1 + iτ` and along the path samples.
/// `f` returns the value and the truncation standard deviation.
pub fn phase_along_path(path: &DescentPath, f: impl Fn(C) -> Result<(C, f64)> + Sync) -> Result<FPhaseReport> {
    let tau = path.tau;
    let (f1, _) = f(C::new(1.0, tau))?;
    let vals: Vec<Result<(C, f64)>> = path.samples.par_iter().map(|s| f(C::new(s.sigma, tau + s.u))).collect();
    let mut max_distance: f64 = 0.0;
    let mut truncation_std_max: f64 = 0.0;
    let mut samples_below_half = 0;
    let mut max_diff: f64 = 0.0;
    for v in vals {
        let (z, sd) = v?;
        max_distance = max_distance.max(wrap_pi(z.im).abs());
        if sd.is_finite() {
            truncation_std_max = truncation_std_max.max(sd);
        } else {
            samples_below_half += 1;
        }
        max_diff = max_diff.max((z - f1).norm());
    }
    let lt = tau.ln();
    let scale = lt.ln().powf(1.0 / 3.0) / lt.powf(1.0 / 12.0);
    let at_one = wrap_pi(f1.im).abs();
    Ok(FPhaseReport {
        k: 0,
        samples: path.samples.len(),
        at_one,
        max_distance,
        truncation_std_max,
        samples_below_half,
        integral_constant: max_diff / scale,
        pass: max_distance.max(at_one) < PI / 20.0,
    })
}

/// [`phase_along_path`] for `F = log ζ_0 − log ζ_C` of a sampled system.
pub fn f_phase_check(sample: &RandomDiscreteSystem, grid: &SamplingGrid, k: usize, path: &DescentPath) -> Result<FPhaseReport> {
    if path.tau > HP_HEIGHT {
        return Err(Error::Invalid(format!("path height {} beyond the double-precision phase range", path.tau)));
    }
    let prec = 128;
    let mut r = phase_along_path(path, |s| {
        let d = log_zeta_difference(sample, grid, s.re, &Hp::from_f64(s.im, prec))?;
        Ok((d.value, d.truncation_std))
    })?;
    r.k = k;
    Ok(r)
}
