//! Bracketed and Newton root finders.

use num_complex::Complex64;

use super::hp::Hp;
use crate::error::{Error, Result};

/// Root of a continuous real function on a sign-changing bracket.
///
/// Bisects until the bracket holds about ten significant digits, then
/// finishes with Illinois-style secant steps that keep the bracket.
pub fn find_root_bracketed<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(Error::NonFinite { at: a });
    }
    if !fb.is_finite() {
        return Err(Error::NonFinite { at: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let coarse = tol.max(1e-10 * scale);
    while b - a > coarse {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if !fm.is_finite() {
            return Err(Error::NonFinite { at: m });
        }
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        if x <= a || x >= b {
            break;
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFinite { at: x });
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// High-precision counterpart of [`find_root_bracketed`]; `tol` is an absolute width.
pub fn find_root_bracketed_hp<F: FnMut(&Hp) -> Hp>(mut f: F, lo: &Hp, hi: &Hp, tol: &Hp) -> Result<Hp> {
    let (mut a, mut b) = if lo <= hi { (lo.clone(), hi.clone()) } else { (hi.clone(), lo.clone()) };
    let mut fa = f(&a);
    let mut fb = f(&b);
    if fa.is_zero() {
        return Ok(a);
    }
    if fb.is_zero() {
        return Ok(b);
    }
    if fa.is_negative() == fb.is_negative() {
        return Err(Error::NoSignChange { lo: lo.to_f64(), hi: hi.to_f64() });
    }
    let p = a.prec();
    let half = Hp::from_f64(0.5, p);
    let coarse = {
        let w = (&b - &a).abs();
        let c = w.mul_f64(1e-10);
        c.max(tol)
    };
    while (&b - &a) > coarse {
        let m = &(&a + &b) * &half;
        let fm = f(&m);
        if fm.is_zero() {
            return Ok(m);
        }
        if fm.is_negative() == fa.is_negative() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    let mut side = 0i8;
    for _ in 0..400 {
        if (&b - &a) <= *tol {
            break;
        }
        let mut x = &(&(&a * &fb) - &(&b * &fa)) / &(&fb - &fa);
        if !(x > a && x < b) {
            x = &(&a + &b) * &half;
        }
        if !(x > a && x < b) {
            break;
        }
        let fx = f(&x);
        if fx.is_zero() {
            return Ok(x);
        }
        if fx.is_negative() == fa.is_negative() {
            a = x;
            fa = fx;
            if side == -1 {
                fb = &fb * &half;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa = &fa * &half;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Outcome of a successful Newton solve.
#[derive(Debug, Clone, Copy)]
pub struct NewtonResult {
    pub root: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton's method for an analytic function.
///
/// Success means `|f(s)| ≤ tol·max(1, |f'(s)|·max(1, |s|))`.
pub fn newton_complex<F, D>(f: F, df: D, s0: Complex64, tol: f64, max_iter: usize) -> Result<NewtonResult>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    let mut s = s0;
    for it in 0..=max_iter {
        let fs = f(s);
        let ds = df(s);
        if !(fs.re.is_finite() && fs.im.is_finite()) {
            return Err(Error::NonFinite { at: s.norm() });
        }
        let scale = (ds.norm() * s.norm().max(1.0)).max(1.0);
        if fs.norm() <= tol * scale {
            return Ok(NewtonResult { root: s, iterations: it, residual: fs.norm() });
        }
        if it == max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: fs.norm() });
        }
        if ds.norm() < 1e-300 {
            return Err(Error::DerivativeVanished { iteration: it });
        }
        s -= fs / ds;
    }
    unreachable!()
}
