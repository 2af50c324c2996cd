//! Lattice measures in log coordinates and their convolution algebra.
//!
//! Node `j` sits at `t_j = j·h` (that is `u = e^{jh}`). Mass is deposited
//! with linear (cloud-in-cell) weights so that the zeroth and first moments
//! in `t` are preserved exactly; multiplicative convolution becomes additive
//! convolution of node masses.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{segment_log_density, Measure};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BGM1";

/// Gauss–Legendre 5-point nodes and weights on [0, 1].
const GL5_X: [f64; 5] = [0.046_910_077_030_668_004, 0.230_765_344_947_158_45, 0.5, 0.769_234_655_052_841_6, 0.953_089_922_969_332];
const GL5_W: [f64; 5] =
    [0.118_463_442_528_094_54, 0.239_314_335_249_683_23, 0.284_444_444_444_444_4, 0.239_314_335_249_683_23, 0.118_463_442_528_094_54];

/// Masses on the lattice `t_j = j h`, `0 ≤ t_j ≤ log_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub h: f64,
    pub log_max: f64,
    pub masses: Vec<f64>,
}

impl GridMeasure {
    pub fn zero(h: f64, log_max: f64) -> Result<Self> {
        if !(h > 0.0 && log_max >= 0.0) {
            return Err(Error::Invalid(format!("grid h = {h}, log_max = {log_max}")));
        }
        let n = (log_max / h).round() as usize + 1;
        Ok(GridMeasure { h, log_max, masses: vec![0.0; n] })
    }

    /// Unit mass at `u = 1`.
    pub fn delta_one(h: f64, log_max: f64) -> Result<Self> {
        let mut g = GridMeasure::zero(h, log_max)?;
        g.masses[0] = 1.0;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    fn top(&self) -> f64 {
        self.node(self.len() - 1)
    }

    /// Linear split of mass `w` at `t` onto its two neighbouring nodes.
    pub fn deposit_atom(&mut self, t: f64, w: f64) {
        if t < 0.0 || t > self.top() {
            return;
        }
        let x = t / self.h;
        let j = (x.floor() as usize).min(self.len() - 1);
        let f = x - j as f64;
        if j + 1 < self.len() {
            self.masses[j] += w * (1.0 - f);
            self.masses[j + 1] += w * f;
        } else {
            self.masses[j] += w;
        }
    }

    /// Deposit a density `ρ(t) dt` supported on `[a, b]`.
    pub fn deposit_density<F: Fn(f64) -> f64 + Sync>(&mut self, rho: F, a: f64, b: f64) {
        let b = b.min(self.top());
        if b <= a {
            return;
        }
        let h = self.h;
        let j0 = (a / h).floor() as usize;
        let j1 = ((b / h).ceil() as usize).min(self.len() - 1);
        let contribs: Vec<(usize, f64, f64)> = (j0..j1)
            .into_par_iter()
            .map(|j| {
                let (tl, tr) = (j as f64 * h, (j + 1) as f64 * h);
                let (lo, hi) = (tl.max(a), tr.min(b));
                if hi <= lo {
                    return (j, 0.0, 0.0);
                }
                let mut ml = 0.0;
                let mut mr = 0.0;
                for k in 0..5 {
                    let t = lo + (hi - lo) * GL5_X[k];
                    let v = rho(t) * GL5_W[k] * (hi - lo);
                    let f = (t - tl) / h;
                    ml += v * (1.0 - f);
                    mr += v * f;
                }
                (j, ml, mr)
            })
            .collect();
        for (j, ml, mr) in contribs {
            self.masses[j] += ml;
            self.masses[j + 1] += mr;
        }
    }

    /// Lattice image of `μ` restricted to `[1, e^{log_max}]`.
    pub fn from_measure(mu: &Measure, h: f64, log_max: f64) -> Result<Self> {
        let mut g = GridMeasure::zero(h, log_max)?;
        for &(u, w) in &mu.atoms {
            g.deposit_atom(u.ln(), w);
        }
        for s in &mu.segments {
            let kind = &s.kind;
            g.deposit_density(|t| segment_log_density(kind, t), s.log_a, s.log_b);
        }
        Ok(g)
    }

    fn check_same(&self, o: &GridMeasure) -> Result<()> {
        if self.h != o.h || self.len() != o.len() {
            return Err(Error::GridMismatch(format!("h {} vs {}, nodes {} vs {}", self.h, o.h, self.len(), o.len())));
        }
        Ok(())
    }

    pub fn add(&self, o: &GridMeasure) -> Result<GridMeasure> {
        self.check_same(o)?;
        let masses = self.masses.iter().zip(&o.masses).map(|(a, b)| a + b).collect();
        Ok(GridMeasure { h: self.h, log_max: self.log_max, masses })
    }

    pub fn scale(&self, c: f64) -> GridMeasure {
        GridMeasure { h: self.h, log_max: self.log_max, masses: self.masses.iter().map(|m| m * c).collect() }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Prefix sums `Σ_{i ≤ j} m_i`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }

    /// Step CDF: total mass on nodes with `t_j ≤ log x`.
    pub fn cdf_step(&self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        let last = ((x.ln() / self.h) * (1.0 + 1e-14) + 1e-9).floor() as usize;
        self.masses[..=last.min(self.len() - 1)].iter().sum()
    }

    /// CDF of the hat-smoothed lattice measure (second-order accurate for
    /// deposited densities).
    pub fn cdf_smooth(&self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        let y = x.ln() / self.h;
        let i = y.floor() as usize;
        if i + 1 >= self.len() {
            return self.total_mass();
        }
        let z = y - i as f64;
        let below: f64 = if i == 0 { 0.0 } else { self.masses[..i].iter().sum() };
        // the node at 0 has only its right half inside [1, ∞)
        let hi_part = if i == 0 { 1.0 } else { 1.0 - 0.5 * (1.0 - z) * (1.0 - z) };
        below + self.masses[i] * hi_part + self.masses[i + 1] * 0.5 * z * z
    }

    /// `∫_1^x μ([1, u]) du = Σ_{t_j ≤ log x} m_j (x − e^{t_j})`.
    pub fn integrated_cdf(&self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        let lx = x.ln();
        let mut s = 0.0;
        let mut c = 0.0;
        for (j, &m) in self.masses.iter().enumerate() {
            let t = self.node(j);
            if t > lx {
                break;
            }
            // Kahan summation: terms are large and of both signs for signed measures
            let y = m * (x - t.exp()) - c;
            let tt = s + y;
            c = (tt - s) - y;
            s = tt;
        }
        s
    }

    /// `Σ m_j e^{−s t_j}`.
    pub fn mellin(&self, s: Complex64) -> Complex64 {
        let step = (-s * self.h).exp();
        let mut w = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &m) in self.masses.iter().enumerate() {
            if j % 1024 == 0 {
                w = (-s * self.node(j)).exp();
            }
            acc += w * m;
            w *= step;
        }
        acc
    }

    /// Multiplicative convolution truncated at `log_max`.
    pub fn mconvolve(&self, o: &GridMeasure) -> Result<GridMeasure> {
        self.check_same(o)?;
        let conv = Convolver::new(self.len());
        let fo = conv.forward(&o.masses);
        Ok(GridMeasure { h: self.h, log_max: self.log_max, masses: conv.apply(&self.masses, &fo) })
    }

    /// `M(λ) = Σ |m_j| e^{−λ t_j}`.
    fn laplace_abs(&self, lambda: f64) -> f64 {
        self.masses.iter().enumerate().map(|(j, m)| m.abs() * (-lambda * self.node(j)).exp()).sum()
    }

    /// Smallest `N` with `min_λ e^{λL} Σ_{n>N} M(λ)^n/n! ≤ tol`: a Chernoff
    /// bound on the mass of the dropped terms of the exponential series on
    /// `[0, L]`.
    pub fn exp_series_terms(&self, tol: f64) -> usize {
        let l = self.top();
        let lambdas: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let ms: Vec<f64> = lambdas.iter().map(|&lam| self.laplace_abs(lam)).collect();
        for n in 0..10_000usize {
            let best = lambdas.iter().zip(&ms).map(|(&lam, &m)| lam * l + poisson_tail_ln(m, n)).fold(f64::INFINITY, f64::min);
            if best <= tol.ln() {
                return n;
            }
        }
        10_000
    }

    /// `δ_1 + Σ_{n=1}^{N} μ^{*n}/n!` with `N` chosen so the dropped tail is
    /// at most `1e−12` of the result's mass (or the given `n_max`).
    pub fn exp_star(&self, n_max: Option<usize>) -> Result<GridMeasure> {
        if self.masses[0].abs() > self.h {
            return Err(Error::MassAtOne(self.masses[0]));
        }
        let n = n_max.unwrap_or_else(|| self.exp_series_terms(1e-12));
        let conv = Convolver::new(self.len());
        let fmu = conv.forward(&self.masses);
        let mut out = GridMeasure::delta_one(self.h, self.log_max)?;
        let mut term = self.masses.clone();
        for k in 1..=n {
            if k > 1 {
                term = conv.apply(&term, &fmu);
                let inv = 1.0 / k as f64;
                term.iter_mut().for_each(|x| *x *= inv);
            }
            for (o, t) in out.masses.iter_mut().zip(&term) {
                *o += t;
            }
            if term.iter().all(|&x| x == 0.0) {
                break;
            }
        }
        Ok(out)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&self.h.to_le_bytes())?;
        f.write_all(&self.log_max.to_le_bytes())?;
        f.write_all(&(self.len() as u64).to_le_bytes())?;
        for m in &self.masses {
            f.write_all(&m.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<GridMeasure> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        if buf.len() < 28 || &buf[..4] != MAGIC {
            return Err(Error::Parse("not a BGM1 grid file".into()));
        }
        let rd = |i: usize| <[u8; 8]>::try_from(&buf[i..i + 8]).unwrap();
        let h = f64::from_le_bytes(rd(4));
        let log_max = f64::from_le_bytes(rd(12));
        let n = u64::from_le_bytes(rd(20)) as usize;
        if buf.len() != 28 + 8 * n {
            return Err(Error::Parse(format!("expected {n} cells, file has {} bytes", buf.len())));
        }
        let masses = (0..n).map(|j| f64::from_le_bytes(rd(28 + 8 * j))).collect();
        Ok(GridMeasure { h, log_max, masses })
    }

    /// CSV with columns `x, cdf` at every `stride`-th node.
    pub fn write_csv(&self, path: &Path, stride: usize) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x,cdf")?;
        let cum = self.cumulative();
        for j in (0..self.len()).step_by(stride.max(1)) {
            writeln!(f, "{:.17e},{:.17e}", self.node(j).exp(), cum[j])?;
        }
        f.flush()?;
        Ok(())
    }
}

/// `ln Σ_{n>N} m^n/n!` (and `−∞` for `m = 0`).
fn poisson_tail_ln(m: f64, n: usize) -> f64 {
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    // first dropped term, then a geometric majorant once terms decrease
    let k = (n + 1) as f64;
    let ln_first = k * m.ln() - ln_factorial(n + 1);
    let ratio = m / (k + 1.0);
    if ratio < 1.0 {
        ln_first - (1.0 - ratio).ln()
    } else {
        // terms still growing: bound by e^m
        m
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Linear (non-circular) convolution of length-`n` sequences, truncated to `n`.
pub(crate) struct Convolver {
    n: usize,
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub(crate) fn new(n: usize) -> Self {
        let size = (2 * n).next_power_of_two();
        let mut p = FftPlanner::new();
        Convolver { n, size, fwd: p.plan_fft_forward(size), inv: p.plan_fft_inverse(size) }
    }

    pub(crate) fn forward(&self, a: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.fwd.process(&mut buf);
        buf
    }

    pub(crate) fn apply(&self, a: &[f64], fb: &[Complex64]) -> Vec<f64> {
        let mut fa = self.forward(a);
        for (x, y) in fa.iter_mut().zip(fb) {
            *x *= y;
        }
        self.inv.process(&mut fa);
        let s = 1.0 / self.size as f64;
        fa[..self.n].iter().map(|z| z.re * s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                out[i + j] += a[i] * b[j];
            }
        }
        out
    }

    #[test]
    fn fft_matches_direct_convolution() {
        let a: Vec<f64> = (0..37).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let b: Vec<f64> = (0..37).map(|i| ((i * 3) % 4) as f64 * 0.25).collect();
        let c = Convolver::new(37);
        let got = c.apply(&a, &c.forward(&b));
        for (x, y) in got.iter().zip(direct(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_one_is_identity() {
        let mut nu = GridMeasure::zero(0.01, 3.0).unwrap();
        nu.deposit_atom(1.234, 0.7);
        nu.deposit_atom(2.0, 0.2);
        let e = GridMeasure::delta_one(0.01, 3.0).unwrap();
        let r = e.mconvolve(&nu).unwrap();
        for (x, y) in r.masses.iter().zip(&nu.masses) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn atoms_multiply() {
        let h = 1e-3;
        let mut a = GridMeasure::zero(h, 3.0).unwrap();
        let mut b = GridMeasure::zero(h, 3.0).unwrap();
        a.deposit_atom(2f64.ln(), 1.0);
        b.deposit_atom(3f64.ln(), 1.0);
        let c = a.mconvolve(&b).unwrap();
        assert!((c.total_mass() - 1.0).abs() < 1e-12);
        let mean: f64 = c.masses.iter().enumerate().map(|(j, m)| m * c.node(j)).sum();
        assert!((mean - 6f64.ln()).abs() < 1e-12);
        assert!((c.cdf_step(6.0 * (1.0 + 2.0 * h)) - 1.0).abs() < 1e-12);
        assert!(c.cdf_step(6.0 * (1.0 - 2.0 * h)).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let a = GridMeasure::zero(0.01, 3.0).unwrap();
        let b = GridMeasure::zero(0.02, 3.0).unwrap();
        assert!(matches!(a.mconvolve(&b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn exp_star_of_zero_and_single_atom() {
        let z = GridMeasure::zero(0.01, 3.0).unwrap();
        let e = z.exp_star(None).unwrap();
        assert_eq!(e.masses[0], 1.0);
        assert_eq!(e.total_mass(), 1.0);
        let h = 1e-3;
        let mut a = GridMeasure::zero(h, 8f64.ln() + 0.01).unwrap();
        a.deposit_atom(2f64.ln(), 1.0);
        let e = a.exp_star(None).unwrap();
        let want = 1.0 + 1.0 + 0.5 + 1.0 / 6.0;
        assert!((e.cdf_step(8.0 * (1.0 + 3.0 * h)) - want).abs() < 1e-12);
        assert!((e.cdf_step(4.0 * (1.0 + 3.0 * h)) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn mass_at_one_rejected() {
        let mut a = GridMeasure::zero(0.01, 3.0).unwrap();
        a.masses[0] = 0.5;
        assert!(matches!(a.exp_star(None), Err(Error::MassAtOne(_))));
    }

    #[test]
    fn binary_round_trip() {
        let mut a = GridMeasure::zero(0.1, 2.0).unwrap();
        a.deposit_atom(0.77, 1.5);
        let dir = std::env::temp_dir().join(format!("bgm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("a.bgm");
        a.write_binary(&p).unwrap();
        let b = GridMeasure::read_binary(&p).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn deposit_preserves_mass_and_first_moment() {
        let mut g = GridMeasure::zero(0.01, 4.0).unwrap();
        g.deposit_density(|t| t.cos() + 2.0, 0.123, 3.456);
        let mass = 2.0 * (3.456 - 0.123) + 3.456f64.sin() - 0.123f64.sin();
        assert!((g.total_mass() - mass).abs() < 1e-12);
        // ∫ t (cos t + 2) dt = t sin t + cos t + t²
        let m1 = |t: f64| t * t.sin() + t.cos() + t * t;
        let first: f64 = g.masses.iter().enumerate().map(|(j, m)| m * g.node(j)).sum();
        assert!((first - (m1(3.456) - m1(0.123))).abs() < 1e-11);
    }
}
