//! Exact finite atomic measures and discrete Beurling systems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite atomic measure with sorted positions; positions closer than a
/// relative `1e−12` are merged.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        AtomicMeasure { atoms: merge(atoms) }
    }

    pub fn delta_one() -> Self {
        AtomicMeasure { atoms: vec![(1.0, 1.0)] }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    pub fn mellin(&self, s: Complex64) -> Complex64 {
        self.atoms.iter().map(|&(u, w)| w * (-s * u.ln()).exp()).sum()
    }

    /// Convolution restricted to positions `≤ x_max`.
    pub fn convolve(&self, o: &AtomicMeasure, x_max: f64) -> AtomicMeasure {
        let mut out = Vec::new();
        for &(u, w) in &self.atoms {
            for &(v, z) in &o.atoms {
                let p = u * v;
                if p > x_max * (1.0 + 1e-12) {
                    break;
                }
                out.push((p, w * z));
            }
        }
        AtomicMeasure::new(out)
    }

    /// `δ_1 + Σ_n μ^{*n}/n!` restricted to `[1, x_max]`, computed exactly
    /// (the series terminates because every atom lies above 1).
    pub fn exp_star(&self, x_max: f64) -> Result<AtomicMeasure> {
        if let Some(&(u, w)) = self.atoms.first() {
            if u <= 1.0 && w != 0.0 {
                return Err(Error::MassAtOne(w));
            }
        }
        let base = AtomicMeasure { atoms: self.atoms.iter().copied().filter(|a| a.0 <= x_max).collect() };
        let mut out = vec![(1.0, 1.0)];
        let mut term = base.clone();
        let mut n = 1.0;
        while !term.atoms.is_empty() {
            out.extend(term.atoms.iter().map(|&(u, w)| (u, w)));
            n += 1.0;
            term = term.convolve(&base, x_max);
            term.atoms.iter_mut().for_each(|a| a.1 /= n);
        }
        Ok(AtomicMeasure::new(out))
    }
}

fn merge(atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (u, w) in atoms {
        match out.last_mut() {
            Some(last) if (u - last.0).abs() <= 1e-12 * u => last.1 += w,
            _ => out.push((u, w)),
        }
    }
    out
}

/// Generalized integers and the prime-power measure of a finite prime set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSystem {
    pub x_max: f64,
    /// Sorted `(n, multiplicity)`.
    pub integers: Vec<(f64, u64)>,
    /// `dΠ`: atoms `p^k` with weight `multiplicity/k`.
    pub pi: AtomicMeasure,
}

impl DiscreteSystem {
    /// `N(x)`.
    pub fn count(&self, x: f64) -> u64 {
        self.integers.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    /// `Π(x) = Σ_k π(x^{1/k})/k`.
    pub fn pi_count(&self, x: f64) -> f64 {
        self.pi.cdf(x)
    }

    /// `dN` as an atomic measure.
    pub fn dn(&self) -> AtomicMeasure {
        AtomicMeasure::new(self.integers.iter().map(|&(n, m)| (n, m as f64)).collect())
    }

    /// `∫_1^x N(u) du = Σ_{n ≤ x} (x − n)`.
    pub fn integrated_count(&self, x: f64) -> f64 {
        self.integers.iter().take_while(|a| a.0 <= x).map(|&(n, m)| m as f64 * (x - n)).sum()
    }
}

/// Enumerate the multiplicative semigroup generated by `primes` up to `x_max`.
///
/// `primes` holds `(p, multiplicity)` with `p > 1`; `cap` bounds the number
/// of distinct products visited.
pub fn discrete_integers(primes: &[(f64, u32)], x_max: f64, cap: usize) -> Result<DiscreteSystem> {
    let mut ps: Vec<(f64, u32)> = primes.to_vec();
    for &(p, _) in &ps {
        if !(p > 1.0) {
            return Err(Error::Invalid(format!("prime {p} must exceed 1")));
        }
    }
    ps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // a prime of multiplicity m contributes C(e+m−1, m−1) ways to p^e
    let mut found: Vec<(f64, u64)> = Vec::new();
    let mut stack: Vec<(usize, f64, u64)> = vec![(0, 1.0, 1)];
    while let Some((i, val, mult)) = stack.pop() {
        if i == ps.len() {
            found.push((val, mult));
            if found.len() > cap {
                return Err(Error::Overflow(cap));
            }
            continue;
        }
        let (p, m) = ps[i];
        let mut v = val;
        let mut e: u64 = 0;
        loop {
            stack.push((i + 1, v, mult * binom(e + m as u64 - 1, m as u64 - 1)));
            if stack.len() > cap {
                return Err(Error::Overflow(cap));
            }
            v *= p;
            e += 1;
            if v > x_max * (1.0 + 1e-12) {
                break;
            }
        }
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut integers: Vec<(f64, u64)> = Vec::with_capacity(found.len());
    for (u, m) in found {
        match integers.last_mut() {
            Some(last) if (u - last.0).abs() <= 1e-12 * u => last.1 += m,
            _ => integers.push((u, m)),
        }
    }
    let mut pi = Vec::new();
    for &(p, m) in &ps {
        let mut v = p;
        let mut k = 1.0;
        while v <= x_max * (1.0 + 1e-12) {
            pi.push((v, m as f64 / k));
            v *= p;
            k += 1.0;
        }
    }
    Ok(DiscreteSystem { x_max, integers, pi: AtomicMeasure::new(pi) })
}

fn binom(n: u64, k: u64) -> u64 {
    let mut r = 1u64;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_three_up_to_ten() {
        let d = discrete_integers(&[(2.0, 1), (3.0, 1)], 10.0, 1000).unwrap();
        assert_eq!(d.count(10.0), 7);
        let got: Vec<f64> = d.integers.iter().map(|a| a.0).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn empty_and_single_prime() {
        let d = discrete_integers(&[], 100.0, 10).unwrap();
        assert_eq!(d.count(100.0), 1);
        let d = discrete_integers(&[(2.0, 1)], 8.0, 10).unwrap();
        assert!((d.pi_count(8.0) - (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn multiplicity_counts_compositions() {
        // a prime of multiplicity 2 behaves like two distinct primes of equal size
        let d = discrete_integers(&[(2.0, 2)], 8.0, 100).unwrap();
        let m: Vec<u64> = d.integers.iter().map(|a| a.1).collect();
        assert_eq!(m, vec![1, 2, 3, 4]);
        let e = d.pi.exp_star(8.0).unwrap();
        for (a, b) in e.atoms.iter().zip(&d.integers) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1 as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(discrete_integers(&[(2.0, 1), (3.0, 1)], 1e6, 10), Err(Error::Overflow(10))));
    }

    #[test]
    fn single_atom_exp_star() {
        let a = AtomicMeasure::new(vec![(2.0, 1.0)]);
        let e = a.exp_star(8.0).unwrap();
        assert_eq!(e.atoms.len(), 4);
        assert!((e.cdf(8.0) - (1.0 + 1.0 + 0.5 + 1.0 / 6.0)).abs() < 1e-15);
    }
}
