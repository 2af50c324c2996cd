use beurling::measure::atomic::{discrete_integers, AtomicMeasure};
use beurling::measure::grid::GridMeasure;
use beurling::measure::{ein, rational_log_density_t, Measure};
use beurling::numeric::{integrate_real, PrecisionContext, QuadOptions};
use beurling::system::build_system;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn exp_of_rational_log_is_lebesgue_plus_unit_atom() {
    // ζ(s) = s/(s−1) has N(x) = x
    let h = 1e-4;
    let g = GridMeasure::from_measure(&Measure::rational_log(), h, 8.0).unwrap();
    let n = g.exp_star(None).unwrap();
    let mut worst: f64 = 0.0;
    for i in 1..=80 {
        let x = (i as f64 * 0.1).exp();
        worst = worst.max((n.cdf_smooth(x) - x).abs() / x);
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn self_convolution_matches_double_integral() {
    let h = 1e-3;
    let g = GridMeasure::from_measure(&Measure::rational_log(), h, 6.0).unwrap();
    let c = g.mconvolve(&g).unwrap();
    for &l in &[1.0, 3.0, 5.5] {
        // (dP * dP)([1, e^l]) = ∫_0^l ρ(t) Ein(l − t) dt
        let want = integrate_real(|t| rational_log_density_t(t) * ein(l - t), 0.0, l, QuadOptions::tol(1e-12)).value.re;
        let got = c.cdf_smooth(l.exp());
        assert!((got - want).abs() < 1e-4 * want.max(1.0), "l = {l}: {got} vs {want}");
    }
}

#[test]
fn two_three_exact_exponential_is_enumeration() {
    let x_max = 1e4;
    let d = discrete_integers(&[(2.0, 1), (3.0, 1)], x_max, 100_000).unwrap();
    let e = d.pi.exp_star(x_max).unwrap();
    assert_eq!(e.atoms.len(), d.integers.len());
    for (a, b) in e.atoms.iter().zip(&d.integers) {
        assert!((a.0 - b.0).abs() <= 1e-9 * b.0);
        assert!((a.1 - b.1 as f64).abs() < 1e-9, "{a:?} vs {b:?}");
    }
}

#[test]
fn two_three_lattice_exponential_tracks_counts() {
    let x_max = 1e3;
    let d = discrete_integers(&[(2.0, 1), (3.0, 1)], x_max, 100_000).unwrap();
    let mu = Measure::atomic(d.pi.atoms.clone()).unwrap();
    let g = GridMeasure::from_measure(&mu, 1e-4, x_max.ln()).unwrap();
    let n = g.exp_star(None).unwrap();
    for &x in &[50.5, 200.0, 999.0] {
        let (got, want) = (n.integrated_cdf(x), d.integrated_count(x));
        assert!((got - want).abs() < 1e-2 * want, "{x}: {got} vs {want}");
    }
}

#[test]
fn mellin_of_exponential_is_exponential_of_mellin() {
    let x_max = 1e7;
    let d = discrete_integers(&[(2.0, 1), (3.0, 1), (5.0, 1)], x_max, 1_000_000).unwrap();
    let s = Complex64::new(4.0, 3.7);
    let lhs = d.dn().mellin(s);
    // Euler product over the three primes
    let rhs: Complex64 = [2.0f64, 3.0, 5.0].iter().map(|&p| 1.0 / (1.0 - (-s * p.ln()).exp())).product();
    assert!((lhs - rhs).norm() < 1e-9, "{lhs} vs {rhs}");
    let direct = d.pi.mellin(s).exp();
    assert!((direct - rhs).norm() < 1e-9);
}

#[test]
fn continuous_prime_density_is_nonnegative() {
    let (sys, _) = build_system(2, 3.0, true, PrecisionContext::default()).unwrap();
    let m = sys.prime_measure().unwrap();
    let (sampled, analytic) = m.density_lower_bounds(20_000);
    assert!(sampled >= 0.0, "{sampled}");
    assert!(analytic > 0.0, "{analytic}");
}

fn atomic_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.05f64..3.0, -0.5f64..0.5), 1..6)
}

fn lattice(atoms: &[(f64, f64)], h: f64, l: f64) -> GridMeasure {
    let mut g = GridMeasure::zero(h, l).unwrap();
    for &(t, w) in atoms {
        g.deposit_atom(t, w);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exp_turns_sums_into_convolutions(a in atomic_strategy(), b in atomic_strategy()) {
        let (h, l) = (0.01, 4.0);
        let (ga, gb) = (lattice(&a, h, l), lattice(&b, h, l));
        let lhs = ga.add(&gb).unwrap().exp_star(None).unwrap();
        let rhs = ga.exp_star(None).unwrap().mconvolve(&gb.exp_star(None).unwrap()).unwrap();
        let scale: f64 = lhs.masses.iter().map(|m| m.abs()).sum::<f64>().max(1.0);
        for (x, y) in lhs.masses.iter().zip(&rhs.masses) {
            prop_assert!((x - y).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn lattice_exponential_mellin(a in atomic_strategy(), im in -20.0f64..20.0) {
        // at large Re s the truncation at e^L is negligible
        let (h, l) = (0.01, 30.0);
        let g = lattice(&a, h, l);
        let s = Complex64::new(6.0, im);
        let lhs = g.exp_star(None).unwrap().mellin(s);
        let rhs = g.mellin(s).exp();
        prop_assert!((lhs - rhs).norm() < 1e-9 * rhs.norm().max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn atomic_convolution_is_commutative(a in atomic_strategy(), b in atomic_strategy()) {
        let to_u = |v: &[(f64, f64)]| AtomicMeasure::new(v.iter().map(|&(t, w)| (t.exp(), w)).collect());
        let (ma, mb) = (to_u(&a), to_u(&b));
        let ab = ma.convolve(&mb, 1e6);
        let ba = mb.convolve(&ma, 1e6);
        let s = Complex64::new(0.5, 1.0);
        prop_assert!((ab.mellin(s) - ba.mellin(s)).norm() < 1e-12);
        prop_assert!((ab.mellin(s) - ma.mellin(s) * mb.mellin(s)).norm() < 1e-12);
    }
}
