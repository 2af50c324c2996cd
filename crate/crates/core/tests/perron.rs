use std::f64::consts::E;
use std::sync::OnceLock;

use beurling::measure::GridMeasure;
use beurling::numeric::PrecisionContext;
use beurling::perron::{k0_hl_exponent, CompositeOptions, CompositeResult, PerronProblem, VerticalOptions};
use beurling::saddle::SaddleProblem;
use beurling::system::{build_system, ContinuousPrimeSystem};
use proptest::prelude::*;

// Slope of log ∫|F||ds| along the Hilberdink–Lapidus curve (t ≤ 10¹²) for the
// trivial system, fitted over log x ∈ {4, 5, …, 12}; 20-digit mpmath quadrature.
const K0_HL_SLOPE: f64 = 1.6330407617332168;

fn desk() -> &'static ContinuousPrimeSystem {
    static S: OnceLock<ContinuousPrimeSystem> = OnceLock::new();
    S.get_or_init(|| build_system(2, 3.0, true, PrecisionContext::default()).unwrap().0)
}

fn toy() -> ContinuousPrimeSystem {
    ContinuousPrimeSystem::from_params(&[(50.0, 0.3, 2.0, 25.0)], PrecisionContext::default()).unwrap()
}

/// `Σ_{n ≤ x} (x − n)` over integers generated by the given primes.
fn integrated_count(primes: &[u64], x: f64) -> f64 {
    let mut ns = vec![1u64];
    for &p in primes {
        let mut more = Vec::new();
        for &n in &ns {
            let mut m = n * p;
            while (m as f64) <= x {
                more.push(m);
                m *= p;
            }
        }
        ns.extend(more);
    }
    ns.iter().map(|&n| x - n as f64).sum()
}

#[test]
fn trivial_system_recovers_half_x_squared() {
    let sys = ContinuousPrimeSystem::from_params(&[], PrecisionContext::default()).unwrap();
    let p = PerronProblem::continuous(&sys).unwrap();
    for kappa in [1.5, 2.0] {
        let r = p.vertical(10.0, kappa, VerticalOptions::default()).unwrap();
        assert!((r.total - 49.5).abs() < 1e-9, "κ = {kappa}: {}", r.total);
    }
}

#[test]
fn two_prime_euler_product() {
    let want = integrated_count(&[2, 3], 20.0);
    assert_eq!(want, 121.0);
    let p = PerronProblem::discrete(&[(2.0, 1), (3.0, 1)]).unwrap();
    let r = p.vertical(20.0, 1.5, VerticalOptions { tail_tol: 2.5e-5, ..Default::default() }).unwrap();
    assert!(r.uncertainty() <= 1e-4 * want);
    assert!((r.total - want).abs() <= r.uncertainty(), "{} ± {}", r.total, r.uncertainty());
}

#[test]
fn desk_system_matches_convolution_exponential() {
    let sys = desk();
    let p = PerronProblem::continuous(sys).unwrap();
    for lx in [10.0, 12.0] {
        let x = f64::exp(lx);
        let g = GridMeasure::from_measure(&sys.prime_measure().unwrap(), 1e-4, lx).unwrap();
        let want = g.exp_star(None).unwrap().integrated_cdf(x);
        let a = p.vertical(x, 1.5, VerticalOptions::default()).unwrap();
        let b = p.vertical(x, 2.0, VerticalOptions::default()).unwrap();
        assert!((a.total - want).abs() <= 1e-3 * want, "log x = {lx}: {} vs {want}", a.total);
        // the abscissa drops out
        assert!((a.total - b.total).abs() <= 1e-6 * want + a.uncertainty() + b.uncertainty());
    }
    // the first correction term is supported beyond e^10.33
    let r = p.vertical(f64::exp(12.0), 1.5, VerticalOptions::default()).unwrap();
    assert!(r.contour_value.abs() > 1e4 * r.uncertainty(), "{:?}", r);
}

fn toy_composite() -> &'static (CompositeResult, f64, f64) {
    static R: OnceLock<(CompositeResult, f64, f64)> = OnceLock::new();
    R.get_or_init(|| {
        let sys = toy();
        let p = PerronProblem::continuous(&sys).unwrap();
        let c = p.composite(&sys, 0, CompositeOptions::default()).unwrap();
        let v = p.vertical(c.log_x.exp(), 1.1, VerticalOptions { t_cut: Some(1e4), tail_tol: 1.0, ..Default::default() }).unwrap();
        let rv = v.total - c.residue_ln.exp();
        (c, rv, v.uncertainty())
    })
}

#[test]
fn composite_contour_agrees_with_vertical_line_on_toy_system() {
    let (c, rv, uv) = toy_composite();
    let rc = c.remainder.to_complex().re;
    assert!((rc - rv).abs() <= c.uncertainty() + uv, "{rc} vs {rv}");
    assert!((rc - rv).abs() <= 1e-4 * rv.abs(), "{rc} vs {rv}");
    assert!(c.closes);
    assert!((c.rho - 1.000122919).abs() < 1e-9);
}

#[test]
fn composite_ledger_on_toy_system() {
    let (c, _, _) = toy_composite();
    let tags: Vec<&str> = c.segments.iter().map(|s| s.tag.as_str()).collect();
    for t in ["hl-", "delta4-", "delta3-", "delta2-", "delta1-", "delta0-", "gamma0", "delta0+", "delta1+", "delta2+", "delta3+", "hl+"] {
        assert!(tags.contains(&t), "missing {t}");
    }
    assert!(c.delta0_negative);
    let g = c.geometry;
    assert!(g.t3.0 < g.t2.0 && g.t2.0 < g.t1.0 && g.t1.0 < g.tau && g.tau < g.t1.1 && g.t1.1 < g.t2.1 && g.t2.1 < g.t_cut);
    assert!(c.segments.iter().all(|s| s.log10_abs.is_finite()));
}

#[test]
fn composite_contour_on_desk_system() {
    let sys = desk();
    let p = PerronProblem::continuous(sys).unwrap();
    let c = p.composite(sys, 0, CompositeOptions::default()).unwrap();
    assert!(c.closes && c.delta0_negative);
    for s in c.segments.iter().filter(|s| s.tag.starts_with("hl")) {
        assert!(s.within_envelope, "{}: {} > {}", s.tag, s.log10_abs, s.bound_log10_abs);
    }
    let v = p.vertical(c.log_x.exp(), 1.1, VerticalOptions { t_cut: Some(2e4), tail_tol: 1.0, ..Default::default() }).unwrap();
    let rv = v.total - c.residue_ln.exp();
    let rc = c.remainder.to_complex().re;
    assert!((rc - rv).abs() <= c.uncertainty() + v.uncertainty(), "{rc} vs {rv}");
}

#[test]
fn c_doubleprime_is_positive_and_quadratic_in_the_window() {
    for (k, floor) in [(2usize, 3.0), (1, 1e8)] {
        let (sys, _) = build_system(k, floor, true, PrecisionContext::default()).unwrap();
        let sp = SaddleProblem::new(&sys, 0).unwrap();
        let s0 = sp.find_saddle(0).unwrap().w.re;
        assert!(sp.compute_c_doubleprime(s0) > 0.0);
        let us = [0.0, 0.005, 0.01, 0.02, 0.04];
        let cs: Vec<f64> = us.iter().map(|&u| sp.c_doubleprime_for(s0, u).0).collect();
        assert!(cs.windows(2).all(|w| w[1] > w[0]));
        let slope = ((cs[4] - cs[0]) / (cs[2] - cs[0])).ln() / 4f64.ln();
        assert!((slope - 2.0).abs() < 0.02, "{slope}");
    }
}

#[test]
fn trivial_system_hl_exponent() {
    let lxs: Vec<f64> = (4..=12).map(|l| l as f64).collect();
    let slope = k0_hl_exponent(&lxs, 1e12);
    assert!((slope - K0_HL_SLOPE).abs() < 1e-6, "{slope}");
    assert!(slope <= 2.0 - 1.0 / E + 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trivial_system_is_exact(x in 2.0f64..60.0, kappa in 1.2f64..3.0) {
        let sys = ContinuousPrimeSystem::from_params(&[], PrecisionContext::default()).unwrap();
        let p = PerronProblem::continuous(&sys).unwrap();
        let r = p.vertical(x, kappa, VerticalOptions::default()).unwrap();
        prop_assert!((r.total - 0.5 * (x * x - 1.0)).abs() < 1e-9 * x * x);
    }

    #[test]
    fn single_prime_product(x in 3.0f64..40.0) {
        let p = PerronProblem::discrete(&[(2.0, 1)]).unwrap();
        let r = p.vertical(x, 1.5, VerticalOptions { tail_tol: 1e-4, ..Default::default() }).unwrap();
        let want = integrated_count(&[2], x);
        prop_assert!((r.total - want).abs() <= r.uncertainty() + 1e-9 * x * x, "{} vs {}", r.total, want);
    }
}
