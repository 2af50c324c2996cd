use std::f64::consts::PI;
use std::sync::OnceLock;

use beurling::discretize::augment::{arc_index, log_zeta_difference, phase_along_path};
use beurling::discretize::*;
use beurling::numeric::{reduce_mod_2pi, wrap_pi, Hp, PrecisionContext};
use beurling::saddle::SaddleProblem;
use beurling::system::{build_system, ContinuousPrimeSystem};
use num_complex::Complex64 as C;
use proptest::prelude::*;

// ∫_0^{log 100} e^{−iτv}(e^v − 1)/v dv at τ = τ_0 of the desk system; mpmath, 30 digits.
const SC_100_TAU0: (f64, f64) = (-0.022946097941949474, -0.038633390493658366);
// Root of sin α/(1 − (π/80)cos α) = r on the increasing branch; mpmath.
const ALPHA_ONE: f64 = 1.4922968458964263;
const ALPHA_SIXTH: f64 = 0.16089956772271821;

fn desk() -> &'static (ContinuousPrimeSystem, SamplingGrid) {
    static S: OnceLock<(ContinuousPrimeSystem, SamplingGrid)> = OnceLock::new();
    S.get_or_init(|| {
        let sys = build_system(2, 3.0, true, PrecisionContext::default()).unwrap().0;
        let g = build_grid(&sys).unwrap();
        (sys, g)
    })
}

fn seed42() -> &'static RandomDiscreteSystem {
    static S: OnceLock<RandomDiscreteSystem> = OnceLock::new();
    S.get_or_init(|| sample(&desk().1, 42, 1e6).unwrap())
}

#[test]
fn grid_cells_are_admissible_and_telescope() {
    let (_, g) = desk();
    assert_eq!(g.j0, 3);
    assert!(grid_point(g.j0) > 1.0 && grid_point(g.j0 - 1) <= 1.0);
    assert!(g.cells.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(g.cells.iter().all(|c| (0.0..=0.5).contains(&c.1)));
    let ue = g.u_explicit();
    assert!((g.mass_sum(ue) - g.pi_c(ue)).abs() < 1e-12);
    assert!(g.poisson_tv_bound() < 1e-5);
}

#[test]
fn variance_sandwich() {
    let (_, g) = desk();
    for j in [10u64, 100, 1000, EXPLICIT_CELLS] {
        let v = grid_point(j);
        let var = g.variance_sum(v);
        let pc = g.pi_c(v);
        assert!(0.5 * pc <= var && var <= pc, "j = {j}: {var} vs {pc}");
    }
}

#[test]
fn sampling_is_reproducible_and_prefix_consistent() {
    let (_, g) = desk();
    let a = seed42();
    let b = sample(g, 42, 1e6).unwrap();
    assert_eq!(a, &b);
    assert_eq!(a.primes, b.primes);
    let c = sample(g, 42, 3e4).unwrap();
    assert_eq!(&a.primes[..c.primes.len()], &c.primes[..]);
    assert_ne!(sample(g, 43, 1e6).unwrap().primes, a.primes);
}

#[test]
fn counting_function_sandwich() {
    let (_, g) = desk();
    let s = seed42();
    let cells_between = |y1: f64, y2: f64| g.cells.iter().filter(|c| y1 < c.0 && c.0 <= y2).count() as f64;
    let ys: Vec<f64> = (0..40).map(|i| 1.05 + 0.016 * i as f64).collect();
    for w in ys.windows(2) {
        let d = s.pi(w[1]) - s.pi(w[0]);
        assert!(d >= 0.0 && d <= cells_between(w[0], w[1]));
    }
    let mut prev = 0.0;
    for y in [10.0, 1e2, 1e3, 1e4, 1e5, 1e6] {
        assert!(s.pi(y) >= prev);
        prev = s.pi(y);
    }
}

#[test]
fn cell_frequencies_match_bernoulli_parameters() {
    let (_, g) = desk();
    let y = g.u_explicit();
    let n = 10_000u64;
    let cells = [0usize, 7, 100, 1000, 4000];
    let mut hits = [0u64; 5];
    for seed in 0..n {
        let s = sample(g, seed, y).unwrap();
        for (h, &i) in hits.iter_mut().zip(&cells) {
            if s.selected.binary_search(&(g.j0 + 1 + i as u64)).is_ok() {
                *h += 1;
            }
        }
    }
    for (h, &i) in hits.iter().zip(&cells) {
        let q = g.cells[i].1;
        let sd = (n as f64 * q * (1.0 - q)).sqrt();
        assert!((*h as f64 - n as f64 * q).abs() <= 4.0 * sd, "cell {i}: {h} vs {}", n as f64 * q);
    }
}

#[test]
fn poisson_region_matches_the_measure() {
    let (_, g) = desk();
    let n: f64 = (0..20)
        .map(|seed| {
            let s = sample(g, seed, 1e5).unwrap();
            s.pi(1e5) - s.pi(1e4)
        })
        .sum::<f64>()
        / 20.0;
    let want = g.pi_c(1e5) - g.pi_c(1e4);
    assert!((n - want).abs() < 4.0 * (want / 20.0).sqrt(), "{n} vs {want}");
}

#[test]
fn exponential_sums() {
    let (sys, g) = desk();
    let s = seed42();
    for y in [10.0, 1e3, 1e6] {
        assert_eq!(s.exp_sum(y, 0.0).re, s.pi(y));
        for t in [1.0, 497.0, 1e4] {
            assert!(s.exp_sum(y, t).norm() <= s.pi(y) * (1.0 + 1e-12));
        }
    }
    let tau = sys.terms_f64()[0].tau;
    assert_eq!(tau, 497.4363659762234);
    let sc = exp_sum_continuous(g.measure(), 100.0, tau).unwrap();
    assert!((sc - C::new(SC_100_TAU0.0, SC_100_TAU0.1)).norm() < 1e-8, "{sc}");
}

#[test]
fn transfer_identity_reproduces_direct_sums() {
    let s = seed42();
    for (y, t1, t2) in [(1e3, 497.0, 497.5), (1e5, 495.0, 500.0), (3e4 + 0.5, 10.0, 12.0)] {
        let direct = s.exp_sum(y, t1);
        let moved = s.exp_sum_transfer(y, t1, t2);
        assert!((direct - moved).norm() <= 1e-9 * s.pi(y), "{direct} vs {moved}");
    }
}

#[test]
fn kolmogorov_bound_examples() {
    assert!((kolmogorov_bound(&[0.5; 100], 10.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(kolmogorov_bound(&[0.2; 10], 0.0).unwrap(), 1.0);
    assert!(kolmogorov_bound(&[0.2; 10], 4.0).is_err());
    assert!(kolmogorov_bound(&[0.2; 10], -1.0).is_err());
}

#[test]
fn deviation_bounds_for_one_seed() {
    let (sys, g) = desk();
    let r = BoundRanges::for_term(sys, 0, 1.4224, 1e2, 1e6, 13).unwrap();
    assert_eq!(r.n_window, vec![495, 496, 497, 498, 499, 500]);
    let table = ExpSumTable::new(g.measure(), &r).unwrap();
    let rep = check_bounds(seed42(), g, &r, &table);
    assert!(rep.pass && rep.a_constant <= 10.0);
    assert!(rep.c_exceedances.is_empty());
    assert!(rep.b_constant.is_finite() && rep.c_constant < 4.0);
}

#[test]
fn monte_carlo_suite_small() {
    let (sys, g) = desk();
    let r = BoundRanges::for_term(sys, 0, 1.4224, 1e2, 1e5, 9).unwrap();
    let table = ExpSumTable::new(g.measure(), &r).unwrap();
    let mc = monte_carlo(g, &r, &table, MonteCarloOptions { first_seed: 1000, seeds: 30, mean_seeds: 100 }).unwrap();
    assert!(mc.pass, "{mc:?}");
    assert_eq!(mc.exceedance.len(), r.m_lattice.len());
}

#[test]
fn partial_sums_are_cauchy_at_three_quarters() {
    let (_, g) = desk();
    let t = Hp::from_f64(100.0, 128);
    let ys = [1e4, 1e5, 1e6];
    let vals: Vec<C> = ys
        .iter()
        .map(|&y| {
            let s = sample(g, 7, y).unwrap();
            log_zeta_difference(&s, g, 0.75, &t).unwrap().value
        })
        .collect();
    for i in 0..2 {
        // standard deviation of Σ_{Y₁<p≤Y₂} p^{−s} is at most √(∫ u^{−3/2} du / log Y₁)
        let sd = (2.0 * (ys[i].powf(-0.5) - ys[i + 1].powf(-0.5)) / ys[i].ln()).sqrt();
        assert!((vals[i + 1] - vals[i]).norm() <= 6.0 * sd, "{i}: {}", (vals[i + 1] - vals[i]).norm());
    }
}

#[test]
fn alpha_oracles() {
    assert!((solve_alpha(1.0).unwrap() - ALPHA_ONE).abs() < 1e-14);
    assert!((solve_alpha(1.0 / 6.0).unwrap() - ALPHA_SIXTH).abs() < 1e-14);
    assert_eq!(solve_alpha(0.0).unwrap(), 0.0);
}

#[test]
fn augmentation_hits_its_targets() {
    let (sys, g) = desk();
    let (aug, rep) = augment(seed42(), g, sys).unwrap();
    assert!(rep.pass, "{rep:#?}");
    let a = aug.augmentation.as_ref().unwrap();
    assert_eq!(a.m_aug, rep.m_arc.max(rep.l_arc));
    // independent 512-bit recomputation of τ_k log p against the targets
    let p = Hp::parse(&a.p_decimal, 512).unwrap();
    for t in &rep.targets {
        let tau = sys.terms[t.k].tau.with_prec(512);
        let r = reduce_mod_2pi(&(&tau * &p.ln())).unwrap();
        assert!(wrap_pi(r.value - t.target).abs() <= 10.0 * t.bound);
        assert!((t.im_added - t.expected).abs() < PI / 40.0);
        assert!(t.f_distance < 5.0 * PI / 160.0);
    }
    for (x, k) in rep.assignments.iter().zip(0..) {
        assert_eq!(x.k, k);
        assert_eq!(x.arc, arc_index(x.im_difference));
    }
}

#[test]
fn phase_of_zero_function_is_zero() {
    let (sys, _) = desk();
    let sp = SaddleProblem::new(sys, 0).unwrap();
    let path = sp.trace_descent(&sp.find_saddle(0).unwrap()).unwrap();
    let r = phase_along_path(&path, |_| Ok((C::new(0.0, 0.0), 0.0))).unwrap();
    assert_eq!(r.max_distance, 0.0);
    assert_eq!(r.at_one, 0.0);
    assert!(r.pass);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snapping_lands_on_the_cell_point(j in 3u64..100_000, frac in 0.0f64..1.0) {
        let lo = grid_point(j - 1);
        let hi = grid_point(j);
        let u = lo + frac.max(1e-6) * (hi - lo);
        prop_assert!((snap_to_grid(u) - hi).abs() <= 1e-12 * hi);
    }

    #[test]
    fn arcs_shift_by_two_pi(phase in -10.0f64..10.0, n in -5i32..5) {
        let a = arc_index(phase);
        prop_assert!(a < 160);
        let b = arc_index(phase + 2.0 * PI * n as f64);
        prop_assert!(a == b || (phase / (PI / 160.0)).fract().abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_is_decreasing(q in prop::collection::vec(0.0f64..0.5, 5..50), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let var: f64 = q.iter().map(|q| q * (1.0 - q)).sum();
        let (v1, v2) = (2.0 * var * a.min(b), 2.0 * var * a.max(b));
        prop_assert!(kolmogorov_bound(&q, v1).unwrap() >= kolmogorov_bound(&q, v2).unwrap());
    }

    #[test]
    fn transfer_identity_on_random_heights(t1 in 0.0f64..600.0, dt in -20.0f64..20.0, ly in 1.0f64..10.0) {
        let s = seed42();
        let y = ly.exp();
        prop_assert!((s.exp_sum(y, t1) - s.exp_sum_transfer(y, t1, t1 + dt)).norm() <= 1e-9 * (1.0 + s.pi(y)));
    }
}
