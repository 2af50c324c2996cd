use beurling::measure::grid::GridMeasure;
use beurling::numeric::PrecisionContext;
use beurling::system::{build_system, ContinuousPrimeSystem};
use beurling::zeta::*;
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn desk() -> &'static (ContinuousPrimeSystem, ZetaEvaluator) {
    static S: OnceLock<(ContinuousPrimeSystem, ZetaEvaluator)> = OnceLock::new();
    S.get_or_init(|| {
        let (sys, _) = build_system(1, 3.0, true, PrecisionContext::default()).unwrap();
        let z = ZetaEvaluator::new(&sys).unwrap();
        (sys, z)
    })
}

#[test]
fn log_zeta_matches_mellin_quadrature() {
    let (sys, z) = desk();
    let mu = sys.prime_measure().unwrap();
    for s in [c(2.0, 0.0), c(1.7, 3.0), c(3.0, 480.0)] {
        let m = mu.mellin_stieltjes(s, f64::INFINITY).unwrap();
        let v = z.log_zeta(s).unwrap();
        assert!((m.value - v).norm() < 1e-8 + m.tail_bound, "{s}: {} vs {v}", m.value);
    }
}

#[test]
fn convexity_peak_at_tau() {
    let (sys, z) = desk();
    let t = &sys.terms_f64()[0];
    let s = c(1.0, t.tau);
    let lead = z.term_value(0, s);
    let scale = t.tau.powf(1.0 - (1.0 + t.delta));
    assert!(lead.norm() >= 0.25 * scale, "{} vs {scale}", lead.norm());
    let rest = z.log_zeta(s).unwrap() - lead;
    assert!(rest.norm() < lead.norm(), "{} vs {}", rest.norm(), lead.norm());
}

#[test]
fn zeta_matches_exponentiated_grid() {
    let (sys, z) = desk();
    let (h, l) = (1e-4, 16.0);
    let pi = GridMeasure::from_measure(&sys.prime_measure().unwrap(), h, l).unwrap();
    let n = pi.exp_star(None).unwrap();
    let rho = z.residue_at_1().unwrap().rho;
    let tau = sys.terms_f64()[0].tau;
    for s in [c(2.0, 0.0), c(2.0, 37.5), c(1.5, tau)] {
        // tail of dN beyond e^L replaced by ρ dx
        let tail = rho * ((1.0 - s) * l).exp() / (s - 1.0);
        let grid = n.mellin(s) + tail;
        let want = z.zeta(s).unwrap();
        assert!((grid - want).norm() < 1e-3 * want.norm(), "{s}: {grid} vs {want}");
    }
}

#[test]
fn residue_two_ways() {
    let (_, z) = desk();
    let r = z.residue_at_1().unwrap();
    assert!(r.relative_gap < 1e-8);
    assert!((r.rho - r.closed_form).abs() < 1e-9 * r.rho);
    assert!(r.rho > 0.0);
}

#[test]
fn residue_of_zero_system_is_one() {
    let z = ZetaEvaluator::new(&ContinuousPrimeSystem::empty(PrecisionContext::default())).unwrap();
    assert!((z.residue_at_1().unwrap().rho - 1.0).abs() < 1e-10);
    for i in 0..50 {
        let s = c(0.2 + 0.07 * i as f64, -30.0 + 1.3 * i as f64);
        let want = s / (s - 1.0);
        assert!((z.zeta(s).unwrap() - want).norm() < 1e-10 * want.norm());
    }
}

#[test]
fn strip_certificate_holds() {
    let (_, z) = desk();
    let r = z.ghl_bound_certificate(Region::Strip(0), CertificateOptions::default()).unwrap();
    assert!(r.pass, "{r:?}");
    let empty = ZetaEvaluator::new(&ContinuousPrimeSystem::empty(PrecisionContext::default())).unwrap();
    let r = empty.ghl_bound_certificate(Region::Hl { t_max: 1e6 }, CertificateOptions::default()).unwrap();
    assert_eq!(r.empirical_sup, 0.0);
}

#[test]
fn hl_certificate_holds() {
    let (sys, z) = desk();
    let tau = sys.terms_f64()[0].tau;
    let r = z.ghl_bound_certificate(Region::Hl { t_max: tau.powi(5) }, CertificateOptions::default()).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn primed_sum_removes_leading_piece() {
    let (sys, z) = desk();
    let tau = sys.terms_f64()[0].tau;
    let s = c(0.7, tau + 0.01);
    let diff = z.term_sum(s) - z.primed_sum(s, 0);
    assert!((diff - z.leading_piece(0, s)).norm() < 1e-12 * diff.norm());
    let primed = ZetaEvaluator::with_mode(sys, ZetaMode::Primed(0)).unwrap();
    assert!((z.log_zeta(s).unwrap() - primed.log_zeta(s).unwrap() - diff).norm() < 1e-10 * diff.norm());
}

#[test]
fn large_tau_is_phase_accurate() {
    let (sys, _) = build_system(2, 3.0, true, PrecisionContext::default()).unwrap();
    let z = ZetaEvaluator::new(&sys).unwrap();
    // by construction (1+δ)τ log τ ∈ 2πZ, so A_1(σ + iτ_1) is real and positive
    let w = c(0.9, 0.0);
    let lead = 0.5 * (z.term_sum_local(1, w, Exclude::None) - z.term_sum_local(1, w, Exclude::UpperA(1)));
    let a = lead * 2.0 * w;
    assert!(a.im.abs() < 1e-9 * a.re, "{a}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn conjugate_symmetry(sigma in 0.05f64..3.0, t in 0.5f64..2000.0) {
        let (_, z) = desk();
        let a = z.zeta(c(sigma, t)).unwrap();
        let b = z.zeta(c(sigma, -t)).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-14 * a.norm());
    }

    #[test]
    fn term_sum_satisfies_cauchy_riemann(sigma in 0.1f64..0.95, t in 1.0f64..1000.0) {
        let (_, z) = desk();
        let s = c(sigma, t);
        let h = 1e-5;
        let dx = (z.term_sum(s + h) - z.term_sum(s - h)) / (2.0 * h);
        let dy = (z.term_sum(s + c(0.0, h)) - z.term_sum(s - c(0.0, h))) / (2.0 * h);
        let scale = dx.norm().max(1e-3);
        prop_assert!((dy - c(0.0, 1.0) * dx).norm() < 1e-6 * scale.max(1.0), "{dx} {dy}");
    }

    #[test]
    fn grid_mellin_on_line_two(t in -60.0f64..60.0) {
        static G: OnceLock<(GridMeasure, f64)> = OnceLock::new();
        let (sys, z) = desk();
        let (n, rho) = G.get_or_init(|| {
            let pi = GridMeasure::from_measure(&sys.prime_measure().unwrap(), 1e-4, 16.0).unwrap();
            (pi.exp_star(None).unwrap(), z.residue_at_1().unwrap().rho)
        });
        let s = c(2.0, t);
        let grid = n.mellin(s) + rho * ((1.0 - s) * 16.0).exp() / (s - 1.0);
        let want = z.log_zeta(s).unwrap().exp();
        prop_assert!((grid - want).norm() < 1e-4 * want.norm());
    }
}
