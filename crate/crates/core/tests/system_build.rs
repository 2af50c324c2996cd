use beurling::numeric::{Hp, PrecisionContext};
use beurling::system::*;
use beurling::Error;
use proptest::prelude::*;

fn rel(a: &Hp, b: &str) -> f64 {
    let b = Hp::parse(b, a.prec()).unwrap();
    (&(a - &b) / &b).abs().to_f64()
}

// independent mpmath build at 100 digits, floor 3, relaxed
const TAU0: &str = "497.436365976223357460894599381";
const LX0: &str = "24.2012524052805423904770759847";
const A0: &str = "2.29672466040110147297349453043";
const NU0: &str = "2.00162661293423338268728837955";
const TAU1: &str = "5755684174999017.32322796962111";
const LX1: &str = "433.728044817490117025005000238";
const A1: &str = "2.29175946922805529631697273885";

#[test]
fn desk_system_matches_independent_build() {
    let (s, r) = build_system(2, 3.0, true, PrecisionContext::default()).unwrap();
    assert!(r.all_pass(), "{r:#?}");
    let (t0, t1) = (&s.terms[0], &s.terms[1]);
    for (v, want) in [(&t0.tau, TAU0), (&t0.log_x, LX0), (&t0.a, A0), (&t0.nu, NU0), (&t1.tau, TAU1), (&t1.log_x, LX1), (&t1.a, A1)] {
        assert!(rel(v, want) < 1e-28, "{} vs {want}", v.to_decimal());
    }
    let f = t0.to_f64();
    assert!((f.delta - 0.663953830670937913656709242353).abs() < 1e-14);
    assert!((r.terms[0].epsilon - 0.00126136767540711397588658653539).abs() < 1e-15);
    assert!((r.terms[0].eta - 0.00496519117304647216101717205294).abs() < 1e-15);
    assert!((r.terms[1].epsilon - 6.4958525098534631812725178e-18).abs() < 1e-28);
    assert!((r.terms[1].eta - 2.95504495380464382805835e-16).abs() < 1e-28);
    assert!((t1.to_f64().delta - 0.162122928062551477225192662806).abs() < 1e-14);
}

#[test]
fn growth_and_parity() {
    let (s, r) = build_system(2, 3.0, true, PrecisionContext::default()).unwrap();
    assert!(r.terms.iter().all(|t| t.property_a));
    let f = s.terms_f64();
    assert!(f[1].tau > (2.0 * f[0].tau).powi(5));
    assert!(f[0].even && !f[1].even);
    assert!(f[0].chi.abs() < 1e-12);
    assert!((f[1].chi.abs() - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn higher_precision_agrees_and_tightens() {
    let (s256, r256) = build_system(2, 3.0, true, PrecisionContext::new(256)).unwrap();
    let (s512, r512) = build_system(2, 3.0, true, PrecisionContext::new(512)).unwrap();
    assert!(r512.all_pass());
    for (a, b) in s256.terms.iter().zip(&s512.terms) {
        let d = (&(&a.tau.with_prec(512) - &b.tau) / &b.tau).abs().to_f64();
        assert!(d < 1e-60, "{d}");
        let d = (&(&a.log_x.with_prec(512) - &b.log_x) / &b.log_x).abs().to_f64();
        assert!(d < 1e-60, "{d}");
    }
    for (a, b) in r256.terms.iter().zip(&r512.terms) {
        assert!(b.residual_threshold < a.residual_threshold * 1e-60);
        assert!(b.residual_b2 <= b.residual_threshold && b.residual_c <= b.residual_threshold);
    }
}

#[test]
fn perturbed_tau_breaks_lattice_condition() {
    let (mut s, _) = build_system(1, 3.0, true, PrecisionContext::default()).unwrap();
    let t = &mut s.terms[0];
    t.tau = t.tau.add_f64(1e-3);
    let r = verify_properties(&s);
    assert!(!r.terms[0].pass_b || !r.terms[0].pass_c);
    assert!(!r.all_pass());
}

#[test]
fn strict_growth_needs_unbounded_precision() {
    let err = build_system(2, 3.0, false, PrecisionContext::default()).unwrap_err();
    assert!(matches!(err, Error::InsufficientPrecision { .. }), "{err:?}");
    // the first term alone is within reach
    let (_, r) = build_system(1, 3.0, false, PrecisionContext::default()).unwrap();
    assert!(r.all_pass());
}

#[test]
fn rejects_low_floor() {
    assert!(build_system(1, 2.0, true, PrecisionContext::default()).is_err());
}

#[test]
fn large_floor_system() {
    let (s, r) = build_system(1, 1e8, true, PrecisionContext::default()).unwrap();
    assert!(r.all_pass());
    let f = &s.terms_f64()[0];
    assert!((f.tau - 610796641.7297661).abs() < 1e-4, "{}", f.tau);
    assert!((f.log_x - 161.06937636961345).abs() < 1e-10);
    assert!(f.delta > 0.0 && f.delta < 1.0);
    assert!(f.nu >= 2.0 && f.nu < 2.0 + 1e-8);
    let e = epsilon_bound_check(&s);
    assert!(e.iter().all(|c| c.pass), "{e:#?}");
}

#[test]
fn epsilon_envelopes_hold_on_desk_system() {
    let (s, _) = build_system(2, 3.0, true, PrecisionContext::default()).unwrap();
    let e = epsilon_bound_check(&s);
    assert_eq!(e.len(), 2);
    assert!(e.iter().all(|c| c.pass && c.nonnegative && c.smallest_positive), "{e:#?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_quantity_is_increasing(y in 10.0f64..1e4, dy in 1e-3f64..10.0) {
        let p = 128;
        let a = alpha_hp(p);
        let lo = d_quantity(&Hp::from_f64(y, p), &a);
        let hi = d_quantity(&Hp::from_f64(y + dy, p), &a);
        prop_assert!(hi > lo);
    }

    #[test]
    fn from_params_always_satisfies_lattice(tau in 20.0f64..400.0, delta in 0.1f64..0.9, extra in 0.2f64..1.0, lx in 5.0f64..60.0) {
        let nu = 1.0 + delta + extra + 0.1;
        let s = ContinuousPrimeSystem::from_params(&[(tau, delta, nu, lx)], PrecisionContext::default()).unwrap();
        let r = verify_properties(&s);
        prop_assert!(r.terms[0].residual_b1 <= r.terms[0].residual_threshold);
        prop_assert!(r.terms[0].residual_b2 <= r.terms[0].residual_threshold);
        prop_assert!(r.terms[0].pass_c);
    }
}
