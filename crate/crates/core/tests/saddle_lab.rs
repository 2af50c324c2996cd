use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::OnceLock;

use beurling::numeric::{integrate, wrap_pi, PrecisionContext, QuadOptions};
use beurling::saddle::{cot_gap, write_paths_csv, SaddleProblem};
use beurling::system::build_system;
use num_complex::Complex64 as C;
use proptest::prelude::*;

// Saddle data from an independent 60-digit mpmath root solve of f′ = 0 in the
// global variable s, for the floor-1e8 single-term system.
const SIGMA0: f64 = 0.70872526249159246866;
const RE_F0: f64 = 281.20208712367793223;
const F2_0: f64 = 4351.1439420068072518;
const W1: (f64, f64) = (0.70662811294874610807, 0.23302495194638192872);
const RE_F1: f64 = 280.89284431833477925;
const IM_F1: f64 = -0.071599642332371306368;
const F2_1: (f64, f64) = (4326.3822003234166437, -74.113165145458655927);
const V1: f64 = 0.094328512182269035156;
const W3: (f64, f64) = (0.6945906948492988, 0.70618908071485368304);
const V3: f64 = 0.16828084665837393579;

fn problem() -> &'static SaddleProblem {
    static P: OnceLock<SaddleProblem> = OnceLock::new();
    P.get_or_init(|| {
        let (sys, _) = build_system(1, 1e8, true, PrecisionContext::default()).unwrap();
        SaddleProblem::new(&sys, 0).unwrap()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Argument-principle count of zeros of f′ in a rectangle by quadrature of f″/f′.
fn zero_count(p: &SaddleProblem, s0: f64, s1: f64, u0: f64, u1: f64) -> f64 {
    let corners = [C::new(s1, u0), C::new(s1, u1), C::new(s0, u1), C::new(s0, u0), C::new(s1, u0)];
    let mut total = C::new(0.0, 0.0);
    for e in corners.windows(2) {
        let (a, b) = (e[0], e[1]);
        let g = |t: f64| {
            let w = a + (b - a) * t;
            p.f_second_local(w).unwrap() / p.f_prime_local(w).unwrap() * (b - a)
        };
        total += integrate(&g, 0.0, 1.0, QuadOptions::tol(1e-12)).value;
    }
    (total / C::new(0.0, TAU)).re
}

#[test]
fn central_saddle_matches_oracle() {
    let p = problem();
    let s = p.find_saddle(0).unwrap();
    assert!(close(s.w.re, SIGMA0, 1e-14), "{}", s.w.re);
    assert!(s.w.im.abs() < 1e-50, "Im s_0 − τ = {}", s.w.im);
    assert!(close(s.f_val.re, RE_F0, 1e-13));
    assert!(s.f_val.im.abs() < 1e-50);
    assert!(close(s.f_second.re, F2_0, 1e-12));
    assert!(s.newton_residual <= 1e-25);
    assert_eq!(s.winding, 1);
    assert_eq!(s.n_m, p.big_m());
    assert!(!s.used_fallback);
}

#[test]
fn neighbouring_saddles_match_oracle() {
    let p = problem();
    for sign in [1i64, -1] {
        let s = p.find_saddle(sign).unwrap();
        assert!(close(s.w.re, W1.0, 1e-13));
        assert!(close(s.w.im, sign as f64 * W1.1, 1e-13));
        assert!(close(s.f_val.re, RE_F1, 1e-13));
        assert!(close(wrap_pi(s.f_val.im), sign as f64 * IM_F1, 1e-11), "{}", s.f_val.im);
        assert!((s.f_second - C::new(F2_1.0, sign as f64 * F2_1.1)).norm() < 1e-9 * F2_1.0);
        assert_eq!(s.n_offset, sign);
        assert_eq!(s.n_m, p.big_m() + sign as i128);
        let (lo, hi) = p.window(sign);
        assert!(s.w.im > lo && s.w.im < hi && s.w.re > 0.5 && s.w.re < 1.0);
        assert!(close(p.v_m(&s), sign as f64 * V1, 1e-12));
    }
    let s3 = p.find_saddle(3).unwrap();
    assert!(close(s3.w.re, W3.0, 1e-13) && close(s3.w.im, W3.1, 1e-13));
    assert!(close(p.v_m(&s3), V3, 1e-12));
}

#[test]
fn winding_agrees_with_contour_quadrature() {
    let p = problem();
    for m in [-1i64, 0, 1] {
        let (lo, hi) = p.window(m);
        let (w, raw) = p.winding_rect((0.5, 1.0, lo, hi)).unwrap();
        let q = zero_count(p, 0.5, 1.0, lo, hi);
        assert_eq!(w, 1);
        assert!((raw - 1.0).abs() < 1e-9);
        assert!((q - 1.0).abs() < 1e-8, "m = {m}: {q}");
    }
    // a cell of V_0 away from the saddle holds no zero
    let (lo, _) = p.window(0);
    assert!(zero_count(p, 0.5, 0.6, lo, 0.5 * lo).abs() < 1e-8);
    assert_eq!(p.winding_rect((0.5, 0.6, lo, 0.5 * lo)).unwrap().0, 0);
}

#[test]
fn grid_minimum_of_f_prime_sits_at_the_saddle() {
    let p = problem();
    let s = p.find_saddle(1).unwrap();
    let (lo, hi) = p.window(1);
    let n = 200;
    let (ds, du) = (0.5 / n as f64, (hi - lo) / n as f64);
    let mut best = (f64::INFINITY, C::new(0.0, 0.0));
    for i in 0..=n {
        for j in 0..=n {
            let w = C::new(0.5 + i as f64 * ds, lo + j as f64 * du);
            let v = p.f_prime_local(w).unwrap().norm();
            if v < best.0 {
                best = (v, w);
            }
        }
    }
    assert!((best.1.re - s.w.re).abs() <= ds && (best.1.im - s.w.im).abs() <= du);
}

#[test]
fn central_descent_path_properties() {
    let p = problem();
    let s = p.find_saddle(0).unwrap();
    let path = p.trace_descent(&s).unwrap();
    assert!(path.im_f_ok(), "drift {}", path.max_im_drift);
    assert!(path.re_f_monotone);
    assert!(path.tangent_ok(), "{}", path.max_tangent_dev);
    assert!(path.crosses_horizontal_edges());
    assert_eq!(path.samples.len(), p.theta_steps + 1);
    assert_eq!(path.samples[path.saddle_index].sigma, s.w.re);
    // symmetric under t − τ ↦ τ − t because φ and χ vanish
    assert!((path.sigma_minus - path.sigma_plus).abs() < 1e-12);
    let first = path.samples[0];
    assert!((first.theta + FRAC_PI_2).abs() < 1e-15);
}

#[test]
fn off_centre_paths_keep_the_level_set() {
    let p = problem();
    for m in [-2i64, -1, 1, 2] {
        let s = p.find_saddle(m).unwrap();
        let path = p.trace_descent(&s).unwrap();
        assert!(path.im_f_ok() && path.re_f_monotone, "m = {m}");
        assert!(path.crosses_horizontal_edges());
    }
}

#[test]
fn central_contribution_sign_phase_and_laplace() {
    let p = problem();
    let s = p.find_saddle(0).unwrap();
    let path = p.trace_descent(&s).unwrap();
    let r = p.saddle_contribution(&[(s, path)]).unwrap();
    assert_eq!(r.expected_sign, -1);
    assert!(r.sign_ok && r.phase_ok && r.lower_bound_ok);
    let e = &r.entries[0];
    assert!(e.phi.abs() < 2.0 * PI / 5.0);
    assert!(e.laplace_ratio > 0.5 && e.laplace_ratio < 2.0, "{}", e.laplace_ratio);
    assert!(e.quad_error_rel < 1e-8);
    assert!(r.width_constant > 0.5 && r.width_constant < 10.0);
}

#[test]
fn phase_report_and_auto_shrink() {
    let p = problem();
    let r = p.phase_report().unwrap();
    assert_eq!((r.m_max, r.shrinks), (0, 0));
    assert!(r.pass);
    let r = p.clone().with_c_m(1.0).phase_report().unwrap();
    assert!(r.shrinks > 0 && r.c_m < 1.0);
    assert!(r.pass);
    assert!(r.entries.iter().all(|e| e.distance < PI / 8.0));
}

#[test]
fn quadratic_model_and_asymptotics() {
    let p = problem();
    let s = p.find_saddle(0).unwrap();
    let q = p.quadratic_model(&s).unwrap();
    assert!(q.pass, "{}", q.max_eps_inside);
    // ε(r) is linear in r to leading order
    let ratio = q.samples[6].1 / q.samples[5].1;
    assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
    let paths: Vec<_> = [-1i64, 0, 1].iter().map(|&m| p.trace_descent(&p.find_saddle(m).unwrap()).unwrap()).collect();
    let a = p.asymptotics(&s, &paths);
    assert!(a.sigma0_constant <= 10.0);
    assert!(a.f2_ratio > 0.9 && a.f2_ratio < 1.2);
    assert!(a.v_constants.iter().all(|v| v.1 < 5.0));
}

#[test]
fn csv_dump_has_header_and_rows() {
    let p = problem();
    let s = p.find_saddle(0).unwrap();
    let path = p.trace_descent(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("paths.csv");
    write_paths_csv(&f, &[path.clone()]).unwrap();
    let text = std::fs::read_to_string(&f).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,theta,sigma,t,re_f,im_f"));
    assert_eq!(lines.count(), path.samples.len());
}

#[test]
fn desk_system_central_saddle() {
    let (sys, _) = build_system(2, 3.0, true, PrecisionContext::default()).unwrap();
    let p = SaddleProblem::new(&sys, 0).unwrap();
    let s = p.find_saddle(0).unwrap();
    assert!(s.newton_residual <= 1e-25);
    assert!(s.w.re > 0.5 && s.w.re < 1.0);
    let path = p.trace_descent(&s).unwrap();
    assert!(path.im_f_ok() && path.re_f_monotone);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cot_gap_stays_below_two_over_pi(th in -FRAC_PI_2..FRAC_PI_2) {
        prop_assert!(cot_gap(th) <= 2.0 / PI + 1e-12);
    }

    #[test]
    fn f_prime_is_the_derivative(sigma in 0.55f64..0.95, u in -0.05f64..0.05) {
        let p = problem();
        let w = C::new(sigma, u);
        let h = 1e-6;
        let fd = (p.f_local(w + C::new(h, 0.0)).unwrap() - p.f_local(w - C::new(h, 0.0)).unwrap()) / (2.0 * h);
        let an = p.f_prime_local(w).unwrap();
        prop_assert!((fd - an).norm() <= 1e-5 * an.norm().max(1.0));
    }

    #[test]
    fn saddles_are_conjugate_in_m(m in 1i64..4) {
        let p = problem();
        let a = p.find_saddle(m).unwrap();
        let b = p.find_saddle(-m).unwrap();
        prop_assert!((a.w - b.w.conj()).norm() < 1e-13);
    }
}
