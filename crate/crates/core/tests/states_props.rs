//! State catalogue checked against truncated Fock expansions and Q-function identities.

use nalgebra::Complex;
use oqcv::heterodyne::q_support;
use oqcv::quadrature::{integrate_2d, Rule1d};
use oqcv::states::{husimi_q, mean_photon, PhasePoint, State};
use proptest::prelude::*;
use std::f64::consts::PI;

type C = Complex<f64>;

/// `|Σ_k c_k ⟨α|k⟩|²/π` with `⟨α|k⟩ = e^{-|α|²/2} ᾱ^k/√k!`.
fn fock_q(coeffs: &[C], alpha: PhasePoint) -> f64 {
    let ab = C::new(alpha.re, -alpha.im);
    let mut amp = C::new(0.0, 0.0);
    let mut basis = C::new(1.0, 0.0);
    for (k, c) in coeffs.iter().enumerate() {
        if k > 0 {
            basis *= ab / (k as f64).sqrt();
        }
        amp += c * basis;
    }
    amp.norm_sqr() * (-alpha.norm_sqr()).exp() / PI
}

fn squeezed_coeffs(r: f64, theta: f64, n_max: usize) -> Vec<C> {
    let t = r.tanh();
    let mut c = vec![C::new(0.0, 0.0); n_max + 1];
    let step = -C::from_polar(t, theta);
    let mut m = 0usize;
    let mut val = C::new(1.0 / r.cosh().sqrt(), 0.0);
    while 2 * m <= n_max {
        c[2 * m] = val;
        // c_{2m+2}/c_{2m} = step · √((2m+1)(2m+2)) / (2(m+1))
        let k = 2 * m;
        val *= step * (((k + 1) * (k + 2)) as f64).sqrt() / (2.0 * (m + 1) as f64);
        m += 1;
    }
    c
}

fn cat_coeffs(w: PhasePoint, plus: bool, n_max: usize) -> Vec<C> {
    let wc = C::new(w.re, w.im);
    let mut c = Vec::with_capacity(n_max + 1);
    let mut pw = C::new(1.0, 0.0);
    for k in 0..=n_max {
        if k > 0 {
            pw *= wc / (k as f64).sqrt();
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let f = if plus { 1.0 + sign } else { 1.0 - sign };
        c.push(pw * f);
    }
    let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.into_iter().map(|z| z / norm).collect()
}

fn catalogue() -> Vec<State> {
    vec![
        State::Vacuum,
        State::coherent(1.5, -0.7),
        State::Number { n: 3 },
        State::squeezed(1.2),
        State::SqueezedVacuum { r: 0.8, theta: 1.1 },
        State::cat_plus(2.0, 0.5),
        State::cat_minus(1.3, 0.0),
        State::OddCatLimit,
        State::Thermal { nbar: 2.5 },
    ]
}

fn q_integral<F: Fn(PhasePoint) -> f64>(state: &State, f: F) -> f64 {
    let b = q_support(state);
    let rx = Rule1d::composite(b.re.0, b.re.1, 24, 12);
    let ry = Rule1d::composite(b.im.0, b.im.1, 24, 12);
    integrate_2d(&rx, &ry, |x, y| {
        let a = PhasePoint::new(x, y);
        f(a) * husimi_q(state, a)
    })
}

#[test]
fn squeezed_q_matches_fock_expansion() {
    for (r, theta) in [(0.3, 0.0), (1.0, 0.0), (1.6, 0.0), (1.2, 0.7)] {
        let c = squeezed_coeffs(r, theta, 80);
        let st = State::SqueezedVacuum { r, theta };
        for k in 0..40 {
            let a = PhasePoint::from_polar(0.1 * k as f64, 0.37 * k as f64);
            let (q, oracle) = (husimi_q(&st, a), fock_q(&c, a));
            assert!((q - oracle).abs() < 1e-8, "r={r} θ={theta} α={a}: {q} vs {oracle}");
        }
    }
}

#[test]
fn cat_q_has_the_interference_term() {
    let w = PhasePoint::new(1.1, 0.4);
    for plus in [true, false] {
        let st = if plus { State::cat_plus(w.re, w.im) } else { State::cat_minus(w.re, w.im) };
        let c = cat_coeffs(w, plus, 70);
        let mut mixture_gap = 0.0f64;
        for k in 0..30 {
            let a = PhasePoint::from_polar(0.12 * k as f64, 0.9 + 0.41 * k as f64);
            let q = husimi_q(&st, a);
            assert!((q - fock_q(&c, a)).abs() < 1e-10);
            let mix = 0.5 * (husimi_q(&State::Coherent { w }, a) + husimi_q(&State::Coherent { w: -w }, a));
            mixture_gap = mixture_gap.max((q - mix).abs());
        }
        assert!(mixture_gap > 1e-2);
    }
}

#[test]
fn odd_cat_limit_is_single_photon() {
    for k in 0..10 {
        let a = PhasePoint::from_polar(0.3 * k as f64, 0.2 * k as f64);
        let q = husimi_q(&State::OddCatLimit, a);
        assert!((q - husimi_q(&State::Number { n: 1 }, a)).abs() < 1e-15);
    }
}

#[test]
fn every_q_is_normalized() {
    for st in catalogue() {
        let z = q_integral(&st, |_| 1.0);
        assert!((z - 1.0).abs() < 1e-6, "{st}: {z}");
    }
}

#[test]
fn mean_photon_is_second_moment_minus_one() {
    for st in catalogue() {
        let m2 = q_integral(&st, |a| a.norm_sqr());
        assert!((m2 - 1.0 - mean_photon(&st)).abs() < 1e-4, "{st}: {m2}");
    }
}

#[test]
fn cat_plus_mean_photon_matches_fock_oracle() {
    let w = PhasePoint::new(2.0, 0.0);
    let c = cat_coeffs(w, true, 60);
    let n: f64 = c.iter().enumerate().map(|(k, z)| k as f64 * z.norm_sqr()).sum();
    let closed = mean_photon(&State::cat_plus(2.0, 0.0));
    assert!((closed - n).abs() < 1e-10);
    assert!((closed - 3.997_317).abs() < 1e-6);
}

fn any_state() -> impl Strategy<Value = State> {
    prop_oneof![
        Just(State::Vacuum),
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| State::coherent(a, b)),
        (0u32..12).prop_map(|n| State::Number { n }),
        (0.0..1.8f64, -3.0..3.0f64).prop_map(|(r, theta)| State::SqueezedVacuum { r, theta }),
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| State::cat_plus(a, b)),
        (0.05..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| State::cat_minus(a, b)),
        (0.0..30.0f64).prop_map(|nbar| State::Thermal { nbar }),
    ]
}

proptest! {
    #[test]
    fn q_is_bounded_by_one_over_pi(st in any_state(), re in -9.0..9.0f64, im in -9.0..9.0f64) {
        let q = husimi_q(&st, PhasePoint::new(re, im));
        prop_assert!(q >= 0.0);
        prop_assert!(q <= 1.0 / PI * (1.0 + 1e-12));
    }

    #[test]
    fn spec_strings_round_trip(st in any_state()) {
        let back = State::parse_spec(&st.to_string()).unwrap();
        prop_assert_eq!(back, st);
    }

    #[test]
    fn overlap_is_symmetric(a in -4.0..4.0f64, b in -4.0..4.0f64, c in -4.0..4.0f64, d in -4.0..4.0f64) {
        let (x, y) = (PhasePoint::new(a, b), PhasePoint::new(c, d));
        let o = oqcv::states::coherent_overlap(x, y);
        prop_assert_eq!(o, oqcv::states::coherent_overlap(y, x));
        prop_assert!(o > 0.0 && o <= 1.0);
    }
}
