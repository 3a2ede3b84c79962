use proptest::prelude::*;
use wl1::specfn::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cgf_derivative_matches_central_difference(s in -30.0f64..5.0) {
        let h = 1e-6;
        let fd = (half_normal_cgf(s + h) - half_normal_cgf(s - h)) / (2.0 * h);
        let d = half_normal_cgf_deriv(s);
        prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "s={} d={} fd={}", s, d, fd);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn cgf_is_midpoint_convex(a in -60.0f64..10.0, b in -60.0f64..10.0) {
        let mid = half_normal_cgf(0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (half_normal_cgf(a) + half_normal_cgf(b)) + 1e-12);
    }

    #[test]
    fn second_derivative_matches_difference_of_first(s in -30.0f64..5.0) {
        let h = 1e-5;
        let fd = (half_normal_cgf_deriv(s + h) - half_normal_cgf_deriv(s - h)) / (2.0 * h);
        let d2 = half_normal_cgf_deriv2(s);
        prop_assert!(d2 > 0.0);
        prop_assert!((d2 - fd).abs() <= 1e-6 * (1.0 + d2));
    }

    #[test]
    fn erf_is_odd_increasing_and_bounded(x in 0.0f64..30.0, dx in 1e-6f64..1.0) {
        let e = erf(x);
        prop_assert!((0.0..1.0).contains(&e) || (x > 5.9 && e == 1.0));
        prop_assert_eq!(erf(-x), -e);
        prop_assert!(erf(x + dx) >= e);
        if x < 5.0 {
            prop_assert!(erf(x + dx) > e);
        }
    }

    #[test]
    fn log_two_phi_agrees_with_cdf(s in -37.0f64..8.0) {
        let two_phi = 2.0 * std_normal_cdf(s);
        prop_assume!(two_phi > 1e-290);
        let v = log_two_phi(s).exp();
        prop_assert!((v - two_phi).abs() <= 1e-12 * two_phi, "s={} {} vs {}", s, v, two_phi);
    }

    #[test]
    fn log_erf_agrees_with_erf(x in 1e-3f64..6.0) {
        let le = log_erf(x).unwrap();
        prop_assert!((le.exp() - erf(x)).abs() <= 1e-14);
    }
}

#[test]
fn cgf_derivative_is_strictly_increasing_on_grid() {
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=7000 {
        let s = -60.0 + i as f64 * 0.01;
        let d = half_normal_cgf_deriv(s);
        assert!(d > prev, "s={s}");
        prev = d;
    }
}

#[test]
fn cgf_tail_against_reference_values() {
    // 30-digit values of s²/2 + log(2Φ(s))
    let table = [
        (-10.0f64, -2.53813796995252526892979523267),
        (-20.0, -3.22400819053731862738722653307),
        (-100.0, -4.83106151364514331688522520857),
    ];
    for (s, want) in table {
        let got = half_normal_cgf(s);
        assert!(
            (got - want).abs() <= 1e-13 * want.abs(),
            "s={s} {got} vs {want}"
        );
    }
}
