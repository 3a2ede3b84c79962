//! Scalar special functions: erf/erfc, the normal cdf, and the cumulant
//! generating function of the standard half-normal law,
//! λ(s) = s²/2 + log(2Φ(s)).
//!
//! Everything is pure and generic over [`Real`].

use crate::error::{Error, Result};
use crate::real::Real;

/* origin: FreeBSD /usr/src/lib/msun/src/s_erf.c */
/*
 * ====================================================
 * Copyright (C) 1993 by Sun Microsystems, Inc. All rights reserved.
 *
 * Developed at SunPro, a Sun Microsystems, Inc. business.
 * Permission to use, copy, modify, and distribute this
 * software is freely granted, provided that this notice
 * is preserved.
 * ====================================================
 */

const ERX: f64 = 8.45062911510467529297e-01;
const EFX8: f64 = 1.02703333676410069053e+00;
const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 6] = [
    1.0,
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];
const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 7] = [
    1.0,
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];
const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 9] = [
    1.0,
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];
const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 8] = [
    1.0,
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

#[inline]
fn poly<T: Real>(c: &[f64], z: T) -> T {
    c.iter()
        .rev()
        .fold(T::zero(), |acc, &k| acc * z + T::lit(k))
}

// |x| in [0.84375, 28): erfc(|x|) from the rational fits.
fn erfc_mid<T: Real>(ax: T) -> T {
    if ax < T::lit(1.25) {
        let s = ax - T::one();
        return T::lit(1.0 - ERX) - poly(&PA, s) / poly(&QA, s);
    }
    let s = T::one() / (ax * ax);
    let (r, big_s) = if ax < T::lit(1.0 / 0.35) {
        (poly(&RA, s), poly(&SA, s))
    } else {
        (poly(&RB, s), poly(&SB, s))
    };
    // split x*x so the large part is exact
    let z = T::lit(ax.to_f32().unwrap_or(0.0) as f64);
    (-z * z - T::lit(0.5625)).exp() * ((z - ax) * (z + ax) + r / big_s).exp() / ax
}

/// Error function.
pub fn erf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let y = if ax < T::lit(0.84375) {
        if ax < T::lit(3.725290298461914e-9) {
            return T::lit(0.125) * (T::lit(8.0) * x + T::lit(EFX8) * x);
        }
        let z = x * x;
        return x + x * (poly(&PP, z) / poly(&QQ, z));
    } else if ax < T::lit(6.0) {
        T::one() - erfc_mid(ax)
    } else {
        T::one()
    };
    if x.is_sign_negative() {
        -y
    } else {
        y
    }
}

/// Complementary error function, computed directly for large arguments.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let neg = x.is_sign_negative();
    if ax < T::lit(0.84375) {
        if ax < T::lit(1.3877787807814457e-17) {
            return T::one() - x;
        }
        let z = x * x;
        let y = poly(&PP, z) / poly(&QQ, z);
        if neg || ax < T::lit(0.25) {
            return T::one() - (x + x * y);
        }
        return T::lit(0.5) - (x - T::lit(0.5) + x * y);
    }
    if ax < T::lit(28.0) {
        let e = erfc_mid(ax);
        return if neg { T::lit(2.0) - e } else { e };
    }
    if neg {
        T::lit(2.0)
    } else {
        T::zero()
    }
}

/// d/dx erf(x) = (2/√π)·exp(−x²).
pub fn erf_deriv<T: Real>(x: T) -> T {
    T::FRAC_2_SQRT_PI() * (-x * x).exp()
}

/// log erf(x) for x > 0.
///
/// Near zero this is the log of the series value; for larger x it is
/// log1p of the complement so that log erf(5) ≈ −1.5e−12 is not lost.
pub fn log_erf<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("log_erf needs x > 0, got {}", x)));
    }
    Ok(log_erf_pos(x))
}

#[inline]
pub(crate) fn log_erf_pos<T: Real>(x: T) -> T {
    if x < T::lit(0.5) {
        erf(x).ln()
    } else {
        (-erfc(x)).ln_1p()
    }
}

/// d/dx log erf(x) for x > 0.
pub(crate) fn dlog_erf<T: Real>(x: T) -> T {
    if x < T::lit(1e-8) {
        // erf'(x)/erf(x) = 1/x − 2x/3 + O(x³)
        return T::one() / x - T::lit(2.0 / 3.0) * x;
    }
    erf_deriv(x) / erf(x)
}

/// Standard normal cdf Φ(s).
pub fn std_normal_cdf<T: Real>(s: T) -> T {
    T::lit(0.5) * erfc(-s * T::FRAC_1_SQRT_2())
}

/// Density of the standard normal.
pub fn std_normal_pdf<T: Real>(s: T) -> T {
    (T::lit(-0.5) * s * s).exp() * T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5)
}

const TAIL: f64 = -8.0;
const CF_DEPTH: usize = 24;
// ln √(2/π)
const LN_SQRT_2_OVER_PI: f64 = -0.2257913526447274;

/// Laplace continued fraction K(x) = x + 2/(x + 3/(x + 4/(…))) and dK/dx.
/// Mills ratio is 1/(x + 1/K(x)).
fn mills_cf<T: Real>(x: T) -> (T, T) {
    let mut t = x;
    let mut dt = T::one();
    for j in (2..=CF_DEPTH).rev() {
        let k = T::from_usize_lossy(j);
        let nt = x + k / t;
        dt = T::one() - k * dt / (t * t);
        t = nt;
    }
    (t, dt)
}

/// log(2Φ(s)); finite down to s = −1e4 and beyond.
pub fn log_two_phi<T: Real>(s: T) -> T {
    if s >= T::zero() {
        T::LN_2() + (T::lit(-0.5) * erfc(s * T::FRAC_1_SQRT_2())).ln_1p()
    } else if s >= T::lit(TAIL) {
        erfc(-s * T::FRAC_1_SQRT_2()).ln()
    } else {
        half_normal_cgf(s) - T::lit(0.5) * s * s
    }
}

/// λ(s) = s²/2 + log(2Φ(s)).
pub fn half_normal_cgf<T: Real>(s: T) -> T {
    if s >= T::lit(TAIL) {
        return T::lit(0.5) * s * s + log_two_phi(s);
    }
    // s²/2 cancels exactly against the Gaussian factor of Φ
    let x = -s;
    let (k, _) = mills_cf(x);
    let mills = T::one() / (x + T::one() / k);
    T::lit(LN_SQRT_2_OVER_PI) + mills.ln()
}

/// λ′(s) = s + φ(s)/Φ(s).
pub fn half_normal_cgf_deriv<T: Real>(s: T) -> T {
    if s >= T::lit(TAIL) {
        return s + inv_mills(s);
    }
    let (k, _) = mills_cf(-s);
    T::one() / k
}

/// λ″(s); positive everywhere (λ is strictly convex).
pub fn half_normal_cgf_deriv2<T: Real>(s: T) -> T {
    if s >= T::lit(TAIL) {
        let r = inv_mills(s);
        return T::one() - r * (s + r);
    }
    let (k, dk) = mills_cf(-s);
    dk / (k * k)
}

// φ(s)/Φ(s)
fn inv_mills<T: Real>(s: T) -> T {
    let lp = log_two_phi(s) - T::LN_2();
    (T::lit(-0.5) * s * s - lp).exp() * T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5)
}

/// Logistic function, branch-stable.
#[inline]
pub(crate) fn sigmoid<T: Real>(b: T) -> T {
    if b >= T::zero() {
        T::one() / (T::one() + (-b).exp())
    } else {
        let e = b.exp();
        e / (T::one() + e)
    }
}

/// log(1 + e^b), branch-stable.
#[inline]
pub(crate) fn softplus<T: Real>(b: T) -> T {
    if b > T::zero() {
        b + (-b).exp().ln_1p()
    } else {
        b.exp().ln_1p()
    }
}

/// Natural-log binary entropy with 0·log 0 = 0.
pub fn binary_entropy<T: Real>(q: T) -> T {
    let mut h = T::zero();
    if q > T::zero() {
        h = h - q * q.ln();
    }
    if q < T::one() {
        h = h - (T::one() - q) * (-q).ln_1p();
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Φ(x) = 1/2 + φ(x)·Σ x^{2k+1}/(2k+1)!!
    fn phi_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= x * x / (2 * k + 1) as f64;
            sum += term;
        }
        0.5 + (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * sum
    }

    fn erf_taylor(x: f64, terms: usize) -> f64 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        for n in 0..terms {
            if n > 0 {
                fact *= n as f64;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * x.powi(2 * n as i32 + 1) / (fact * (2 * n + 1) as f64);
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0f64), 0.5);
        assert_relative_eq!(
            std_normal_cdf(1.0f64),
            phi_series(1.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            std_normal_cdf(1.0f64),
            0.841344746068543,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            std_normal_cdf(-1.0f64),
            1.0 - phi_series(1.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn cdf_relative_accuracy_on_core_range() {
        // 1 − series loses relative digits in the left tail, so it is only used near 0
        for i in -10..=40 {
            let s = i as f64 * 0.1;
            let want = if s >= 0.0 {
                phi_series(s)
            } else {
                1.0 - phi_series(-s)
            };
            assert_relative_eq!(std_normal_cdf(s), want, max_relative = 1e-13);
        }
        // left tail against 30-digit reference values
        let table = [
            (-4.0, 3.16712418331199212537707567222e-5),
            (-3.6, 1.59108590157533825317288165888e-4),
            (-3.2, 6.87137937915848031618565348579e-4),
            (-2.8, 2.55513033042793420759801642915e-3),
            (-2.4, 8.19753592459613143342079304108e-3),
            (-2.0, 2.27501319481792072002826371665e-2),
            (-1.6, 5.47992916995579841087248008324e-2),
        ];
        for (s, want) in table {
            assert_relative_eq!(std_normal_cdf(s), want, max_relative = 1e-14);
        }
    }

    #[test]
    fn log_two_phi_examples() {
        assert_eq!(log_two_phi(0.0f64), 0.0);
        assert_relative_eq!(
            log_two_phi(1.0f64),
            (2.0 * phi_series(1.0)).ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            log_two_phi(1.0f64),
            0.520393401536495419890748947937,
            max_relative = 1e-14
        );
        assert!((log_two_phi(1.0f64) - 0.520400).abs() < 1e-5);
        // log(2φ(s)/|s|) with the first correction term (1 − 1/s²)
        let s: f64 = -40.0;
        let asym = std::f64::consts::LN_2
            - 0.5 * s * s
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - s.abs().ln()
            + (1.0 - 1.0 / (s * s)).ln();
        assert!((log_two_phi(s) - asym).abs() < 1e-3);
        assert!((log_two_phi(s) - (-803.9147)).abs() < 1e-3);
        assert!(log_two_phi(-1e4f64).is_finite());
    }

    #[test]
    fn tail_switch_is_continuous() {
        for &s in &[-8.0f64, -7.999_999, -8.000_001] {
            let a = 0.5 * s * s + (erfc(-s / 2f64.sqrt())).ln();
            assert_relative_eq!(half_normal_cgf(s), a, max_relative = 1e-12);
        }
        let lo = half_normal_cgf_deriv(-8.0 - 1e-12);
        let hi = half_normal_cgf_deriv(-8.0 + 1e-12);
        assert_relative_eq!(lo, hi, max_relative = 1e-12);
    }

    #[test]
    fn cgf_examples() {
        assert_eq!(half_normal_cgf(0.0f64), 0.0);
        assert_relative_eq!(
            half_normal_cgf_deriv(0.0f64),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            half_normal_cgf(1.0f64),
            1.02039340153649541989074894794,
            max_relative = 1e-14
        );
        assert!((half_normal_cgf(1.0f64) - 1.020400).abs() < 1e-5);
    }

    #[test]
    fn erf_examples() {
        assert_eq!(erf(0.0f64), 0.0);
        assert_relative_eq!(erf(1.0f64), erf_taylor(1.0, 30), max_relative = 1e-15);
        assert!((erf(1.0f64) - 0.8427008).abs() < 1e-7);
        let le5 = log_erf(5.0f64).unwrap();
        assert_relative_eq!(le5, -erfc(5.0f64), max_relative = 1e-10);
        assert!((le5 - (-1.537e-12)).abs() < 1e-15);
        assert!(log_erf(0.0f64).is_err());
        assert!(log_erf(-1.0f64).is_err());
        assert_relative_eq!(erf_deriv(0.0f64), 2.0 / std::f64::consts::PI.sqrt());
    }

    #[test]
    fn erf_against_taylor_small_args() {
        for i in 1..=20 {
            let x = i as f64 * 0.1;
            assert_relative_eq!(erf(x), erf_taylor(x, 60), max_relative = 1e-14);
            assert_relative_eq!(erf(x) + erfc(x), 1.0, max_relative = 1e-15);
            assert_eq!(erf(-x), -erf(x));
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        for i in -60..=30 {
            let s = i as f64 * 0.25;
            let d = half_normal_cgf_deriv(s);
            let f = half_normal_cgf_deriv(s as f32) as f64;
            // s + φ/Φ cancels for s < 0, so the f32 error grows like eps·|s|/λ′
            assert!((d - f).abs() <= 1e-5 * (1.0 + s.abs()), "s={s} d={d} f={f}");
        }
        assert!((erf(1.0f32) - 0.842_700_8).abs() < 1e-6);
    }

    #[test]
    fn second_derivative_matches_difference() {
        for i in 0..200 {
            let s = -30.0 + i as f64 * 0.17;
            let h = 1e-5;
            let fd = (half_normal_cgf_deriv(s + h) - half_normal_cgf_deriv(s - h)) / (2.0 * h);
            let d2 = half_normal_cgf_deriv2(s);
            assert!(
                (fd - d2).abs() < 1e-7 * (1.0 + d2.abs()),
                "s={s} fd={fd} d2={d2}"
            );
            assert!(d2 > 0.0);
        }
    }

    #[test]
    fn entropy_and_helpers() {
        assert_eq!(binary_entropy(0.0f64), 0.0);
        assert_eq!(binary_entropy(1.0f64), 0.0);
        assert_relative_eq!(binary_entropy(0.5f64), std::f64::consts::LN_2);
        assert_relative_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0 && sigmoid(800.0f64) == 1.0);
        assert_relative_eq!(softplus(0.0f64), std::f64::consts::LN_2);
        assert_relative_eq!(softplus(50.0f64), 50.0, max_relative = 1e-15);
        assert_relative_eq!(
            dlog_erf(1e-9f64),
            erf_deriv(1e-9) / erf(1e-9),
            max_relative = 1e-12
        );
    }
}
