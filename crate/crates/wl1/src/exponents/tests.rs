use super::*;
use crate::shapes::Role;
use crate::specfn::{half_normal_cgf, half_normal_cgf_deriv, log_erf};
use approx::assert_relative_eq;

fn one() -> ShapeFunction<f64> {
    ShapeFunction::constant(1.0, Role::Weight).unwrap()
}

fn single(g: f64) -> FaceClass<f64> {
    FaceClass::from_profile(&one(), &FaceProfile::new(vec![g]).unwrap()).unwrap()
}

fn oh(face: &FaceClass<f64>, h: Vec<f64>) -> OvercountProfile<f64> {
    OvercountProfile::new(face, h).unwrap()
}

#[test]
fn combinatorial_examples() {
    let face = single(0.0);
    let ln2 = std::f64::consts::LN_2;
    assert_relative_eq!(
        combinatorial_exponent(&face, &oh(&face, vec![1.0])).unwrap(),
        ln2,
        max_relative = 1e-15
    );
    assert_relative_eq!(
        combinatorial_exponent(&face, &oh(&face, vec![0.5])).unwrap(),
        1.5 * ln2,
        max_relative = 1e-15
    );
    let f = ShapeFunction::linear_weight(1.0).unwrap();
    let p = ShapeFunction::linear_probability(0.3, 0.2).unwrap();
    let face = FaceClass::typical(&f, &p, 7).unwrap();
    assert_eq!(
        combinatorial_exponent(&face, &OvercountProfile::zeros(&face)).unwrap(),
        0.0
    );
    let full = FaceClass::from_profile(&one(), &FaceProfile::new(vec![1.0, 0.2]).unwrap()).unwrap();
    assert!(OvercountProfile::new(&full, vec![0.1, 0.0]).is_err());
    assert!(combinatorial_exponent(&full, &OvercountProfile { h: vec![0.0, 0.9] }).is_err());
    let v = combinatorial_exponent(&full, &oh(&full, vec![0.0, 0.4])).unwrap();
    assert_relative_eq!(
        v,
        0.5 * (0.8 * crate::specfn::binary_entropy(0.5) + 0.4 * ln2),
        max_relative = 1e-14
    );
}

#[test]
fn internal_at_chosen_conjugate_point() {
    let face = single(0.1);
    let h = oh(&face, vec![0.4]);
    let s = -1.0;
    let y = half_normal_cgf_deriv(s);
    let (c0, c1) = (0.4, 0.1);
    let want = -0.4 * std::f64::consts::LN_2
        - (c0 * c0 * y * y / (2.0 * c1) + c0 * (s * y - half_normal_cgf(s)));
    assert_relative_eq!(
        internal_exponent(&face, &h, y).unwrap(),
        want,
        max_relative = 1e-12
    );
}

#[test]
fn internal_edge_cases() {
    let face = single(0.1);
    assert_eq!(
        internal_exponent(&face, &OvercountProfile::zeros(&face), 0.3).unwrap(),
        0.0
    );
    let opt = optimized_internal_exponent(&face, &OvercountProfile::zeros(&face)).unwrap();
    assert_eq!(opt.value, 0.0);
    assert_eq!(opt.y, None);
    assert_eq!(opt.s, 0.0);
    let empty = single(0.0);
    assert_eq!(
        internal_exponent(&empty, &oh(&empty, vec![0.3]), 0.3),
        Err(Error::EmptyFace)
    );
    assert_eq!(
        optimized_internal_exponent(&empty, &oh(&empty, vec![0.3])),
        Err(Error::EmptyFace)
    );
    assert!(internal_exponent(&face, &oh(&face, vec![0.3]), 0.0).is_err());
}

#[test]
fn optimized_internal_solves_stationarity() {
    let face = single(0.1);
    let opt = optimized_internal_exponent(&face, &oh(&face, vec![0.4])).unwrap();
    let resid = 0.4 * half_normal_cgf_deriv(opt.s) + 0.1 * opt.s;
    assert!(resid.abs() <= 1e-10, "{resid}");
    assert!(opt.s < 0.0);
    assert_relative_eq!(opt.y.unwrap(), -0.1 * opt.s / 0.4, max_relative = 1e-15);
    assert!(opt.value <= 0.0);
}

// max over y of the single-interval internal exponent by brute force on an (s, y) grid
fn internal_grid_oracle(delta: f64, tau: f64) -> f64 {
    let c0 = tau - delta;
    let c1 = delta;
    let ns = 4000;
    let ss: Vec<f64> = (0..=ns).map(|i| -20.0 * i as f64 / ns as f64).collect();
    let lam: Vec<f64> = ss.iter().map(|&s| half_normal_cgf(s)).collect();
    let ymax = (2.0 / std::f64::consts::PI).sqrt();
    let mut best = f64::NEG_INFINITY;
    for j in 1..4000 {
        let y = ymax * j as f64 / 4000.0;
        let conj = ss
            .iter()
            .zip(&lam)
            .map(|(&s, &l)| c0 * s * y - c0 * l)
            .fold(f64::NEG_INFINITY, f64::max);
        let v = -c0 * std::f64::consts::LN_2 - (c0 * c0 * y * y / (2.0 * c1) + conj);
        best = best.max(v);
    }
    best
}

#[test]
fn optimized_internal_matches_grid_oracle() {
    for &(d, t) in &[(0.1, 0.5), (0.2, 0.6), (0.3, 0.9)] {
        let face = single(d);
        let opt = optimized_internal_exponent(&face, &oh(&face, vec![t - d])).unwrap();
        let oracle = internal_grid_oracle(d, t);
        assert!(
            (opt.value - oracle).abs() < 1e-4,
            "d={d} t={t} {} vs {oracle}",
            opt.value
        );
        // the fixed-y operation agrees at y*
        let at = internal_exponent(&face, &oh(&face, vec![t - d]), opt.y.unwrap()).unwrap();
        assert_relative_eq!(at, opt.value, max_relative = 1e-10);
    }
}

// uniform-weight external exponent max_x −(τx² − (1−τ) log erf x) on a fine grid
fn external_grid_oracle(tau: f64) -> (f64, f64) {
    let n = 200_000;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..=n {
        let x = 5.0 * i as f64 / n as f64;
        let v = -(tau * x * x - (1.0 - tau) * log_erf(x).unwrap());
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

#[test]
fn external_matches_grid_oracle() {
    for &(g, h) in &[(0.5, 0.0), (0.1, 0.4), (0.2, 0.1)] {
        let face = single(g);
        let opt = optimized_external_exponent(&face, &oh(&face, vec![h])).unwrap();
        let (oracle, xo) = external_grid_oracle(g + h);
        assert!(
            (opt.value - oracle).abs() < 1e-6,
            "g={g} h={h}: {} vs {oracle}",
            opt.value
        );
        assert!((opt.x - xo).abs() < 1e-3);
        assert!(opt.residual.abs() < 1e-10);
    }
}

#[test]
fn external_full_face_and_domain() {
    let face = single(0.4);
    let opt = optimized_external_exponent(&face, &oh(&face, vec![0.6])).unwrap();
    assert_eq!((opt.value, opt.x), (0.0, 0.0));
    assert!(external_exponent(&face, &oh(&face, vec![0.1]), 0.0).is_err());
    // leading face with δ + extras filling the grid
    let f = ShapeFunction::linear_weight(1.0).unwrap();
    let lead = FaceClass::leading(&f, 0.3, 4).unwrap();
    let opt = optimized_external_exponent(&lead, &oh(&lead, vec![1.0; 4])).unwrap();
    assert_eq!(opt.x, 0.0);
}

#[test]
fn external_depends_on_weights_and_is_nonpositive() {
    let f = ShapeFunction::linear_weight(1.0).unwrap();
    let p = FaceProfile::new(vec![0.3, 0.2, 0.1]).unwrap();
    let a = FaceClass::from_profile(&f, &p).unwrap();
    let b = FaceClass::from_profile(&one(), &p).unwrap();
    let h = vec![0.2, 0.2, 0.2];
    let va = optimized_external_exponent(&a, &oh(&a, h.clone()))
        .unwrap()
        .value;
    let vb = optimized_external_exponent(&b, &oh(&b, h)).unwrap().value;
    assert!(va <= 0.0 && vb <= 0.0);
    assert!((va - vb).abs() > 1e-3);
}

#[test]
fn log2_terms_cancel() {
    let f = ShapeFunction::linear_weight(0.7).unwrap();
    let p = ShapeFunction::linear_probability(0.25, 0.3).unwrap();
    let face = FaceClass::typical(&f, &p, 5).unwrap();
    let h = oh(&face, vec![0.1, 0.3, 0.05, 0.2, 0.4]);
    let l = h.mass(&face) * std::f64::consts::LN_2;
    let com = combinatorial_exponent(&face, &h).unwrap();
    let int = internal_exponent(&face, &h, 0.4).unwrap();
    // the other convention drops +L from ψ_com and −L from ψ_int
    let (com_dropped, int_dropped) = (com - l, int + l);
    assert!(((com + int) - (com_dropped + int_dropped)).abs() <= 1e-12);
}

#[test]
fn leading_face_layout() {
    let f = ShapeFunction::linear_weight(1.0).unwrap();
    let face = FaceClass::leading(&f, 0.2, 4).unwrap();
    assert_relative_eq!(face.width(), 0.2, max_relative = 1e-15);
    assert_relative_eq!(face.delta, 0.2);
    assert_relative_eq!(face.c1(), f.integral_sq(0.0, 0.2), max_relative = 1e-15);
    assert_relative_eq!(face.capacity(), 0.8, max_relative = 1e-15);
    assert!(FaceClass::leading(&f, 0.0, 4).is_err());
    let want: f64 = crate::quadrature::adaptive_simpson(
        &|u: f64| log_erf(0.7 * (1.0 + u)).unwrap(),
        0.2,
        1.0,
        1e-13,
        40,
    );
    assert_relative_eq!(face.log_erf_integral(0.7), want, max_relative = 1e-12);
}

#[test]
fn single_precision_exponents_track_double() {
    let f32face = FaceClass::<f32>::from_profile(
        &ShapeFunction::constant(1.0f32, Role::Weight).unwrap(),
        &FaceProfile::new(vec![0.1f32]).unwrap(),
    )
    .unwrap();
    let h32 = OvercountProfile::new(&f32face, vec![0.4f32]).unwrap();
    let v32 = optimized_internal_exponent(&f32face, &h32).unwrap().value as f64;
    let face = single(0.1);
    let v64 = optimized_internal_exponent(&face, &oh(&face, vec![0.4]))
        .unwrap()
        .value;
    assert!((v32 - v64).abs() < 1e-5);
    let e32 = optimized_external_exponent(&f32face, &h32).unwrap().value as f64;
    let e64 = optimized_external_exponent(&face, &oh(&face, vec![0.4]))
        .unwrap()
        .value;
    assert!((e32 - e64).abs() < 1e-4);
}
