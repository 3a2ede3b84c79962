//! Combinatorial, internal-angle and external-angle exponents of a face class
//! of the weighted cross-polytope, on an interval grid.
//!
//! Interval sums are weighted by the interval width `w`: 1/r when the grid covers
//! [0, 1], (1 − δ)/r when it covers [δ, 1] with the leading face on [0, δ].

mod oracle;

pub use oracle::{
    external_angle_oracle, external_angle_oracle_log, internal_angle_oracle, InternalAngleEstimate,
};

use crate::error::{Error, Result};
use crate::quadrature::{brent_min, brent_root, composite_rule};
use crate::real::Real;
use crate::shapes::{interval_averages, FaceProfile, IntervalGrid, ShapeFunction};
use crate::specfn::{
    binary_entropy, dlog_erf, half_normal_cgf, half_normal_cgf_deriv, half_normal_cgf_deriv2,
    log_erf_pos,
};

const QUAD_PANELS: usize = 64;
const QUAD_ORDER: usize = 8;

/// A face class: a fully occupied base region [0, a] plus per-interval fractions g on a grid over [a, 1].
#[derive(Clone, Debug)]
pub struct FaceClass<T> {
    pub grid: IntervalGrid<T>,
    pub g: Vec<T>,
    /// ∫_0^a f²
    pub base_sq: T,
    /// a + w Σ g_i
    pub delta: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> FaceClass<T> {
    fn build(f: &ShapeFunction<T>, start: T, r: usize, g: Vec<T>) -> Result<Self> {
        let grid = IntervalGrid::new(f, start, r)?;
        if g.len() != r {
            return Err(Error::Domain("face profile length must equal r".into()));
        }
        let w = grid.width;
        let delta = start + w * g.iter().copied().sum::<T>();
        let (u, weights) =
            composite_rule(start, T::one(), &f.breakpoints(), QUAD_PANELS, QUAD_ORDER);
        let nodes = u.into_iter().map(|u| f.eval(u)).collect();
        Ok(FaceClass {
            grid,
            g,
            base_sq: f.integral_sq(T::zero(), start),
            delta,
            nodes,
            weights,
        })
    }

    /// Leading face on the first δn indices; grid on [δ, 1] with g ≡ 0.
    pub fn leading(f: &ShapeFunction<T>, delta: T, r: usize) -> Result<Self> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::Domain(format!(
                "leading face needs 0 < delta < 1, got {delta}"
            )));
        }
        Self::build(f, delta, r, vec![T::zero(); r])
    }

    /// Typical face of the prior p: g_i = p̄_i on a grid over [0, 1].
    pub fn typical(f: &ShapeFunction<T>, p: &ShapeFunction<T>, r: usize) -> Result<Self> {
        Self::build(f, T::zero(), r, interval_averages(p, r)?)
    }

    /// Any face profile on a grid over [0, 1].
    pub fn from_profile(f: &ShapeFunction<T>, face: &FaceProfile<T>) -> Result<Self> {
        Self::build(f, T::zero(), face.r(), face.g.clone())
    }

    pub fn r(&self) -> usize {
        self.grid.r
    }

    pub fn width(&self) -> T {
        self.grid.width
    }

    pub fn f(&self) -> &[T] {
        &self.grid.samples
    }

    /// c1 = ∫_0^a f² + w Σ f_i² g_i
    pub fn c1(&self) -> T {
        let w = self.width();
        self.base_sq
            + w * self
                .f()
                .iter()
                .zip(&self.g)
                .map(|(&f, &g)| f * f * g)
                .sum::<T>()
    }

    /// w Σ (1 − g_i): the most extra mass any covering face can add.
    pub fn capacity(&self) -> T {
        self.width() * self.g.iter().map(|&g| T::one() - g).sum::<T>()
    }

    /// ∫_a^1 log erf(x f(u)) du
    pub fn log_erf_integral(&self, x: T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&f, &w)| w * log_erf_pos(x * f))
            .sum()
    }

    fn dlog_erf_integral(&self, x: T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&f, &w)| w * f * dlog_erf(x * f))
            .sum()
    }

    pub(crate) fn f_max(&self) -> T {
        self.nodes
            .iter()
            .chain(self.f())
            .fold(T::zero(), |m, &v| m.max(v))
    }

    pub(crate) fn f_min(&self) -> T {
        self.nodes
            .iter()
            .chain(self.f())
            .fold(T::infinity(), |m, &v| m.min(v))
    }
}

/// Fractions h_i ∈ [0, 1 − g_i] of extra covering-face vertices per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct OvercountProfile<T> {
    pub h: Vec<T>,
}

impl<T: Real> OvercountProfile<T> {
    pub fn new(face: &FaceClass<T>, h: Vec<T>) -> Result<Self> {
        if h.len() != face.r() {
            return Err(Error::Domain(
                "overcount profile length must equal r".into(),
            ));
        }
        let tol = T::lit(1e-12);
        for (&hi, &gi) in h.iter().zip(&face.g) {
            if !(hi >= -tol && hi <= T::one() - gi + tol) {
                return Err(Error::Domain(format!(
                    "h_i = {hi} outside [0, 1 - g_i = {}]",
                    T::one() - gi
                )));
            }
        }
        Ok(OvercountProfile { h })
    }

    pub fn zeros(face: &FaceClass<T>) -> Self {
        OvercountProfile {
            h: vec![T::zero(); face.r()],
        }
    }

    /// w Σ h_i
    pub fn mass(&self, face: &FaceClass<T>) -> T {
        face.width() * self.h.iter().copied().sum::<T>()
    }
}

/// The three exponents and their sum at a maximizing (h, x, y); s is the conjugate point.
#[derive(Clone, Debug)]
pub struct ExponentBreakdown<T> {
    pub psi_com: T,
    pub psi_int: T,
    pub psi_ext: T,
    pub psi_tot: T,
    pub argmax_h: OvercountProfile<T>,
    pub argmax_x: T,
    pub argmax_y: T,
    pub argmax_s: T,
}

fn check_h<T: Real>(face: &FaceClass<T>, h: &OvercountProfile<T>) -> Result<()> {
    OvercountProfile::new(face, h.h.clone()).map(|_| ())
}

/// w Σ (1 − g_i) H(h_i / (1 − g_i)) + (w Σ h_i) log 2.
pub fn combinatorial_exponent<T: Real>(face: &FaceClass<T>, h: &OvercountProfile<T>) -> Result<T> {
    check_h(face, h)?;
    let w = face.width();
    let mut total = T::zero();
    for (&gi, &hi) in face.g.iter().zip(&h.h) {
        let free = T::one() - gi;
        if free <= T::zero() {
            continue;
        }
        total = total + free * binary_entropy((hi / free).max(T::zero()).min(T::one()));
    }
    Ok(w * total + h.mass(face) * T::LN_2())
}

// Λ(s) = w Σ h_i λ(s f_i) and its first two derivatives
fn lambda_sum<T: Real>(face: &FaceClass<T>, h: &[T], s: T) -> (T, T, T) {
    let w = face.width();
    let (mut v, mut d, mut d2) = (T::zero(), T::zero(), T::zero());
    for (&f, &hi) in face.f().iter().zip(h) {
        if hi == T::zero() {
            continue;
        }
        let sf = s * f;
        v = v + hi * half_normal_cgf(sf);
        d = d + hi * f * half_normal_cgf_deriv(sf);
        d2 = d2 + hi * f * f * half_normal_cgf_deriv2(sf);
    }
    (w * v, w * d, w * d2)
}

// Root of an increasing function on s ≤ 0 by safeguarded Newton with a
// bracket grown down to −1e6.
fn increasing_root_nonpositive<T: Real, F: Fn(T) -> (T, T)>(phi: F) -> Result<T> {
    let (at0, _) = phi(T::zero());
    if at0 <= T::zero() {
        return Ok(T::zero());
    }
    let mut lo = -T::one();
    let limit = T::lit(-1e6);
    while phi(lo).0 > T::zero() {
        if lo <= limit {
            return Err(Error::RootNotBracketed {
                lo: limit.f64(),
                hi: 0.0,
            });
        }
        lo = (lo * T::lit(2.0)).max(limit);
    }
    let mut hi = T::zero();
    let mut s = lo / T::lit(2.0);
    for _ in 0..200 {
        let (v, dv) = phi(s);
        if v.abs() <= T::epsilon() * (T::one() + dv.abs() * (T::one() + s.abs())) {
            return Ok(s);
        }
        if v > T::zero() {
            hi = s;
        } else {
            lo = s;
        }
        if hi - lo <= T::epsilon() * (T::one() + s.abs()) {
            return Ok(s);
        }
        let newton = s - v / dv;
        s = if dv > T::zero() && newton >= lo && newton <= hi {
            newton
        } else {
            (lo + hi) / T::lit(2.0)
        };
    }
    Ok(s)
}

/// Internal exponent at a fixed y ∈ (0, √(2/π)):
/// −(w Σ h) log 2 − (c̄0² y²/(2c1) + c̄0 λ̄0*(y)), with the conjugate taken over s ≤ 0.
pub fn internal_exponent<T: Real>(face: &FaceClass<T>, h: &OvercountProfile<T>, y: T) -> Result<T> {
    check_h(face, h)?;
    let mass = h.mass(face);
    if mass <= T::zero() {
        return Ok(T::zero());
    }
    let c1 = face.c1();
    if c1 <= T::zero() {
        return Err(Error::EmptyFace);
    }
    if !(y > T::zero()) {
        return Err(Error::Domain(format!(
            "internal exponent needs y > 0, got {y}"
        )));
    }
    let w = face.width();
    let c0 = w * face.f().iter().zip(&h.h).map(|(&f, &hi)| f * hi).sum::<T>();
    // c̄0 λ̄0*(y) = max_{s≤0} c̄0 s y − Λ(s); stationarity Λ′(s) = c̄0 y
    let s = increasing_root_nonpositive(|s| {
        let (_, d, d2) = lambda_sum(face, &h.h, s);
        (d - c0 * y, d2)
    })?;
    let (lam, _, _) = lambda_sum(face, &h.h, s);
    let conj = c0 * s * y - lam;
    Ok(-mass * T::LN_2() - (c0 * c0 * y * y / (T::lit(2.0) * c1) + conj))
}

/// Internal exponent maximized over y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InternalOptimum<T> {
    pub value: T,
    /// None when h = 0.
    pub y: Option<T>,
    pub s: T,
    pub residual: T,
}

/// Solves w Σ h_i f_i λ′(s f_i) + c1 s = 0 for s* ≤ 0; y* = −c1 s*/c̄0.
pub fn optimized_internal_exponent<T: Real>(
    face: &FaceClass<T>,
    h: &OvercountProfile<T>,
) -> Result<InternalOptimum<T>> {
    check_h(face, h)?;
    let mass = h.mass(face);
    if mass <= T::zero() {
        return Ok(InternalOptimum {
            value: T::zero(),
            y: None,
            s: T::zero(),
            residual: T::zero(),
        });
    }
    let c1 = face.c1();
    if c1 <= T::zero() {
        return Err(Error::EmptyFace);
    }
    let s = increasing_root_nonpositive(|s| {
        let (_, d, d2) = lambda_sum(face, &h.h, s);
        (d + c1 * s, d2 + c1)
    })?;
    let (lam, d, _) = lambda_sum(face, &h.h, s);
    let w = face.width();
    let c0 = w * face.f().iter().zip(&h.h).map(|(&f, &hi)| f * hi).sum::<T>();
    Ok(InternalOptimum {
        value: -mass * T::LN_2() + c1 * s * s / T::lit(2.0) + lam,
        y: Some(-c1 * s / c0),
        s,
        residual: d + c1 * s,
    })
}

// c2 and the interval part of log G0 that depends on g + h
fn external_parts<T: Real>(face: &FaceClass<T>, h: &[T], x: T) -> (T, T) {
    let w = face.width();
    let mut sq = T::zero();
    let mut le = T::zero();
    for ((&f, &g), &hi) in face.f().iter().zip(&face.g).zip(h) {
        let occ = g + hi;
        sq = sq + f * f * occ;
        le = le + occ * log_erf_pos(x * f);
    }
    (face.base_sq + w * sq, w * le)
}

/// External exponent at x > 0: −(c2 x² − log G0(x)).
pub fn external_exponent<T: Real>(face: &FaceClass<T>, h: &OvercountProfile<T>, x: T) -> Result<T> {
    check_h(face, h)?;
    if !(x > T::zero()) {
        return Err(Error::Domain(format!(
            "external exponent needs x > 0, got {x}"
        )));
    }
    let (c2, le) = external_parts(face, &h.h, x);
    let log_g0 = face.log_erf_integral(x) - le;
    Ok(-(c2 * x * x - log_g0))
}

fn external_slope<T: Real>(face: &FaceClass<T>, h: &[T], x: T) -> T {
    let w = face.width();
    let (c2, _) = external_parts(face, h, x);
    let mut d = T::zero();
    for ((&f, &g), &hi) in face.f().iter().zip(&face.g).zip(h) {
        d = d + (g + hi) * f * dlog_erf(x * f);
    }
    face.dlog_erf_integral(x) - w * d - T::lit(2.0) * c2 * x
}

/// External exponent maximized over x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExternalOptimum<T> {
    pub value: T,
    pub x: T,
    pub residual: T,
}

/// Returns (0, 0) when g + h fills every interval and there is no base region.
pub fn optimized_external_exponent<T: Real>(
    face: &FaceClass<T>,
    h: &OvercountProfile<T>,
) -> Result<ExternalOptimum<T>> {
    check_h(face, h)?;
    let complement = T::one() - face.delta - h.mass(face);
    if complement <= T::lit(1e-14) {
        return Ok(ExternalOptimum {
            value: T::zero(),
            x: T::zero(),
            residual: T::zero(),
        });
    }
    let slope = |x: T| external_slope(face, &h.h, x);
    // slope → +∞ as x → 0 and → −∞ as x → ∞
    let mut lo = T::lit(1e-3) / face.f_max();
    let mut hi = T::one() / face.f_min();
    let mut k = 0;
    while slope(lo) <= T::zero() {
        lo = lo / T::lit(2.0);
        k += 1;
        if k > 60 {
            return Err(Error::BracketGrowth(60));
        }
    }
    k = 0;
    while slope(hi) >= T::zero() {
        hi = hi * T::lit(2.0);
        k += 1;
        if k > 60 {
            return Err(Error::BracketGrowth(60));
        }
    }
    // with left-sampled grids log G0 need not be concave, so scan before refining
    let n = 64;
    let ratio = (hi / lo).ln();
    let xs: Vec<T> = (0..n)
        .map(|i| lo * (ratio * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)).exp())
        .collect();
    let ext = |x: T| external_exponent(face, h, x).unwrap_or(T::neg_infinity());
    let vals: Vec<T> = xs.iter().map(|&x| ext(x)).collect();
    let best = (0..n).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let x = if slope(a) > T::zero() && slope(b) < T::zero() {
        brent_root(slope, a, b, T::lit(1e-15), 300)?
    } else {
        brent_min(|x| -ext(x), a, b, T::lit(1e-14), 300).0
    };
    Ok(ExternalOptimum {
        value: ext(x),
        x,
        residual: slope(x),
    })
}

#[cfg(test)]
mod tests;
