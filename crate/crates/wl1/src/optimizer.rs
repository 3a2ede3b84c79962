//! Maximization of the total exponent ψ_com + ψ_int + ψ_ext over the overcount
//! profile h and the auxiliary variables (x, y), the resulting recoverable
//! sparsity bound δ̄, and the choice of weight slope ρ.
//!
//! For fixed x the objective is concave in (h, y) and the y-part is the convex
//! conjugate min over s ≤ 0, so
//!
//! ψ_tot = max_x min_{s≤0} max_h Φ(h, s, x),
//!
//! and the inner max over h has the closed form h_i = (1 − g_i) σ(a_i + μ),
//! with μ ≥ 0 the multiplier of the measurement constraint w Σ h_i ≥ α − δ.
//! The s-problem is a monotone scalar root; x is scanned on a log grid and
//! refined with Brent.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponents::{
    combinatorial_exponent, external_exponent, internal_exponent, optimized_external_exponent,
    optimized_internal_exponent, ExponentBreakdown, FaceClass, OvercountProfile,
};
use crate::quadrature::{brent_min, brent_root};
use crate::real::Real;
use crate::shapes::ShapeFunction;
use crate::specfn::{half_normal_cgf, half_normal_cgf_deriv, sigmoid, softplus};

#[derive(Clone, Debug, PartialEq)]
pub enum BoundMode<T> {
    Leading { delta: T },
    Typical { p: ShapeFunction<T> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundQuery<T> {
    pub alpha: T,
    pub r: usize,
    pub mode: BoundMode<T>,
    pub f: ShapeFunction<T>,
}

/// How a δ is declared recoverable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// ψ_tot − ψ_free < −tol, where ψ_free drops the measurement constraint.
    /// Exactly zero would mean the unconstrained union bound sums to one, which it does
    /// in exact arithmetic; the difference removes the left-sampling offset.
    #[default]
    Calibrated,
    /// ψ_tot < −tol.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundOptions {
    /// Points in the coarse log-spaced x scan.
    pub x_grid: usize,
    pub delta_tol: f64,
    pub rule: ThresholdRule,
    pub sign_tol: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            x_grid: 48,
            delta_tol: 1e-4,
            rule: ThresholdRule::Calibrated,
            sign_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundResult<T> {
    /// Saddle value of the constrained problem.
    pub psi_tot: T,
    /// Same maximization with the measurement constraint dropped.
    pub psi_free: T,
    /// Independent re-evaluation at the maximizer.
    pub breakdown: ExponentBreakdown<T>,
    pub feasible: bool,
    /// Multiplier of w Σ h ≥ α − δ; positive when the constraint binds.
    pub multiplier: T,
    pub delta: T,
}

impl<T: Real> BoundResult<T> {
    pub fn margin(&self) -> T {
        self.psi_tot - self.psi_free
    }

    /// |ψ_com + ψ_int + ψ_ext − ψ_tot| at the certificate.
    pub fn certificate_gap(&self) -> T {
        (self.breakdown.psi_tot - self.psi_tot).abs()
    }

    pub fn certified(&self, opts: &BoundOptions) -> bool {
        let tol = T::lit(opts.sign_tol);
        match opts.rule {
            ThresholdRule::Calibrated => self.margin() < -tol,
            ThresholdRule::Raw => self.psi_tot < -tol,
        }
    }
}

impl<T: Real> BoundQuery<T> {
    pub fn face(&self) -> Result<FaceClass<T>> {
        match &self.mode {
            BoundMode::Leading { delta } => FaceClass::leading(&self.f, *delta, self.r),
            BoundMode::Typical { p } => FaceClass::typical(&self.f, p, self.r),
        }
    }
}

// Per-x data for the saddle problem.
struct Slice<'a, T> {
    face: &'a FaceClass<T>,
    x: T,
    t: Option<T>,
    cap: Vec<T>,
    le: Vec<T>,
    // terms not involving s or h
    fixed: T,
}

struct Inner<T> {
    value: T,
    q: Vec<T>,
    mu: T,
    slope: T,
}

impl<'a, T: Real> Slice<'a, T> {
    fn new(face: &'a FaceClass<T>, x: T, t: Option<T>) -> Self {
        let w = face.width();
        let cap: Vec<T> = face.g.iter().map(|&g| w * (T::one() - g)).collect();
        let le: Vec<T> = face
            .f()
            .iter()
            .map(|&f| crate::specfn::log_erf_pos(x * f))
            .collect();
        let fg: T = face.f().iter().zip(&face.g).map(|(&f, &g)| f * f * g).sum();
        let gle: T = face.g.iter().zip(&le).map(|(&g, &l)| g * l).sum();
        let fixed = -(face.base_sq + w * fg) * x * x + face.log_erf_integral(x) - w * gle;
        Slice {
            face,
            x,
            t,
            cap,
            le,
            fixed,
        }
    }

    fn solve_mu(&self, a: &[T]) -> T {
        let t = match self.t {
            Some(t) => t,
            None => return T::zero(),
        };
        let mass = |mu: T| -> (T, T) {
            let mut m = T::zero();
            let mut d = T::zero();
            for (&c, &ai) in self.cap.iter().zip(a) {
                if c > T::zero() {
                    let q = sigmoid(ai + mu);
                    m = m + c * q;
                    d = d + c * q * (T::one() - q);
                }
            }
            (m - t, d)
        };
        if mass(T::zero()).0 >= T::zero() {
            return T::zero();
        }
        let (mut lo, mut hi) = (T::zero(), T::one());
        while mass(hi).0 < T::zero() {
            lo = hi;
            hi = hi * T::lit(2.0);
            if hi > T::lit(1e300) {
                return hi;
            }
        }
        let mut mu = (lo + hi) / T::lit(2.0);
        for _ in 0..200 {
            let (v, d) = mass(mu);
            if v == T::zero() {
                break;
            }
            if v < T::zero() {
                lo = mu;
            } else {
                hi = mu;
            }
            let step = mu - v / d;
            mu = if d > T::zero() && step > lo && step < hi {
                step
            } else {
                (lo + hi) / T::lit(2.0)
            };
            if hi - lo <= T::epsilon() * T::lit(4.0) * (T::one() + mu) {
                break;
            }
        }
        mu
    }

    fn inner(&self, s: T) -> Inner<T> {
        let f = self.face.f();
        let c1 = self.face.c1();
        let mut a = Vec::with_capacity(f.len());
        for (i, &fi) in f.iter().enumerate() {
            a.push(half_normal_cgf(s * fi) - fi * fi * self.x * self.x - self.le[i]);
        }
        let mu = self.solve_mu(&a);
        let mut value = c1 * s * s / T::lit(2.0) + self.fixed;
        let mut slope = c1 * s;
        let mut q = Vec::with_capacity(f.len());
        for (i, &fi) in f.iter().enumerate() {
            let c = self.cap[i];
            if c <= T::zero() {
                q.push(T::zero());
                continue;
            }
            let b = a[i] + mu;
            let qi = sigmoid(b);
            // H(σ(b)) = q softplus(−b) + (1 − q) softplus(b)
            let ent = qi * softplus(-b) + (T::one() - qi) * softplus(b);
            value = value + c * (ent + qi * a[i]);
            slope = slope + c * qi * fi * half_normal_cgf_deriv(s * fi);
            q.push(qi);
        }
        Inner {
            value,
            q,
            mu,
            slope,
        }
    }

    // min over s ≤ 0 of max_h Φ; the Danskin slope is nondecreasing in s
    fn solve(&self) -> Result<(T, Inner<T>)> {
        let at0 = self.inner(T::zero());
        if at0.slope <= T::zero() {
            return Ok((T::zero(), at0));
        }
        let mut lo = -T::one();
        let limit = T::lit(-1e6);
        let mut cur = self.inner(lo);
        while cur.slope > T::zero() {
            if lo <= limit {
                return Err(Error::RootNotBracketed {
                    lo: limit.f64(),
                    hi: 0.0,
                });
            }
            lo = (lo * T::lit(2.0)).max(limit);
            cur = self.inner(lo);
        }
        let tol = T::lit(1e-14) * (T::one() + lo.abs());
        let s = brent_root(|s| self.inner(s).slope, lo, T::zero(), tol, 300)?;
        Ok((s, self.inner(s)))
    }
}

struct Saddle<T> {
    value: T,
    x: T,
    s: T,
    q: Vec<T>,
    mu: T,
}

fn saddle_at<T: Real>(face: &FaceClass<T>, x: T, t: Option<T>) -> Result<Saddle<T>> {
    let sl = Slice::new(face, x, t);
    let (s, inner) = sl.solve()?;
    Ok(Saddle {
        value: inner.value,
        x,
        s,
        q: inner.q,
        mu: inner.mu,
    })
}

fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (ratio * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)).exp())
        .collect()
}

fn maximize_over_x<T: Real>(
    face: &FaceClass<T>,
    t: Option<T>,
    opts: &BoundOptions,
) -> Result<Saddle<T>> {
    let n = opts.x_grid.max(3);
    let mut lo = T::lit(1e-3) / face.f_max();
    let mut hi = T::lit(10.0) / face.f_min();
    let eval_grid = |xs: &[T]| -> Result<Vec<Saddle<T>>> {
        xs.par_iter().map(|&x| saddle_at(face, x, t)).collect()
    };
    let mut xs = log_grid(lo, hi, n);
    let mut vals = eval_grid(&xs)?;
    for _ in 0..4 {
        let best = argmax(&vals);
        if best == 0 {
            hi = lo;
            lo = lo * T::lit(1e-3);
        } else if best == n - 1 {
            lo = hi;
            hi = hi * T::lit(1e2);
        } else {
            break;
        }
        let more_x = log_grid(lo, hi, n);
        let more = eval_grid(&more_x)?;
        xs = more_x;
        vals = more;
    }
    let best = argmax(&vals);
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let (xr, _) = brent_min(
        |x| {
            saddle_at(face, x, t)
                .map(|s| -s.value)
                .unwrap_or(T::infinity())
        },
        a,
        b,
        T::lit(1e-12) * b,
        200,
    );
    let refined = saddle_at(face, xr, t)?;
    Ok(if refined.value >= vals[best].value {
        refined
    } else {
        vals.swap_remove(best)
    })
}

fn argmax<T: Real>(v: &[Saddle<T>]) -> usize {
    // first index on ties keeps the reduction independent of scheduling
    (0..v.len()).fold(0, |b, i| if v[i].value > v[b].value { i } else { b })
}

fn breakdown_at<T: Real>(face: &FaceClass<T>, sd: &Saddle<T>) -> Result<ExponentBreakdown<T>> {
    let h: Vec<T> = face
        .g
        .iter()
        .zip(&sd.q)
        .map(|(&g, &q)| ((T::one() - g) * q).min(T::one() - g))
        .collect();
    let h = OvercountProfile::new(face, h)?;
    let w = face.width();
    let c0 = w * face.f().iter().zip(&h.h).map(|(&f, &hi)| f * hi).sum::<T>();
    let c1 = face.c1();
    let y = if c0 > T::zero() {
        -c1 * sd.s / c0
    } else {
        T::zero()
    };
    let psi_com = combinatorial_exponent(face, &h)?;
    let psi_int = if c0 > T::zero() {
        internal_exponent(face, &h, y)?
    } else {
        T::zero()
    };
    let psi_ext = external_exponent(face, &h, sd.x)?;
    Ok(ExponentBreakdown {
        psi_com,
        psi_int,
        psi_ext,
        psi_tot: psi_com + psi_int + psi_ext,
        argmax_h: h,
        argmax_x: sd.x,
        argmax_y: y,
        argmax_s: sd.s,
    })
}

// G = P: every free slot is taken
fn full_cover<T: Real>(face: &FaceClass<T>) -> Result<(T, ExponentBreakdown<T>)> {
    let h = OvercountProfile::new(face, face.g.iter().map(|&g| T::one() - g).collect())?;
    let psi_com = combinatorial_exponent(face, &h)?;
    let int = optimized_internal_exponent(face, &h)?;
    let ext = optimized_external_exponent(face, &h)?;
    let tot = psi_com + int.value + ext.value;
    Ok((
        tot,
        ExponentBreakdown {
            psi_com,
            psi_int: int.value,
            psi_ext: ext.value,
            psi_tot: tot,
            argmax_h: h,
            argmax_x: ext.x,
            argmax_y: int.y.unwrap_or(T::zero()),
            argmax_s: int.s,
        },
    ))
}

/// Maximizes the total exponent for one query.
pub fn total_exponent<T: Real>(q: &BoundQuery<T>, opts: &BoundOptions) -> Result<BoundResult<T>> {
    if !(q.alpha > T::zero() && q.alpha <= T::one()) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0,1], got {}",
            q.alpha
        )));
    }
    let face = q.face()?;
    total_exponent_for_face(&face, q.alpha, opts)
}

/// [`total_exponent`] on a prepared face class.
pub fn total_exponent_for_face<T: Real>(
    face: &FaceClass<T>,
    alpha: T,
    opts: &BoundOptions,
) -> Result<BoundResult<T>> {
    if face.c1() <= T::zero() {
        return Err(Error::EmptyFace);
    }
    let t = alpha - face.delta;
    let cap = face.capacity();
    let eps = T::lit(1e-13);
    let free = maximize_over_x(face, None, opts)?;
    if t > cap + eps {
        let breakdown = breakdown_at(face, &free)?;
        return Ok(BoundResult {
            psi_tot: T::neg_infinity(),
            psi_free: free.value,
            breakdown,
            feasible: false,
            multiplier: T::infinity(),
            delta: face.delta,
        });
    }
    if t >= cap - eps {
        let (tot, breakdown) = full_cover(face)?;
        return Ok(BoundResult {
            psi_tot: tot,
            psi_free: free.value,
            breakdown,
            feasible: true,
            multiplier: T::infinity(),
            delta: face.delta,
        });
    }
    let free_mass: T = free
        .q
        .iter()
        .zip(face.g.iter())
        .map(|(&q, &g)| q * (T::one() - g))
        .sum::<T>()
        * face.width();
    let psi_free = free.value;
    let sd = if free_mass >= t {
        free
    } else {
        maximize_over_x(face, Some(t), opts)?
    };
    let breakdown = breakdown_at(face, &sd)?;
    Ok(BoundResult {
        psi_tot: sd.value,
        psi_free,
        breakdown,
        feasible: true,
        multiplier: sd.mu,
        delta: face.delta,
    })
}

/// Family of faces indexed by the sparsity δ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaFamily<T> {
    Leading,
    /// Typical face of p(u) = δ − c(u − 1/2).
    Tilted {
        c: T,
    },
}

#[derive(Clone, Debug)]
pub struct DeltaBound<T> {
    pub delta_bar: T,
    /// Result at δ̄.
    pub at_bound: BoundResult<T>,
    /// (δ, criterion value) at every probed point, in probing order.
    pub probes: Vec<(T, T)>,
    /// False if a scan point beyond the first failure was certified again.
    pub monotone: bool,
    /// True if every scan point was certified up to the top of the range.
    pub saturated: bool,
}

fn query_for<T: Real>(
    alpha: T,
    f: &ShapeFunction<T>,
    family: DeltaFamily<T>,
    r: usize,
    delta: T,
) -> Result<BoundQuery<T>> {
    let mode = match family {
        DeltaFamily::Leading => BoundMode::Leading { delta },
        DeltaFamily::Tilted { c } => BoundMode::Typical {
            p: ShapeFunction::linear_probability(delta, c)?,
        },
    };
    Ok(BoundQuery {
        alpha,
        r,
        mode,
        f: f.clone(),
    })
}

/// Range of δ over which the family is defined and the bound is meaningful.
pub fn delta_range<T: Real>(alpha: T, family: DeltaFamily<T>) -> (T, T) {
    let floor = T::lit(1e-4);
    match family {
        DeltaFamily::Leading => (floor, alpha),
        DeltaFamily::Tilted { c } => {
            let half = c / T::lit(2.0);
            (floor.max(half), alpha.min(T::one() - half))
        }
    }
}

/// Largest δ certified by the total exponent: a 16-point scan followed by bisection.
pub fn guaranteed_delta_bound<T: Real>(
    alpha: T,
    f: &ShapeFunction<T>,
    family: DeltaFamily<T>,
    r: usize,
    opts: &BoundOptions,
) -> Result<DeltaBound<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let (lo, hi) = delta_range(alpha, family);
    if !(lo < hi) {
        return Err(Error::Domain("empty delta range for this family".into()));
    }
    let eval = |d: T| -> Result<(BoundResult<T>, T)> {
        let res = total_exponent(&query_for(alpha, f, family, r, d)?, opts)?;
        let crit = match opts.rule {
            ThresholdRule::Calibrated => res.margin(),
            ThresholdRule::Raw => res.psi_tot,
        };
        Ok((res, crit))
    };
    let n = 16;
    let ds: Vec<T> = (0..n)
        .map(|i| lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1))
        .collect();
    let scan: Vec<(BoundResult<T>, T)> = ds.par_iter().map(|&d| eval(d)).collect::<Result<_>>()?;
    let tol = T::lit(opts.sign_tol);
    let ok = |c: T| c < -tol;
    let mut probes: Vec<(T, T)> = ds.iter().zip(&scan).map(|(&d, (_, c))| (d, *c)).collect();
    let first_bad = scan.iter().position(|(_, c)| !ok(*c));
    let j = match first_bad {
        None => {
            let (res, _) = scan.into_iter().last().expect("scan is nonempty");
            return Ok(DeltaBound {
                delta_bar: hi,
                at_bound: res,
                probes,
                monotone: true,
                saturated: true,
            });
        }
        Some(0) => return Err(Error::NoSignChange(lo.f64())),
        Some(j) => j,
    };
    let monotone = scan[j..].iter().all(|(_, c)| !ok(*c));
    let mut scan = scan;
    let (mut a, mut b) = (ds[j - 1], ds[j]);
    let mut best = scan.swap_remove(j - 1).0;
    let dtol = T::lit(opts.delta_tol);
    while b - a > dtol {
        let m = (a + b) / T::lit(2.0);
        let (res, c) = eval(m)?;
        probes.push((m, c));
        if ok(c) {
            a = m;
            best = res;
        } else {
            b = m;
        }
    }
    Ok(DeltaBound {
        delta_bar: a,
        at_bound: best,
        probes,
        monotone,
        saturated: false,
    })
}

#[derive(Clone, Debug)]
pub struct RhoCurve<T> {
    pub rho_star: T,
    pub delta_bar_star: T,
    /// δ̄(ρ) per grid point; None where no δ in range is certified.
    pub curve: Vec<(T, Option<T>)>,
}

/// ρ maximizing δ̄ for the tilted family, with f(u) = 1 + ρu; ties go to the smaller ρ.
pub fn optimal_rho<T: Real>(
    c: T,
    alpha: T,
    r: usize,
    rho_grid: &[T],
    opts: &BoundOptions,
) -> Result<RhoCurve<T>> {
    if rho_grid.is_empty() {
        return Err(Error::Domain("empty rho grid".into()));
    }
    if rho_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("rho grid must be ascending".into()));
    }
    let curve: Vec<(T, Option<T>)> = rho_grid
        .par_iter()
        .map(|&rho| {
            let f = ShapeFunction::linear_weight(rho)?;
            match guaranteed_delta_bound(alpha, &f, DeltaFamily::Tilted { c }, r, opts) {
                Ok(b) => Ok((rho, Some(b.delta_bar))),
                Err(Error::NoSignChange(_)) => Ok((rho, None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut star: Option<(T, T)> = None;
    for &(rho, d) in &curve {
        if let Some(d) = d {
            if star.is_none_or(|(_, sd)| d > sd) {
                star = Some((rho, d));
            }
        }
    }
    let (rho_star, delta_bar_star) = star.ok_or(Error::NoSignChange(0.0))?;
    Ok(RhoCurve {
        rho_star,
        delta_bar_star,
        curve,
    })
}
