//! Probability shapes p(·) and weight shapes f(·) on [0, 1], their interval
//! discretizations, and Bernoulli KL typicality measures.

use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, integrate_split};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Probability,
    Weight,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShapeKind<T> {
    /// p(u) = δ − c(u − 1/2)
    LinearProbability {
        delta: T,
        c: T,
    },
    /// f(u) = 1 + ρu
    LinearWeight {
        rho: T,
    },
    /// Linear interpolation through (position, value) pairs, constant outside.
    /// A repeated position encodes a jump; the later value wins (right-continuous).
    PiecewiseLinear {
        breakpoints: Vec<T>,
        values: Vec<T>,
    },
    Constant {
        v: T,
    },
}

/// A validated shape function. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeFunction<T> {
    kind: ShapeKind<T>,
    role: Role,
}

impl<T: Real> ShapeFunction<T> {
    pub fn new(kind: ShapeKind<T>, role: Role) -> Result<Self> {
        if let ShapeKind::PiecewiseLinear {
            breakpoints,
            values,
        } = &kind
        {
            if breakpoints.is_empty() || breakpoints.len() != values.len() {
                return Err(Error::InvalidShape(
                    "pwl needs matching, nonempty breakpoints and values".into(),
                ));
            }
            if breakpoints.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidShape(
                    "pwl breakpoints must be ascending".into(),
                ));
            }
            if breakpoints.iter().any(|&b| b < T::zero() || b > T::one()) {
                return Err(Error::InvalidShape(
                    "pwl breakpoints must lie in [0,1]".into(),
                ));
            }
        }
        match (&kind, role) {
            (ShapeKind::LinearProbability { .. }, Role::Weight) => {
                return Err(Error::InvalidShape(
                    "linear-prob is a probability shape".into(),
                ))
            }
            (ShapeKind::LinearWeight { .. }, Role::Probability) => {
                return Err(Error::InvalidShape(
                    "linear-weight is a weight shape".into(),
                ))
            }
            _ => {}
        }
        let shape = ShapeFunction { kind, role };
        shape.validate()?;
        Ok(shape)
    }

    pub fn linear_probability(delta: T, c: T) -> Result<Self> {
        Self::new(ShapeKind::LinearProbability { delta, c }, Role::Probability)
    }

    pub fn linear_weight(rho: T) -> Result<Self> {
        Self::new(ShapeKind::LinearWeight { rho }, Role::Weight)
    }

    pub fn constant(v: T, role: Role) -> Result<Self> {
        Self::new(ShapeKind::Constant { v }, role)
    }

    pub fn piecewise_linear(points: &[(T, T)], role: Role) -> Result<Self> {
        let (breakpoints, values) = points.iter().copied().unzip();
        Self::new(
            ShapeKind::PiecewiseLinear {
                breakpoints,
                values,
            },
            role,
        )
    }

    pub fn kind(&self) -> &ShapeKind<T> {
        &self.kind
    }

    pub fn role(&self) -> Role {
        self.role
    }

    fn validate(&self) -> Result<()> {
        // affine between probes, so endpoints and both sides of every jump suffice
        let vals: Vec<T> = match &self.kind {
            ShapeKind::PiecewiseLinear { values, .. } => {
                let mut v = vec![self.eval(T::zero())];
                v.extend(values.iter().copied());
                v.push(self.eval(T::one()));
                v
            }
            _ => vec![self.eval(T::zero()), self.eval(T::one())],
        };
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("non-finite shape value".into()));
        }
        let tol = T::lit(1e-12);
        match self.role {
            Role::Probability => {
                if vals.iter().any(|&v| v < -tol || v > T::one() + tol) {
                    return Err(Error::InvalidShape(format!(
                        "probability shape {} leaves [0,1]",
                        self
                    )));
                }
                if vals.windows(2).any(|w| w[1] > w[0] + tol) {
                    return Err(Error::InvalidShape(format!(
                        "probability shape {} must be non-increasing",
                        self
                    )));
                }
            }
            Role::Weight => {
                if vals.iter().any(|&v| !(v > T::zero())) {
                    return Err(Error::InvalidShape(format!(
                        "weight shape {} must be positive",
                        self
                    )));
                }
                if vals.windows(2).any(|w| w[1] < w[0] - tol) {
                    return Err(Error::InvalidShape(format!(
                        "weight shape {} must be non-decreasing",
                        self
                    )));
                }
            }
        }
        Ok(())
    }

    /// Value at u. Linear families extend naturally outside [0, 1]; pwl is held constant.
    pub fn eval(&self, u: T) -> T {
        match &self.kind {
            ShapeKind::LinearProbability { delta, c } => *delta - *c * (u - T::lit(0.5)),
            ShapeKind::LinearWeight { rho } => T::one() + *rho * u,
            ShapeKind::Constant { v } => *v,
            ShapeKind::PiecewiseLinear {
                breakpoints,
                values,
            } => {
                let n = breakpoints.len();
                if u < breakpoints[0] {
                    return values[0];
                }
                // last index with breakpoint <= u (right-continuous at jumps)
                let i = breakpoints.partition_point(|&b| b <= u) - 1;
                if i + 1 >= n {
                    return values[n - 1];
                }
                let (b0, b1) = (breakpoints[i], breakpoints[i + 1]);
                let t = (u - b0) / (b1 - b0);
                values[i] + t * (values[i + 1] - values[i])
            }
        }
    }

    /// Interior points where the shape is not smooth.
    pub fn breakpoints(&self) -> Vec<T> {
        match &self.kind {
            ShapeKind::PiecewiseLinear { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        }
    }

    // affine pieces (lo, hi, value at lo, slope) covering [a, b]
    fn pieces(&self, a: T, b: T) -> Vec<(T, T, T, T)> {
        let mut edges = vec![a];
        edges.extend(self.breakpoints().into_iter().filter(|&x| x > a && x < b));
        edges.push(b);
        edges.dedup();
        edges
            .windows(2)
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let mid = (lo + hi) / T::lit(2.0);
                let slope = match &self.kind {
                    ShapeKind::LinearProbability { c, .. } => -*c,
                    ShapeKind::LinearWeight { rho } => *rho,
                    ShapeKind::Constant { .. } => T::zero(),
                    ShapeKind::PiecewiseLinear {
                        breakpoints,
                        values,
                    } => {
                        let i = breakpoints.partition_point(|&x| x <= mid);
                        if i == 0 || i >= breakpoints.len() {
                            T::zero()
                        } else {
                            (values[i] - values[i - 1]) / (breakpoints[i] - breakpoints[i - 1])
                        }
                    }
                };
                let v_lo = self.eval(mid) - slope * (mid - lo);
                (lo, hi, v_lo, slope)
            })
            .collect()
    }

    /// ∫_a^b f, exact for every family.
    pub fn integral(&self, a: T, b: T) -> T {
        let half = T::lit(0.5);
        self.pieces(a, b)
            .into_iter()
            .map(|(lo, hi, v, s)| {
                let len = hi - lo;
                len * (v + half * s * len)
            })
            .sum()
    }

    /// ∫_a^b f², exact for every family.
    pub fn integral_sq(&self, a: T, b: T) -> T {
        let third = T::one() / T::lit(3.0);
        self.pieces(a, b)
            .into_iter()
            .map(|(lo, hi, v, s)| {
                let len = hi - lo;
                let v1 = v + s * len;
                len * third * (v * v + v * v1 + v1 * v1)
            })
            .sum()
    }

    /// Parses the CLI grammar, e.g. `linear-prob:delta=0.185,c=0.36` or
    /// `pwl:0=1.0,0.5=1.2,1=2.0`.
    pub fn parse(spec: &str, role: Role) -> Result<Self> {
        let err = |reason: &str| Error::Parse {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (name, rest) = spec.split_once(':').ok_or_else(|| err("missing `:`"))?;
        let mut pairs = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| err("expected key=value"))?;
            let v: f64 = v.trim().parse().map_err(|_| err("bad number"))?;
            pairs.push((k.trim().to_string(), T::lit(v)));
        }
        let get = |key: &str| -> Result<T> {
            let mut hits = pairs.iter().filter(|(k, _)| k == key);
            let v = hits
                .next()
                .ok_or_else(|| err(&format!("missing `{key}`")))?
                .1;
            if hits.next().is_some() {
                return Err(err(&format!("duplicate `{key}`")));
            }
            Ok(v)
        };
        let expect_keys = |keys: &[&str]| -> Result<()> {
            match pairs.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(err(&format!("unknown key `{k}`"))),
                None => Ok(()),
            }
        };
        let kind = match name.trim() {
            "linear-prob" => {
                expect_keys(&["delta", "c"])?;
                ShapeKind::LinearProbability {
                    delta: get("delta")?,
                    c: get("c")?,
                }
            }
            "linear-weight" => {
                expect_keys(&["rho"])?;
                ShapeKind::LinearWeight { rho: get("rho")? }
            }
            "const" => {
                expect_keys(&["v"])?;
                ShapeKind::Constant { v: get("v")? }
            }
            "pwl" => {
                let mut pts = Vec::new();
                for (k, v) in &pairs {
                    let pos: f64 = k.parse().map_err(|_| err("pwl keys must be positions"))?;
                    pts.push((T::lit(pos), *v));
                }
                let (breakpoints, values) = pts.into_iter().unzip();
                ShapeKind::PiecewiseLinear {
                    breakpoints,
                    values,
                }
            }
            other => return Err(err(&format!("unknown shape kind `{other}`"))),
        };
        Self::new(kind, role)
    }
}

impl<T: Real> fmt::Display for ShapeFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ShapeKind::LinearProbability { delta, c } => {
                write!(f, "linear-prob:delta={},c={}", delta, c)
            }
            ShapeKind::LinearWeight { rho } => write!(f, "linear-weight:rho={}", rho),
            ShapeKind::Constant { v } => write!(f, "const:v={}", v),
            ShapeKind::PiecewiseLinear {
                breakpoints,
                values,
            } => {
                write!(f, "pwl:")?;
                for (i, (b, v)) in breakpoints.iter().zip(values).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}={}", b, v)?;
                }
                Ok(())
            }
        }
    }
}

/// (c0, c1, c2) = (∫_δ^τ f, ∫_0^δ f², ∫_0^τ f²).
pub fn moment_integrals<T: Real>(f: &ShapeFunction<T>, delta: T, tau: T) -> Result<(T, T, T)> {
    if !(T::zero() <= delta && delta <= tau && tau <= T::one()) {
        return Err(Error::Domain(format!(
            "moment_integrals needs 0 <= delta <= tau <= 1, got {delta}, {tau}"
        )));
    }
    Ok((
        f.integral(delta, tau),
        f.integral_sq(T::zero(), delta),
        f.integral_sq(T::zero(), tau),
    ))
}

/// Same as [`moment_integrals`] but by adaptive Simpson (tolerance 1e-10, depth 40),
/// with panels split at breakpoints.
pub fn moment_integrals_adaptive<T: Real>(
    f: &ShapeFunction<T>,
    delta: T,
    tau: T,
) -> Result<(T, T, T)> {
    if !(T::zero() <= delta && delta <= tau && tau <= T::one()) {
        return Err(Error::Domain(
            "moment_integrals needs 0 <= delta <= tau <= 1".into(),
        ));
    }
    let br = f.breakpoints();
    let tol = T::lit(1e-10);
    let c0 = integrate_split(&|u| f.eval(u), delta, tau, &br, tol);
    let sq = |u: T| {
        let v = f.eval(u);
        v * v
    };
    let c1 = integrate_split(&sq, T::zero(), delta, &br, tol);
    let c2 = integrate_split(&sq, T::zero(), tau, &br, tol);
    Ok((c0, c1, c2))
}

/// r equal subintervals of [start, 1] with left-endpoint samples of f.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalGrid<T> {
    pub start: T,
    pub r: usize,
    pub width: T,
    pub samples: Vec<T>,
}

impl<T: Real> IntervalGrid<T> {
    pub fn new(f: &ShapeFunction<T>, start: T, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Domain("r must be at least 1".into()));
        }
        if !(start >= T::zero() && start < T::one()) {
            return Err(Error::Domain(format!("grid start {start} outside [0,1)")));
        }
        let width = (T::one() - start) / T::from_usize_lossy(r);
        let samples = (0..r)
            .map(|i| f.eval(start + width * T::from_usize_lossy(i)))
            .collect();
        Ok(IntervalGrid {
            start,
            r,
            width,
            samples,
        })
    }

    /// Left edge of interval i.
    pub fn edge(&self, i: usize) -> T {
        self.start + self.width * T::from_usize_lossy(i)
    }
}

/// Per-interval fractions of face vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceProfile<T> {
    pub g: Vec<T>,
    pub delta: T,
}

impl<T: Real> FaceProfile<T> {
    pub fn new(g: Vec<T>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::Domain("face profile needs r >= 1".into()));
        }
        if g.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
            return Err(Error::Domain("face fractions must lie in [0,1]".into()));
        }
        let delta = g.iter().copied().sum::<T>() / T::from_usize_lossy(g.len());
        Ok(FaceProfile { g, delta })
    }

    pub fn r(&self) -> usize {
        self.g.len()
    }
}

/// p̄_i = r ∫ p over interval i.
pub fn interval_averages<T: Real>(p: &ShapeFunction<T>, r: usize) -> Result<Vec<T>> {
    if p.role() != Role::Probability {
        return Err(Error::InvalidShape(
            "interval_averages needs a probability shape".into(),
        ));
    }
    if r == 0 {
        return Err(Error::Domain("r must be at least 1".into()));
    }
    let rr = T::from_usize_lossy(r);
    Ok((0..r)
        .map(|i| {
            let a = T::from_usize_lossy(i) / rr;
            let b = T::from_usize_lossy(i + 1) / rr;
            (rr * p.integral(a, b)).max(T::zero()).min(T::one())
        })
        .collect())
}

/// The typical face: g_i = p̄_i.
pub fn typical_face<T: Real>(p: &ShapeFunction<T>, r: usize) -> Result<FaceProfile<T>> {
    FaceProfile::new(interval_averages(p, r)?)
}

/// D(q ‖ p) between Bernoulli laws, natural log.
pub fn bernoulli_kl<T: Real>(q: T, p: T) -> Result<T> {
    if !(q >= T::zero() && q <= T::one()) || !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Domain(format!(
            "bernoulli_kl arguments out of [0,1]: q={q}, p={p}"
        )));
    }
    if p == T::zero() || p == T::one() {
        return if q == p {
            Ok(T::zero())
        } else {
            Err(Error::Domain(format!(
                "bernoulli_kl undefined for p={p}, q={q}"
            )))
        };
    }
    let one = T::one();
    let mut d = T::zero();
    if q > T::zero() {
        d = d + q * (q / p).ln();
    }
    if q < one {
        d = d + (one - q) * ((one - q) / (one - p)).ln();
    }
    Ok(d.max(T::zero()))
}

/// (1/r) Σ D(g_i ‖ p̄_i).
pub fn typicality_divergence<T: Real>(g: &FaceProfile<T>, pbar: &[T]) -> Result<T> {
    if g.g.len() != pbar.len() {
        return Err(Error::Domain("profile lengths differ".into()));
    }
    let mut s = T::zero();
    for (&gi, &pi) in g.g.iter().zip(pbar) {
        s = s + bernoulli_kl(gi, pi)?;
    }
    Ok(s / T::from_usize_lossy(pbar.len()))
}

/// ∫_a^b h(f(u)) du by adaptive Simpson split at the shape breakpoints.
pub fn integrate_composed<T: Real, H: Fn(T) -> T>(
    f: &ShapeFunction<T>,
    a: T,
    b: T,
    h: H,
    tol: T,
) -> T {
    let g = |u: T| h(f.eval(u));
    if f.breakpoints().is_empty() {
        adaptive_simpson(&g, a, b, tol, 40)
    } else {
        integrate_split(&g, a, b, &f.breakpoints(), tol)
    }
}
