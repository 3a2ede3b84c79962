//! Weighted ℓ1 minimization as a linear program, solved by a Mehrotra
//! predictor–corrector interior-point method on dense normal equations.
//!
//! min Σ w_i (u_i + v_i)  s.t.  A(u − v) = y,  u, v ≥ 0.

use crate::real::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has the wrong length");
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * yi;
            }
        }
        out
    }

    /// Columns selected by `idx`, as a new matrix.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (j, &c) in idx.iter().enumerate() {
                m[(i, j)] = self[(i, c)];
            }
        }
        m
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// In-place Cholesky factor (lower). Returns false if a pivot is not positive.
pub(crate) fn cholesky<T: Real>(m: &mut Matrix<T>) -> bool {
    let n = m.rows;
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d = d - m[(j, k)] * m[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        m[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s = s - m[(i, k)] * m[(j, k)];
            }
            m[(i, j)] = s / d;
        }
    }
    true
}

pub(crate) fn cholesky_solve<T: Real>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows;
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s = s - l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub minimizer: Vec<T>,
    pub objective: T,
    pub dual_objective: T,
    /// ‖Ax − y‖₂
    pub residual: T,
    pub gap: T,
    /// max_i u_i s_i over all slack pairs at termination
    pub complementarity: T,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

// A diag(d) Aᵀ
fn normal_matrix<T: Real>(a: &Matrix<T>, d: &[T]) -> Matrix<T> {
    let m = a.rows();
    let mut out = Matrix::zeros(m, m);
    let mut scaled = vec![T::zero(); a.cols()];
    for i in 0..m {
        for ((s, &x), &di) in scaled.iter_mut().zip(a.row(i)).zip(d) {
            *s = x * di;
        }
        for j in 0..=i {
            let v = dot(&scaled, a.row(j));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn factor_with_fallback<T: Real>(mut m: Matrix<T>) -> Option<Matrix<T>> {
    let backup = m.clone();
    if cholesky(&mut m) {
        return Some(m);
    }
    let n = backup.rows();
    let scale = (0..n)
        .map(|i| backup[(i, i)].abs())
        .fold(T::zero(), |a, b| a.max(b));
    let mut m = backup;
    for i in 0..n {
        m[(i, i)] = m[(i, i)] + scale * T::lit(1e-13);
    }
    if cholesky(&mut m) {
        Some(m)
    } else {
        None
    }
}

fn max_step<T: Real>(z: &[T], dz: &[T]) -> T {
    z.iter()
        .zip(dz)
        .filter(|(_, &d)| d < T::zero())
        .fold(T::one(), |a, (&zi, &d)| a.min(-zi / d))
}

struct Newton<'a, T> {
    a: &'a Matrix<T>,
    chol: &'a Matrix<T>,
    rp: &'a [T],
    rdu: &'a [T],
    rdv: &'a [T],
    u: &'a [T],
    v: &'a [T],
    su: &'a [T],
    sv: &'a [T],
    du: &'a [T],
    dv: &'a [T],
}

struct Direction<T> {
    dl: Vec<T>,
    du: Vec<T>,
    dv: Vec<T>,
    dsu: Vec<T>,
    dsv: Vec<T>,
}

impl<T: Real> Newton<'_, T> {
    // B Δz = rp, BᵀΔλ + Δs = rd, S Δz + Z Δs = rc with B = [A, −A]:
    // Δz = S⁻¹rc − D(rd − BᵀΔλ), so (B D Bᵀ) Δλ = rp − B(S⁻¹rc − D rd)
    fn direction(&self, rcu: &[T], rcv: &[T]) -> Direction<T> {
        let n = self.u.len();
        let diff: Vec<T> = (0..n)
            .map(|i| {
                (rcu[i] / self.su[i] - self.du[i] * self.rdu[i])
                    - (rcv[i] / self.sv[i] - self.dv[i] * self.rdv[i])
            })
            .collect();
        let a_diff = self.a.mul_vec(&diff);
        let rhs: Vec<T> = self
            .rp
            .iter()
            .zip(&a_diff)
            .map(|(&r, &ad)| r - ad)
            .collect();
        let dl = cholesky_solve(self.chol, &rhs);
        let atdl = self.a.tr_mul_vec(&dl);
        let dsu: Vec<T> = (0..n).map(|i| self.rdu[i] - atdl[i]).collect();
        let dsv: Vec<T> = (0..n).map(|i| self.rdv[i] + atdl[i]).collect();
        let du = (0..n)
            .map(|i| (rcu[i] - self.u[i] * dsu[i]) / self.su[i])
            .collect();
        let dv = (0..n)
            .map(|i| (rcv[i] - self.v[i] * dsv[i]) / self.sv[i])
            .collect();
        Direction {
            dl,
            du,
            dv,
            dsu,
            dsv,
        }
    }
}

/// Solves min Σ w_i |x_i| s.t. Ax = y.
pub fn solve_weighted_l1<T: Real>(
    a: &Matrix<T>,
    y: &[T],
    w: &[T],
    opts: &SolverOptions,
) -> SolveReport<T> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(y.len(), m, "y has the wrong length");
    assert_eq!(w.len(), n, "w has the wrong length");
    let fail = |iterations: usize| SolveReport {
        minimizer: vec![T::zero(); n],
        objective: T::nan(),
        dual_objective: T::nan(),
        residual: T::nan(),
        gap: T::nan(),
        complementarity: T::nan(),
        iterations,
        status: SolveStatus::NumericalFailure,
    };
    if w.iter().any(|&wi| !(wi > T::zero())) {
        return fail(0);
    }
    let two = T::lit(2.0);
    let tol = T::lit(opts.tol);
    let ynorm = norm2(y);
    let wnorm = norm2(w) * two.sqrt();
    if ynorm == T::zero() {
        // x = 0 is the unique minimizer and the starting point below degenerates
        return SolveReport {
            minimizer: vec![T::zero(); n],
            objective: T::zero(),
            dual_objective: T::zero(),
            residual: T::zero(),
            gap: T::zero(),
            complementarity: T::zero(),
            iterations: 0,
            status: SolveStatus::Optimal,
        };
    }

    // Mehrotra's starting point. With B = [A, −A], B Bᵀ = 2AAᵀ.
    let aat = match factor_with_fallback(normal_matrix(a, &vec![T::one(); n])) {
        Some(l) => l,
        None => return fail(0),
    };
    let t = cholesky_solve(&aat, y);
    let at_t = a.tr_mul_vec(&t);
    let mut u: Vec<T> = at_t.iter().map(|&v| v / two).collect();
    let mut v: Vec<T> = at_t.iter().map(|&v| -v / two).collect();
    let mut lam = vec![T::zero(); m];
    let mut su = w.to_vec();
    let mut sv = w.to_vec();
    let shift = |xs: &[T], ys: &[T]| -> T {
        let lo = xs.iter().chain(ys).fold(T::infinity(), |a, &b| a.min(b));
        (T::lit(-1.5) * lo).max(T::zero())
    };
    let dp = shift(&u, &v);
    let ds = shift(&su, &sv);
    u.iter_mut().chain(v.iter_mut()).for_each(|x| *x = *x + dp);
    su.iter_mut()
        .chain(sv.iter_mut())
        .for_each(|x| *x = *x + ds);
    let xs: T = dot(&u, &su) + dot(&v, &sv);
    let sum_x: T = u.iter().chain(&v).copied().sum();
    let sum_s: T = su.iter().chain(&sv).copied().sum();
    let half = T::lit(0.5);
    let (ex, es) = (half * xs / sum_s, half * xs / sum_x);
    u.iter_mut()
        .chain(v.iter_mut())
        .for_each(|x| *x = *x + ex + T::lit(1e-12));
    su.iter_mut()
        .chain(sv.iter_mut())
        .for_each(|x| *x = *x + es + T::lit(1e-12));

    let nn = T::from_usize_lossy(2 * n);
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIterations;
    while iterations < opts.max_iter {
        let x: Vec<T> = u.iter().zip(&v).map(|(&p, &q)| p - q).collect();
        let ax = a.mul_vec(&x);
        let rp: Vec<T> = y.iter().zip(&ax).map(|(&yi, &v)| yi - v).collect();
        let atl = a.tr_mul_vec(&lam);
        // dual residuals for the u and v blocks: w ∓ Aᵀλ − s
        let rdu: Vec<T> = (0..n).map(|i| w[i] - atl[i] - su[i]).collect();
        let rdv: Vec<T> = (0..n).map(|i| w[i] + atl[i] - sv[i]).collect();
        let mu = (dot(&u, &su) + dot(&v, &sv)) / nn;
        let pobj = dot(w, &u) + dot(w, &v);
        let dobj = dot(y, &lam);
        let rd_norm = (dot(&rdu, &rdu) + dot(&rdv, &rdv)).sqrt();
        let gap = (pobj - dobj).abs() / (T::one() + pobj.abs());
        if norm2(&rp) <= tol * (T::one() + ynorm)
            && rd_norm <= tol * (T::one() + wnorm)
            && gap <= tol
        {
            status = SolveStatus::Optimal;
            break;
        }
        iterations += 1;

        let du: Vec<T> = u.iter().zip(&su).map(|(&x, &s)| x / s).collect();
        let dv: Vec<T> = v.iter().zip(&sv).map(|(&x, &s)| x / s).collect();
        let dsum: Vec<T> = du.iter().zip(&dv).map(|(&p, &q)| p + q).collect();
        let chol = match factor_with_fallback(normal_matrix(a, &dsum)) {
            Some(l) => l,
            None => return fail(iterations),
        };

        let rcu: Vec<T> = (0..n).map(|i| -u[i] * su[i]).collect();
        let rcv: Vec<T> = (0..n).map(|i| -v[i] * sv[i]).collect();
        let ctx = Newton {
            a,
            chol: &chol,
            rp: &rp,
            rdu: &rdu,
            rdv: &rdv,
            u: &u,
            v: &v,
            su: &su,
            sv: &sv,
            du: &du,
            dv: &dv,
        };
        let aff = ctx.direction(&rcu, &rcv);
        let (dir_u, dir_v, dir_su, dir_sv) = (&aff.du, &aff.dv, &aff.dsu, &aff.dsv);
        let ap = max_step(&u, dir_u).min(max_step(&v, dir_v));
        let ad = max_step(&su, dir_su).min(max_step(&sv, dir_sv));
        let mut mu_aff = T::zero();
        for i in 0..n {
            mu_aff = mu_aff
                + (u[i] + ap * dir_u[i]) * (su[i] + ad * dir_su[i])
                + (v[i] + ap * dir_v[i]) * (sv[i] + ad * dir_sv[i]);
        }
        mu_aff = mu_aff / nn;
        let sigma = (mu_aff / mu).powi(3).min(T::one());
        let target = sigma * mu;
        let rcu: Vec<T> = (0..n)
            .map(|i| -u[i] * su[i] - dir_u[i] * dir_su[i] + target)
            .collect();
        let rcv: Vec<T> = (0..n)
            .map(|i| -v[i] * sv[i] - dir_v[i] * dir_sv[i] + target)
            .collect();
        let cor = ctx.direction(&rcu, &rcv);
        let (dir_u, dir_v, dir_su, dir_sv) = (&cor.du, &cor.dv, &cor.dsu, &cor.dsv);
        let dl = cor.dl;

        let eta = T::lit(0.995).max(T::one() - mu);
        let ap = (eta * max_step(&u, dir_u).min(max_step(&v, dir_v))).min(T::one());
        let ad = (eta * max_step(&su, dir_su).min(max_step(&sv, dir_sv))).min(T::one());
        for i in 0..n {
            u[i] = u[i] + ap * dir_u[i];
            v[i] = v[i] + ap * dir_v[i];
            su[i] = su[i] + ad * dir_su[i];
            sv[i] = sv[i] + ad * dir_sv[i];
        }
        for (l, d) in lam.iter_mut().zip(&dl) {
            *l = *l + ad * *d;
        }
        if u.iter()
            .chain(&v)
            .chain(&su)
            .chain(&sv)
            .any(|z| !z.is_finite())
        {
            return fail(iterations);
        }
    }
    let x: Vec<T> = u.iter().zip(&v).map(|(&p, &q)| p - q).collect();
    let ax = a.mul_vec(&x);
    let residual = norm2(&y.iter().zip(&ax).map(|(&p, &q)| p - q).collect::<Vec<_>>());
    let objective = dot(w, &x.iter().map(|z| z.abs()).collect::<Vec<_>>());
    let pobj = dot(w, &u) + dot(w, &v);
    let dual_objective = dot(y, &lam);
    let complementarity = (0..n)
        .map(|i| (u[i] * su[i]).max(v[i] * sv[i]))
        .fold(T::zero(), |a, b| a.max(b));
    SolveReport {
        minimizer: x,
        objective,
        dual_objective,
        residual,
        gap: (pobj - dual_objective).abs() / (T::one() + pobj.abs()),
        complementarity,
        iterations,
        status,
    }
}
