//! Finite-n angle oracles for faces of the weighted cross-polytope.
//!
//! The internal angle is a Monte Carlo estimate under an exponentially tilted
//! sampling law; the external angle is a one-dimensional Gauss–Legendre integral
//! evaluated in log space.

use rand::distr::OpenClosed01;
use rand::Rng;

use crate::error::Result;
use crate::quadrature::{brent_root, composite_rule};
use crate::specfn::{dlog_erf, half_normal_cgf, half_normal_cgf_deriv, log_erf_pos, log_two_phi};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InternalAngleEstimate {
    pub log_beta: f64,
    /// Standard error of the estimate relative to its value.
    pub rel_se: f64,
    pub tilt: f64,
}

impl InternalAngleEstimate {
    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }
}

// z ≥ a with upper-tail mass Q(z) = u·Q(a); Q(z) = ½ (2Φ(−z))
fn truncated_normal_tail(a: f64, u: f64) -> f64 {
    let log_q = |z: f64| log_two_phi(-z) - std::f64::consts::LN_2;
    // d/dz log Q(z) = −(φ/Q)(z) = −(λ′(−z) + z)
    let dlog_q = |z: f64| -(half_normal_cgf_deriv(-z) + z);
    let target = u.ln() + log_q(a);
    let (mut lo, mut hi) = (a, a + 1.0);
    while log_q(hi) > target {
        lo = hi;
        hi = a + 2.0 * (hi - a);
    }
    let mut z = lo;
    for _ in 0..100 {
        let v = log_q(z) - target;
        if v.abs() < 1e-14 {
            break;
        }
        if v > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let step = z - v / dlog_q(z);
        z = if step >= lo && step <= hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-13 * (1.0 + z.abs()) {
            break;
        }
    }
    z
}

/// Monte Carlo estimate of β(F, G) where F carries the first `k` weights and G all of them.
///
/// β = 2^{−(l−k)} √(σ_l/σ_k) E[e^{−S²}], with S a sum of independent half-normals of
/// variances w_p²/(2σ_k) over the l − k extra vertices.
pub fn internal_angle_oracle<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    samples: usize,
    rng: &mut R,
) -> Result<InternalAngleEstimate> {
    let l = weights.len();
    if k == 0 || k > l || weights.iter().any(|&w| !(w > 0.0)) || samples == 0 {
        return Err(crate::Error::Domain(
            "internal oracle needs 1 <= k <= l, positive weights, samples >= 1".into(),
        ));
    }
    if k == l {
        return Ok(InternalAngleEstimate {
            log_beta: 0.0,
            rel_se: 0.0,
            tilt: 0.0,
        });
    }
    let sig_k: f64 = weights[..k].iter().map(|w| w * w).sum();
    let sig_l: f64 = weights.iter().map(|w| w * w).sum();
    let sd: Vec<f64> = weights[k..]
        .iter()
        .map(|w| w / (2.0 * sig_k).sqrt())
        .collect();

    // tilt θ where the tilted mean of S satisfies E_θ[S] = −θ/2
    let kprime = |t: f64| {
        sd.iter()
            .map(|&v| v * half_normal_cgf_deriv(t * v))
            .sum::<f64>()
            + t / 2.0
    };
    let mut lo = -1.0;
    while kprime(lo) > 0.0 {
        lo *= 2.0;
    }
    let theta = brent_root(kprime, lo, 0.0, 1e-12, 200)?;
    let cgf: f64 = sd.iter().map(|&v| half_normal_cgf(theta * v)).sum();

    let mut expo = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut s = 0.0;
        for &v in &sd {
            let u: f64 = rng.sample(OpenClosed01);
            // Y = v·T, T ~ N(θv, 1) on [0, ∞)
            let m = theta * v;
            let z = truncated_normal_tail(-m, u);
            s += v * (m + z);
        }
        expo.push(-s * s - theta * s);
    }
    let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = samples as f64;
    let scaled: Vec<f64> = expo.iter().map(|e| (e - top).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n;
    let var = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let log_mean = top + mean.ln();
    let extra = (l - k) as f64;
    Ok(InternalAngleEstimate {
        log_beta: -extra * std::f64::consts::LN_2 + 0.5 * (sig_l / sig_k).ln() + cgf + log_mean,
        rel_se: (var / n).sqrt() / mean,
        tilt: theta,
    })
}

/// log γ(G, P) for the face G on the first `l` of `weights`:
/// γ = √(σ_l/π) ∫_0^∞ e^{−σ_l x²} Π_{i>l} erf(w_i x) dx.
pub fn external_angle_oracle_log(weights: &[f64], l: usize, quad_points: usize) -> Result<f64> {
    let n = weights.len();
    if l == 0 || l > n || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(crate::Error::Domain(
            "external oracle needs 1 <= l <= n and positive weights".into(),
        ));
    }
    if l == n {
        return Ok(0.0);
    }
    let sig: f64 = weights[..l].iter().map(|w| w * w).sum();
    let rest = &weights[l..];
    let log_f = |x: f64| -sig * x * x + rest.iter().map(|&w| log_erf_pos(w * x)).sum::<f64>();
    let slope = |x: f64| -2.0 * sig * x + rest.iter().map(|&w| w * dlog_erf(w * x)).sum::<f64>();
    let mut hi = 1.0;
    while slope(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while slope(lo) < 0.0 {
        lo /= 2.0;
    }
    let peak = brent_root(slope, lo, hi, 1e-14, 300)?;
    let top = log_f(peak);
    // tail below 1e-14 of the peak, plus margin for the width of the domain
    let drop = 14.0 * std::f64::consts::LN_10 + 10.0;
    let mut right = peak * 2.0 + 1.0;
    while log_f(right) > top - drop {
        right *= 2.0;
    }
    let mut left = 0.0;
    if log_f(peak / 2.0) < top - drop {
        let (mut a, mut b) = (0.0, peak);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if log_f(m) < top - drop {
                a = m;
            } else {
                b = m;
            }
        }
        left = a;
    }
    let order = 16;
    let panels = (quad_points / order).max(1);
    let (xs, ws) = composite_rule(left, right, &[peak], panels, order);
    let sum: f64 = xs
        .iter()
        .zip(&ws)
        .map(|(&x, &w)| {
            if x > 0.0 {
                w * (log_f(x) - top).exp()
            } else {
                0.0
            }
        })
        .sum();
    Ok(0.5 * (sig / std::f64::consts::PI).ln() + top + sum.ln())
}

/// γ(G, P); see [`external_angle_oracle_log`].
pub fn external_angle_oracle(weights: &[f64], l: usize, quad_points: usize) -> Result<f64> {
    external_angle_oracle_log(weights, l, quad_points).map(f64::exp)
}
