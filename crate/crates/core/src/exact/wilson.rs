use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ExactError, Result};
use crate::params::BoundaryParams;

/// Which approximate eigenfunction to build: both ends open, or the left end closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WilsonVariant {
    TwoSided,
    OneSided,
}

/// Inputs of the lower bound for an affine approximate eigenfunction `F` of the symmetric
/// process: `|(-L - lambda) F| <= c`, jump rate times squared jumps of `F` at most `r`, and
/// `f_inf = max |F|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonCertificate {
    pub variant: WilsonVariant,
    pub n: usize,
    pub lambda: f64,
    pub c: f64,
    pub r: f64,
    pub f_inf: f64,
    /// Effective length: `N + C - D` (two-sided) or `N - D` (one-sided).
    pub length: f64,
    /// Residual coefficients at the boundary-adjacent positions.
    pub boundary_coefficients: Vec<f64>,
    /// Largest residual coefficient at interior positions, evaluated numerically; zero up to
    /// rounding because the profile is an exact eigenvector of the bulk Laplacian there.
    pub bulk_residual_max: f64,
}

impl WilsonCertificate {
    pub fn is_valid(&self) -> bool {
        self.lambda > 0.0 && self.c >= 0.0 && self.c <= self.lambda
    }
}

/// `1 - cos(theta)` without cancellation.
fn one_minus_cos(theta: f64) -> f64 {
    2.0 * (0.5 * theta).sin().powi(2)
}

/// `sum_{k>=1} (-1)^k x^(2k+1)/(2k+1)! * w(2k+1)` for small `x`.
fn odd_series(x: f64, w: impl Fn(i32) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x; // x^(2k+1)/(2k+1)!
    for k in 1..60 {
        let m = 2 * k + 1;
        pow *= -x * x / ((m - 1) as f64 * m as f64);
        let term = pow * w(m);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `2s sin(a) - cos(a) sin(2 s a)`, which is `O(a^3)`.
fn edge_term(s: f64, a: f64) -> f64 {
    if a * (2.0 * s + 1.0) < 0.5 {
        odd_series(a, |m| 2.0 * s - 0.5 * (2.0 * s + 1.0).powi(m) - 0.5 * (2.0 * s - 1.0).powi(m))
    } else {
        2.0 * s * a.sin() - a.cos() * (2.0 * s * a).sin()
    }
}

/// `t sin(x/t) - sin(x)`, which is `O(x^3)`.
fn ratio_term(t: f64, x: f64) -> f64 {
    if x * (1.0 + 1.0 / t) < 0.5 {
        odd_series(x, |m| t.powi(1 - m) - 1.0)
    } else {
        t * (x / t).sin() - x.sin()
    }
}

/// Approximate eigenfunction of the symmetric process on `n` sites and its certificate. The
/// residual is affine in the configuration, so `c` is the larger of the summed positive and
/// summed negative coefficients.
pub fn wilson_residual(params: &BoundaryParams, n: usize, variant: WilsonVariant) -> Result<WilsonCertificate> {
    if (params.p - 0.5).abs() > 1e-12 {
        return Err(ExactError::Regime(format!("needs p = 1/2, got {}", params.p)));
    }
    if n < 2 {
        return Err(ExactError::Regime("needs N >= 2".into()));
    }
    let s = params.alpha + params.gamma;
    let t = params.beta + params.delta;
    match variant {
        WilsonVariant::TwoSided => {
            if s <= 0.0 || t <= 0.0 {
                return Err(ExactError::Regime("two-sided needs both ends open".into()));
            }
            Ok(two_sided(params, n, s, t))
        }
        WilsonVariant::OneSided => {
            if s > 0.0 || t <= 0.0 {
                return Err(ExactError::Regime("one-sided needs the left end closed and the right end open".into()));
            }
            one_sided(params, n, t)
        }
    }
}

fn two_sided(params: &BoundaryParams, n: usize, s: f64, t: f64) -> WilsonCertificate {
    let c_left = 1.0 / (2.0 * s) - 0.5;
    let d_right = 0.5 - 1.0 / (2.0 * t);
    let m = n as f64 + c_left - d_right;
    let theta = PI / m;
    let lambda = one_minus_cos(theta);
    // phi[x - 1] for x = 1..=n.
    let phi: Vec<f64> = (1..=n).map(|x| ((x as f64 + c_left - 0.5) * theta).sin()).collect();

    // Coefficient of eta(x) in (-L - lambda) F with F = sum 2 phi(x) eta(x) + const.
    let bulk_residual_max =
        (1..n - 1).map(|i| (-(phi[i - 1] + phi[i + 1]) + 2.0 * phi[i] - 2.0 * lambda * phi[i]).abs()).fold(0.0, f64::max);
    // The site-1 coefficient is -phi(2) + (1 + 2s - 2 lambda) phi(1); with phi(1) = sin(theta/(2s))
    // it equals edge_term(s, theta/(2s)) - lambda sin(theta/(2s)). Site N mirrors it.
    let boundary = |rate: f64| {
        let a = theta / (2.0 * rate);
        edge_term(rate, a) - lambda * a.sin()
    };
    let coeffs = vec![boundary(s), boundary(t)];
    let c = residual_bound(&coeffs);

    let constant = -(2.0 * params.alpha * phi[0] + 2.0 * params.delta * phi[n - 1]) / lambda;
    let total: f64 = phi.iter().map(|p| 2.0 * p).sum();
    let f_inf = (constant + total).abs().max(constant.abs());

    let max_step = phi.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let increment = (2.0 * max_step).max(2.0 * phi[0].abs()).max(2.0 * phi[n - 1].abs());
    let rate = n as f64 - 1.0 + s + t;
    WilsonCertificate {
        variant: WilsonVariant::TwoSided,
        n,
        lambda,
        c,
        r: rate * increment * increment,
        f_inf,
        length: m,
        boundary_coefficients: coeffs,
        bulk_residual_max,
    }
}

/// Largest `|sum_i coeff_i v_i|` over `v` in `{0, 1}^k`.
fn residual_bound(coeffs: &[f64]) -> f64 {
    let pos: f64 = coeffs.iter().filter(|c| **c > 0.0).sum();
    let neg: f64 = coeffs.iter().filter(|c| **c < 0.0).sum();
    pos.abs().max(neg.abs())
}

fn one_sided(params: &BoundaryParams, n: usize, t: f64) -> Result<WilsonCertificate> {
    let d_right = 0.5 - 1.0 / (2.0 * t);
    let u = n as f64 - d_right;
    let theta = PI / (2.0 * u);
    let lambda = one_minus_cos(theta);
    if t <= lambda {
        return Err(ExactError::Regime(format!("boundary rate {t} below lambda {lambda}")));
    }
    // psi[x] for x = 0..=n, in terms of heights: F = sum_{x<N} 2 psi(x) h(x) + psi(N) h(N) + K.
    let mut psi: Vec<f64> = (0..=n).map(|x| (x as f64 * theta).sin()).collect();
    psi[n] = psi[n - 1] / (t - lambda);

    let bulk_residual_max =
        (1..n.saturating_sub(1)).map(|y| (-(psi[y - 1] + psi[y + 1]) + 2.0 * psi[y] - 2.0 * lambda * psi[y]).abs()).fold(0.0, f64::max);
    let top_coefficient = -psi[n - 1] + (t - lambda) * psi[n];
    // Coefficient of h(N-1): sin(N theta) - t psi(N). With sin(N theta) = cos(D theta) it is
    // [2 sin(theta/2) (t sin(theta/(2t)) - sin(theta/2)) + 2 lambda sin^2(D theta/2)] / (t - lambda).
    let half = 0.5 * theta;
    let r_coeff = (2.0 * half.sin() * ratio_term(t, half) + 2.0 * lambda * (d_right * half).sin().powi(2)) / (t - lambda);
    let coeffs = vec![r_coeff, top_coefficient];
    // h(N-1) ranges over [-(N-1), N-1]; the last coefficient vanishes by construction.
    let c = r_coeff.abs() * (n as f64 - 1.0);

    let constant = -psi[n] * (params.delta - params.beta) / lambda;
    let full: f64 = (1..n).map(|x| 2.0 * psi[x] * x as f64).sum::<f64>() + psi[n] * n as f64;
    let f_inf = (full + constant).abs().max((-full + constant).abs());
    Ok(WilsonCertificate {
        variant: WilsonVariant::OneSided,
        n,
        lambda,
        c,
        r: 4.0 * (n as f64 - 1.0 + t),
        f_inf,
        length: u,
        boundary_coefficients: coeffs,
        bulk_residual_max,
    })
}

/// Lower bound on `t_mix(1 - eps)`:
/// `ln(F)/lambda - ln(16 (3 c F + max(R, c)) / (lambda eps)) / (2 lambda)`.
pub fn wilson_lower_bound(cert: &WilsonCertificate, eps: f64) -> Result<f64> {
    if !cert.is_valid() {
        return Err(ExactError::InvalidCertificate { lambda: cert.lambda, c: cert.c });
    }
    let (l, c, f) = (cert.lambda, cert.c, cert.f_inf);
    let inner = 16.0 * (3.0 * c * f + cert.r.max(c)) / (l * eps);
    Ok(f.ln() / l - inner.ln() / (2.0 * l))
}
