//! Model parameters, the boundary quantities `a` and `b`, phase labels and
//! the closed-form constants attached to each phase.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used by every phase-boundary predicate.
pub const PHASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("jump probability p={0} outside [1/2, 1]")]
    BadBias(f64),
    #[error("boundary rate {name}={value} must be finite and nonnegative")]
    BadRate { name: &'static str, value: f64 },
    #[error("closed segment: all boundary rates are zero")]
    ClosedSegment,
    #[error("a undefined: alpha = 0")]
    AUndefined,
    #[error("b undefined: beta = 0")]
    BUndefined,
    #[error("flux formula inapplicable in phase {0:?}")]
    FluxInapplicable(Phase),
    #[error("requires p > 1/2, got {0}")]
    NeedsAsymmetry(f64),
    #[error("not in the reverse-bias phase ({0:?})")]
    NotReverseBias(Phase),
    #[error("conjectured constant blows up: b={b} <= max(a,1)={a_hat}")]
    BlowsUp { b: f64, a_hat: f64 },
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Bias and boundary rates. Left jumps happen at rate `1 - p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    LowDensity,
    HighDensity,
    MaxCurrent,
    TriplePoint,
    CoexistenceLine,
    OneBlockedEntry,
    ReverseBias,
    SymmetricBulk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDescriptor {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub phase: Phase,
}

fn check_rate(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::BadRate { name, value })
    }
}

impl BoundaryParams {
    pub fn new(p: f64, alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self, ParamError> {
        let params = Self { p, alpha, beta, gamma, delta };
        params.validate()?;
        Ok(params)
    }

    /// Same checks as [`BoundaryParams::new`] but allows every boundary rate to vanish.
    /// Used for bulk-only dynamics (line windows, conservation checks).
    pub fn closed(p: f64) -> Result<Self, ParamError> {
        let params = Self { p, alpha: 0.0, beta: 0.0, gamma: 0.0, delta: 0.0 };
        params.validate_bulk()?;
        Ok(params)
    }

    fn validate_bulk(&self) -> Result<(), ParamError> {
        if !(self.p.is_finite() && (0.5..=1.0).contains(&self.p)) {
            return Err(ParamError::BadBias(self.p));
        }
        check_rate("alpha", self.alpha)?;
        check_rate("beta", self.beta)?;
        check_rate("gamma", self.gamma)?;
        check_rate("delta", self.delta)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.validate_bulk()?;
        if self.alpha.max(self.beta).max(self.gamma).max(self.delta) == 0.0 {
            return Err(ParamError::ClosedSegment);
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn a(&self) -> Result<f64, ParamError> {
        compute_a(self)
    }

    pub fn b(&self) -> Result<f64, ParamError> {
        compute_b(self)
    }

    pub fn phase(&self) -> PhaseDescriptor {
        classify_phase(self)
    }

    /// Particle-hole swap composed with the reflection `x -> N+1-x`.
    pub fn particle_hole_mirror(&self) -> Self {
        Self { p: self.p, alpha: self.beta, beta: self.alpha, gamma: self.delta, delta: self.gamma }
    }

    /// Parse `key=value` lines. Blank lines and `#` comments are skipped; unknown keys are
    /// errors. Missing rates default to zero, a missing `p` is an error.
    pub fn from_kv(text: &str) -> Result<Self, ParamError> {
        let mut p = None;
        let mut rates = [0.0f64; 4];
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ParamError::Parse(format!("expected key=value, got `{line}`")))?;
            let value: f64 = value.trim().parse().map_err(|_| ParamError::Parse(format!("bad number in `{line}`")))?;
            match key.trim() {
                "p" => p = Some(value),
                "alpha" => rates[0] = value,
                "beta" => rates[1] = value,
                "gamma" => rates[2] = value,
                "delta" => rates[3] = value,
                other => return Err(ParamError::Parse(format!("unknown key `{other}`"))),
            }
        }
        let p = p.ok_or_else(|| ParamError::Parse("missing key `p`".into()))?;
        Self::new(p, rates[0], rates[1], rates[2], rates[3])
    }
}

impl FromStr for BoundaryParams {
    type Err = ParamError;

    /// Accepts the key=value format with `,` or newlines as separators.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_kv(&s.replace(',', "\n"))
    }
}

impl fmt::Display for BoundaryParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={},alpha={},beta={},gamma={},delta={}", self.p, self.alpha, self.beta, self.gamma, self.delta)
    }
}

/// Shared formula behind `a` (entry side) and `b` (exit side).
fn boundary_quantity(p: f64, rate_in: f64, rate_out: f64) -> f64 {
    let s = 2.0 * p - 1.0 - rate_in + rate_out;
    let disc = (s * s + 4.0 * rate_in * rate_out).sqrt();
    // s + disc cancels badly when s < 0; use the conjugate form there.
    let num = if s >= 0.0 { s + disc } else { 4.0 * rate_in * rate_out / (disc - s) };
    (num / (2.0 * rate_in)).max(0.0)
}

pub fn compute_a(params: &BoundaryParams) -> Result<f64, ParamError> {
    if params.alpha <= 0.0 {
        return Err(ParamError::AUndefined);
    }
    Ok(boundary_quantity(params.p, params.alpha, params.gamma))
}

pub fn compute_b(params: &BoundaryParams) -> Result<f64, ParamError> {
    if params.beta <= 0.0 {
        return Err(ParamError::BUndefined);
    }
    Ok(boundary_quantity(params.p, params.beta, params.delta))
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() < PHASE_TOL
}

pub fn classify_phase(params: &BoundaryParams) -> PhaseDescriptor {
    let a = compute_a(params).ok();
    let b = compute_b(params).ok();
    let phase = if close(params.p, 0.5) {
        Phase::SymmetricBulk
    } else if params.alpha.max(params.beta) == 0.0 {
        // Includes p = 1, where the chain is no longer ergodic.
        Phase::ReverseBias
    } else if params.alpha.min(params.beta) == 0.0 {
        Phase::OneBlockedEntry
    } else {
        let (a, b) = (a.unwrap_or(0.0), b.unwrap_or(0.0));
        if close(a, 1.0) && close(b, 1.0) {
            Phase::TriplePoint
        } else if close(a, b) && a > 1.0 {
            Phase::CoexistenceLine
        } else if a.max(b) <= 1.0 + PHASE_TOL {
            Phase::MaxCurrent
        } else if a > b {
            Phase::LowDensity
        } else {
            Phase::HighDensity
        }
    };
    PhaseDescriptor { a, b, phase }
}

/// Long-run particle flux through the segment.
pub fn theoretical_flux(phase: &PhaseDescriptor, p: f64) -> Result<f64, ParamError> {
    let drift = 2.0 * p - 1.0;
    let ratio = |x: f64| drift * x / ((1.0 + x) * (1.0 + x));
    match phase.phase {
        Phase::SymmetricBulk => Ok(0.0),
        Phase::ReverseBias | Phase::OneBlockedEntry => Err(ParamError::FluxInapplicable(phase.phase)),
        _ => {
            let a = phase.a.ok_or(ParamError::AUndefined)?;
            let b = phase.b.ok_or(ParamError::BUndefined)?;
            if a.max(b) <= 1.0 + PHASE_TOL {
                Ok(drift / 4.0)
            } else if a >= b {
                Ok(ratio(a))
            } else {
                Ok(ratio(b))
            }
        }
    }
}

/// Travel time per site of the shock in the one-blocked-entry phase.
pub fn cutoff_constant(b: f64, p: f64) -> Result<f64, ParamError> {
    if p <= 0.5 {
        return Err(ParamError::NeedsAsymmetry(p));
    }
    let m = b.max(1.0);
    Ok((m + 1.0) * (m + 1.0) / ((2.0 * p - 1.0) * m))
}

/// Exponential growth rate of the mixing time per site when no particle can enter
/// against the bias. Natural log.
pub fn reverse_bias_rate(params: &BoundaryParams) -> Result<f64, ParamError> {
    let phase = classify_phase(params).phase;
    if phase != Phase::ReverseBias {
        return Err(ParamError::NotReverseBias(phase));
    }
    let full = (params.p / (1.0 - params.p)).ln();
    if params.gamma > 0.0 && params.delta > 0.0 {
        Ok(full / 2.0)
    } else {
        Ok(full)
    }
}

/// Conjectural per-site mixing constant in the high density phase. Exploratory only.
pub fn conjectured_high_density_constant(a: f64, b: f64, p: f64) -> Result<f64, ParamError> {
    if p <= 0.5 {
        return Err(ParamError::NeedsAsymmetry(p));
    }
    let a_hat = a.max(1.0);
    if b <= a_hat {
        return Err(ParamError::BlowsUp { b, a_hat });
    }
    let poly = a_hat * a_hat * (2.0 * b - 1.0) + a_hat * (b - 3.0) + b;
    Ok((b + 1.0) * poly / ((b - a_hat) * (2.0 * p - 1.0)))
}

/// Smallest exit rate `beta` on the right for which `b` equals `target`, with `delta` and `p`
/// fixed. `b` is decreasing in `beta`, so this is a bisection.
pub fn beta_for_b(target: f64, p: f64, delta: f64) -> Option<f64> {
    let b_of = |beta: f64| boundary_quantity(p, beta, delta);
    let (mut lo, mut hi) = (1e-12, 1.0);
    while b_of(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    if b_of(lo) < target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b_of(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
