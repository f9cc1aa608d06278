use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{build_generator, detailed_balance_residual, stationary_exact, tv_distance, ExactError, GeneratorMatrix, Result, Uniformizer};
use crate::params::{BoundaryParams, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symmetrization {
    /// Time reversal under the uniform law: bias reversed, entry and exit rates exchanged.
    pub adjoint: BoundaryParams,
    /// Additive symmetrization: `p = 1/2` with equal fill and clear rates at each end.
    pub symmetrized: BoundaryParams,
    pub n: usize,
    /// Spectral gap of the symmetrized chain.
    pub gap: f64,
}

/// Adjoint and additive symmetrization at the triple point, with the gap of the latter.
pub fn adjoint_and_symmetrize(params: &BoundaryParams, n: usize) -> Result<Symmetrization> {
    let phase = params.phase().phase;
    if phase != Phase::TriplePoint {
        return Err(ExactError::Regime(format!("needs the triple point, got {phase:?}")));
    }
    let adjoint = BoundaryParams { p: 1.0 - params.p, alpha: params.gamma, beta: params.delta, gamma: params.alpha, delta: params.beta };
    let left = 0.5 * (params.alpha + params.gamma);
    let right = 0.5 * (params.beta + params.delta);
    let symmetrized = BoundaryParams { p: 0.5, alpha: left, beta: right, gamma: left, delta: right };
    let gap = spectral_gap(&build_generator(&symmetrized, n)?)?;
    Ok(Symmetrization { adjoint, symmetrized, n, gap })
}

/// Smallest nonzero eigenvalue magnitude of a reversible generator, from a dense symmetric
/// solve after conjugating by the square root of the stationary law.
pub fn spectral_gap(g: &GeneratorMatrix) -> Result<f64> {
    let pi = stationary_exact(g)?.weights;
    let scale = pi.iter().cloned().fold(0.0, f64::max);
    if detailed_balance_residual(g, &pi) > 1e-10 * scale.max(1e-300) {
        return Err(ExactError::Regime("chain is not reversible".into()));
    }
    let d = g.dim();
    let root: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        s[(i, i)] = g.diag(i);
        for (j, r) in g.row(i) {
            let v = root[i] * r / root[j];
            s[(i, j)] += 0.5 * v;
            s[(j, i)] += 0.5 * v;
        }
    }
    let eig = SymmetricEigen::new(s).eigenvalues;
    let mut mags: Vec<f64> = eig.iter().map(|e| e.abs()).collect();
    mags.sort_by(f64::total_cmp);
    Ok(mags[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiaconisReport {
    pub n: usize,
    pub gap: f64,
    pub times: Vec<f64>,
    /// Worst distance over initial states at each time.
    pub max_tv: Vec<f64>,
    pub bound: Vec<f64>,
    pub violations: usize,
    /// Mixing time implied by the bound, `((N/2 + 1) ln 2 + ln(1/eps)) / gap` with `eps = 1/4`.
    pub implied_mixing_time: f64,
}

/// Checks `TV(t) <= 2^(N/2 + 1) exp(-gap t)` for every starting state on the grid `times`
/// (nondecreasing), with the gap of the symmetrized chain.
pub fn diaconis_bound_check(params: &BoundaryParams, n: usize, times: &[f64]) -> Result<DiaconisReport> {
    let sym = adjoint_and_symmetrize(params, n)?;
    let g = build_generator(params, n)?;
    let pi = stationary_exact(&g)?.weights;
    let d = g.dim();
    let u = Uniformizer::new(&g);
    let mut max_tv = vec![0.0f64; times.len()];
    for i in 0..d {
        let mut law = vec![0.0; d];
        law[i] = 1.0;
        let mut now = 0.0;
        for (k, &t) in times.iter().enumerate() {
            law = u.evolve(&law, t - now);
            now = t;
            max_tv[k] = max_tv[k].max(tv_distance(&law, &pi));
        }
    }
    let pre = 2f64.powf(n as f64 / 2.0 + 1.0);
    let bound: Vec<f64> = times.iter().map(|t| pre * (-sym.gap * t).exp()).collect();
    let violations = max_tv.iter().zip(&bound).filter(|(tv, b)| tv > b).count();
    let implied = ((n as f64 / 2.0 + 1.0) * 2f64.ln() + 4f64.ln()) / sym.gap;
    Ok(DiaconisReport { n, gap: sym.gap, times: times.to_vec(), max_tv, bound, violations, implied_mixing_time: implied })
}
