//! Exact analysis of the segment at small N: generator assembly over all `2^N` states,
//! stationary laws, total-variation curves, mixing times, spectral gaps, return times and the
//! approximate-eigenfunction lower bound.

mod censoring;
mod kac;
mod mixing;
mod spectral;
mod wilson;

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::lattice::{CensoredEdges, Configuration, LatticeError};
use crate::params::{BoundaryParams, ParamError};

pub use censoring::{censored_tv_curve, censoring_check, stationary_domination_check, CensoringReport, DominationReport};
pub use kac::{kac_check, KacReport};
pub use mixing::{max_tv_curve, mixing_time_exact, tv_curve, Uniformizer};
pub use spectral::{adjoint_and_symmetrize, diaconis_bound_check, spectral_gap, DiaconisReport, Symmetrization};
pub use wilson::{wilson_lower_bound, wilson_residual, WilsonCertificate, WilsonVariant};

/// Largest segment handled by default.
pub const DEFAULT_STATE_CAP: usize = 14;

/// Dimension up to which linear systems are solved densely.
const DENSE_SOLVE_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("N={n} exceeds the cap {cap}")]
    StateCap { n: usize, cap: usize },
    #[error("chain is reducible")]
    Reducible,
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error("certificate invalid: lambda={lambda} < c={c}")]
    InvalidCertificate { lambda: f64, c: f64 },
    #[error("linear system is singular")]
    Singular,
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("bad rate in generator input: {0}")]
    BadInput(String),
    #[error("golden file: {0}")]
    Golden(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub type Result<T> = std::result::Result<T, ExactError>;

/// Generator over configuration indices (site 1 is the least significant bit). Off-diagonal
/// rates are stored row-wise; the diagonal holds minus the row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Off-diagonal transitions out of `i` as `(target, rate)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.rates[r].iter().copied())
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|&(k, _)| k == j).map_or(0.0, |(_, r)| r)
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.diag[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, d| m.max(-d))
    }

    pub fn nonzeros(&self) -> usize {
        self.rates.len()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = self.diag[i];
            for (j, r) in self.row(i) {
                m[i * d + j] += r;
            }
        }
        m
    }

    /// `v G` for a row vector `v`.
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        for (o, (x, d)) in out.iter_mut().zip(v.iter().zip(&self.diag)) {
            *o = x * d;
        }
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                for (j, r) in self.row(i) {
                    out[j] += x * r;
                }
            }
        }
    }

    /// Every state reaches every other.
    pub fn is_irreducible(&self) -> bool {
        let d = self.dim();
        let forward = self.reach_all(0, |i| self.row(i).map(|(j, _)| j).collect());
        if !forward {
            return false;
        }
        let mut back: Vec<Vec<usize>> = vec![Vec::new(); d];
        for i in 0..d {
            for (j, _) in self.row(i) {
                back[j].push(i);
            }
        }
        self.reach_all(0, |i| back[i].clone())
    }

    fn reach_all(&self, start: usize, next: impl Fn(usize) -> Vec<usize>) -> bool {
        let d = self.dim();
        let mut seen = vec![false; d];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for j in next(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == d
    }
}

fn check_rates(params: &BoundaryParams) -> Result<()> {
    if !(0.0..=1.0).contains(&params.p) {
        return Err(ExactError::BadInput(format!("p={}", params.p)));
    }
    for (name, v) in [("alpha", params.alpha), ("beta", params.beta), ("gamma", params.gamma), ("delta", params.delta)] {
        if !v.is_finite() || v < 0.0 {
            return Err(ExactError::BadInput(format!("{name}={v}")));
        }
    }
    Ok(())
}

/// Generator of the segment of length `n`. Any `p` in `[0, 1]` is accepted so that adjoint
/// chains can be assembled too.
pub fn build_generator(params: &BoundaryParams, n: usize) -> Result<GeneratorMatrix> {
    build_generator_with(params, n, DEFAULT_STATE_CAP, &CensoredEdges::default())
}

/// Generator with the updates on `censored` edges removed; the reservoir edges are `0` and
/// `n + 1`.
pub fn build_generator_with(params: &BoundaryParams, n: usize, cap: usize, censored: &CensoredEdges) -> Result<GeneratorMatrix> {
    if n > cap || n == 0 {
        return Err(ExactError::StateCap { n, cap });
    }
    check_rates(params)?;
    let d = 1usize << n;
    let top = n - 1;
    let mut row_ptr = Vec::with_capacity(d + 1);
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut diag = vec![0.0; d];
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(n + 2);
    row_ptr.push(0);
    for (s, dg) in diag.iter_mut().enumerate() {
        row.clear();
        for x in 1..n {
            if censored.contains(x as i64) {
                continue;
            }
            let (a, b) = ((s >> (x - 1)) & 1, (s >> x) & 1);
            let t = s ^ (0b11 << (x - 1));
            match (a, b) {
                (1, 0) => row.push((t, params.p)),
                (0, 1) => row.push((t, 1.0 - params.p)),
                _ => {}
            }
        }
        if !censored.contains(0) {
            if s & 1 == 0 {
                row.push((s | 1, params.alpha));
            } else {
                row.push((s & !1, params.gamma));
            }
        }
        if !censored.contains(n as i64 + 1) {
            if (s >> top) & 1 == 0 {
                row.push((s | (1 << top), params.delta));
            } else {
                row.push((s & !(1 << top), params.beta));
            }
        }
        row.retain(|&(_, r)| r > 0.0);
        row.sort_by_key(|&(j, _)| j);
        let mut k = 0;
        while k < row.len() {
            let (j, mut r) = row[k];
            k += 1;
            while k < row.len() && row[k].0 == j {
                r += row[k].1;
                k += 1;
            }
            cols.push(j);
            rates.push(r);
            *dg -= r;
        }
        row_ptr.push(cols.len());
    }
    Ok(GeneratorMatrix { n, row_ptr, cols, rates, diag })
}

/// Probability weights indexed by configuration index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionVector {
    pub n: usize,
    pub weights: Vec<f64>,
}

impl DistributionVector {
    pub fn new(n: usize, weights: Vec<f64>) -> Self {
        Self { n, weights }
    }

    pub fn point_mass(n: usize, index: usize) -> Self {
        let mut weights = vec![0.0; 1 << n];
        weights[index] = 1.0;
        Self { n, weights }
    }

    pub fn uniform(n: usize) -> Self {
        let d = 1usize << n;
        Self { n, weights: vec![1.0 / d as f64; d] }
    }

    /// Nonnegative and summing to one within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.weights.iter().all(|&w| w >= -tol) && (self.weights.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.weights.iter().zip(&other.weights).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn tv(&self, other: &Self) -> f64 {
        tv_distance(&self.weights, &other.weights)
    }

    /// Probability of a set of configuration indices.
    pub fn mass(&self, event: impl IntoIterator<Item = usize>) -> f64 {
        event.into_iter().map(|i| self.weights[i]).sum()
    }

    /// `configuration,weight` lines sorted by the configuration string, weights with 17
    /// significant digits.
    pub fn to_golden_csv(&self) -> String {
        let mut rows: Vec<(String, f64)> =
            self.weights.iter().enumerate().map(|(i, &w)| (Configuration::from_index(self.n, i).to_string(), w)).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = String::from("configuration,weight\n");
        for (c, w) in rows {
            writeln!(out, "{c},{w:.16e}").expect("write to string");
        }
        out
    }

    pub fn from_golden_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("configuration,weight") {
            return Err(ExactError::Golden("missing header".into()));
        }
        let mut entries = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (c, w) = line.split_once(',').ok_or_else(|| ExactError::Golden(format!("bad line {line:?}")))?;
            let config: Configuration = c.parse()?;
            let w: f64 = w.trim().parse().map_err(|_| ExactError::Golden(format!("bad weight {w:?}")))?;
            entries.push((config, w));
        }
        let n = entries.first().map(|(c, _)| c.len()).ok_or_else(|| ExactError::Golden("no rows".into()))?;
        if entries.len() != 1 << n {
            return Err(ExactError::Golden(format!("{} rows for N={n}", entries.len())));
        }
        let mut weights = vec![0.0; 1 << n];
        for (c, w) in entries {
            weights[c.index()] = w;
        }
        Ok(Self { n, weights })
    }
}

pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `max_j |(pi G)_j|`.
pub fn stationarity_residual(g: &GeneratorMatrix, pi: &[f64]) -> f64 {
    let mut out = vec![0.0; g.dim()];
    g.left_mul(pi, &mut out);
    out.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Unique stationary law of an irreducible generator.
pub fn stationary_exact(g: &GeneratorMatrix) -> Result<DistributionVector> {
    if !g.is_irreducible() {
        return Err(ExactError::Reducible);
    }
    let d = g.dim();
    let pi = if d <= DENSE_SOLVE_LIMIT { stationary_dense(g)? } else { stationary_iterative(g)? };
    Ok(DistributionVector { n: g.n(), weights: pi })
}

/// Solves `pi G = 0` with the last equation replaced by normalisation.
fn stationary_dense(g: &GeneratorMatrix) -> Result<Vec<f64>> {
    let d = g.dim();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = g.diag(i);
        for (j, r) in g.row(i) {
            a[(j, i)] += r;
        }
    }
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(d);
    rhs[d - 1] = 1.0;
    let x = a.lu().solve(&rhs).ok_or(ExactError::Singular)?;
    let mut pi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    Ok(pi)
}

/// Gauss-Seidel sweeps on `pi G = 0` for chains too large to factorise.
fn stationary_iterative(g: &GeneratorMatrix) -> Result<Vec<f64>> {
    let d = g.dim();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for i in 0..d {
        for (j, r) in g.row(i) {
            incoming[j].push((i, r));
        }
    }
    let mut pi = vec![1.0 / d as f64; d];
    for _ in 0..200_000 {
        for j in 0..d {
            let inflow: f64 = incoming[j].iter().map(|&(i, r)| pi[i] * r).sum();
            pi[j] = inflow / -g.diag(j);
        }
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= s);
        if stationarity_residual(g, &pi) <= 1e-14 {
            return Ok(pi);
        }
    }
    Err(ExactError::NoConvergence("Gauss-Seidel stationary solve".into()))
}

/// Product law with site density `1 / (1 + a)`, valid on the curve `a b = 1`.
pub fn stationary_product(params: &BoundaryParams, n: usize) -> Result<DistributionVector> {
    if params.alpha.min(params.beta) <= 0.0 {
        return Err(ExactError::Regime("needs alpha, beta > 0".into()));
    }
    let a = params.a()?;
    let b = params.b()?;
    if (a * b - 1.0).abs() >= 1e-10 {
        return Err(ExactError::Regime(format!("a*b = {} != 1", a * b)));
    }
    let rho = 1.0 / (1.0 + a);
    let weights = (0..1usize << n)
        .map(|i| {
            let k = i.count_ones() as i32;
            rho.powi(k) * (1.0 - rho).powi(n as i32 - k)
        })
        .collect();
    Ok(DistributionVector { n, weights })
}

/// Reversible law with the left end closed: weight `(delta/beta)^|eta|` times
/// `((1-p)/p)^z` for each particle at distance `z` from site N.
pub fn stationary_reversible(params: &BoundaryParams, n: usize) -> Result<DistributionVector> {
    if params.alpha.max(params.gamma) > 0.0 {
        return Err(ExactError::Regime("needs a closed left end".into()));
    }
    if params.beta == 0.0 && params.delta == 0.0 {
        return Err(ExactError::Regime("closed segment".into()));
    }
    let d = 1usize << n;
    if params.delta == 0.0 {
        return Ok(DistributionVector::point_mass(n, 0));
    }
    if params.beta == 0.0 {
        return Ok(DistributionVector::point_mass(n, d - 1));
    }
    let ratio = params.delta / params.beta;
    let q = (1.0 - params.p) / params.p;
    let mut weights: Vec<f64> = (0..d)
        .map(|s| {
            let mut w = 1.0;
            for x in 1..=n {
                if (s >> (x - 1)) & 1 == 1 {
                    w *= ratio * q.powi((n - x) as i32);
                }
            }
            w
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(DistributionVector { n, weights })
}

/// `max |mu(i) r(i,j) - mu(j) r(j,i)|` over all pairs.
pub fn detailed_balance_residual(g: &GeneratorMatrix, mu: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..g.dim() {
        for (j, r) in g.row(i) {
            worst = worst.max((mu[i] * r - mu[j] * g.rate(j, i)).abs());
        }
    }
    worst
}

/// Weight of every configuration under the Bernoulli product law with density `c`.
pub fn bernoulli_product(n: usize, c: f64) -> DistributionVector {
    let weights = (0..1usize << n)
        .map(|i| {
            let k = i.count_ones() as i32;
            c.powi(k) * (1.0 - c).powi(n as i32 - k)
        })
        .collect();
    DistributionVector { n, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prm(p: f64, a: f64, b: f64, g: f64, d: f64) -> BoundaryParams {
        BoundaryParams { p, alpha: a, beta: b, gamma: g, delta: d }
    }

    #[test]
    fn single_site_rates() {
        let g = build_generator(&prm(0.7, 0.3, 0.4, 0.1, 0.2), 1).unwrap();
        assert!((g.rate(0, 1) - 0.5).abs() < 1e-15);
        assert!((g.rate(1, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn totally_asymmetric_pair() {
        let g = build_generator(&prm(1.0, 0.0, 0.0, 0.0, 0.0), 2).unwrap();
        // "10" (site 1 occupied) is index 1, "01" is index 2.
        assert_eq!(g.rate(1, 2), 1.0);
        assert_eq!(g.rate(2, 1), 0.0);
        assert!(!g.is_irreducible());
    }

    #[test]
    fn row_sums_vanish() {
        let g = build_generator(&prm(0.63, 0.4, 0.7, 0.2, 0.05), 6).unwrap();
        for i in 0..g.dim() {
            let s: f64 = g.row(i).map(|(_, r)| r).sum::<f64>() + g.diag(i);
            assert!(s.abs() < 1e-14);
        }
        let dense = g.to_dense();
        assert!(dense.iter().enumerate().all(|(k, v)| k % 65 == 0 || *v >= 0.0));
    }

    #[test]
    fn two_state_stationary() {
        let g = build_generator(&prm(0.5, 1.0, 1.0, 0.0, 0.0), 1).unwrap();
        let pi = stationary_exact(&g).unwrap();
        assert!((pi.weights[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn closed_segment_is_reducible() {
        let g = build_generator(&prm(0.7, 0.0, 0.0, 0.0, 0.0), 3).unwrap();
        assert!(matches!(stationary_exact(&g), Err(ExactError::Reducible)));
    }

    #[test]
    fn product_examples() {
        let uni = stationary_product(&prm(0.75, 0.25, 0.25, 0.0, 0.0), 3).unwrap();
        assert!(uni.weights.iter().all(|w| (w - 0.125).abs() < 1e-15));
        // a = 2 needs alpha = 1/6 at p = 3/4; b = 1/2 needs beta = 1/3.
        let two = stationary_product(&prm(0.75, 1.0 / 6.0, 1.0 / 3.0, 0.0, 0.0), 1).unwrap();
        assert!((two.weights[0] - 2.0 / 3.0).abs() < 1e-12);
        let half = stationary_product(&prm(0.75, 1.0 / 3.0, 1.0 / 6.0, 0.0, 0.0), 2).unwrap();
        assert!((half.weights[3] - 4.0 / 9.0).abs() < 1e-12);
        assert!(stationary_product(&prm(0.75, 1.0, 1.0, 0.0, 0.0), 2).is_err());
    }

    #[test]
    fn reversible_examples() {
        let dirac = stationary_reversible(&prm(0.8, 0.0, 1.0, 0.0, 0.0), 4).unwrap();
        assert_eq!(dirac.weights[0], 1.0);
        let one = stationary_reversible(&prm(0.9, 0.0, 0.3, 0.0, 0.3), 1).unwrap();
        assert!((one.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn golden_roundtrip() {
        let mu = stationary_reversible(&prm(0.7, 0.0, 0.4, 0.0, 0.9), 3).unwrap();
        let csv = mu.to_golden_csv();
        assert!(csv.lines().nth(1).unwrap().starts_with("000,"));
        let back = DistributionVector::from_golden_csv(&csv).unwrap();
        assert!(back.sup_distance(&mu) < 1e-16);
    }
}
