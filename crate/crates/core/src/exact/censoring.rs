use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    bernoulli_product, build_generator, build_generator_with, stationary_exact, tv_distance, ExactError, Result, Uniformizer,
    DEFAULT_STATE_CAP,
};
use crate::engine::CensoringSchedule;
use crate::lattice::CensoredEdges;
use crate::params::BoundaryParams;

/// Distance to stationarity from the full configuration at the nondecreasing `times`, with
/// the updates of the edges in `schedule` suppressed. The law is carried exactly across the
/// schedule's breakpoints.
pub fn censored_tv_curve(params: &BoundaryParams, n: usize, schedule: &CensoringSchedule, times: &[f64]) -> Result<Vec<f64>> {
    let pi = stationary_exact(&build_generator(params, n)?)?.weights;
    let d = 1usize << n;
    let mut law = vec![0.0; d];
    law[d - 1] = 1.0;
    let breaks = schedule.breakpoints();
    let empty = CensoredEdges::default();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while now < target {
            let next_break = breaks.iter().copied().find(|&b| b > now).unwrap_or(f64::INFINITY);
            let end = target.min(next_break);
            let set = schedule.at(now).unwrap_or(&empty);
            let g = build_generator_with(params, n, DEFAULT_STATE_CAP, set)?;
            law = Uniformizer::new(&g).evolve(&law, end - now);
            now = end;
        }
        out.push(tv_distance(&law, &pi));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringReport {
    pub times: Vec<f64>,
    pub censored: Vec<f64>,
    pub uncensored: Vec<f64>,
    /// Grid points where the censored distance falls below the uncensored one by more than
    /// `1e-10`.
    pub violations: usize,
}

pub fn censoring_check(params: &BoundaryParams, n: usize, schedule: &CensoringSchedule, times: &[f64]) -> Result<CensoringReport> {
    let censored = censored_tv_curve(params, n, schedule, times)?;
    let uncensored = censored_tv_curve(params, n, &CensoringSchedule::none(), times)?;
    let violations = censored.iter().zip(&uncensored).filter(|(c, u)| **c < **u - 1e-10).count();
    Ok(CensoringReport { times: times.to_vec(), censored, uncensored, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub n: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub events_checked: usize,
    pub violations: usize,
}

fn is_up_set(n: usize, member: &[bool]) -> bool {
    (0..member.len()).all(|s| !member[s] || (0..n).all(|x| member[s | (1 << x)]))
}

/// Upward closure of a set of configuration indices.
fn up_closure(n: usize, seeds: &[usize]) -> Vec<bool> {
    let d = 1usize << n;
    (0..d).map(|s| seeds.iter().any(|&g| g & !s == 0)).collect()
}

/// Checks `nu_max(A) >= mu(A) >= nu_min(A)` for increasing events `A`, where `nu_c` is the
/// Bernoulli product law with density `c` and the densities are `1/(1+a)` and `b/(1+b)`.
/// Every increasing event is enumerated for `n <= 4`; for larger `n`, `samples` random ones
/// (upward closures of random generators) are drawn.
pub fn stationary_domination_check(params: &BoundaryParams, n: usize, samples: usize, seed: u64) -> Result<DominationReport> {
    if params.alpha.min(params.beta) <= 0.0 {
        return Err(ExactError::Regime("needs alpha, beta > 0".into()));
    }
    let (a, b) = (params.a()?, params.b()?);
    let (left, right) = (1.0 / (1.0 + a), b / (1.0 + b));
    let (c_min, c_max) = (left.min(right), left.max(right));
    let mu = stationary_exact(&build_generator(params, n)?)?;
    let lo = bernoulli_product(n, c_min);
    let hi = bernoulli_product(n, c_max);
    let d = 1usize << n;
    let mut checked = 0;
    let mut violations = 0;
    let mut check = |member: &[bool]| {
        let idx = || (0..d).filter(|&s| member[s]);
        let (m, l, h) = (mu.mass(idx()), lo.mass(idx()), hi.mass(idx()));
        checked += 1;
        if m > h + 1e-12 || m < l - 1e-12 {
            violations += 1;
        }
    };
    if n <= 4 {
        for mask in 0u64..(1u64 << d) {
            let member: Vec<bool> = (0..d).map(|s| (mask >> s) & 1 == 1).collect();
            if is_up_set(n, &member) {
                check(&member);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let k = rng.random_range(1..=4);
            let seeds: Vec<usize> = (0..k).map(|_| rng.random_range(0..d)).collect();
            check(&up_closure(n, &seeds));
        }
    }
    Ok(DominationReport { n, c_min, c_max, events_checked: checked, violations })
}
