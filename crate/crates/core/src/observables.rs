//! Measurements over trajectories: boundary currents, flux, density profiles, second-class
//! counts, the mean centred height against its heat equation, and the shock front.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, Ensemble, SpeciesEnsemble, Trajectory};
use crate::lattice::{h_star, Configuration, Label, LatticeError, MultiSpeciesConfiguration, Topology};
use crate::params::{BoundaryParams, ParamError};
use crate::seed::derive_seed;

/// Number of batches behind every batch-means standard error.
pub const FLUX_BATCHES: usize = 20;

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error("record covers [0, {covered}] but the horizon is {horizon}")]
    HorizonTooShort { horizon: f64, covered: f64 },
    #[error("record is empty")]
    EmptyRecord,
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

pub type Result<T> = std::result::Result<T, ObservableError>;

/// Left boundary counts sampled on a time grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurrentRecord {
    pub times: Vec<f64>,
    pub entered_left: Vec<u64>,
    pub exited_left: Vec<u64>,
}

impl CurrentRecord {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            times: traj.times.clone(),
            entered_left: traj.counts.iter().map(|c| c.entered_left).collect(),
            exited_left: traj.counts.iter().map(|c| c.exited_left).collect(),
        }
    }

    /// Runs replica `r` of `ens` to `horizon`, sampling every `dt` without storing configurations.
    pub fn record(ens: &mut Ensemble, r: usize, horizon: f64, dt: f64) -> Result<Self> {
        let mut rec = Self::default();
        let mut t = ens.time();
        loop {
            ens.step_to(t)?;
            let c = ens.counts(r);
            rec.times.push(t);
            rec.entered_left.push(c.entered_left);
            rec.exited_left.push(c.exited_left);
            if t >= horizon {
                break;
            }
            t = (t + dt).min(horizon);
        }
        Ok(rec)
    }

    pub fn current(&self, i: usize) -> i64 {
        self.entered_left[i] as i64 - self.exited_left[i] as i64
    }

    /// Current at time `t`, read from the last sample at or before `t`.
    pub fn current_at(&self, t: f64) -> Option<i64> {
        let i = self.times.partition_point(|&s| s <= t);
        (i > 0).then(|| self.current(i - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxEstimate {
    pub j_hat: f64,
    pub stderr: f64,
    pub horizon: f64,
}

/// Flux over the second half of `[0, horizon]`, with a batch-means standard error. The record
/// should be sampled finely enough that each of the batches spans several samples.
pub fn measure_flux(record: &CurrentRecord, horizon: f64) -> Result<FluxEstimate> {
    let covered = *record.times.last().ok_or(ObservableError::EmptyRecord)?;
    let start = *record.times.first().ok_or(ObservableError::EmptyRecord)?;
    if horizon.is_nan() || horizon <= 0.0 || covered < horizon || start > horizon / 2.0 {
        return Err(ObservableError::HorizonTooShort { horizon, covered });
    }
    let t0 = horizon / 2.0;
    let width = (horizon - t0) / FLUX_BATCHES as f64;
    let rates: Vec<f64> = (0..FLUX_BATCHES)
        .map(|k| {
            let a = t0 + k as f64 * width;
            let b = if k + 1 == FLUX_BATCHES { horizon } else { a + width };
            let ja = record.current_at(a).expect("sampled from start");
            let jb = record.current_at(b).expect("sampled from start");
            (jb - ja) as f64 / (b - a)
        })
        .collect();
    let j_hat = (record.current_at(horizon).unwrap() - record.current_at(t0).unwrap()) as f64 / (horizon - t0);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rates.len() - 1) as f64;
    Ok(FluxEstimate { j_hat, stderr: (var / rates.len() as f64).sqrt(), horizon })
}

/// Number of second-class particles of any type.
pub fn second_class_count(labels: &MultiSpeciesConfiguration) -> usize {
    labels.sites.iter().filter(|l| matches!(l, Label::Second(_))).count()
}

/// Second-class counts of a multi-species run at increasing sample times.
pub fn second_class_series(species: &mut SpeciesEnsemble, times: &[f64]) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            species.step_to(t)?;
            Ok(second_class_count(species.labels()))
        })
        .collect()
}

/// Occupation frequency of each site of `lo..=hi` over the snapshots taken at or after `t_from`.
pub fn density_profile(traj: &Trajectory, lo: i64, hi: i64, t_from: f64) -> Result<Vec<f64>> {
    let mut sums = vec![0u64; (hi - lo + 1).max(0) as usize];
    let mut samples = 0u64;
    for (t, c) in traj.times.iter().zip(&traj.configs) {
        if *t < t_from {
            continue;
        }
        samples += 1;
        for (s, x) in sums.iter_mut().zip(lo..=hi) {
            if !c.topology().contains(x) {
                return Err(LatticeError::OutOfRange { site: x, topology: c.topology() }.into());
            }
            *s += c.get(x) as u64;
        }
    }
    if samples == 0 {
        return Err(ObservableError::EmptyRecord);
    }
    Ok(sums.into_iter().map(|s| s as f64 / samples as f64).collect())
}

/// Mean of a profile, used as the bulk density.
pub fn bulk_density(profile: &[f64]) -> f64 {
    profile.iter().sum::<f64>() / profile.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanHeightReport {
    pub times: Vec<f64>,
    /// Heat-equation solution on `0..=2N` at each time.
    pub ode: Vec<Vec<f64>>,
    pub mc_mean: Vec<Vec<f64>>,
    pub mc_stderr: Vec<Vec<f64>>,
    pub replicas: usize,
    pub lambda: f64,
    pub max_deviation: f64,
    /// Largest deviation in units of the Monte Carlo standard error, over points where it is
    /// positive.
    pub max_z: f64,
    pub ode_within_envelope: bool,
    pub mc_within_envelope: bool,
}

/// Right-hand side of the heat equation with the rate-`(beta + delta)` site in the middle.
fn heat_rhs(f: &[f64], n: usize, boundary_rate: f64, out: &mut [f64]) {
    out[0] = 0.0;
    out[2 * n] = 0.0;
    for x in 1..2 * n {
        let lap = 0.5 * (f[x - 1] + f[x + 1]) - f[x];
        out[x] = if x == n { boundary_rate * lap } else { lap };
    }
}

/// Explicit fourth-order Runge-Kutta integration of the modified heat equation with step at
/// most `0.1 / (1 + beta + delta)`, reporting the solution at each time of `times`.
pub fn integrate_heat_equation(initial: &[f64], boundary_rate: f64, times: &[f64]) -> Vec<Vec<f64>> {
    let n = (initial.len() - 1) / 2;
    let h_max = 0.1 / (1.0 + boundary_rate);
    let mut f = initial.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; f.len()], vec![0.0; f.len()], vec![0.0; f.len()], vec![0.0; f.len()], vec![0.0; f.len()]);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - now;
        if span > 0.0 {
            let steps = (span / h_max).ceil() as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                heat_rhs(&f, n, boundary_rate, &mut k1);
                for i in 0..f.len() {
                    tmp[i] = f[i] + 0.5 * h * k1[i];
                }
                heat_rhs(&tmp, n, boundary_rate, &mut k2);
                for i in 0..f.len() {
                    tmp[i] = f[i] + 0.5 * h * k2[i];
                }
                heat_rhs(&tmp, n, boundary_rate, &mut k3);
                for i in 0..f.len() {
                    tmp[i] = f[i] + h * k3[i];
                }
                heat_rhs(&tmp, n, boundary_rate, &mut k4);
                for i in 0..f.len() {
                    f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            now = target;
        }
        out.push(f.clone());
    }
    out
}

/// Compares the expected centred height of the symmetric process with one open boundary,
/// estimated from `replicas` runs, against the heat equation and the `3N exp(-lambda t)`
/// envelope. `times` must be nondecreasing.
pub fn mean_height_check(
    params: &BoundaryParams,
    eta: &Configuration,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<MeanHeightReport> {
    if (params.p - 0.5).abs() > 1e-12 || params.alpha.max(params.gamma) > 0.0 || params.beta + params.delta <= 0.0 {
        return Err(ObservableError::Regime("needs p = 1/2, a closed left end and an open right end".into()));
    }
    let n = match eta.topology() {
        Topology::Segment(n) => n,
        t => return Err(LatticeError::NeedsSegment(t).into()),
    };
    let rate = params.beta + params.delta;
    let initial = h_star(eta, params.beta, params.delta)?;
    let ode = integrate_heat_equation(&initial, rate, times);

    let width = 2 * n + 1;
    let mut sum = vec![vec![0.0; width]; times.len()];
    let mut sum_sq = vec![vec![0.0; width]; times.len()];
    for r in 0..replicas {
        let mut ens = Ensemble::single(eta.clone(), *params, derive_seed(seed, "mean-height", r as u64))?;
        for (k, &t) in times.iter().enumerate() {
            ens.step_to(t)?;
            let h = h_star(ens.replica(0), params.beta, params.delta)?;
            for x in 0..width {
                sum[k][x] += h[x];
                sum_sq[k][x] += h[x] * h[x];
            }
        }
    }
    let m = replicas as f64;
    let mc_mean: Vec<Vec<f64>> = sum.iter().map(|row| row.iter().map(|s| s / m).collect()).collect();
    let mc_stderr: Vec<Vec<f64>> = sum_sq
        .iter()
        .zip(&mc_mean)
        .map(|(sq, mean)| sq.iter().zip(mean).map(|(s2, mu)| ((s2 / m - mu * mu).max(0.0) * m / (m - 1.0) / m).sqrt()).collect())
        .collect();

    let lambda = 1.0 - (std::f64::consts::PI / (2.0 * n as f64 + 1.0 / rate)).cos();
    let mut max_deviation: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut ode_ok = true;
    let mut mc_ok = true;
    for (k, &t) in times.iter().enumerate() {
        let envelope = 3.0 * n as f64 * (-lambda * t).exp();
        for x in 0..width {
            let d = (ode[k][x] - mc_mean[k][x]).abs();
            max_deviation = max_deviation.max(d);
            if mc_stderr[k][x] > 0.0 {
                max_z = max_z.max(d / mc_stderr[k][x]);
            }
            ode_ok &= ode[k][x].abs() <= envelope;
            mc_ok &= mc_mean[k][x].abs() <= envelope;
        }
    }
    Ok(MeanHeightReport {
        times: times.to_vec(),
        ode,
        mc_mean,
        mc_stderr,
        replicas,
        lambda,
        max_deviation,
        max_z,
        ode_within_envelope: ode_ok,
        mc_within_envelope: mc_ok,
    })
}

/// Segment of length `n` whose rightmost `k` sites are occupied.
pub fn rightmost_block(n: usize, k: usize) -> Configuration {
    let t = Topology::Segment(n);
    let mut c = Configuration::empty(t);
    for x in (n - k.min(n) + 1)..=n {
        c.set(x as i64, true);
    }
    c
}

/// Position of the leftmost particle over time, and its shock coordinate `N - L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTracker {
    pub n: usize,
    pub times: Vec<f64>,
    pub leftmost: Vec<i64>,
    /// Least-squares slope of the leftmost particle position.
    pub speed: f64,
}

impl FrontTracker {
    pub fn shock(&self) -> Vec<i64> {
        self.leftmost.iter().map(|l| self.n as i64 - l).collect()
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn fit_front(n: usize, times: Vec<f64>, leftmost: Vec<i64>) -> Option<FrontTracker> {
    if leftmost.is_empty() {
        return None;
    }
    let ys: Vec<f64> = leftmost.iter().map(|&l| l as f64).collect();
    let speed = slope(&times, &ys);
    Some(FrontTracker { n, times, leftmost, speed })
}

/// Front of a recorded trajectory, over the snapshots that still hold a particle. `None` when
/// the first snapshot is already empty.
pub fn shock_front(traj: &Trajectory) -> Option<FrontTracker> {
    let n = traj.configs.first()?.len();
    let (mut times, mut leftmost) = (Vec::new(), Vec::new());
    for (t, c) in traj.times.iter().zip(&traj.configs) {
        match c.leftmost_particle() {
            Some(l) => {
                times.push(*t);
                leftmost.push(l);
            }
            None => break,
        }
    }
    fit_front(n, times, leftmost)
}

/// Runs the one-blocked-entry process from the rightmost `k` sites occupied until the segment
/// empties (or `t_max`), sampling the leftmost particle every `dt`.
pub fn shock_front_run(params: &BoundaryParams, n: usize, k: usize, dt: f64, t_max: f64, seed: u64) -> Result<Option<FrontTracker>> {
    if params.alpha != 0.0 || params.beta <= 0.0 {
        return Err(ObservableError::Regime("needs alpha = 0 and beta > 0".into()));
    }
    let mut ens = Ensemble::single(rightmost_block(n, k), *params, seed)?;
    let (mut times, mut leftmost) = (Vec::new(), Vec::new());
    let mut t = 0.0;
    while t <= t_max {
        ens.step_to(t)?;
        match ens.replica(0).leftmost_particle() {
            Some(l) => {
                times.push(t);
                leftmost.push(l);
            }
            None => break,
        }
        t += dt;
    }
    Ok(fit_front(n, times, leftmost))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_needs_long_record() {
        let rec = CurrentRecord { times: vec![0.0, 1.0], entered_left: vec![0, 1], exited_left: vec![0, 0] };
        assert!(measure_flux(&rec, 5.0).is_err());
    }

    #[test]
    fn flux_of_regular_record() {
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.5).collect();
        let entered: Vec<u64> = times.iter().map(|t| (t * 3.0) as u64).collect();
        let rec = CurrentRecord { times, entered_left: entered, exited_left: vec![0; 401] };
        let est = measure_flux(&rec, 200.0).unwrap();
        assert!((est.j_hat - 3.0).abs() < 1e-12);
        assert!(est.stderr < 1e-9);
    }

    #[test]
    fn heat_equation_decays() {
        let eta: Configuration = "11111111".parse().unwrap();
        let init = h_star(&eta, 1.0, 1.0).unwrap();
        let out = integrate_heat_equation(&init, 2.0, &[0.0, 2000.0]);
        assert_eq!(out[0], init);
        assert!(out[1].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn empty_block_has_no_front() {
        let p = BoundaryParams::new(1.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(shock_front_run(&p, 10, 0, 1.0, 10.0, 1).unwrap().is_none());
    }

    #[test]
    fn block_shape() {
        assert_eq!(rightmost_block(5, 2).to_string(), "00011");
    }
}
