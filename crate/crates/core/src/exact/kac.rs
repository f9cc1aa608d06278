use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{build_generator, stationary_exact, ExactError, Result};
use crate::engine::Ensemble;
use crate::lattice::{Configuration, Topology};
use crate::params::BoundaryParams;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacReport {
    pub reference: String,
    /// Mean return time from first-step analysis.
    pub linear_solve: f64,
    /// `1 / (mu(reference) * exit rate at reference)`.
    pub kac_formula: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub replicas: usize,
}

impl KacReport {
    /// Distance between the simulated and exact means in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mc_mean - self.linear_solve).abs() / self.mc_stderr
    }
}

/// Mean return time to `reference`: exactly by solving the hitting-time system, by the Kac
/// identity, and by simulating `replicas` excursions with the event engine.
pub fn kac_check(params: &BoundaryParams, reference: &Configuration, replicas: usize, seed: u64) -> Result<KacReport> {
    let n = match reference.topology() {
        Topology::Segment(n) => n,
        t => return Err(crate::lattice::LatticeError::NeedsSegment(t).into()),
    };
    let g = build_generator(params, n)?;
    let pi = stationary_exact(&g)?.weights;
    let d = g.dim();
    let x0 = reference.index();
    let q0 = g.exit_rate(x0);

    // Expected hitting time of x0 from every other state: (-G) h = 1 off x0, h(x0) = 0.
    let others: Vec<usize> = (0..d).filter(|&i| i != x0).collect();
    let mut pos = vec![usize::MAX; d];
    for (k, &i) in others.iter().enumerate() {
        pos[i] = k;
    }
    let m = others.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (k, &i) in others.iter().enumerate() {
        a[(k, k)] = -g.diag(i);
        for (j, r) in g.row(i) {
            if j != x0 {
                a[(k, pos[j])] -= r;
            }
        }
    }
    let h = a.lu().solve(&DVector::from_element(m, 1.0)).ok_or(ExactError::Singular)?;
    let linear_solve = 1.0 / q0 + g.row(x0).map(|(j, r)| r / q0 * h[pos[j]]).sum::<f64>();
    let kac_formula = 1.0 / (pi[x0] * q0);

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..replicas {
        let mut ens = Ensemble::single(reference.clone(), *params, derive_seed(seed, "kac", r as u64))?;
        let mut left = false;
        let hit = ens.run_until(f64::INFINITY, |e, _| {
            let here = e.replica(0).index() == x0;
            if !here {
                left = true;
            }
            left && here
        })?;
        let t = hit.expect("ergodic chain returns");
        sum += t;
        sum_sq += t * t;
    }
    let k = replicas as f64;
    let mc_mean = sum / k;
    let mc_stderr = ((sum_sq / k - mc_mean * mc_mean) / (k - 1.0)).sqrt();
    Ok(KacReport { reference: reference.to_string(), linear_solve, kac_formula, mc_mean, mc_stderr, replicas })
}
