use serde::{Deserialize, Serialize};

use super::{BoundaryCounts, EngineError, Ensemble};
use crate::lattice::{compare_componentwise, compare_height, Configuration, Dominance, LatticeError, Topology};
use crate::params::BoundaryParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CouplingOutcome {
    Coupled(f64),
    Timeout,
}

impl CouplingOutcome {
    pub fn time(self) -> Option<f64> {
        match self {
            CouplingOutcome::Coupled(t) => Some(t),
            CouplingOutcome::Timeout => None,
        }
    }
}

/// First time the processes started from `eta` and `zeta` agree under the grand coupling.
pub fn coupling_time_from(
    params: &BoundaryParams,
    eta: Configuration,
    zeta: Configuration,
    seed: u64,
    t_max: f64,
) -> Result<CouplingOutcome, EngineError> {
    let mut ens = Ensemble::new(eta.topology(), vec![(eta, *params), (zeta, *params)], seed)?;
    ens.track_mismatch(0, 1);
    if ens.mismatch() == Some(0) {
        return Ok(CouplingOutcome::Coupled(0.0));
    }
    let hit = ens.run_until(t_max, |e, _| e.mismatch() == Some(0))?;
    Ok(hit.map_or(CouplingOutcome::Timeout, CouplingOutcome::Coupled))
}

/// Coupling time of the all-full and all-empty segments.
pub fn coupling_time(params: &BoundaryParams, n: usize, seed: u64, t_max: f64) -> Result<CouplingOutcome, EngineError> {
    let t = Topology::Segment(n);
    coupling_time_from(params, Configuration::full(t), Configuration::empty(t), seed, t_max)
}

/// Snapshots of one replica at a regular time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub configs: Vec<Configuration>,
    pub counts: Vec<BoundaryCounts>,
}

impl Trajectory {
    /// Record replica `r` at `t0, t0 + dt, ...` up to `horizon`.
    pub fn record(ens: &mut Ensemble, r: usize, horizon: f64, dt: f64) -> Result<Self, EngineError> {
        let mut traj = Trajectory { times: Vec::new(), configs: Vec::new(), counts: Vec::new() };
        let mut t = ens.time();
        loop {
            ens.step_to(t)?;
            traj.times.push(t);
            traj.configs.push(ens.replica(r).clone());
            traj.counts.push(ens.counts(r));
            if t >= horizon {
                break;
            }
            t = (t + dt).min(horizon);
        }
        Ok(traj)
    }

    /// Streams the snapshots as `time,configuration` CSV rows under a header.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,configuration")?;
        for (t, c) in self.times.iter().zip(&self.configs) {
            writeln!(w, "{t},{c}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Half-line process on sites `1..=w` started empty; particles enter at site 1 at rate `alpha`
/// and leave there at rate `gamma`. Returns snapshots every `dt` up to `horizon`.
pub fn run_halfline(p: f64, alpha: f64, gamma: f64, w: usize, horizon: f64, dt: f64, seed: u64) -> Result<Trajectory, EngineError> {
    let mut params = BoundaryParams::closed(p)?;
    params.alpha = alpha;
    params.gamma = gamma;
    params.validate().or_else(|e| if alpha == 0.0 && gamma == 0.0 { Ok(()) } else { Err(e) })?;
    let topology = Topology::HalfLineWindow(w);
    let mut ens = Ensemble::new(topology, vec![(Configuration::empty(topology), params)], seed)?;
    Trajectory::record(&mut ens, 0, horizon, dt)
}

/// Partial order checked by [`order_preservation_run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderKind {
    Componentwise,
    /// Prefix sums from the left end, for a closed left boundary.
    Height,
    /// Prefix sums from the right end, for a closed right boundary.
    ReflectedHeight,
}

impl OrderKind {
    pub fn compare(self, upper: &Configuration, lower: &Configuration) -> Result<Dominance, LatticeError> {
        match self {
            OrderKind::Componentwise => compare_componentwise(upper, lower),
            OrderKind::Height => compare_height(upper, lower),
            OrderKind::ReflectedHeight => {
                let flip = |c: &Configuration| {
                    let mut bits = c.bits();
                    bits.reverse();
                    Configuration::from_bits(c.topology(), &bits)
                };
                compare_height(&flip(upper), &flip(lower))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRun {
    pub events: u64,
    /// Events after which `upper` no longer dominated `lower`.
    pub violations: u64,
    pub first_violation: Option<f64>,
}

/// Runs two coupled replicas to `horizon` and checks after every event that changed either of
/// them that the first still dominates the second.
pub fn order_preservation_run(
    upper: (Configuration, BoundaryParams),
    lower: (Configuration, BoundaryParams),
    order: OrderKind,
    horizon: f64,
    seed: u64,
) -> Result<OrderRun, EngineError> {
    if !order.compare(&upper.0, &lower.0)?.is_ge() {
        return Err(EngineError::OrderLost { time: 0.0 });
    }
    let mut ens = Ensemble::new(upper.0.topology(), vec![upper, lower], seed)?;
    let mut violations = 0;
    let mut first_violation = None;
    while let Some(report) = ens.step_event(horizon)? {
        if report.any_change && !order.compare(ens.replica(0), ens.replica(1))?.is_ge() {
            violations += 1;
            first_violation.get_or_insert(report.event.time);
        }
    }
    Ok(OrderRun { events: ens.events_processed(), violations, first_violation })
}

/// Time until the process on the integer line, started from the ground state with its
/// interface between sites `0` and `1`, first has a hole right of `x` or a particle left of
/// `-x`. Simulated on the window `-(x + 4)..=x + 4`, which the stopped process cannot leave.
/// Returns `None` if this has not happened by `t_max`.
pub fn confinement_exit_time(p: f64, x: i64, seed: u64, t_max: f64) -> Result<Option<f64>, EngineError> {
    if x < 0 {
        return Err(LatticeError::OutOfRange { site: x, topology: Topology::line(0) }.into());
    }
    let topology = Topology::line(x + 4);
    let start = Configuration::ground_state(topology, 0);
    let params = BoundaryParams::closed(p)?;
    let mut ens = Ensemble::new(topology, vec![(start, params)], seed)?;
    ens.run_until(t_max, |e, report| {
        report.any_change && {
            let c = e.replica(0);
            !c.get(x + 1) || c.get(-x - 1)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_starts_couple_at_zero() {
        let p = BoundaryParams::new(0.75, 1.0, 1.0, 0.0, 0.0).unwrap();
        let c: Configuration = "0101".parse().unwrap();
        assert_eq!(coupling_time_from(&p, c.clone(), c, 1, 10.0).unwrap(), CouplingOutcome::Coupled(0.0));
    }

    #[test]
    fn halfline_without_entry_stays_empty() {
        let traj = run_halfline(0.75, 0.0, 0.0, 50, 20.0, 1.0, 3).unwrap();
        assert!(traj.configs.iter().all(|c| c.particle_count() == 0));
        assert_eq!(traj.len(), 21);
    }

    #[test]
    fn equal_starts_have_no_violations() {
        let p = BoundaryParams::new(0.75, 1.0, 0.5, 0.2, 0.1).unwrap();
        let c: Configuration = "0110100".parse().unwrap();
        let run = order_preservation_run((c.clone(), p), (c, p), OrderKind::Componentwise, 20.0, 4).unwrap();
        assert_eq!(run.violations, 0);
        assert!(run.events > 0);
    }

    #[test]
    fn unordered_start_rejected() {
        let p = BoundaryParams::new(0.75, 1.0, 0.5, 0.2, 0.1).unwrap();
        let hi: Configuration = "10".parse().unwrap();
        let lo: Configuration = "01".parse().unwrap();
        assert!(order_preservation_run((lo.clone(), p), (hi.clone(), p), OrderKind::Height, 1.0, 1).is_err());
        assert!(order_preservation_run((hi, p), (lo, p), OrderKind::Height, 1.0, 1).is_ok());
    }

    #[test]
    fn confinement_exit_is_finite() {
        let t = confinement_exit_time(0.7, 1, 3, 1e6).unwrap().unwrap();
        assert!(t > 0.0);
        assert!(confinement_exit_time(0.7, 30, 3, 1.0).unwrap().is_none());
    }

    #[test]
    fn trajectory_csv_rows() {
        let p = BoundaryParams::new(0.75, 1.0, 1.0, 0.0, 0.0).unwrap();
        let mut ens = Ensemble::single("000".parse().unwrap(), p, 2).unwrap();
        let traj = Trajectory::record(&mut ens, 0, 1.0, 0.5).unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,configuration");
        assert_eq!(lines[1], "0,000");
        assert_eq!(lines.len(), 4);
    }
}
