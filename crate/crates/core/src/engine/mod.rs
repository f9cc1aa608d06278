//! Event-driven simulation under the grand coupling: one set of Poisson clocks with attached
//! uniforms drives every replica of an ensemble.

mod checkpoint;
mod clock;
mod runs;
mod species;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{CensoredEdges, Configuration, LatticeError, Topology};
use crate::params::{BoundaryParams, ParamError};

pub use checkpoint::CHECKPOINT_MAGIC;
pub use clock::{ClockId, ClockKind, ClockState, ClockStream, Event};
pub use runs::{
    confinement_exit_time, coupling_time, coupling_time_from, order_preservation_run, run_halfline, CouplingOutcome, OrderKind, OrderRun,
    Trajectory,
};
pub use species::{FourProcess, FourProcessSummary, SpeciesEnsemble};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("window breach at t={time}: site {site} changed within two sites of the window edge")]
    WindowBreach { time: f64, site: i64 },
    #[error("replica {index} lives on {found:?}, ensemble uses {expected:?}")]
    TopologyMismatch { index: usize, expected: Topology, found: Topology },
    #[error("ensemble needs at least one replica")]
    NoReplicas,
    #[error("t_end={t_end} lies before the current time {now}")]
    TimeReversal { t_end: f64, now: f64 },
    #[error("censoring breakpoints must increase: {prev} then {next}")]
    UnorderedSchedule { prev: f64, next: f64 },
    #[error("coupled replicas lost their order at t={time}")]
    OrderLost { time: f64 },
    #[error("phase mismatch: {0}")]
    PhaseMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Piecewise-constant, right-continuous map from time to censored edges. Boundary clocks sit on
/// the reservoir edges `0` and `N + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CensoringSchedule {
    pieces: Vec<(f64, CensoredEdges)>,
}

impl CensoringSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    /// Every edge, reservoirs included, is censored from time zero on.
    pub fn all() -> Self {
        Self::constant(CensoredEdges { below: Some(i64::MAX), ..Default::default() })
    }

    pub fn constant(set: CensoredEdges) -> Self {
        Self { pieces: vec![(f64::NEG_INFINITY, set)] }
    }

    pub fn from_edges(edges: impl IntoIterator<Item = i64>) -> Self {
        Self::constant(CensoredEdges { edges: edges.into_iter().collect(), ..Default::default() })
    }

    /// The set `set` applies from `start` until the next breakpoint.
    pub fn push(&mut self, start: f64, set: CensoredEdges) -> Result<(), EngineError> {
        if let Some(&(prev, _)) = self.pieces.last() {
            if start <= prev {
                return Err(EngineError::UnorderedSchedule { prev, next: start });
            }
        }
        self.pieces.push((start, set));
        Ok(())
    }

    pub fn at(&self, t: f64) -> Option<&CensoredEdges> {
        let i = self.pieces.partition_point(|(start, _)| *start <= t);
        (i > 0).then(|| &self.pieces[i - 1].1)
    }

    pub fn is_censored(&self, edge: i64, t: f64) -> bool {
        self.at(t).is_some_and(|set| set.contains(edge))
    }

    /// Finite breakpoints in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().map(|(s, _)| *s).filter(|s| s.is_finite()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.iter().all(|(_, s)| s.is_empty())
    }
}

/// Boundary particle counts at both ends. Entering means moving into the segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCounts {
    pub entered_left: u64,
    pub exited_left: u64,
    pub entered_right: u64,
    pub exited_right: u64,
}

impl BoundaryCounts {
    /// Net number of particles that came in through the left boundary.
    pub fn left_current(&self) -> i64 {
        self.entered_left as i64 - self.exited_left as i64
    }

    pub fn right_current(&self) -> i64 {
        self.entered_right as i64 - self.exited_right as i64
    }
}

#[derive(Debug, Clone, Copy)]
struct Rates {
    alpha: f64,
    gamma: f64,
    delta: f64,
    beta: f64,
}

/// Replicas advanced by one shared clock stream. Boundary clocks ring at the largest rate over
/// the replicas; replica `r` acts on a ring with uniform `u` when `u * max < rate_r`, which
/// realises the extra-rate clocks of the monotone couplings.
pub struct Ensemble {
    topology: Topology,
    replicas: Vec<Configuration>,
    params: Vec<BoundaryParams>,
    max: Rates,
    stream: ClockStream,
    time: f64,
    censoring: CensoringSchedule,
    changed: Vec<bool>,
    counts: Vec<BoundaryCounts>,
    pair: Option<(usize, usize, usize)>,
    events: u64,
}

/// What the last processed event did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub event: Event,
    pub censored: bool,
    pub any_change: bool,
}

impl Ensemble {
    pub fn new(topology: Topology, replicas: Vec<(Configuration, BoundaryParams)>, seed: u64) -> Result<Self, EngineError> {
        if replicas.is_empty() {
            return Err(EngineError::NoReplicas);
        }
        for (index, (c, _)) in replicas.iter().enumerate() {
            if c.topology() != topology {
                return Err(EngineError::TopologyMismatch { index, expected: topology, found: c.topology() });
            }
        }
        let fold = |f: fn(&BoundaryParams) -> f64| replicas.iter().map(|(_, p)| f(p)).fold(0.0, f64::max);
        let mut max = Rates { alpha: fold(|p| p.alpha), gamma: fold(|p| p.gamma), delta: fold(|p| p.delta), beta: fold(|p| p.beta) };
        let mut clocks: Vec<(ClockId, f64)> = Vec::new();
        let (first, last) = (topology.first_site(), topology.last_site());
        for x in first..last {
            clocks.push((ClockId::edge(x), 1.0));
        }
        let left = 0;
        let right = last + 1;
        match topology {
            Topology::Segment(_) => {
                clocks.push((ClockId { edge: left, kind: ClockKind::Fill }, max.alpha));
                clocks.push((ClockId { edge: left, kind: ClockKind::Clear }, max.gamma));
                clocks.push((ClockId { edge: right, kind: ClockKind::Fill }, max.delta));
                clocks.push((ClockId { edge: right, kind: ClockKind::Clear }, max.beta));
            }
            Topology::HalfLineWindow(_) => {
                clocks.push((ClockId { edge: left, kind: ClockKind::Fill }, max.alpha));
                clocks.push((ClockId { edge: left, kind: ClockKind::Clear }, max.gamma));
                max.delta = 0.0;
                max.beta = 0.0;
            }
            Topology::LineWindow { .. } => {
                max = Rates { alpha: 0.0, gamma: 0.0, delta: 0.0, beta: 0.0 };
            }
        }
        let n = replicas.len();
        let (replicas, params): (Vec<_>, Vec<_>) = replicas.into_iter().unzip();
        Ok(Self {
            topology,
            replicas,
            params,
            max,
            stream: ClockStream::new(seed, clocks),
            time: 0.0,
            censoring: CensoringSchedule::none(),
            changed: vec![false; n],
            counts: vec![BoundaryCounts::default(); n],
            pair: None,
            events: 0,
        })
    }

    /// Single replica on a segment.
    pub fn single(config: Configuration, params: BoundaryParams, seed: u64) -> Result<Self, EngineError> {
        Self::new(config.topology(), vec![(config, params)], seed)
    }

    pub fn apply_censoring(&mut self, schedule: CensoringSchedule) {
        self.censoring = schedule;
    }

    /// Maintain the number of sites where replicas `i` and `j` differ.
    pub fn track_mismatch(&mut self, i: usize, j: usize) {
        let (a, b) = (&self.replicas[i], &self.replicas[j]);
        let count = a.sites().filter(|&x| a.get(x) != b.get(x)).count();
        self.pair = Some((i, j, count));
    }

    pub fn mismatch(&self) -> Option<usize> {
        self.pair.map(|(_, _, c)| c)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn replicas(&self) -> &[Configuration] {
        &self.replicas
    }

    pub fn replica(&self, r: usize) -> &Configuration {
        &self.replicas[r]
    }

    pub fn params(&self, r: usize) -> &BoundaryParams {
        &self.params[r]
    }

    pub fn counts(&self, r: usize) -> BoundaryCounts {
        self.counts[r]
    }

    pub fn changed(&self, r: usize) -> bool {
        self.changed[r]
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    fn boundary_site(&self, edge: i64) -> i64 {
        if edge == 0 {
            self.topology.first_site()
        } else {
            self.topology.last_site()
        }
    }

    fn breach_check(&self, site: i64, time: f64) -> Result<(), EngineError> {
        let near = match self.topology {
            Topology::Segment(_) => false,
            Topology::HalfLineWindow(w) => site >= w as i64 - 1,
            Topology::LineWindow { lo, hi } => site - lo < 2 || hi - site < 2,
        };
        if near {
            Err(EngineError::WindowBreach { time, site })
        } else {
            Ok(())
        }
    }

    /// Apply one event to every replica, honouring censoring at the event time.
    pub fn apply_event(&mut self, event: Event) -> Result<StepReport, EngineError> {
        self.time = self.time.max(event.time);
        self.events += 1;
        self.changed.iter_mut().for_each(|c| *c = false);
        if self.censoring.is_censored(event.clock.edge, event.time) {
            return Ok(StepReport { event, censored: true, any_change: false });
        }
        let u = event.u;
        let (touched_a, touched_b) = match event.clock.kind {
            ClockKind::Edge => (event.clock.edge, event.clock.edge + 1),
            _ => {
                let s = self.boundary_site(event.clock.edge);
                (s, s)
            }
        };
        let before = self.pair_mismatch_at(touched_a, touched_b);
        let mut any = false;
        match event.clock.kind {
            ClockKind::Edge => {
                let x = event.clock.edge;
                for (r, c) in self.replicas.iter_mut().enumerate() {
                    let (a, b) = (c.get(x), c.get(x + 1));
                    if a != b && (a == (u <= self.params[r].p)) {
                        c.set(x, b);
                        c.set(x + 1, a);
                        self.changed[r] = true;
                        any = true;
                    }
                }
            }
            kind => {
                let left = event.clock.edge == 0;
                let fill = kind == ClockKind::Fill;
                let site = touched_a;
                let max = match (left, fill) {
                    (true, true) => self.max.alpha,
                    (true, false) => self.max.gamma,
                    (false, true) => self.max.delta,
                    (false, false) => self.max.beta,
                };
                for (r, c) in self.replicas.iter_mut().enumerate() {
                    let prm = &self.params[r];
                    let rate = match (left, fill) {
                        (true, true) => prm.alpha,
                        (true, false) => prm.gamma,
                        (false, true) => prm.delta,
                        (false, false) => prm.beta,
                    };
                    if u * max < rate && c.get(site) != fill {
                        c.set(site, fill);
                        self.changed[r] = true;
                        any = true;
                        let k = &mut self.counts[r];
                        match (left, fill) {
                            (true, true) => k.entered_left += 1,
                            (true, false) => k.exited_left += 1,
                            (false, true) => k.entered_right += 1,
                            (false, false) => k.exited_right += 1,
                        }
                    }
                }
            }
        }
        if any {
            if let Some(before) = before {
                let after = self.pair_mismatch_at(touched_a, touched_b).unwrap_or(0);
                if let Some((_, _, c)) = self.pair.as_mut() {
                    *c = *c + after - before;
                }
            }
            self.breach_check(touched_a, event.time)?;
            self.breach_check(touched_b, event.time)?;
        }
        Ok(StepReport { event, censored: false, any_change: any })
    }

    fn pair_mismatch_at(&self, a: i64, b: i64) -> Option<usize> {
        let (i, j, _) = self.pair?;
        let (ri, rj) = (&self.replicas[i], &self.replicas[j]);
        let mut n = (ri.get(a) != rj.get(a)) as usize;
        if b != a {
            n += (ri.get(b) != rj.get(b)) as usize;
        }
        Some(n)
    }

    /// Process the next event if it happens by `t_end`; otherwise advance the clock to `t_end`.
    pub fn step_event(&mut self, t_end: f64) -> Result<Option<StepReport>, EngineError> {
        match self.stream.next_before(t_end) {
            Some(ev) => self.apply_event(ev).map(Some),
            None => {
                self.time = self.time.max(t_end);
                Ok(None)
            }
        }
    }

    pub fn step_to(&mut self, t_end: f64) -> Result<(), EngineError> {
        if t_end < self.time {
            return Err(EngineError::TimeReversal { t_end, now: self.time });
        }
        while self.step_event(t_end)?.is_some() {}
        Ok(())
    }

    /// Advance until `stop` returns true after an event, or until `t_end`. Returns the stopping
    /// time if `stop` fired.
    pub fn run_until<F>(&mut self, t_end: f64, mut stop: F) -> Result<Option<f64>, EngineError>
    where
        F: FnMut(&Ensemble, &StepReport) -> bool,
    {
        if t_end < self.time {
            return Err(EngineError::TimeReversal { t_end, now: self.time });
        }
        while let Some(report) = self.step_event(t_end)? {
            if stop(self, &report) {
                return Ok(Some(report.event.time));
            }
        }
        Ok(None)
    }
}
