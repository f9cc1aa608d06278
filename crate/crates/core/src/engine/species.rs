use serde::{Deserialize, Serialize};

use super::{ClockKind, EngineError, Ensemble, StepReport};
use crate::lattice::{Configuration, Label, LatticeError, MultiSpeciesConfiguration, SecondType, Topology};
use crate::params::{beta_for_b, BoundaryParams, Phase};

/// Labels of coupled component replicas. With two components the labels are the plain
/// disagreement; with four they are the typed labels of the four-process coupling.
fn labels_from(ens: &Ensemble, site: i64) -> Result<Label, LatticeError> {
    let reps = ens.replicas();
    if reps.len() == 2 {
        return match (reps[0].get(site), reps[1].get(site)) {
            (true, true) => Ok(Label::First),
            (false, false) => Ok(Label::Empty),
            (true, false) => Ok(Label::Second(SecondType::Untyped)),
            (false, true) => Err(LatticeError::UntypedSecond(site)),
        };
    }
    let bits = [reps[0].get(site), reps[1].get(site), reps[2].get(site), reps[3].get(site)];
    Label::from_component_bits(bits).ok_or(LatticeError::UntypedSecond(site))
}

/// Multi-species process driven through the grand coupling. Edge updates use the direct
/// priority rule on labels; boundary updates read the labels off the component replicas.
/// Both views are kept and checked against each other.
pub struct SpeciesEnsemble {
    ens: Ensemble,
    labels: MultiSpeciesConfiguration,
    /// Second-class particles that left through site 1, in exit order; `true` for types four
    /// and five.
    pub left_exits: Vec<bool>,
    /// Typed second-class particles that left through site N.
    pub right_exits: Vec<SecondType>,
}

impl SpeciesEnsemble {
    /// `components` must be ordered so that every site maps to a label: two replicas
    /// `upper >= lower`, or the four replicas `(from full, from empty, stationary, stationary
    /// with faster exit)`.
    pub fn new(components: Vec<(Configuration, BoundaryParams)>, seed: u64) -> Result<Self, EngineError> {
        let topology = components[0].0.topology();
        let ens = Ensemble::new(topology, components, seed)?;
        let mut sites = Vec::with_capacity(topology.len());
        for x in topology.first_site()..=topology.last_site() {
            sites.push(labels_from(&ens, x)?);
        }
        let labels = MultiSpeciesConfiguration::new(topology, sites);
        Ok(Self { ens, labels, left_exits: Vec::new(), right_exits: Vec::new() })
    }

    pub fn labels(&self) -> &MultiSpeciesConfiguration {
        &self.labels
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ens
    }

    pub fn ensemble_mut(&mut self) -> &mut Ensemble {
        &mut self.ens
    }

    pub fn time(&self) -> f64 {
        self.ens.time()
    }

    fn update_labels(&mut self, report: &StepReport) -> Result<(), EngineError> {
        if report.censored {
            return Ok(());
        }
        let ev = report.event;
        match ev.clock.kind {
            ClockKind::Edge => {
                let x = ev.clock.edge;
                let p = self.ens.params(0).p;
                let (l, r) = Label::edge_update(self.labels.get(x), self.labels.get(x + 1), ev.u, p);
                for (site, label) in [(x, l), (x + 1, r)] {
                    let from_components = labels_from(&self.ens, site)?;
                    let consistent =
                        from_components == label || (from_components == Label::First && label == Label::Second(SecondType::Five));
                    if !consistent {
                        return Err(EngineError::OrderLost { time: ev.time });
                    }
                    self.labels.set(site, label);
                }
            }
            _ => {
                let site = if ev.clock.edge == 0 { self.labels.topology.first_site() } else { self.labels.topology.last_site() };
                let old = self.labels.get(site);
                let fresh = labels_from(&self.ens, site)?;
                let bits_same = old.component_bits().is_some() && old.component_bits() == fresh.component_bits();
                // A ring that leaves every component unchanged keeps the label, type five included.
                let new = if bits_same || (old == fresh) { old } else { fresh };
                if new != old {
                    if let Label::Second(t) = old {
                        if ev.clock.edge == 0 {
                            self.left_exits.push(matches!(t, SecondType::Four | SecondType::Five));
                        } else if new == Label::Empty {
                            self.right_exits.push(t);
                        }
                    }
                }
                self.labels.set(site, new);
            }
        }
        Ok(())
    }

    /// Process one event; returns `None` once `t_end` is reached.
    pub fn step_event(&mut self, t_end: f64) -> Result<Option<StepReport>, EngineError> {
        let report = self.ens.step_event(t_end)?;
        if let Some(r) = &report {
            self.update_labels(r)?;
        }
        Ok(report)
    }

    pub fn step_to(&mut self, t_end: f64) -> Result<(), EngineError> {
        while self.step_event(t_end)?.is_some() {}
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourProcessSummary {
    pub n: usize,
    pub beta_prime: f64,
    /// First time the net second-class current at site 1 drops below `-4N`.
    pub hit_time: Option<f64>,
    /// Whether the extremal pair had coupled at `hit_time`.
    pub coupled_at_hit: bool,
    /// Currents of empty sites, first- and second-class particles at site 1, at the end.
    pub currents: [i64; 3],
    /// `J0 + J1 + J2 == 0` after every event.
    pub currents_balanced: bool,
    /// The second-class current never increased.
    pub second_class_current_monotone: bool,
    pub events: u64,
}

/// Four coupled processes: from full, from empty, and two ordered stationary copies whose exit
/// rates are `beta < beta_prime`. Stationarity of the last two is approximated by a coupled
/// burn-in from the full configuration.
pub struct FourProcess {
    species: SpeciesEnsemble,
    n: usize,
    beta_prime: f64,
    currents: [i64; 3],
}

/// Disagreement value of the stationary pair at a site: 0 empty, 1 particle, 2 second class.
fn zeta_value(ens: &Ensemble, site: i64) -> usize {
    match (ens.replica(2).get(site), ens.replica(3).get(site)) {
        (false, false) => 0,
        (true, true) => 1,
        _ => 2,
    }
}

impl FourProcess {
    /// `b_prime` must lie strictly between `max(a, 1)` and `b`; pass `None` to take the midpoint.
    pub fn new(params: BoundaryParams, n: usize, b_prime: Option<f64>, burn_in: f64, seed: u64) -> Result<Self, EngineError> {
        let phase = params.phase();
        if phase.phase != Phase::HighDensity {
            return Err(EngineError::PhaseMismatch(format!("need high density, got {:?}", phase.phase)));
        }
        let b = phase.b.expect("high density has b");
        let a_hat = phase.a.unwrap_or(0.0).max(1.0);
        let b_prime = b_prime.unwrap_or(0.5 * (a_hat + b));
        if !(b_prime > a_hat && b_prime < b) {
            return Err(EngineError::PhaseMismatch(format!("b'={b_prime} not in ({a_hat}, {b})")));
        }
        let beta_prime =
            beta_for_b(b_prime, params.p, params.delta).ok_or_else(|| EngineError::PhaseMismatch("no beta' for requested b'".into()))?;
        let faster = BoundaryParams { beta: beta_prime, ..params };
        let t = Topology::Segment(n);

        let mut burn =
            Ensemble::new(t, vec![(Configuration::full(t), params), (Configuration::full(t), faster)], seed ^ 0x9e37_79b9_7f4a_7c15)?;
        burn.step_to(burn_in)?;
        let (s3, s4) = (burn.replica(0).clone(), burn.replica(1).clone());

        let components = vec![(Configuration::full(t), params), (Configuration::empty(t), params), (s3, params), (s4, faster)];
        let mut species = SpeciesEnsemble::new(components, seed)?;
        species.ensemble_mut().track_mismatch(0, 1);
        Ok(Self { species, n, beta_prime, currents: [0; 3] })
    }

    pub fn species(&self) -> &SpeciesEnsemble {
        &self.species
    }

    pub fn currents(&self) -> [i64; 3] {
        self.currents
    }

    /// Run until `-J2 > 4N` or `horizon`.
    pub fn run(&mut self, horizon: f64) -> Result<FourProcessSummary, EngineError> {
        let mut balanced = true;
        let mut monotone = true;
        let mut hit_time = None;
        let mut coupled_at_hit = false;
        let threshold = 4 * self.n as i64;
        loop {
            let before = zeta_value(self.species.ensemble(), 1);
            let Some(report) = self.species.step_event(horizon)? else { break };
            let ev = report.event;
            if !report.censored && ev.clock.edge == 0 && ev.clock.kind != ClockKind::Edge {
                let after = zeta_value(self.species.ensemble(), 1);
                if after != before {
                    let j2_before = self.currents[2];
                    self.currents[before] -= 1;
                    self.currents[after] += 1;
                    monotone &= self.currents[2] <= j2_before;
                }
            }
            balanced &= self.currents.iter().sum::<i64>() == 0;
            if -self.currents[2] > threshold {
                hit_time = Some(ev.time);
                coupled_at_hit = self.species.ensemble().mismatch() == Some(0);
                break;
            }
        }
        Ok(FourProcessSummary {
            n: self.n,
            beta_prime: self.beta_prime,
            hit_time,
            coupled_at_hit,
            currents: self.currents,
            currents_balanced: balanced,
            second_class_current_monotone: monotone,
            events: self.species.ensemble().events_processed(),
        })
    }
}
