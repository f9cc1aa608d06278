use proptest::prelude::*;

use xlab_core::engine::{order_preservation_run, CensoringSchedule, ClockId, ClockKind, Ensemble, Event, OrderKind};
use xlab_core::lattice::{compare_componentwise, height_meet_join, CensoredEdges};
use xlab_core::{BoundaryParams, Configuration, Topology};

fn config(bits: &[bool]) -> Configuration {
    let raw: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
    Configuration::from_bits(Topology::Segment(bits.len()), &raw)
}

fn bits_and_twin(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    n.prop_flat_map(|n| (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n)))
}

fn rate() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.05f64..2.0]
}

fn open_params() -> impl Strategy<Value = BoundaryParams> {
    (0.5f64..=1.0, 0.1f64..2.0, 0.1f64..2.0, rate(), rate()).prop_map(|(p, a, b, g, d)| BoundaryParams::new(p, a, b, g, d).unwrap())
}

fn run(ens: &mut Ensemble, t: f64) -> Vec<Vec<u8>> {
    let mut states = Vec::new();
    while ens.step_event(t).unwrap().is_some() {
        states.push(ens.replica(0).bits());
    }
    states
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn componentwise_order_survives_monotone_rates(
        (a, b) in bits_and_twin(2..24),
        lower in open_params(),
        extra in (0.0f64..1.0, 0.0f64..1.0),
        seed in any::<u64>(),
    ) {
        let (top, bottom): (Vec<bool>, Vec<bool>) = a.iter().zip(&b).map(|(&x, &y)| (x | y, x & y)).unzip();
        // More entry, less exit on both ends for the upper replica.
        let upper = BoundaryParams::new(
            lower.p,
            lower.alpha + extra.0,
            (lower.beta - extra.1).max(0.0),
            (lower.gamma - extra.1).max(0.0),
            lower.delta + extra.0,
        ).unwrap();
        let out = order_preservation_run((config(&top), upper), (config(&bottom), lower), OrderKind::Componentwise, 30.0, seed).unwrap();
        prop_assert_eq!(out.violations, 0);
    }

    #[test]
    fn height_order_survives_closed_left_end(
        (a, b) in bits_and_twin(2..20),
        p in 0.5f64..=1.0,
        dp in 0.0f64..0.5,
        beta in 0.1f64..2.0,
        delta in 0.0f64..2.0,
        shift in (0.0f64..1.0, 0.0f64..1.0),
        seed in any::<u64>(),
    ) {
        let (lo, hi) = height_meet_join(&config(&a), &config(&b)).unwrap();
        let upper = BoundaryParams::new(p, 0.0, beta, 0.0, delta + shift.0).unwrap();
        let lower = BoundaryParams::new((p + dp).min(1.0), 0.0, beta + shift.1, 0.0, delta).unwrap();
        let out = order_preservation_run((hi, upper), (lo, lower), OrderKind::Height, 30.0, seed).unwrap();
        prop_assert_eq!(out.violations, 0);
    }

    #[test]
    fn closed_segment_conserves_particles(bits in prop::collection::vec(any::<bool>(), 1..40), p in 0.5f64..=1.0, seed in any::<u64>()) {
        let start = config(&bits);
        let mut ens = Ensemble::new(start.topology(), vec![(start.clone(), BoundaryParams::closed(p).unwrap())], seed).unwrap();
        while ens.step_event(20.0).unwrap().is_some() {
            prop_assert_eq!(ens.replica(0).particle_count(), start.particle_count());
        }
        prop_assert!(ens.events_processed() > 0 || bits.len() == 1);
    }

    #[test]
    fn open_segment_balances_currents(bits in prop::collection::vec(any::<bool>(), 1..30), params in open_params(), seed in any::<u64>()) {
        let start = config(&bits);
        let mut ens = Ensemble::single(start.clone(), params, seed).unwrap();
        ens.step_to(25.0).unwrap();
        let k = ens.counts(0);
        let net = k.left_current() + k.right_current();
        prop_assert_eq!(ens.replica(0).particle_count() as i64, start.particle_count() as i64 + net);
    }

    #[test]
    fn replica_path_does_not_depend_on_companions(
        (a, b) in bits_and_twin(2..24),
        params in open_params(),
        companions in 0usize..4,
        seed in any::<u64>(),
    ) {
        let mut alone = Ensemble::single(config(&a), params, seed).unwrap();
        alone.step_to(15.0).unwrap();
        let mut replicas = vec![(config(&a), params)];
        replicas.extend((0..companions).map(|_| (config(&b), params)));
        let mut crowd = Ensemble::new(Topology::Segment(a.len()), replicas, seed).unwrap();
        crowd.step_to(15.0).unwrap();
        prop_assert_eq!(alone.replica(0), crowd.replica(0));
        prop_assert_eq!(alone.counts(0), crowd.counts(0));
    }

    #[test]
    fn censoring_silent_clocks_changes_nothing(bits in prop::collection::vec(any::<bool>(), 2..24), p in 0.5f64..=1.0, beta in 0.1f64..2.0, seed in any::<u64>()) {
        // The left reservoir never rings, and the second piece starts after the horizon.
        let params = BoundaryParams::new(p, 0.0, beta, 0.0, 0.3).unwrap();
        let mut plain = Ensemble::single(config(&bits), params, seed).unwrap();
        let mut censored = Ensemble::single(config(&bits), params, seed).unwrap();
        let mut schedule = CensoringSchedule::from_edges([0]);
        schedule.push(50.0, CensoredEdges { edges: [1].into_iter().collect(), ..Default::default() }).unwrap();
        censored.apply_censoring(schedule);
        prop_assert_eq!(run(&mut plain, 20.0), run(&mut censored, 20.0));
    }

    #[test]
    fn checkpoint_resume_matches_uninterrupted(
        (a, b) in bits_and_twin(2..24),
        params in open_params(),
        split in 0.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let replicas = vec![(config(&a), params), (config(&b), params)];
        let mut whole = Ensemble::new(Topology::Segment(a.len()), replicas.clone(), seed).unwrap();
        whole.track_mismatch(0, 1);
        whole.step_to(10.0).unwrap();

        let mut first = Ensemble::new(Topology::Segment(a.len()), replicas, seed).unwrap();
        first.track_mismatch(0, 1);
        first.step_to(split).unwrap();
        let mut bytes = Vec::new();
        first.write_checkpoint(&mut bytes).unwrap();
        let mut resumed = Ensemble::read_checkpoint(bytes.as_slice()).unwrap();
        resumed.step_to(10.0).unwrap();

        prop_assert_eq!(whole.replicas(), resumed.replicas());
        prop_assert_eq!(whole.counts(1), resumed.counts(1));
        prop_assert_eq!(whole.events_processed(), resumed.events_processed());
        prop_assert_eq!(whole.mismatch(), resumed.mismatch());
    }

    #[test]
    fn mirrored_process_reverses_the_current(bits in prop::collection::vec(any::<bool>(), 2..20), params in open_params(), seed in any::<u64>()) {
        let n = bits.len() as i64;
        let start = config(&bits);
        let image: Vec<bool> = bits.iter().rev().map(|b| !b).collect();
        let mut forward = Ensemble::single(start, params, seed).unwrap();
        let mut mirror = Ensemble::single(config(&image), params.particle_hole_mirror(), 0).unwrap();
        while let Some(report) = forward.step_event(20.0).unwrap() {
            let ev = report.event;
            let clock = match ev.clock.kind {
                ClockKind::Edge => ClockId::edge(n - ev.clock.edge),
                ClockKind::Fill => ClockId { edge: n + 1 - ev.clock.edge, kind: ClockKind::Clear },
                ClockKind::Clear => ClockId { edge: n + 1 - ev.clock.edge, kind: ClockKind::Fill },
            };
            mirror.apply_event(Event { time: ev.time, clock, u: ev.u }).unwrap();
            let expect: Vec<u8> = forward.replica(0).bits().iter().rev().map(|b| 1 - b).collect();
            prop_assert_eq!(mirror.replica(0).bits(), expect);
        }
        prop_assert_eq!(forward.counts(0).left_current(), -mirror.counts(0).right_current());
        prop_assert_eq!(forward.counts(0).right_current(), -mirror.counts(0).left_current());
    }
}

#[test]
fn same_seed_same_path() {
    let params = BoundaryParams::new(0.8, 0.4, 0.7, 0.1, 0.05).unwrap();
    let start = Configuration::empty(Topology::Segment(50));
    let mut a = Ensemble::single(start.clone(), params, 99).unwrap();
    let mut b = Ensemble::single(start, params, 99).unwrap();
    assert_eq!(run(&mut a, 40.0), run(&mut b, 40.0));
    assert_eq!(a.counts(0), b.counts(0));
}

#[test]
fn componentwise_join_is_an_upper_bound() {
    let a = config(&[true, false, true, false]);
    let b = config(&[false, false, true, true]);
    let join = config(&[true, false, true, true]);
    assert!(compare_componentwise(&join, &a).unwrap().is_ge());
    assert!(compare_componentwise(&join, &b).unwrap().is_ge());
}
