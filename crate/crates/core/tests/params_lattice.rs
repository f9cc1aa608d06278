use proptest::prelude::*;

use xlab_core::engine::Ensemble;
use xlab_core::exact::{build_generator, stationary_exact};
use xlab_core::lattice::{compare_height, height_function, height_meet_join};
use xlab_core::observables::{measure_flux, CurrentRecord};
use xlab_core::params::{beta_for_b, classify_phase, compute_a, compute_b, theoretical_flux};
use xlab_core::{BoundaryParams, Configuration, Phase, Topology};

fn segment(bits: &[bool]) -> Configuration {
    let raw: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
    Configuration::from_bits(Topology::Segment(bits.len()), &raw)
}

/// Stationary current through the left reservoir, computed from the exact law.
fn exact_flux(params: &BoundaryParams, n: usize) -> (f64, Vec<f64>) {
    let pi = stationary_exact(&build_generator(params, n).unwrap()).unwrap().weights;
    let occupied = |s: usize, x: usize| (s >> (x - 1)) & 1 == 1;
    let left: f64 = pi.iter().enumerate().map(|(s, w)| w * if occupied(s, 1) { -params.gamma } else { params.alpha }).sum();
    let bulk = (1..n)
        .map(|x| {
            pi.iter()
                .enumerate()
                .map(|(s, w)| match (occupied(s, x), occupied(s, x + 1)) {
                    (true, false) => w * params.p,
                    (false, true) => -w * (1.0 - params.p),
                    _ => 0.0,
                })
                .sum()
        })
        .collect();
    (left, bulk)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn boundary_quantity_solves_its_quadratic(p in 0.5f64..=1.0, rate_in in 0.01f64..5.0, rate_out in 0.0f64..5.0) {
        let params = BoundaryParams::new(p, rate_in, rate_in, rate_out, rate_out).unwrap();
        let s = 2.0 * p - 1.0 - rate_in + rate_out;
        for x in [compute_a(&params).unwrap(), compute_b(&params).unwrap()] {
            prop_assert!(x >= 0.0);
            let residual = rate_in * x * x - s * x - rate_out;
            prop_assert!(residual.abs() < 1e-9 * (1.0 + rate_in * x * x + rate_out), "{residual}");
        }
    }

    #[test]
    fn mirror_swaps_the_two_ends(p in 0.5f64..=1.0, a in 0.05f64..3.0, b in 0.05f64..3.0, g in 0.0f64..2.0, d in 0.0f64..2.0) {
        let params = BoundaryParams::new(p, a, b, g, d).unwrap();
        let m = params.particle_hole_mirror();
        prop_assert_eq!(m.particle_hole_mirror(), params);
        let (ph, mh) = (classify_phase(&params), classify_phase(&m));
        prop_assert_eq!(ph.a, mh.b);
        prop_assert_eq!(ph.b, mh.a);
        let swapped = match ph.phase {
            Phase::LowDensity => Phase::HighDensity,
            Phase::HighDensity => Phase::LowDensity,
            other => other,
        };
        prop_assert_eq!(mh.phase, swapped);
        if let (Ok(x), Ok(y)) = (theoretical_flux(&ph, p), theoretical_flux(&mh, p)) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn beta_for_b_inverts(p in 0.55f64..=1.0, target in 0.1f64..10.0, delta in 0.0f64..1.0) {
        let beta = beta_for_b(target, p, delta).unwrap();
        let params = BoundaryParams::new(p, 1.0, beta, 0.0, delta).unwrap();
        prop_assert!((compute_b(&params).unwrap() - target).abs() < 1e-8 * target.max(1.0));
    }

    #[test]
    fn height_walk_is_a_closed_bridge(bits in prop::collection::vec(any::<bool>(), 1..64)) {
        let h = height_function(&segment(&bits)).unwrap().values;
        prop_assert_eq!(h.len(), 2 * bits.len() + 1);
        prop_assert_eq!(h[0], 0);
        prop_assert_eq!(*h.last().unwrap(), 0);
        prop_assert!(h.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
        // Mirror symmetry of the second half.
        let n = bits.len();
        for x in 0..=n {
            prop_assert_eq!(h[x], h[2 * n - x]);
        }
    }

    #[test]
    fn meet_and_join_bracket_both(a in prop::collection::vec(any::<bool>(), 1..40), seed in any::<u64>()) {
        let b: Vec<bool> = a.iter().enumerate().map(|(i, _)| (seed >> (i % 64)) & 1 == 1).collect();
        let (x, y) = (segment(&a), segment(&b));
        let (meet, join) = height_meet_join(&x, &y).unwrap();
        for c in [&x, &y] {
            prop_assert!(compare_height(&join, c).unwrap().is_ge());
            prop_assert!(compare_height(c, &meet).unwrap().is_ge());
        }
        let (hx, hy, hm, hj) = (
            height_function(&x).unwrap().values,
            height_function(&y).unwrap().values,
            height_function(&meet).unwrap().values,
            height_function(&join).unwrap().values,
        );
        for i in 0..=a.len() {
            prop_assert_eq!(hm[i], hx[i].min(hy[i]));
            prop_assert_eq!(hj[i], hx[i].max(hy[i]));
        }
    }

    #[test]
    fn index_round_trip(n in 1usize..20, raw in any::<u32>()) {
        let index = raw as usize & ((1 << n) - 1);
        let c = Configuration::from_index(n, index);
        prop_assert_eq!(c.index(), index);
        prop_assert_eq!(c.particle_count(), index.count_ones() as usize);
    }
}

#[test]
fn exact_current_is_the_same_across_every_edge() {
    let params = BoundaryParams::new(0.8, 0.5, 0.3, 0.1, 0.2).unwrap();
    for n in 2..=8 {
        let (left, bulk) = exact_flux(&params, n);
        for j in bulk {
            assert!((j - left).abs() < 1e-12, "n={n}: {j} vs {left}");
        }
    }
}

#[test]
fn exact_current_matches_formula_on_product_curve() {
    // On a b = 1 the law is a Bernoulli product at every size, so the flux holds exactly.
    let p = 0.75;
    for (alpha, gamma, a) in [(0.25, 0.0, 1.0), (0.4, 0.05, 0.0), (0.1, 0.02, 0.0)] {
        let mut params = BoundaryParams::new(p, alpha, 1.0, gamma, 0.0).unwrap();
        let a = if a == 0.0 { compute_a(&params).unwrap() } else { a };
        params.beta = beta_for_b(1.0 / a, p, 0.0).unwrap();
        let ph = classify_phase(&params);
        let rho = 1.0 / (1.0 + a);
        for n in [3, 6] {
            let (left, _) = exact_flux(&params, n);
            assert!((left - (2.0 * p - 1.0) * rho * (1.0 - rho)).abs() < 1e-10, "a={a} n={n}");
            if a >= 1.0 {
                assert!((left - theoretical_flux(&ph, p).unwrap()).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn simulated_flux_agrees_with_exact_small_segment() {
    let params = BoundaryParams::new(0.7, 0.6, 0.4, 0.1, 0.2).unwrap();
    let n = 5;
    let (exact, _) = exact_flux(&params, n);
    let mut ens = Ensemble::single(Configuration::empty(Topology::Segment(n)), params, 17).unwrap();
    let horizon = 4.0e4;
    let rec = CurrentRecord::record(&mut ens, 0, horizon, 5.0).unwrap();
    let est = measure_flux(&rec, horizon).unwrap();
    assert!((est.j_hat - exact).abs() < 4.0 * est.stderr, "{} +- {} vs {exact}", est.j_hat, est.stderr);
}
