//! Exact routines checked against brute-force dense computations written independently here.

use std::f64::consts::PI;

use xlab_core::exact::{
    build_generator, max_tv_curve, mixing_time_exact, stationary_exact, stationary_product, tv_curve, tv_distance, wilson_residual,
    DistributionVector, Uniformizer, WilsonVariant,
};
use xlab_core::lattice::height_function;
use xlab_core::{BoundaryParams, Configuration};

fn dense(params: &BoundaryParams, n: usize) -> (usize, Vec<f64>) {
    let g = build_generator(params, n).unwrap();
    (g.dim(), g.to_dense())
}

/// Rates written out from the dynamics, site 1 as the lowest bit.
fn naive_rate(params: &BoundaryParams, n: usize, from: usize, to: usize) -> f64 {
    let bit = |s: usize, x: usize| (s >> (x - 1)) & 1;
    let mut r = 0.0;
    for x in 1..n {
        let (a, b) = (bit(from, x), bit(from, x + 1));
        let swapped = from ^ (1 << (x - 1)) ^ (1 << x);
        if a != b && swapped == to {
            r += if a == 1 { params.p } else { 1.0 - params.p };
        }
    }
    let first = from ^ 1;
    if first == to {
        r += if bit(from, 1) == 0 { params.alpha } else { params.gamma };
    }
    let last = from ^ (1 << (n - 1));
    if last == to {
        r += if bit(from, n) == 0 { params.delta } else { params.beta };
    }
    r
}

#[test]
fn generator_matches_dynamics() {
    let p = BoundaryParams::new(0.7, 0.6, 0.4, 0.1, 0.2).unwrap();
    for n in 1..=5 {
        let (d, g) = dense(&p, n);
        for i in 0..d {
            let mut out = 0.0;
            for j in 0..d {
                if i != j {
                    let naive = if n == 1 {
                        if (i ^ j) == 1 {
                            naive_rate_single(&p, i)
                        } else {
                            0.0
                        }
                    } else {
                        naive_rate(&p, n, i, j)
                    };
                    assert!((g[i * d + j] - naive).abs() < 1e-15, "n={n} {i}->{j}");
                    out += naive;
                }
            }
            assert!((g[i * d + i] + out).abs() < 1e-14);
        }
    }
}

fn naive_rate_single(p: &BoundaryParams, from: usize) -> f64 {
    if from == 0 {
        p.alpha + p.delta
    } else {
        p.gamma + p.beta
    }
}

/// `exp(tG)` by scaling and squaring of a truncated Taylor series.
fn expm(g: &[f64], d: usize, t: f64) -> Vec<f64> {
    let norm = (0..d).map(|i| (0..d).map(|j| (g[i * d + j] * t).abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let h = t / 2f64.powi(squarings);
    let mul = |a: &[f64], b: &[f64]| {
        let mut c = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = a[i * d + k];
                for j in 0..d {
                    c[i * d + j] += aik * b[k * d + j];
                }
            }
        }
        c
    };
    let a: Vec<f64> = g.iter().map(|x| x * h).collect();
    let mut result = vec![0.0; d * d];
    let mut term = vec![0.0; d * d];
    for i in 0..d {
        result[i * d + i] = 1.0;
        term[i * d + i] = 1.0;
    }
    for k in 1..30 {
        term = mul(&term, &a).iter().map(|x| x / k as f64).collect();
        result.iter_mut().zip(&term).for_each(|(r, t)| *r += t);
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

#[test]
fn uniformization_matches_matrix_exponential() {
    let p = BoundaryParams::new(0.8, 0.9, 0.3, 0.2, 0.4).unwrap();
    let n = 4;
    let g = build_generator(&p, n).unwrap();
    let (d, dense_g) = (g.dim(), g.to_dense());
    let u = Uniformizer::new(&g);
    for &t in &[0.1, 1.0, 7.5] {
        let e = expm(&dense_g, d, t);
        for start in [0, 5, d - 1] {
            let mut v = vec![0.0; d];
            v[start] = 1.0;
            let got = u.evolve(&v, t);
            for j in 0..d {
                assert!((got[j] - e[start * d + j]).abs() < 1e-10, "t={t} start={start} j={j}");
            }
        }
    }
}

#[test]
fn stationary_law_solves_balance_equations() {
    let p = BoundaryParams::new(0.65, 0.5, 0.7, 0.25, 0.1).unwrap();
    for n in 2..=7 {
        let (d, g) = dense(&p, n);
        let pi = stationary_exact(&build_generator(&p, n).unwrap()).unwrap();
        assert!(pi.is_valid(1e-12));
        for j in 0..d {
            let flow: f64 = (0..d).map(|i| pi.weights[i] * g[i * d + j]).sum();
            assert!(flow.abs() < 1e-13, "n={n} column {j}");
        }
        // Long-time limit of the semigroup.
        let e = expm(&g, d, 400.0);
        for (x, w) in e.iter().zip(&pi.weights) {
            assert!((x - w).abs() < 1e-9);
        }
    }
}

#[test]
fn uniform_law_on_product_curve() {
    // a = b = 1 at p = 3/4 needs alpha = beta = 1/4.
    let p = BoundaryParams::new(0.75, 0.25, 0.25, 0.0, 0.0).unwrap();
    let pi = stationary_product(&p, 5).unwrap();
    let u = DistributionVector::uniform(5);
    assert!(pi.sup_distance(&u) < 1e-15);
}

#[test]
fn tv_curves_and_mixing_time_against_dense_semigroup() {
    let p = BoundaryParams::new(0.7, 0.5, 0.5, 0.2, 0.1).unwrap();
    let n = 4;
    let g = build_generator(&p, n).unwrap();
    let (d, dense_g) = (g.dim(), g.to_dense());
    let pi = stationary_exact(&g).unwrap().weights;
    let times = [0.5, 2.0, 6.0];
    let worst = max_tv_curve(&g, &times).unwrap();
    let mut init = vec![0.0; d];
    init[d - 1] = 1.0;
    let from_full = tv_curve(&g, &init, &pi, &times);
    for (k, &t) in times.iter().enumerate() {
        let e = expm(&dense_g, d, t);
        let rows: Vec<f64> = (0..d).map(|i| tv_distance(&e[i * d..(i + 1) * d], &pi)).collect();
        let oracle = rows.iter().cloned().fold(0.0, f64::max);
        assert!((worst[k] - oracle).abs() < 1e-10);
        assert!((from_full[k] - rows[d - 1]).abs() < 1e-10);
    }
    let tmix = mixing_time_exact(&g, 0.25).unwrap();
    let at = |t: f64| {
        let e = expm(&dense_g, d, t);
        (0..d).map(|i| tv_distance(&e[i * d..(i + 1) * d], &pi)).fold(0.0, f64::max)
    };
    assert!(at(tmix * (1.0 - 1e-4)) >= 0.25);
    assert!(at(tmix * (1.0 + 1e-4)) < 0.25);
}

#[test]
fn golden_csv_round_trip() {
    let p = BoundaryParams::new(0.6, 0.3, 0.8, 0.1, 0.05).unwrap();
    let pi = stationary_exact(&build_generator(&p, 4).unwrap()).unwrap();
    let text = pi.to_golden_csv();
    assert!(text.starts_with("configuration,weight\n"));
    let back = DistributionVector::from_golden_csv(&text).unwrap();
    assert!(back.sup_distance(&pi) < 1e-16);
    let keys: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

/// Approximate eigenfunction of the symmetric process rebuilt from its defining profile.
fn eigenfunction(params: &BoundaryParams, n: usize, variant: WilsonVariant, lambda: f64) -> impl Fn(usize) -> f64 {
    let (s, t) = (params.alpha + params.gamma, params.beta + params.delta);
    let params = *params;
    match variant {
        WilsonVariant::TwoSided => {
            let c = 1.0 / (2.0 * s) - 0.5;
            let d = 0.5 - 1.0 / (2.0 * t);
            let theta = PI / (n as f64 + c - d);
            let phi: Vec<f64> = (1..=n).map(|x| ((x as f64 + c - 0.5) * theta).sin()).collect();
            let k = -(2.0 * params.alpha * phi[0] + 2.0 * params.delta * phi[n - 1]) / lambda;
            Box::new(move |state: usize| k + (0..n).map(|i| 2.0 * phi[i] * ((state >> i) & 1) as f64).sum::<f64>())
                as Box<dyn Fn(usize) -> f64>
        }
        WilsonVariant::OneSided => {
            let d = 0.5 - 1.0 / (2.0 * t);
            let theta = PI / (2.0 * (n as f64 - d));
            let mut psi: Vec<f64> = (0..=n).map(|x| (x as f64 * theta).sin()).collect();
            psi[n] = psi[n - 1] / (t - lambda);
            let k = -psi[n] * (params.delta - params.beta) / lambda;
            Box::new(move |state: usize| {
                let h = height_function(&Configuration::from_index(n, state)).unwrap().values;
                k + (1..n).map(|x| 2.0 * psi[x] * h[x] as f64).sum::<f64>() + psi[n] * h[n] as f64
            })
        }
    }
}

fn wilson_oracle(params: &BoundaryParams, n: usize, variant: WilsonVariant) {
    let cert = wilson_residual(params, n, variant).unwrap();
    let f = eigenfunction(params, n, variant, cert.lambda);
    let (d, g) = dense(params, n);
    let values: Vec<f64> = (0..d).map(&f).collect();
    let mut residual: f64 = 0.0;
    let mut quad: f64 = 0.0;
    for i in 0..d {
        let lf: f64 = (0..d).map(|j| g[i * d + j] * values[j]).sum();
        residual = residual.max((lf + cert.lambda * values[i]).abs());
        let qv: f64 = (0..d).filter(|&j| j != i).map(|j| g[i * d + j] * (values[j] - values[i]).powi(2)).sum();
        quad = quad.max(qv);
    }
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-11 * sup.max(1.0);
    assert!(residual <= cert.c + tol, "{variant:?} n={n}: residual {residual} above c {}", cert.c);
    assert!((residual - cert.c).abs() <= tol, "{variant:?} n={n}: c {} is not attained ({residual})", cert.c);
    assert!(quad <= cert.r + tol, "{variant:?} n={n}: quadratic variation {quad} above R {}", cert.r);
    assert!((sup - cert.f_inf).abs() <= tol, "{variant:?} n={n}: sup {sup} vs {}", cert.f_inf);
}

#[test]
fn wilson_certificate_matches_brute_force_two_sided() {
    for params in [BoundaryParams::new(0.5, 0.7, 0.4, 0.2, 0.3).unwrap(), BoundaryParams::new(0.5, 1.5, 0.2, 0.0, 0.9).unwrap()] {
        for n in 3..=9 {
            wilson_oracle(&params, n, WilsonVariant::TwoSided);
        }
    }
}

#[test]
fn wilson_certificate_matches_brute_force_one_sided() {
    for params in [BoundaryParams::new(0.5, 0.0, 0.6, 0.0, 0.3).unwrap(), BoundaryParams::new(0.5, 0.0, 2.0, 0.0, 0.5).unwrap()] {
        for n in 3..=9 {
            wilson_oracle(&params, n, WilsonVariant::OneSided);
        }
    }
}
