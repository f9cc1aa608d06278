use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{farm, mean_se, ExperimentSpec, HarnessError, Metric, Result, Series};
use crate::engine::{
    confinement_exit_time, coupling_time, order_preservation_run, run_halfline, CensoringSchedule, CouplingOutcome, Ensemble, FourProcess,
    OrderKind,
};
use crate::exact::{
    adjoint_and_symmetrize, build_generator, censoring_check, detailed_balance_residual, diaconis_bound_check, kac_check,
    mixing_time_exact, stationary_exact, stationary_product, stationary_reversible, wilson_lower_bound, wilson_residual, WilsonVariant,
};
use crate::lattice::{height_meet_join, CensoredEdges, Configuration, Topology};
use crate::observables::{measure_flux, shock_front_run, CurrentRecord};
use crate::params::{beta_for_b, cutoff_constant, reverse_bias_rate, theoretical_flux, BoundaryParams, Phase};

type Output = (Vec<Metric>, Vec<Series>);

pub(super) fn dispatch(spec: &ExperimentSpec) -> Result<Output> {
    match spec.preset.as_str() {
        "product-measure" => product_measure(spec),
        "reversible-measure" => reversible_measure(spec),
        "flux-phase-sweep" => flux_phase_sweep(spec),
        "halfline-current" => halfline_current(spec),
        "cutoff-one-blocked" => cutoff_one_blocked(spec),
        "shock-front" => shock_front(spec),
        "reverse-bias-scaling" => reverse_bias_scaling(spec),
        "wilson-bounds" => wilson_bounds(spec),
        "triple-point-bound" => triple_point_bound(spec),
        "monotone-coupling" => monotone_coupling(spec),
        "censoring" => censoring(spec),
        "blocking-confinement" => blocking_confinement(spec),
        "kac-return" => kac_return(spec),
        "four-process" => four_process(spec),
        other => Err(HarnessError::UnknownPreset(other.to_string())),
    }
}

fn bp(p: f64, alpha: f64, beta: f64, gamma: f64, delta: f64) -> BoundaryParams {
    BoundaryParams { p, alpha, beta, gamma, delta }
}

fn params_row(p: &BoundaryParams) -> Vec<f64> {
    vec![p.p, p.alpha, p.beta, p.gamma, p.delta]
}

const PARAM_HEADER: [&str; 5] = ["p", "alpha", "beta", "gamma", "delta"];

fn params_series(name: &str, families: &[BoundaryParams]) -> Series {
    let mut header = vec!["family"];
    header.extend(PARAM_HEADER);
    let mut s = Series::new(name, &header);
    for (k, f) in families.iter().enumerate() {
        let mut row = vec![k as f64];
        row.extend(params_row(f));
        s.push(row);
    }
    s
}

/// Parameters on the curve `a b = 1`, solving for `beta`.
fn on_product_curve(p: f64, alpha: f64, gamma: f64, delta: f64) -> Result<BoundaryParams> {
    let a = bp(p, alpha, 1.0, gamma, delta).a()?;
    let beta = beta_for_b(1.0 / a, p, delta).ok_or_else(|| HarnessError::BadSpec(format!("no beta with b = 1/{a}")))?;
    Ok(bp(p, alpha, beta, gamma, delta))
}

fn product_measure(spec: &ExperimentSpec) -> Result<Output> {
    let families = match spec.params {
        Some(p) => vec![p],
        None => [(0.75, 0.25, 0.0, 0.0), (0.75, 0.6, 0.1, 0.05), (0.9, 0.3, 0.05, 0.2), (0.6, 1.0, 0.2, 0.1), (1.0, 0.4, 0.0, 0.0)]
            .iter()
            .map(|&(p, a, g, d)| on_product_curve(p, a, g, d))
            .collect::<Result<_>>()?,
    };
    let mut table = Series::new("product_measure", &["family", "n", "sup_distance"]);
    let mut metrics = Vec::new();
    for (k, prm) in families.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for &n in &spec.sizes {
            let exact = stationary_exact(&build_generator(prm, n)?)?;
            let d = exact.sup_distance(&stationary_product(prm, n)?);
            table.push(vec![k as f64, n as f64, d]);
            worst = worst.max(d);
        }
        metrics.push(Metric::check(1, format!("sup_distance.family{k}"), worst, worst <= 1e-10).with_target(1e-10));
    }
    Ok((metrics, vec![params_series("families", &families), table]))
}

fn reversible_measure(spec: &ExperimentSpec) -> Result<Output> {
    let families = match spec.params {
        Some(p) => vec![p],
        None => vec![bp(0.75, 0.0, 0.6, 0.0, 0.3), bp(0.6, 0.0, 1.0, 0.0, 0.5), bp(0.9, 0.0, 0.2, 0.0, 1.0)],
    };
    let mut table = Series::new("reversible_measure", &["family", "n", "detailed_balance", "sup_distance"]);
    let mut metrics = Vec::new();
    for (k, prm) in families.iter().enumerate() {
        let (mut db, mut sup): (f64, f64) = (0.0, 0.0);
        for &n in &spec.sizes {
            let g = build_generator(prm, n)?;
            let exact = stationary_exact(&g)?;
            let rev = stationary_reversible(prm, n)?;
            let r = detailed_balance_residual(&g, &exact.weights);
            let d = exact.sup_distance(&rev);
            table.push(vec![k as f64, n as f64, r, d]);
            db = db.max(r);
            sup = sup.max(d);
        }
        metrics.push(Metric::check(2, format!("detailed_balance.family{k}"), db, db <= 1e-12).with_target(1e-12));
        metrics.push(Metric::check(2, format!("sup_distance.family{k}"), sup, sup <= 1e-10).with_target(1e-10));
    }
    Ok((metrics, vec![params_series("families", &families), table]))
}

fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::LowDensity => "low-density",
        Phase::HighDensity => "high-density",
        Phase::MaxCurrent => "max-current",
        Phase::TriplePoint => "triple-point",
        Phase::CoexistenceLine => "coexistence",
        Phase::OneBlockedEntry => "one-blocked",
        Phase::ReverseBias => "reverse-bias",
        Phase::SymmetricBulk => "symmetric",
    }
}

fn flux_phase_sweep(spec: &ExperimentSpec) -> Result<Output> {
    let sets = match spec.params {
        Some(p) => vec![p],
        None => [0.75, 1.0]
            .iter()
            .flat_map(|&p| {
                let drift = 2.0 * p - 1.0;
                // a = 3 on the small entry side; b = 0 or a = 0 on the other.
                [bp(p, drift / 4.0, drift, 0.0, 0.0), bp(p, drift, drift / 4.0, 0.0, 0.0), bp(p, drift, drift, 0.0, 0.0)]
            })
            .collect(),
    };
    let horizon = spec.horizon;
    let dt = horizon / 2000.0;
    let mut table = Series::new("flux", &["n", "p", "alpha", "beta", "gamma", "delta", "j_theory", "j_hat", "stderr"]);
    let mut metrics = Vec::new();
    for &n in &spec.sizes {
        for (k, prm) in sets.iter().enumerate() {
            let phase = prm.phase();
            let target = theoretical_flux(&phase, prm.p)?;
            let runs = farm(spec, &format!("n{n}/set{k}"), spec.replicas, |_, seed| {
                let mut ens = Ensemble::single(Configuration::empty(Topology::Segment(n)), *prm, seed)?;
                let rec = CurrentRecord::record(&mut ens, 0, horizon, dt)?;
                Ok(measure_flux(&rec, horizon)?)
            })?;
            let (j_hat, stderr) =
                if runs.len() == 1 { (runs[0].j_hat, runs[0].stderr) } else { mean_se(&runs.iter().map(|r| r.j_hat).collect::<Vec<_>>()) };
            let rel = (j_hat - target).abs() / target;
            let mut row = vec![n as f64];
            row.extend(params_row(prm));
            row.extend([target, j_hat, stderr]);
            table.push(row);
            let name = format!("flux.{}.p{}.N{n}", phase_name(phase.phase), prm.p);
            metrics.push(Metric::check(3, name, j_hat, rel <= 0.05).with_target(target).with_stderr(stderr));
        }
    }
    Ok((metrics, vec![table]))
}

fn halfline_current(spec: &ExperimentSpec) -> Result<Output> {
    let p = spec.params.map_or(spec.option("p", 0.75), |q| q.p);
    let drift = 2.0 * p - 1.0;
    if drift <= 0.0 {
        return Err(HarnessError::BadSpec(format!("half-line current needs p > 1/2, got {p}")));
    }
    // Entry rates (alpha, gamma) and the resulting a.
    let entries: Vec<(f64, f64, f64)> = match spec.params {
        Some(q) => vec![(q.alpha, q.gamma, q.a()?)],
        None => [0.5, 1.0, 2.0].iter().map(|&a| (drift / (1.0 + a), 0.0, a)).collect(),
    };
    let horizon = spec.horizon;
    let mut table = Series::new("halfline_current", &["window", "a", "target", "value", "stderr"]);
    let mut metrics = Vec::new();
    for &w in &spec.sizes {
        for &(alpha, gamma, a) in &entries {
            let m = a.max(1.0);
            let target = drift * m / ((m + 1.0) * (m + 1.0));
            let rates = farm(spec, &format!("w{w}/a{a}"), spec.replicas, |_, seed| {
                let traj = run_halfline(p, alpha, gamma, w, horizon, horizon / 2.0, seed)?;
                let j = |i: usize| traj.counts[i].left_current() as f64;
                let last = traj.len() - 1;
                Ok((j(last) - j(last - 1)) / (traj.times[last] - traj.times[last - 1]))
            })?;
            let (mean, se) = mean_se(&rates);
            table.push(vec![w as f64, a, target, mean, se]);
            let pass = (mean - target).abs() / target <= 0.05;
            metrics.push(Metric::check(4, format!("current.a{a}.W{w}"), mean, pass).with_target(target).with_stderr(se));
        }
    }
    Ok((metrics, vec![table]))
}

fn one_blocked_params(spec: &ExperimentSpec, default: BoundaryParams) -> Result<(BoundaryParams, f64)> {
    let prm = spec.params.unwrap_or(default);
    if prm.phase().phase != Phase::OneBlockedEntry || prm.alpha != 0.0 {
        return Err(HarnessError::BadSpec("needs alpha = 0 < beta and p > 1/2".into()));
    }
    let c = cutoff_constant(prm.b()?, prm.p)?;
    Ok((prm, c))
}

fn cutoff_one_blocked(spec: &ExperimentSpec) -> Result<Output> {
    let (prm, c) = one_blocked_params(spec, bp(0.75, 0.0, 1.0, 0.0, 0.0))?;
    let mut table = Series::new("cutoff", &["n", "tau_over_n", "stderr", "cutoff_constant"]);
    let mut metrics = Vec::new();
    let mut means = Vec::new();
    let mut timeouts = 0;
    for &n in &spec.sizes {
        let outcomes = farm(spec, &format!("n{n}"), spec.replicas, |_, seed| Ok(coupling_time(&prm, n, seed, spec.horizon)?))?;
        let scaled: Vec<f64> = outcomes.iter().filter_map(|o| o.time()).map(|t| t / n as f64).collect();
        timeouts += outcomes.iter().filter(|o| **o == CouplingOutcome::Timeout).count();
        let (mean, se) = mean_se(&scaled);
        table.push(vec![n as f64, mean, se, c]);
        let pass = (mean - c).abs() / c <= 0.1;
        metrics.push(Metric::check(5, format!("tau_over_n.N{n}"), mean, pass).with_target(c).with_stderr(se));
        means.push(mean);
    }
    if means.len() >= 2 {
        let gap = (means[means.len() - 1] - c).abs() - (means[0] - c).abs();
        metrics.push(Metric::check(5, "approach", gap, gap <= 0.0).with_target(0.0));
    }
    metrics.push(Metric::check(5, "timeouts", timeouts as f64, timeouts == 0).with_target(0.0));
    Ok((metrics, vec![table]))
}

fn shock_front(spec: &ExperimentSpec) -> Result<Output> {
    let (prm, c) = one_blocked_params(spec, bp(1.0, 0.0, 1.0, 0.0, 0.0))?;
    let dt = spec.option("dt", 1.0);
    let mut table = Series::new("front_speed", &["n", "k", "speed", "stderr", "target"]);
    let mut metrics = Vec::new();
    for &n in &spec.sizes {
        let k = (spec.option("k", n as f64) as usize).min(n);
        let speeds = farm(spec, &format!("n{n}"), spec.replicas, |_, seed| {
            Ok(shock_front_run(&prm, n, k, dt, spec.horizon, seed)?.map_or(f64::NAN, |f| f.speed))
        })?;
        let (mean, se) = mean_se(&speeds);
        table.push(vec![n as f64, k as f64, mean, se, 1.0 / c]);
        let pass = (mean * c - 1.0).abs() <= 0.2;
        metrics.push(Metric::check(5, format!("front_speed.N{n}"), mean, pass).with_target(1.0 / c).with_stderr(se));
    }
    Ok((metrics, vec![table]))
}

fn reverse_bias_scaling(spec: &ExperimentSpec) -> Result<Output> {
    let prm = spec.params.unwrap_or(bp(0.7, 0.0, 0.0, 1.0, 1.0));
    let slope = reverse_bias_rate(&prm)?;
    let eps = spec.option("eps", 0.25);
    let mut sizes = spec.sizes.clone();
    sizes.sort_unstable();
    let mut table = Series::new("mixing_times", &["n", "t_mix", "ln_t_mix", "increment"]);
    let mut metrics = Vec::new();
    let mut prev: Option<f64> = None;
    let mut increments = Vec::new();
    for &n in &sizes {
        let t = mixing_time_exact(&build_generator(&prm, n)?, eps)?;
        let inc = prev.map_or(f64::NAN, |p| t.ln() - p);
        table.push(vec![n as f64, t, t.ln(), inc]);
        if prev.is_some() {
            increments.push((n, inc));
        }
        prev = Some(t.ln());
    }
    let checked_from = increments.len().saturating_sub(3);
    for (i, &(n, inc)) in increments.iter().enumerate() {
        let m = if i >= checked_from {
            Metric::check(6, format!("increment.N{n}"), inc, inc >= 0.5 * slope && inc <= 1.5 * slope)
        } else {
            Metric::info(6, format!("increment.N{n}"), inc)
        };
        metrics.push(m.with_target(slope));
    }
    let positive = increments.iter().all(|&(_, inc)| inc > 0.0);
    let smallest = increments.iter().map(|&(_, inc)| inc).fold(f64::INFINITY, f64::min);
    metrics.push(Metric::check(6, "increments_positive", smallest, positive));
    Ok((metrics, vec![table]))
}

fn variant_name(v: WilsonVariant) -> &'static str {
    match v {
        WilsonVariant::TwoSided => "two_sided",
        WilsonVariant::OneSided => "one_sided",
    }
}

fn wilson_bounds(spec: &ExperimentSpec) -> Result<Output> {
    let eps = spec.option("eps", 0.25);
    let n_mid = spec.option("n_mid", 1e5) as usize;
    let n_large = spec.option("n_large", 1e6) as usize;
    let cases: Vec<(WilsonVariant, BoundaryParams)> = match spec.params {
        Some(p) if p.alpha + p.gamma > 0.0 => vec![(WilsonVariant::TwoSided, p)],
        Some(p) => vec![(WilsonVariant::OneSided, p)],
        None => vec![(WilsonVariant::TwoSided, bp(0.5, 0.7, 0.4, 0.2, 0.3)), (WilsonVariant::OneSided, bp(0.5, 0.0, 0.6, 0.0, 0.3))],
    };
    let mut metrics = Vec::new();
    let mut series = Vec::new();
    for (variant, prm) in cases {
        let name = variant_name(variant);
        let (power, limit) = match variant {
            WilsonVariant::TwoSided => (3, 1.0 / (PI * PI)),
            WilsonVariant::OneSided => (4, 4.0 / (PI * PI)),
        };
        let mut table = Series::new(&format!("wilson_{name}"), &["n", "lambda", "c", "scaled_c", "r", "f_inf", "bound", "ratio_to_limit"]);
        let mut bulk: f64 = 0.0;
        let mut scaled = Vec::new();
        let mut all_valid = true;
        let mut ratio_at = |n: usize, table: &mut Series| -> Result<(f64, f64)> {
            let cert = wilson_residual(&prm, n, variant)?;
            let s = cert.c * cert.length.powi(power);
            all_valid &= cert.is_valid();
            let (bound, ratio) = match wilson_lower_bound(&cert, eps) {
                Ok(b) => (b, b / ((n as f64).powi(2) * (n as f64).ln()) / limit),
                Err(_) => (f64::NAN, f64::NAN),
            };
            bulk = bulk.max(cert.bulk_residual_max);
            table.push(vec![n as f64, cert.lambda, cert.c, s, cert.r, cert.f_inf, bound, ratio]);
            Ok((s, ratio))
        };
        for &n in &spec.sizes {
            scaled.push(ratio_at(n, &mut table)?.0);
        }
        let r_mid = ratio_at(n_mid, &mut table)?.1;
        let r_large = ratio_at(n_large, &mut table)?.1;

        metrics.push(Metric::check(7, format!("bulk_residual.{name}"), bulk, bulk <= 1e-12).with_target(1e-12));
        let base = scaled[0];
        let spread = scaled.iter().map(|s| (s / base).max(base / s)).fold(1.0, f64::max);
        metrics.push(Metric::check(7, format!("scaled_c_spread.{name}"), spread, spread <= 3.0).with_target(3.0));
        metrics.push(Metric::check(7, format!("valid.{name}"), all_valid as u8 as f64, all_valid));
        metrics.push(Metric::info(7, format!("bound_ratio.{name}.N{n_mid}"), r_mid).with_target(1.0));
        metrics.push(Metric::check(7, format!("bound_ratio.{name}.N{n_large}"), r_large, (r_large - 1.0).abs() <= 0.3).with_target(1.0));
        let closer = (r_large - 1.0).abs() - (r_mid - 1.0).abs();
        metrics.push(Metric::check(7, format!("bound_ratio_improves.{name}"), closer, closer < 0.0).with_target(0.0));
        series.push(table);
    }
    Ok((metrics, series))
}

fn triple_point_bound(spec: &ExperimentSpec) -> Result<Output> {
    let prm = spec.params.unwrap_or(bp(0.75, 0.25, 0.25, 0.0, 0.0));
    let points = spec.option("grid_points", 24.0).max(1.0) as usize;
    let mut gaps = Series::new("gap", &["n", "gap", "gap_n2", "implied_mixing_time"]);
    let mut series = Vec::new();
    let mut metrics = Vec::new();
    let mut scaled = Vec::new();
    for &n in &spec.sizes {
        let gap = adjoint_and_symmetrize(&prm, n)?.gap;
        let implied = ((n as f64 / 2.0 + 1.0) * 2f64.ln() + 4f64.ln()) / gap;
        let times: Vec<f64> = (1..=points).map(|k| 1.5 * implied * k as f64 / points as f64).collect();
        let rep = diaconis_bound_check(&prm, n, &times)?;
        let mut curve = Series::new(&format!("diaconis_N{n}"), &["t", "max_tv", "bound"]);
        for ((t, tv), b) in rep.times.iter().zip(&rep.max_tv).zip(&rep.bound) {
            curve.push(vec![*t, *tv, *b]);
        }
        series.push(curve);
        gaps.push(vec![n as f64, gap, gap * (n * n) as f64, implied]);
        scaled.push(gap * (n * n) as f64);
        metrics.push(Metric::check(8, format!("violations.N{n}"), rep.violations as f64, rep.violations == 0).with_target(0.0));
    }
    let hi = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let lo = scaled.iter().cloned().fold(f64::MAX, f64::min);
    metrics.push(Metric::check(8, "gap_n2_band", hi / lo, hi / lo <= 4.0).with_target(4.0));
    series.push(gaps);
    Ok((metrics, series))
}

fn random_config(n: usize, rng: &mut ChaCha8Rng) -> Configuration {
    let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    Configuration::from_bits(Topology::Segment(n), &bits)
}

fn reflect(c: &Configuration) -> Configuration {
    let mut bits = c.bits();
    bits.reverse();
    Configuration::from_bits(c.topology(), &bits)
}

fn monotone_coupling(spec: &ExperimentSpec) -> Result<Output> {
    if spec.params.is_some() {
        return Err(HarnessError::BadSpec("monotone-coupling uses fixed ordered parameter pairs".into()));
    }
    // (name, order, upper params, lower params)
    let families = [
        ("componentwise", OrderKind::Componentwise, bp(0.75, 1.0, 0.3, 0.1, 0.4), bp(0.75, 0.6, 0.7, 0.3, 0.1)),
        ("height_left_closed", OrderKind::Height, bp(0.6, 0.0, 0.2, 0.0, 1.0), bp(0.8, 0.0, 0.6, 0.0, 0.5)),
        ("height_right_closed", OrderKind::ReflectedHeight, bp(0.8, 1.0, 0.0, 0.2, 0.0), bp(0.6, 0.5, 0.0, 0.6, 0.0)),
    ];
    let mut table = Series::new("monotone_coupling", &["family", "n", "runs", "events", "violations"]);
    let mut metrics = Vec::new();
    for (k, (name, order, upper, lower)) in families.iter().enumerate() {
        for &n in &spec.sizes {
            let tag = format!("{name}/n{n}");
            let runs = farm(spec, &tag, spec.replicas, |i, seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.replica_seed(&format!("{tag}/start"), i));
                let (a, b) = (random_config(n, &mut rng), random_config(n, &mut rng));
                let (hi, lo) = match order {
                    OrderKind::Componentwise => {
                        let mut hi = b.clone();
                        for x in a.sites().filter(|&x| a.get(x)) {
                            hi.set(x, true);
                        }
                        (hi, b)
                    }
                    OrderKind::Height => {
                        let (lo, hi) = height_meet_join(&a, &b)?;
                        (hi, lo)
                    }
                    OrderKind::ReflectedHeight => {
                        let (lo, hi) = height_meet_join(&reflect(&a), &reflect(&b))?;
                        (reflect(&hi), reflect(&lo))
                    }
                };
                Ok(order_preservation_run((hi, *upper), (lo, *lower), *order, spec.horizon, seed)?)
            })?;
            let violations: u64 = runs.iter().map(|r| r.violations).sum();
            let events: u64 = runs.iter().map(|r| r.events).sum();
            table.push(vec![k as f64, n as f64, runs.len() as f64, events as f64, violations as f64]);
            metrics.push(Metric::check(9, format!("violations.{name}.N{n}"), violations as f64, violations == 0).with_target(0.0));
        }
    }
    Ok((metrics, vec![table]))
}

fn censoring_schedules(n: usize) -> Result<Vec<(&'static str, CensoringSchedule)>> {
    let edges = |list: &[i64]| CensoredEdges { edges: list.iter().copied().collect(), ..Default::default() };
    let mut split = CensoringSchedule::none();
    split.push(0.0, edges(&[0, n as i64 + 1]))?;
    split.push(1.0, CensoredEdges::default())?;
    split.push(2.0, edges(&[1, n as i64 - 1]))?;
    split.push(3.0, CensoredEdges::default())?;
    let mut freeze = CensoringSchedule::none();
    freeze.push(0.0, CensoredEdges::default())?;
    freeze.push(0.5, CensoredEdges { below: Some(i64::MAX), ..Default::default() })?;
    freeze.push(1.5, CensoredEdges::default())?;
    Ok(vec![("interior_edge", CensoringSchedule::from_edges([2])), ("boundary_then_split", split), ("freeze", freeze)])
}

fn censoring(spec: &ExperimentSpec) -> Result<Output> {
    let prm = spec.params.unwrap_or(bp(0.7, 0.0, 0.6, 0.0, 0.2));
    let steps = spec.option("grid_points", 32.0).max(1.0) as usize;
    let times: Vec<f64> = (1..=steps).map(|k| spec.horizon * k as f64 / steps as f64).collect();
    let mut series = Vec::new();
    let mut metrics = Vec::new();
    for &n in &spec.sizes {
        for (name, schedule) in censoring_schedules(n)? {
            let rep = censoring_check(&prm, n, &schedule, &times)?;
            let mut s = Series::new(&format!("censoring_{name}_N{n}"), &["t", "censored", "uncensored"]);
            for ((t, c), u) in times.iter().zip(&rep.censored).zip(&rep.uncensored) {
                s.push(vec![*t, *c, *u]);
            }
            series.push(s);
            metrics.push(Metric::check(10, format!("violations.{name}.N{n}"), rep.violations as f64, rep.violations == 0).with_target(0.0));
        }
    }
    Ok((metrics, series))
}

fn blocking_confinement(spec: &ExperimentSpec) -> Result<Output> {
    let p = spec.params.map_or(spec.option("p", 0.7), |q| q.p);
    let r = p / (1.0 - p);
    let mut xs = spec.sizes.clone();
    xs.sort_unstable();
    let mut table = Series::new("exit_time", &["x", "mean", "stderr", "ratio_over_bias"]);
    let mut metrics = Vec::new();
    let mut timeouts = 0;
    let mut prev: Option<f64> = None;
    for &x in &xs {
        let times = farm(spec, &format!("x{x}"), spec.replicas, |_, seed| Ok(confinement_exit_time(p, x as i64, seed, spec.horizon)?))?;
        timeouts += times.iter().filter(|t| t.is_none()).count();
        let done: Vec<f64> = times.into_iter().flatten().collect();
        let (mean, se) = mean_se(&done);
        let ratio = prev.map_or(f64::NAN, |m| mean / m / r);
        table.push(vec![x as f64, mean, se, ratio]);
        metrics.push(Metric::info(11, format!("exit_time.x{x}"), mean).with_stderr(se));
        if prev.is_some() {
            metrics.push(Metric::check(11, format!("ratio.x{x}"), ratio, (0.7..=1.3).contains(&ratio)).with_target(1.0));
        }
        prev = Some(mean);
    }
    metrics.push(Metric::check(11, "timeouts", timeouts as f64, timeouts == 0).with_target(0.0));
    Ok((metrics, vec![table]))
}

fn kac_return(spec: &ExperimentSpec) -> Result<Output> {
    let prm = spec.params.unwrap_or(bp(0.7, 0.8, 0.6, 0.3, 0.2));
    let mut table = Series::new("kac", &["n", "linear_solve", "kac_formula", "mc_mean", "mc_stderr"]);
    let mut metrics = Vec::new();
    for &n in &spec.sizes {
        let reference = Configuration::empty(Topology::Segment(n));
        let rep = kac_check(&prm, &reference, spec.replicas, spec.replica_seed(&format!("n{n}"), 0))?;
        table.push(vec![n as f64, rep.linear_solve, rep.kac_formula, rep.mc_mean, rep.mc_stderr]);
        let identity = (rep.linear_solve - rep.kac_formula).abs() / rep.kac_formula;
        metrics.push(Metric::check(12, format!("kac_identity.N{n}"), identity, identity <= 1e-10).with_target(1e-10));
        metrics.push(Metric::info(12, format!("mean_return.N{n}"), rep.mc_mean).with_target(rep.linear_solve).with_stderr(rep.mc_stderr));
        let z = rep.z_score();
        metrics.push(Metric::check(12, format!("z_score.N{n}"), z, z <= 3.0).with_target(3.0));
    }
    Ok((metrics, vec![table]))
}

fn four_process(spec: &ExperimentSpec) -> Result<Output> {
    let prm = spec.params.unwrap_or(bp(0.75, 0.5, 1.0 / 6.0, 0.0, 0.0));
    let b_prime = spec.options.get("b_prime").copied();
    let burn_in = spec.option("burn_in", 2000.0);
    let mut table = Series::new("four_process", &["n", "replica", "hit_time", "coupled_at_hit", "j0", "j1", "j2", "events"]);
    let mut metrics = Vec::new();
    for &n in &spec.sizes {
        let runs = farm(spec, &format!("n{n}"), spec.replicas, |_, seed| {
            let mut fp = FourProcess::new(prm, n, b_prime, burn_in, seed)?;
            Ok(fp.run(spec.horizon)?)
        })?;
        for (i, r) in runs.iter().enumerate() {
            let [j0, j1, j2] = r.currents;
            let coupled = if r.coupled_at_hit { 1.0 } else { 0.0 };
            table.push(vec![n as f64, i as f64, r.hit_time.unwrap_or(f64::NAN), coupled, j0 as f64, j1 as f64, j2 as f64, r.events as f64]);
        }
        let k = runs.len();
        let balanced = runs.iter().filter(|r| r.currents_balanced).count();
        let monotone = runs.iter().filter(|r| r.second_class_current_monotone).count();
        let hits: Vec<_> = runs.iter().filter(|r| r.hit_time.is_some()).collect();
        let failures = hits.iter().filter(|r| !r.coupled_at_hit).count();
        let rate = if hits.is_empty() { f64::NAN } else { failures as f64 / hits.len() as f64 };
        metrics.push(Metric::check(13, format!("balanced_runs.N{n}"), balanced as f64, balanced == k).with_target(k as f64));
        metrics.push(Metric::check(13, format!("monotone_runs.N{n}"), monotone as f64, monotone == k).with_target(k as f64));
        metrics.push(Metric::check(13, format!("unfinished_runs.N{n}"), (k - hits.len()) as f64, hits.len() == k).with_target(0.0));
        metrics.push(Metric::check(13, format!("failure_rate.N{n}"), rate, rate <= 0.05).with_target(0.05));
        metrics.push(Metric::info(13, format!("beta_prime.N{n}"), runs[0].beta_prime));
    }
    Ok((metrics, vec![table]))
}
