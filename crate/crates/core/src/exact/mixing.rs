use rayon::prelude::*;

use super::{stationary_exact, tv_distance, ExactError, GeneratorMatrix, Result};

/// Total Poisson mass left out of each uniformized expansion.
const POISSON_TAIL: f64 = 1e-12;
/// Largest `rate * t` expanded in one go; longer spans are split.
const CHUNK: f64 = 30.0;
/// Squaring levels below this index are dropped once they can no longer be needed.
const KEEP_FROM: usize = 4;

/// Evolves row vectors by `exp(tG)` through the kernel `I + G / rate`.
pub struct Uniformizer<'a> {
    g: &'a GeneratorMatrix,
    rate: f64,
}

impl<'a> Uniformizer<'a> {
    /// Rate is 1.01 times the largest exit rate.
    pub fn new(g: &'a GeneratorMatrix) -> Self {
        let rate = (1.01 * g.max_exit_rate()).max(f64::MIN_POSITIVE);
        Self { g, rate }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn kernel_step(&self, v: &[f64], out: &mut [f64]) {
        self.g.left_mul(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o = x + *o / self.rate;
        }
    }

    /// `v exp(tG)`.
    pub fn evolve(&self, v: &[f64], t: f64) -> Vec<f64> {
        let mut cur = v.to_vec();
        let mut left = t * self.rate;
        let (mut term, mut next) = (vec![0.0; v.len()], vec![0.0; v.len()]);
        while left > 0.0 {
            let m = left.min(CHUNK);
            left -= m;
            let mut weight = (-m).exp();
            let mut acc: Vec<f64> = cur.iter().map(|x| x * weight).collect();
            let mut mass = weight;
            term.copy_from_slice(&cur);
            let mut k = 1.0;
            while 1.0 - mass > POISSON_TAIL && k < 10.0 * m + 100.0 {
                self.kernel_step(&term, &mut next);
                std::mem::swap(&mut term, &mut next);
                weight *= m / k;
                mass += weight;
                for (a, x) in acc.iter_mut().zip(&term) {
                    *a += weight * x;
                }
                k += 1.0;
            }
            cur = acc;
        }
        cur
    }
}

/// Distance to `pi` of the law started from `initial`, at each of the nondecreasing `times`.
pub fn tv_curve(g: &GeneratorMatrix, initial: &[f64], pi: &[f64], times: &[f64]) -> Vec<f64> {
    let u = Uniformizer::new(g);
    let mut law = initial.to_vec();
    let mut now = 0.0;
    times
        .iter()
        .map(|&t| {
            law = u.evolve(&law, t - now);
            now = t;
            tv_distance(&law, pi)
        })
        .collect()
}

/// Worst distance to stationarity over all starting configurations at each time.
pub fn max_tv_curve(g: &GeneratorMatrix, times: &[f64]) -> Result<Vec<f64>> {
    let pi = stationary_exact(g)?.weights;
    let d = g.dim();
    let curves: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            tv_curve(g, &e, &pi, times)
        })
        .collect();
    Ok((0..times.len()).map(|k| curves.iter().fold(0.0f64, |m, c| m.max(c[k]))).collect())
}

fn row_tv(row: &[f64], pi: &[f64]) -> f64 {
    tv_distance(row, pi)
}

/// `a (rows x d) * b (d x d)`, row-major.
fn gemm(a: &[f64], rows: usize, b: &[f64], d: usize) -> Vec<f64> {
    let mut c = vec![0.0; rows * d];
    if rows == 0 {
        return c;
    }
    // SAFETY: the slices hold rows*d, d*d and rows*d elements with the given unit column strides.
    unsafe {
        matrixmultiply::dgemm(rows, d, d, 1.0, a.as_ptr(), d as isize, 1, b.as_ptr(), d as isize, 1, 0.0, c.as_mut_ptr(), d as isize, 1);
    }
    c
}

/// Keeps the rows whose distance is at least `eps`.
fn prune(m: Vec<f64>, d: usize, pi: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let mut kept = Vec::new();
    let mut worst: f64 = 0.0;
    for row in m.chunks(d) {
        let tv = row_tv(row, pi);
        worst = worst.max(tv);
        if tv >= eps {
            kept.extend_from_slice(row);
        }
    }
    (kept, worst)
}

/// `t_mix(eps)`: the first time the worst-case distance to stationarity drops below `eps`,
/// to relative tolerance `1e-6`.
///
/// The kernel at the uniformization step `h` is squared until the worst row is below `eps`;
/// the crossing is then located bit by bit with the stored powers, carrying only the rows
/// still at distance `>= eps`, and the last span is bisected by direct evolution.
pub fn mixing_time_exact(g: &GeneratorMatrix, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ExactError::BadInput(format!("eps={eps}")));
    }
    let pi = stationary_exact(g)?.weights;
    let d = g.dim();
    let start_worst = pi.iter().fold(0.0f64, |m, &p| m.max(1.0 - p));
    if start_worst < eps {
        return Ok(0.0);
    }
    let u = Uniformizer::new(g);
    let h = 1.0 / u.rate();

    let mut first = vec![0.0; d * d];
    first.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        row.copy_from_slice(&u.evolve(&e, h));
    });
    let mut levels: Vec<Option<Vec<f64>>> = vec![Some(first)];
    loop {
        let j = levels.len() - 1;
        let cur = levels[j].as_ref().expect("current level kept");
        let worst = cur.chunks(d).fold(0.0f64, |m, row| m.max(row_tv(row, &pi)));
        if worst < eps {
            break;
        }
        if j >= 62 {
            return Err(ExactError::NoConvergence("mixing time beyond 2^62 steps".into()));
        }
        let next = gemm(cur, d, cur, d);
        levels.push(Some(next));
        if j > KEEP_FROM {
            for l in levels.iter_mut().take(KEEP_FROM) {
                *l = None;
            }
        }
    }
    let top = levels.len() - 1;

    // Rows at the lower end of the bracket, and the bracket width in units of h.
    let (mut rows, mut t_lo, width_pow) = if top == 0 {
        let mut id = vec![0.0; d * d];
        for i in 0..d {
            id[i * d + i] = 1.0;
        }
        (prune(id, d, &pi, eps).0, 0.0, 0)
    } else {
        let below = levels[top - 1].take().expect("level below the crossing kept");
        (prune(below, d, &pi, eps).0, (1u64 << (top - 1)) as f64 * h, top - 1)
    };
    let mut width_pow = width_pow;
    if top >= 2 {
        for j in (KEEP_FROM..=top - 2).rev() {
            let power = levels[j].as_ref().expect("stored level");
            let k = rows.len() / d;
            let candidate = gemm(&rows, k, power, d);
            let (kept, worst) = prune(candidate, d, &pi, eps);
            if worst >= eps {
                rows = kept;
                t_lo += (1u64 << j) as f64 * h;
            }
            width_pow = j;
        }
    }
    drop(levels);

    let width = (1u64 << width_pow) as f64 * h;
    let worst_after = |s: f64| -> f64 { rows.par_chunks(d).map(|row| row_tv(&u.evolve(row, s), &pi)).reduce(|| 0.0, f64::max) };
    let (mut lo, mut hi) = (0.0, width);
    while hi - lo > 1e-7 * (t_lo + hi) {
        let mid = 0.5 * (lo + hi);
        if worst_after(mid) >= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(t_lo + hi)
}
