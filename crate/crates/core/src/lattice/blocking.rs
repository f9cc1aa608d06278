use rand::Rng;

use super::{Configuration, LatticeError, Topology};

/// Largest probability mass the truncated window may discard.
pub const BLOCKING_TAIL_TOL: f64 = 1e-12;

/// Occupation probability at site `x` under the product measure with `c = 1`:
/// `r^x / (1 + r^x)` with `r = p / (1 - p)`.
pub fn blocking_marginal(p: f64, x: i64) -> f64 {
    let r = p / (1.0 - p);
    // Evaluate on the side where r^|x| cannot overflow.
    if x >= 0 {
        1.0 / (1.0 + r.powi(-(x as i32)))
    } else {
        let t = r.powi(x as i32);
        t / (1.0 + t)
    }
}

fn tail_mass(p: f64, n: i64, w: i64) -> f64 {
    let mut mass = 0.0;
    for j in 1..10_000 {
        let right = 1.0 - blocking_marginal(p, w + j - n);
        let left = blocking_marginal(p, -w - j - n);
        mass += right + left;
        if right + left < 1e-300 {
            break;
        }
    }
    mass
}

/// Sample the blocking measure conditioned on `A_n` on the window `-w..=w`, by rejection from
/// the product measure centred at `n`. The conditional law does not depend on the centring.
pub fn sample_blocking_measure<R: Rng + ?Sized>(p: f64, n: i64, w: i64, rng: &mut R) -> Result<Configuration, LatticeError> {
    if !(p > 0.5 && p < 1.0) {
        return Err(LatticeError::BadBias(p));
    }
    let mass = tail_mass(p, n, w);
    if mass > BLOCKING_TAIL_TOL {
        return Err(LatticeError::WindowTooSmall { w, mass });
    }
    let topology = Topology::line(w);
    let probs: Vec<f64> = (-w..=w).map(|x| blocking_marginal(p, x - n)).collect();
    let mut config = Configuration::empty(topology);
    loop {
        for (i, &q) in probs.iter().enumerate() {
            config.set(i as i64 - w, rng.random::<f64>() < q);
        }
        if config.blocking_index()? == n {
            return Ok(config);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn marginal_at_origin() {
        assert_eq!(blocking_marginal(0.7, 0), 0.5);
        assert!((blocking_marginal(0.7, 3) + blocking_marginal(0.7, -3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn samples_are_balanced_and_hit_ground_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ground = Configuration::ground_state(Topology::line(40), 2);
        let mut hits = 0;
        for _ in 0..2000 {
            let c = sample_blocking_measure(0.7, 2, 40, &mut rng).unwrap();
            assert_eq!(c.blocking_index().unwrap(), 2);
            hits += (c == ground) as usize;
        }
        assert!(hits > 0);
    }

    #[test]
    fn small_window_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(sample_blocking_measure(0.7, 0, 5, &mut rng), Err(LatticeError::WindowTooSmall { .. })));
        assert!(sample_blocking_measure(1.0, 0, 40, &mut rng).is_err());
    }
}
