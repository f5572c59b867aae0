//! Seeded random sources. Every stochastic routine takes an explicit
//! generator built here from a `u64` seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::fock::C64;

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Poisson draw; a nonpositive mean gives zero counts.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    // Mean is finite and positive, so construction cannot fail.
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Haar-random pure state of dimension `d`.
pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
            .collect();
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_zero_mean() {
        let mut rng = seeded_rng(1);
        assert_eq!(poisson(0.0, &mut rng), 0);
        assert_eq!(poisson(-1.0, &mut rng), 0);
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = {
            let mut r = seeded_rng(42);
            (0..20).map(|_| poisson(37.5, &mut r)).collect()
        };
        let b: Vec<u64> = {
            let mut r = seeded_rng(42);
            (0..20).map(|_| poisson(37.5, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn haar_states_are_normalized() {
        let mut rng = seeded_rng(7);
        for d in 1..6 {
            let v = haar_state(d, &mut rng);
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
