//! Seeded sampling of simplex points, policies and models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::mdp::{Mdp, Policy};

/// Uniform point on the probability simplex of dimension `n`, from
/// normalized unit-exponential draws.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

pub fn random_policy<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
) -> Policy {
    let rows = (0..num_states)
        .map(|_| sample_simplex(rng, num_actions))
        .collect();
    Policy::new(rows).expect("simplex rows are stochastic")
}

/// Kernel rows drawn uniformly from the simplex.
pub fn random_kernel<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
) -> Vec<Vec<f64>> {
    (0..num_actions)
        .map(|_| sample_simplex(rng, num_states))
        .collect()
}

/// Rewards uniform in `[0, 1)`, kernel rows uniform on the simplex.
pub fn random_mdp<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
) -> Mdp {
    let rewards = (0..num_states)
        .map(|_| (0..num_actions).map(|_| rng.random::<f64>()).collect())
        .collect();
    let kernel = (0..num_states)
        .map(|_| random_kernel(rng, num_states, num_actions))
        .collect();
    Mdp::new(gamma, rewards, kernel).expect("shapes are consistent")
}

/// Independent stream seed for `index` under `base` (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_transition, validate_mdp};

    #[test]
    fn simplex_points_are_distributions() {
        let mut r = rng(3);
        for n in 1..6 {
            for _ in 0..200 {
                let p = sample_simplex(&mut r, n);
                assert_eq!(p.len(), n);
                assert!(p.iter().all(|&x| x >= 0.0));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simplex_marginal_mean_is_uniform() {
        let mut r = rng(11);
        let n = 4;
        let mut mean = vec![0.0; n];
        let draws = 20_000;
        for _ in 0..draws {
            for (m, x) in mean.iter_mut().zip(sample_simplex(&mut r, n)) {
                *m += x / draws as f64;
            }
        }
        for m in mean {
            assert!((m - 0.25).abs() < 0.01, "{m}");
        }
    }

    #[test]
    fn same_seed_same_model() {
        let a = random_mdp(&mut rng(5), 3, 2, 0.9);
        let b = random_mdp(&mut rng(5), 3, 2, 0.9);
        assert_eq!(a, b);
        assert!(validate_mdp(&a).is_empty());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn ten_thousand_transitions_stay_stochastic() {
        let mut r = rng(23);
        for _ in 0..10_000 {
            let s = r.random_range(1..=4);
            let a = r.random_range(1..=3);
            let m = random_mdp(&mut r, s, a, 0.9);
            let pi = random_policy(&mut r, s, a);
            let p = policy_transition(&m, &pi).unwrap();
            for i in 0..s {
                let row: f64 = p.row(i).iter().sum();
                assert!((row - 1.0).abs() <= 1e-12);
                assert!(p.row(i).iter().all(|&x| x >= 0.0));
            }
        }
    }
}
