//! Shared generators for the integration suites.
//!
//! Each test binary compiles its own copy, so not every helper is used
//! everywhere.
#![allow(dead_code)]

use quota_robust::binary::BinaryPrior;
use quota_robust::model::{FiniteModel, Quota};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn dirichlet(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|&e| e / total).collect()
}

pub fn random_quota(rng: &mut ChaCha8Rng, k: usize) -> Quota {
    Quota::new(dirichlet(rng, k)).unwrap()
}

/// Random prior over payoff differences with mass on both sides of zero
/// and a mean bounded away from the extremes, so optima stay comfortably
/// interior.
pub fn random_binary_prior(rng: &mut ChaCha8Rng) -> BinaryPrior {
    loop {
        let n = rng.gen_range(2..=6usize);
        let mut thetas: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
        thetas[0] = -rng.gen_range(0.05f64..1.0);
        thetas[1] = rng.gen_range(0.05f64..1.0);
        let weights = dirichlet(rng, n);
        let atoms: Vec<(f64, f64)> = thetas.into_iter().zip(weights).collect();
        if let Ok(prior) = BinaryPrior::new(atoms) {
            if prior.prior_mean().abs() <= 0.8 {
                return prior;
            }
        }
    }
}

/// Random prior with a mean bounded away from zero (for strict
/// monotonicity statements).
pub fn random_binary_prior_nonzero_mean(rng: &mut ChaCha8Rng) -> BinaryPrior {
    loop {
        let prior = random_binary_prior(rng);
        if prior.prior_mean().abs() > 0.02 {
            return prior;
        }
    }
}

/// Random finite model with utilities in [-1, 1] and a Dirichlet prior.
pub fn random_model(rng: &mut ChaCha8Rng, states: usize, actions: usize) -> FiniteModel {
    let utility = (0..states)
        .map(|_| (0..actions).map(|_| rng.gen_range(-1.0f64..1.0)).collect())
        .collect();
    let prior = dirichlet(rng, states);
    FiniteModel::from_parts(utility, prior).unwrap()
}

pub fn symmetric_model() -> FiniteModel {
    FiniteModel::from_parts(vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap()
}

/// Fixed priors exercised by several criteria.
pub fn named_priors() -> Vec<BinaryPrior> {
    vec![
        BinaryPrior::new(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap(),
        BinaryPrior::new(vec![(-1.0, 0.25), (1.0, 0.75)]).unwrap(),
        BinaryPrior::new(vec![(-1.0, 0.75), (1.0, 0.25)]).unwrap(),
        BinaryPrior::new(vec![(-0.7, 0.35), (0.2, 0.4), (0.9, 0.25)]).unwrap(),
        BinaryPrior::new(vec![(-0.9, 0.2), (-0.3, 0.2), (0.0, 0.2), (0.4, 0.2), (1.0, 0.2)])
            .unwrap(),
    ]
}
