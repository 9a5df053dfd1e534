//! Exact solver and verifier for quota rules in receiver-commitment
//! persuasion games.
//!
//! A receiver commits to a decision rule before a sender picks a signal
//! structure. A *quota rule* fixes the marginal distribution over actions and
//! then maximizes the receiver's expected payoff subject to that marginal,
//! which makes the sender (whose utility is state-independent) indifferent
//! across signal structures. This crate computes quota-constrained receiver
//! values as exact finite transportation problems, evaluates worst-case
//! generalized regret, solves for the min-max-regret optimal quota in the
//! binary-action model via closed forms, and cross-checks the closed forms
//! against brute-force oracles.
//!
//! Modules:
//! - [`model`]: domain types (finite models, posteriors, signal structures,
//!   quotas) and JSON ingestion.
//! - [`transport`]: quota-constrained value `U(q, pi)`, first-best value,
//!   generalized regret, and Wasserstein distance between signal structures.
//! - [`binary`]: closed-form machinery for two actions (quantile integrals,
//!   biased errors, optimal quota by bisection, worst-case partitions).
//! - [`adversary`]: brute-force grids, sender best response, and the
//!   adversarial menu construction used to certify quota optimality.
//! - [`game`]: plays the commitment timeline for a given rule, sender
//!   utility, and menu; analytic and Monte Carlo payoffs.
//! - [`checks`]: the verification suite behind `quota-robust verify`.
//! - [`sweep`]: comparative-statics sweeps over prior families.

pub mod adversary;
pub mod binary;
pub mod checks;
pub mod cli;
pub mod game;
pub mod model;
pub mod simplex;
pub mod sweep;
pub mod transport;

use std::sync::OnceLock;

use thiserror::Error;

/// Errors for all solver operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("prior is not a probability distribution: {0}")]
    NonSimplexPrior(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry: {0}")]
    NonFiniteEntry(String),
    #[error("operation requires a binary-action model")]
    NotBinaryAction,
    #[error("gamma must lie in [0, 1), got {0}")]
    GammaOutOfRange(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("menu is empty")]
    EmptyMenu,
    #[error("rule table has no quota for structure {0}")]
    RuleGap(usize),
    #[error("quotas coincide; no separating sender utility exists")]
    EqualQuotas,
    #[error("binary prior needs atoms on both sides of zero")]
    DegenerateBinaryPrior,
    #[error("state {0} has zero prior probability")]
    ZeroPriorState(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Environment variable capping the rayon thread pool used for grid
/// evaluation and sweep points.
pub const THREADS_ENV: &str = "QUOTA_ROBUST_THREADS";

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// Shared thread pool, sized by `QUOTA_ROBUST_THREADS` when set.
///
/// Results are always reduced in index order, so outputs do not depend on
/// the pool size.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build thread pool")
    })
}
